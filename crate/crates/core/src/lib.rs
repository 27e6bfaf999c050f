//! Everettian branching simulator and self-locating credence engine.
pub mod branching;
pub mod cli;
pub mod cosmo;
pub mod credence;
pub mod epistemics;
pub mod qstate;
pub mod random;
pub mod report;
pub mod verify;
pub mod scenario;
