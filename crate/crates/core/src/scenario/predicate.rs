use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Result, ScenarioError};

/// A hypothesis about where a copy is: which records its branch carries,
/// which copy it is, which day it woke on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    #[default]
    Always,
    Record {
        detector: String,
        is: String,
    },
    Copy {
        id: String,
    },
    Day {
        is: String,
    },
    Not {
        of: Box<Predicate>,
    },
    All {
        of: Vec<Predicate>,
    },
    Any {
        of: Vec<Predicate>,
    },
}

/// One cell of a credence partition: a branch, and for copy-based rules the
/// copy and its waking day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub branch: String,
    pub records: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<String>,
    pub time: u32,
}

impl Predicate {
    pub fn record(detector: impl Into<String>, is: impl Into<String>) -> Self {
        Self::Record { detector: detector.into(), is: is.into() }
    }

    pub fn copy(id: impl Into<String>) -> Self {
        Self::Copy { id: id.into() }
    }

    pub fn day(is: impl Into<String>) -> Self {
        Self::Day { is: is.into() }
    }

    pub fn negate(p: Predicate) -> Self {
        Self::Not { of: Box::new(p) }
    }

    /// A record predicate is false while the detector has recorded nothing.
    pub fn eval(&self, cell: &Cell) -> Result<bool> {
        Ok(match self {
            Self::Always => true,
            Self::Record { detector, is } => cell.records.get(detector).is_some_and(|k| k == is),
            Self::Copy { id } => match &cell.copy {
                Some(c) => c == id,
                None => return Err(ScenarioError::NotDecidable(format!("copy `{id}` on branch cells"))),
            },
            Self::Day { is } => match (&cell.copy, &cell.day) {
                (_, Some(d)) => d == is,
                (Some(_), None) => false,
                (None, None) => return Err(ScenarioError::NotDecidable(format!("day `{is}` on branch cells"))),
            },
            Self::Not { of } => !of.eval(cell)?,
            Self::All { of } => {
                let mut out = true;
                for p in of {
                    out &= p.eval(cell)?;
                }
                out
            }
            Self::Any { of } => {
                let mut out = false;
                for p in of {
                    out |= p.eval(cell)?;
                }
                out
            }
        })
    }

    /// Whether the predicate mentions copies or days.
    pub fn is_self_locating(&self) -> bool {
        match self {
            Self::Always | Self::Record { .. } => false,
            Self::Copy { .. } | Self::Day { .. } => true,
            Self::Not { of } => of.is_self_locating(),
            Self::All { of } | Self::Any { of } => of.iter().any(Predicate::is_self_locating),
        }
    }

    /// Detectors named anywhere in the predicate.
    pub fn detectors(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_detectors(&mut out);
        out
    }

    fn collect_detectors<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Self::Record { detector, .. } => out.push(detector),
            Self::Not { of } => of.collect_detectors(out),
            Self::All { of } | Self::Any { of } => of.iter().for_each(|p| p.collect_detectors(out)),
            _ => {}
        }
    }
}
