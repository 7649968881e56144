//! Locality hierarchy loaded from a file instead of hardware introspection.
//!
//! The file holds nested JSON arrays of unit ids, e.g. two nodes with two
//! NUMA domains each:
//!
//! ```text
//! [[[0, 1], [2, 3]], [[4, 5], [6, 7]]]
//! ```
//!
//! Level 0 are the outermost groups (`{0..3}`, `{4..7}`), level 1 the next
//! nesting (`{0,1}`, `{2,3}`, ...). Every branch must have the same depth, and
//! the groups of every level partition the unit set.

use std::collections::BTreeSet;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalityMap {
    /// `levels[l]` lists the groups at level `l` in file order.
    levels: Vec<Vec<Vec<u32>>>,
}

impl LocalityMap {
    pub fn parse(text: &str) -> Result<LocalityMap> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Locality(format!("malformed locality map: {e}")))?;
        let top = value
            .as_array()
            .ok_or_else(|| Error::Locality("locality map must be an array".into()))?;
        let depth = depth_of(&value)?;
        if depth < 2 {
            return Err(Error::Locality(
                "locality map needs at least one level of groups".into(),
            ));
        }
        let mut levels = Vec::new();
        let mut nodes: Vec<&Value> = top.iter().collect();
        for _ in 0..depth - 1 {
            levels.push(nodes.iter().map(|n| leaves(n)).collect::<Result<Vec<_>>>()?);
            nodes = nodes
                .iter()
                .flat_map(|n| n.as_array().into_iter().flatten())
                .filter(|n| n.is_array())
                .collect();
        }
        Ok(LocalityMap { levels })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<LocalityMap> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Locality(format!("cannot read {}: {e}", path.display())))?;
        LocalityMap::parse(&text)
    }

    /// Builds a map from explicit levels without validation.
    pub fn from_levels(levels: Vec<Vec<Vec<u32>>>) -> LocalityMap {
        LocalityMap { levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn groups(&self, level: usize) -> Result<&[Vec<u32>]> {
        self.levels.get(level).map(|g| g.as_slice()).ok_or_else(|| {
            Error::Locality(format!(
                "level {level} deeper than the locality map ({} levels)",
                self.levels.len()
            ))
        })
    }

    /// Index of the group at `level` that contains `unit`.
    pub fn group_of(&self, level: usize, unit: u32) -> Result<usize> {
        self.groups(level)?
            .iter()
            .position(|g| g.contains(&unit))
            .ok_or_else(|| Error::Locality(format!("unit {unit} is in no group at level {level}")))
    }

    /// Checks that every level partitions `{0..n_units-1}`.
    pub fn validate(&self, n_units: usize) -> Result<()> {
        for (level, groups) in self.levels.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for unit in groups.iter().flatten() {
                if *unit as usize >= n_units {
                    return Err(Error::Locality(format!(
                        "unit {unit} at level {level} out of range for {n_units} units"
                    )));
                }
                if !seen.insert(*unit) {
                    return Err(Error::Locality(format!("unit {unit} appears twice at level {level}")));
                }
            }
            if seen.len() != n_units {
                return Err(Error::Locality(format!(
                    "level {level} covers {} of {n_units} units",
                    seen.len()
                )));
            }
        }
        Ok(())
    }
}

fn depth_of(v: &Value) -> Result<usize> {
    match v {
        Value::Number(_) => Ok(0),
        Value::Array(items) => {
            let depths = items.iter().map(depth_of).collect::<Result<BTreeSet<_>>>()?;
            match depths.len() {
                0 => Ok(1),
                1 => Ok(1 + depths.into_iter().next().unwrap()),
                _ => Err(Error::Locality("locality map branches differ in depth".into())),
            }
        }
        _ => Err(Error::Locality("locality map may only contain arrays and unit ids".into())),
    }
}

fn leaves(v: &Value) -> Result<Vec<u32>> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .and_then(|u| u32::try_from(u).ok())
            .map(|u| vec![u])
            .ok_or_else(|| Error::Locality(format!("invalid unit id {n}"))),
        Value::Array(items) => Ok(items.iter().map(leaves).collect::<Result<Vec<_>>>()?.concat()),
        _ => Err(Error::Locality("unexpected value in locality map".into())),
    }
}
