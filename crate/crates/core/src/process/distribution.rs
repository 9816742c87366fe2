use std::collections::BTreeMap;

use serde::Serialize;

use super::point::Path;
use crate::error::{Error, Result};

/// A finite law on paths (a single point is a path of length one).
///
/// Atoms are kept distinct and in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    atoms: Vec<(Path, f64)>,
}

impl Distribution {
    /// Validates positivity, normalization within `1e-12` and distinctness.
    pub fn new(mut atoms: Vec<(Path, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut total = 0.0;
        for (index, (_, w)) in atoms.iter().enumerate() {
            if w.is_nan() || *w <= 0.0 {
                return Err(Error::NonPositiveWeight { index, weight: *w });
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "distribution weights sum to {total}"
            )));
        }
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate atoms".into()));
        }
        Ok(Self { atoms })
    }

    /// Merges equal atoms and normalizes positive weights.
    pub fn from_weighted(atoms: impl IntoIterator<Item = (Path, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<Path, f64> = BTreeMap::new();
        for (index, (p, w)) in atoms.into_iter().enumerate() {
            if w.is_nan() || w <= 0.0 {
                return Err(Error::NonPositiveWeight { index, weight: w });
            }
            *acc.entry(p).or_insert(0.0) += w;
        }
        let total: f64 = acc.values().sum();
        if acc.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            atoms: acc.into_iter().map(|(p, w)| (p, w / total)).collect(),
        })
    }

    pub(crate) fn from_sorted_unchecked(atoms: Vec<(Path, f64)>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &[(Path, f64)] {
        &self.atoms
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|(_, w)| *w).collect()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Weight of one atom, zero when absent.
    pub fn weight_of(&self, path: &Path) -> f64 {
        self.atoms
            .binary_search_by(|(p, _)| p.cmp(path))
            .map(|k| self.atoms[k].1)
            .unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::scalar_path;

    #[test]
    fn validation() {
        assert!(Distribution::new(vec![(scalar_path(&[0.0]), 0.5)]).is_err());
        assert!(Distribution::new(vec![
            (scalar_path(&[0.0]), 0.5),
            (scalar_path(&[0.0]), 0.5)
        ])
        .is_err());
        let d = Distribution::new(vec![
            (scalar_path(&[1.0]), 0.5),
            (scalar_path(&[0.0]), 0.5),
        ])
        .unwrap();
        assert_eq!(d.atoms()[0].0, scalar_path(&[0.0]));
        assert_eq!(d.weight_of(&scalar_path(&[1.0])), 0.5);
        assert_eq!(d.weight_of(&scalar_path(&[2.0])), 0.0);
    }

    #[test]
    fn merge_and_normalize() {
        let d = Distribution::from_weighted(vec![
            (scalar_path(&[1.0]), 1.0),
            (scalar_path(&[1.0]), 1.0),
            (scalar_path(&[2.0]), 2.0),
        ])
        .unwrap();
        assert_eq!(d.weights(), vec![0.5, 0.5]);
    }
}
