//! Selection rules and correlation estimates.

use super::pairing::{PairClass, PairRecord};
use crate::{Error, Result};

/// Post-selection applied before estimating correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Selection {
    /// Keep only coincident pairs.
    pub coincident_only: bool,
    /// Keep only pairs whose early settings are these `(left, right)` indices.
    pub early_filter: Option<(usize, usize)>,
}

impl Selection {
    pub fn keeps(&self, p: &PairRecord) -> bool {
        if self.coincident_only && p.class != PairClass::Coincident {
            return false;
        }
        match self.early_filter {
            Some((a, b)) => p.early == [a as u32, b as u32],
            None => true,
        }
    }
}

/// Pairs surviving `selection`, in input order. `n_settings` are the lengths
/// of the two station angle lists.
pub fn apply_selection(
    pairs: &[PairRecord],
    selection: Selection,
    n_settings: (usize, usize),
) -> Result<Vec<PairRecord>> {
    if let Some((a, b)) = selection.early_filter {
        if a >= n_settings.0 || b >= n_settings.1 {
            return Err(Error::Domain(format!(
                "reference setting indices ({a}, {b}) exceed the angle lists ({}, {})",
                n_settings.0, n_settings.1
            )));
        }
    }
    Ok(pairs.iter().filter(|p| selection.keeps(p)).copied().collect())
}

/// Correlation of one setting group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrEntry {
    pub same: u64,
    pub different: u64,
}

impl CorrEntry {
    pub fn count(&self) -> u64 {
        self.same + self.different
    }

    pub fn add(&mut self, same: bool) {
        if same {
            self.same += 1;
        } else {
            self.different += 1;
        }
    }

    /// `(N_same - N_diff) / N`; `None` for an empty group.
    pub fn value(&self) -> Option<f64> {
        let n = self.count();
        (n > 0).then(|| (self.same as f64 - self.different as f64) / n as f64)
    }

    /// Binomial standard error `sqrt((1 - E^2) / N)`.
    pub fn std_error(&self) -> Option<f64> {
        let e = self.value()?;
        Some(((1.0 - e * e).max(0.0) / self.count() as f64).sqrt())
    }
}

/// Correlations indexed by station-list setting indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    entries: Vec<CorrEntry>,
    n_phi: usize,
    n_psi: usize,
}

impl CorrelationTable {
    pub fn new(n_phi: usize, n_psi: usize) -> Self {
        CorrelationTable {
            entries: vec![CorrEntry::default(); n_phi * n_psi],
            n_phi,
            n_psi,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_phi, self.n_psi)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&CorrEntry> {
        (i < self.n_phi && j < self.n_psi).then(|| &self.entries[i * self.n_psi + j])
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut CorrEntry {
        assert!(
            i < self.n_phi && j < self.n_psi,
            "setting index ({i}, {j}) out of range"
        );
        &mut self.entries[i * self.n_psi + j]
    }

    /// Non-empty entry at `(i, j)`.
    pub fn estimate(&self, i: usize, j: usize) -> Option<&CorrEntry> {
        self.get(i, j).filter(|e| e.count() > 0)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(CorrEntry::count).sum()
    }

    /// `(i, j, entry)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CorrEntry)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .map(move |(k, e)| (k / self.n_psi, k % self.n_psi, e))
    }
}

/// Groups pairs by their late settings and counts sign agreement.
pub fn estimate_correlations<'a>(
    pairs: impl IntoIterator<Item = &'a PairRecord>,
    n_settings: (usize, usize),
) -> Result<CorrelationTable> {
    let mut table = CorrelationTable::new(n_settings.0, n_settings.1);
    for p in pairs {
        let [i, j] = p.late;
        let (i, j) = (i as usize, j as usize);
        if i >= n_settings.0 || j >= n_settings.1 {
            return Err(Error::Domain(format!(
                "late setting ({i}, {j}) outside the angle lists"
            )));
        }
        table.entry_mut(i, j).add(p.same_sign());
    }
    Ok(table)
}
