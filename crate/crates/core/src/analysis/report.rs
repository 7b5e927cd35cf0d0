//! Chained Bell reports and white-box checks.

use std::fmt::Write as _;

use super::estimate::{CorrEntry, CorrelationTable};
use super::pairing::{PairRecord, PairingSummary};
use crate::bell::{chain_terms, chained_quantity, lhv_bound, Ensemble, Slot};
use crate::kv::KvFile;
use crate::sim::TruthRecord;
use crate::{Error, Result};

/// Fewest pairs per group for which a verdict is given.
pub const MIN_GROUP_COUNT: u64 = 1000;
/// Excess over the bound, in standard errors, that counts as a violation.
pub const VIOLATION_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Violation,
    NoViolation,
    InsufficientData,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Violation => "violation",
            Verdict::NoViolation => "no-violation",
            Verdict::InsufficientData => "insufficient-data",
        }
    }
}

/// One correlation entering a chained expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    /// Chain indices, zero-based.
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
}

/// Chained expression evaluated on estimated correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEstimate {
    pub n: usize,
    pub terms: Vec<Term>,
    pub value: f64,
    /// Quadrature sum of the term errors.
    pub sigma: f64,
}

impl ChainEstimate {
    pub fn min_count(&self) -> u64 {
        self.terms.iter().map(|t| t.count).min().unwrap_or(0)
    }

    /// `(value - bound) / sigma`.
    pub fn z(&self, bound: f64) -> f64 {
        let d = self.value - bound;
        if self.sigma > 0.0 {
            d / self.sigma
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

/// Evaluates the chained expression for chain indices `0..n`, which live at
/// `offset..offset + n` in the table.
pub fn chain_estimate(table: &CorrelationTable, n: usize, offset: usize) -> Result<ChainEstimate> {
    let terms = chain_terms(n);
    let missing: Vec<(usize, usize)> = terms
        .iter()
        .filter(|&&(i, j)| table.estimate(i + offset, j + offset).is_none())
        .map(|&(i, j)| (i + offset, j + offset))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCorrelations(missing));
    }
    let entry = |i: usize, j: usize| table.estimate(i + offset, j + offset).expect("checked above");
    let value = chained_quantity(n, |i, j| entry(i, j).value())?;
    let terms: Vec<Term> = terms
        .into_iter()
        .map(|(i, j)| {
            let e = entry(i, j);
            Term {
                i,
                j,
                value: e.value().expect("non-empty"),
                std_error: e.std_error().expect("non-empty"),
                count: e.count(),
            }
        })
        .collect();
    let sigma = terms.iter().map(|t| t.std_error * t.std_error).sum::<f64>().sqrt();
    Ok(ChainEstimate { n, terms, value, sigma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellReport {
    pub ensemble: Ensemble,
    pub chain: ChainEstimate,
    pub bound: f64,
    pub z: f64,
    pub verdict: Verdict,
    pub table: CorrelationTable,
    pub offset: usize,
    /// Pairing counts and survivor count, when the report came from raw data.
    pub pairing: Option<PairingSummary>,
    pub selected: u64,
    pub whitebox: Option<WhiteboxSection>,
}

/// Chained value, bound and verdict for `n` settings per side.
pub fn bell_report(table: &CorrelationTable, n: usize, ensemble: Ensemble, offset: usize) -> Result<BellReport> {
    let chain = chain_estimate(table, n, offset)?;
    let bound = lhv_bound(n, ensemble)?;
    let z = chain.z(bound);
    let verdict = if chain.min_count() < MIN_GROUP_COUNT {
        Verdict::InsufficientData
    } else if z >= VIOLATION_Z {
        Verdict::Violation
    } else {
        Verdict::NoViolation
    };
    Ok(BellReport {
        ensemble,
        bound,
        z,
        verdict,
        table: table.clone(),
        offset,
        pairing: None,
        selected: table.total(),
        whitebox: None,
        chain,
    })
}

/// Quantities only a simulation with emission tags can supply.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteboxSection {
    /// Correlations restricted to pairs whose true slots are both late.
    pub late_late: CorrelationTable,
    pub early_early: CorrelationTable,
    pub chain_ll: ChainEstimate,
    pub bound_ll: f64,
    /// Two-setting expression on the first two chain settings.
    pub chsh_ll: ChainEstimate,
    pub max_abs_ee: f64,
    /// Fraction of tagged coincidences that are late-late.
    pub split_ll: f64,
    /// Largest `|E - (w_LL E_LL + w_EE E_EE)|` with measured weights.
    pub residual_weighted: f64,
    /// Largest `|E - (E_LL + E_EE) / 2|` in standard errors, over groups
    /// whose split is one half within three binomial errors.
    pub residual_half_z: Option<f64>,
    /// Selected pairs without a matching tag or with unequal true slots.
    pub unclassified: u64,
}

/// Splits the selected pairs by their true slots.
pub fn whitebox_checks(
    selected: &[PairRecord],
    truth: &[TruthRecord],
    n: usize,
    offset: usize,
) -> Result<WhiteboxSection> {
    if truth.is_empty() || selected.iter().all(|p| p.true_pair().is_none()) && !selected.is_empty() {
        return Err(Error::MissingTruth);
    }
    let dims = {
        let max = |f: fn(&PairRecord) -> u32| selected.iter().map(f).max().map_or(0, |m| m as usize + 1);
        (max(|p| p.late[0]).max(offset + n), max(|p| p.late[1]).max(offset + n))
    };
    let mut all = CorrelationTable::new(dims.0, dims.1);
    let mut ll = CorrelationTable::new(dims.0, dims.1);
    let mut ee = CorrelationTable::new(dims.0, dims.1);
    let mut unclassified = 0;
    for p in selected {
        let (i, j) = (p.late[0] as usize, p.late[1] as usize);
        all.entry_mut(i, j).add(p.same_sign());
        let Some(t) = p.true_pair().and_then(|k| truth.get(k as usize)) else {
            unclassified += 1;
            continue;
        };
        match (t.slot_left, t.slot_right) {
            (Slot::Late, Slot::Late) => ll.entry_mut(i, j).add(p.same_sign()),
            (Slot::Early, Slot::Early) => ee.entry_mut(i, j).add(p.same_sign()),
            _ => unclassified += 1,
        }
    }

    let chain_ll = chain_estimate(&ll, n, offset)?;
    let chsh_ll = chain_estimate(&ll, 2, offset)?;
    let max_abs_ee = ee
        .iter()
        .filter_map(|(_, _, e)| e.value())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    let (n_ll, n_ee) = (ll.total() as f64, ee.total() as f64);
    let split_ll = if n_ll + n_ee > 0.0 {
        n_ll / (n_ll + n_ee)
    } else {
        f64::NAN
    };

    let mut residual_weighted: f64 = 0.0;
    let mut residual_half_z: Option<f64> = None;
    for (i, j, e) in all.iter() {
        let (Some(ec), Some(l), Some(r)) = (e.value(), ll.estimate(i, j), ee.estimate(i, j)) else {
            continue;
        };
        let (el, er) = (l.value().expect("non-empty"), r.value().expect("non-empty"));
        let m = (l.count() + r.count()) as f64;
        let w = l.count() as f64 / m;
        let mixed = CorrEntry {
            same: l.same + r.same,
            different: l.different + r.different,
        };
        if mixed.count() == e.count() {
            residual_weighted = residual_weighted.max((ec - (w * el + (1.0 - w) * er)).abs());
        }
        if (w - 0.5).abs() <= 3.0 * (0.25 / m).sqrt() {
            let se = 0.5 * (l.std_error().unwrap().powi(2) + r.std_error().unwrap().powi(2)).sqrt();
            let z = if se > 0.0 {
                (ec - 0.5 * (el + er)).abs() / se
            } else {
                0.0
            };
            residual_half_z = Some(residual_half_z.map_or(z, |x| x.max(z)));
        }
    }

    Ok(WhiteboxSection {
        late_late: ll,
        early_early: ee,
        chain_ll,
        bound_ll: lhv_bound(n, Ensemble::PureLateLate)?,
        chsh_ll,
        max_abs_ee,
        split_ll,
        residual_weighted,
        residual_half_z,
        unclassified,
    })
}

fn ensemble_label(e: Ensemble) -> &'static str {
    match e {
        Ensemble::PureLateLate => "late-late",
        Ensemble::Coincident => "coincident",
    }
}

impl BellReport {
    /// Flat `key=value` rendering.
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("n", self.chain.n);
        kv.set("ensemble", ensemble_label(self.ensemble));
        kv.set("value", format!("{:?}", self.chain.value));
        kv.set("sigma", format!("{:?}", self.chain.sigma));
        kv.set("bound", format!("{:?}", self.bound));
        kv.set("z", format!("{:?}", self.z));
        kv.set("verdict", self.verdict.label());
        kv.set("min_group_count", self.chain.min_count());
        kv.set("selected", self.selected);
        if let Some(s) = &self.pairing {
            kv.set("left_detections", s.left_detections);
            kv.set("right_detections", s.right_detections);
            kv.set("coincident", s.coincident);
            kv.set("left_late", s.left_late);
            kv.set("right_late", s.right_late);
            kv.set("accidental", s.accidental);
            kv.set("orphan_left", s.orphan_left);
            kv.set("orphan_right", s.orphan_right);
            let emitted = s.left_detections.min(s.right_detections).max(1);
            kv.set(
                "selection_efficiency",
                format!("{:?}", self.selected as f64 / emitted as f64),
            );
        }
        for (i, j, e) in self.table.iter() {
            kv.set(&format!("count_{i}_{j}"), e.count());
            if let (Some(v), Some(se)) = (e.value(), e.std_error()) {
                kv.set(&format!("E_{i}_{j}"), format!("{v:?}"));
                kv.set(&format!("se_{i}_{j}"), format!("{se:?}"));
            }
        }
        if let Some(w) = &self.whitebox {
            kv.set("whitebox_chained_ll", format!("{:?}", w.chain_ll.value));
            kv.set("whitebox_chained_ll_sigma", format!("{:?}", w.chain_ll.sigma));
            kv.set("whitebox_chained_ll_bound", format!("{:?}", w.bound_ll));
            kv.set("whitebox_chsh_ll", format!("{:?}", w.chsh_ll.value));
            kv.set("whitebox_chsh_ll_sigma", format!("{:?}", w.chsh_ll.sigma));
            kv.set("whitebox_max_abs_ee", format!("{:?}", w.max_abs_ee));
            kv.set("whitebox_split_ll", format!("{:?}", w.split_ll));
            kv.set("whitebox_residual_weighted", format!("{:?}", w.residual_weighted));
            if let Some(z) = w.residual_half_z {
                kv.set("whitebox_residual_half_z", format!("{z:?}"));
            }
            kv.set("whitebox_unclassified", w.unclassified);
        }
        kv
    }

    /// Human-readable table.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let c = &self.chain;
        let _ = writeln!(
            s,
            "chained expression, N = {} ({} bound)",
            c.n,
            ensemble_label(self.ensemble)
        );
        let _ = writeln!(
            s,
            "{:>4} {:>4} {:>10} {:>10} {:>10}",
            "phi", "psi", "E", "stderr", "count"
        );
        for t in &c.terms {
            let _ = writeln!(
                s,
                "{:>4} {:>4} {:>10.5} {:>10.5} {:>10}",
                t.i + self.offset,
                t.j + self.offset,
                t.value,
                t.std_error,
                t.count
            );
        }
        let _ = writeln!(s, "value   {:.4} +- {:.4}", c.value, c.sigma);
        let _ = writeln!(s, "bound   {:.4}", self.bound);
        let _ = writeln!(s, "z       {:.2}", self.z);
        let _ = writeln!(s, "verdict {}", self.verdict.label());
        if let Some(p) = &self.pairing {
            let _ = writeln!(
                s,
                "pairs   coincident {} left-late {} right-late {} accidental {} selected {}",
                p.coincident, p.left_late, p.right_late, p.accidental, self.selected
            );
        }
        if let Some(w) = &self.whitebox {
            let _ = writeln!(
                s,
                "late-late chained {:.4} +- {:.4} (bound {:.0}), CHSH {:.4} +- {:.4}",
                w.chain_ll.value, w.chain_ll.sigma, w.bound_ll, w.chsh_ll.value, w.chsh_ll.sigma
            );
            let _ = writeln!(
                s,
                "early-early max |E| {:.4}, late-late share {:.4}, residual {:.2e}",
                w.max_abs_ee, w.split_ll, w.residual_weighted
            );
        }
        s
    }
}
