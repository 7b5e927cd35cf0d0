//! Post-detection analysis: pairing, selection, correlations and reports.
//!
//! Only what the two stations record is used: detection ticks, signs and
//! their own setting histories. Emission tags are consulted solely by the
//! white-box checks.

pub mod estimate;
pub mod pairing;
pub mod report;

pub use estimate::{apply_selection, estimate_correlations, CorrEntry, CorrelationTable, Selection};
pub use pairing::{
    attach_settings, pair_detections, read_pairs, write_pairs, Match, PairClass, PairRecord, PairingSummary, Timing,
};
pub use report::{
    bell_report, chain_estimate, whitebox_checks, BellReport, ChainEstimate, Term, Verdict, WhiteboxSection,
};

use crate::bell::Ensemble;
use crate::sim::{Detection, ExperimentConfig, SettingLookup, TruthRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    /// Pairing window; `2K` when unset.
    pub window: Option<u64>,
    pub coincident_only: bool,
    /// Require the reference settings (list index 0) at the early time.
    pub early_filter: bool,
    /// Settings per side in the chained expression; all chain settings when unset.
    pub n: Option<usize>,
    pub ensemble: Ensemble,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            window: None,
            coincident_only: true,
            early_filter: false,
            n: None,
            ensemble: Ensemble::Coincident,
        }
    }
}

pub struct Analysis {
    pub pairs: Vec<PairRecord>,
    pub selected: Vec<PairRecord>,
    pub report: BellReport,
}

/// Runs pairing, selection, estimation and the Bell report on one data set.
pub fn analyze(
    config: &ExperimentConfig,
    left: &[Detection],
    right: &[Detection],
    left_settings: &dyn SettingLookup,
    right_settings: &dyn SettingLookup,
    truth: Option<&[TruthRecord]>,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let k = config.ticks_per_dl;
    let (matches, summary) = pair_detections(left, right, k, opts.window.unwrap_or(2 * k))?;
    let timing = Timing {
        k,
        t_ret_left: config.t_ret_left,
        t_ret_right: config.t_ret_right,
    };
    let pairs = attach_settings(&matches, left_settings, right_settings, timing)?;
    drop(matches);

    let (phi, psi) = config.station_lists();
    let dims = (phi.len(), psi.len());
    let offset = config.chain_offset();
    if opts.early_filter && offset == 0 {
        return Err(Error::Config(vec![
            "the early-setting filter needs phi0 and psi0".into()
        ]));
    }
    let selection = Selection {
        coincident_only: opts.coincident_only,
        early_filter: opts.early_filter.then_some((0, 0)),
    };
    let selected = apply_selection(&pairs, selection, dims)?;
    let table = estimate_correlations(&selected, dims)?;
    let n = opts.n.unwrap_or(config.phi.len().min(config.psi.len()));
    let mut report = bell_report(&table, n, opts.ensemble, offset)?;
    report.pairing = Some(summary);
    if let Some(truth) = truth {
        report.whitebox = Some(whitebox_checks(&selected, truth, n, offset)?);
    }
    Ok(Analysis {
        pairs,
        selected,
        report,
    })
}
