use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rayon::prelude::*;

use super::joint::{joint_table_with, JointOptions};
use super::model::ModelPair;
use super::RegionModel;
use crate::bell::{target_table, Angle, JointTable, OutcomeCell};
use crate::kv::KvFile;
use crate::Result;

/// `n` settings sums, offset by half a step from zero so grid points do not
/// sit on exact region-corner alignments.
pub fn chi_grid(n: usize) -> Vec<Angle> {
    (0..n).map(|k| Angle::new((k as f64 + 0.5) * TAU / n as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub rms: f64,
    pub worst_chi: Angle,
    pub worst_entry: (OutcomeCell, OutcomeCell),
}

fn tables_on_grid(
    left: &RegionModel,
    right: &RegionModel,
    grid: &[Angle],
    opts: &JointOptions,
) -> Result<Vec<JointTable>> {
    grid.par_iter()
        .map(|&chi| joint_table_with(left, right, Angle::ZERO, chi, opts))
        .collect()
}

fn residual_of(grid: &[Angle], tables: &[JointTable]) -> Residual {
    let mut max = 0.0;
    let mut sq = 0.0;
    let mut worst_chi = Angle::ZERO;
    let mut worst_entry = (OutcomeCell::ALL[0], OutcomeCell::ALL[0]);
    for (chi, t) in grid.iter().zip(tables) {
        let target = target_table(*chi);
        for ((l, r, p), (_, _, q)) in t.entries().zip(target.entries()) {
            let d = (p - q).abs();
            sq += d * d;
            if d > max {
                max = d;
                worst_chi = *chi;
                worst_entry = (l, r);
            }
        }
    }
    Residual {
        max,
        rms: (sq / (16 * grid.len()) as f64).sqrt(),
        worst_chi,
        worst_entry,
    }
}

/// Max and RMS distance of the model's joint tables from the target over
/// `grid`, all sixteen entries.
pub fn residual(left: &RegionModel, right: &RegionModel, grid: &[Angle]) -> Result<Residual> {
    residual_with(left, right, grid, &JointOptions::default())
}

pub(crate) fn residual_with(
    left: &RegionModel,
    right: &RegionModel,
    grid: &[Angle],
    opts: &JointOptions,
) -> Result<Residual> {
    let tables = tables_on_grid(left, right, grid, opts)?;
    Ok(residual_of(grid, &tables))
}

/// Everything checked about a model pair against the target contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Construction already rejects non-partitions, so this is always true for
    /// a report produced from a [`ModelPair`].
    pub partition_ok: bool,
    pub left_areas: [f64; 4],
    pub right_areas: [f64; 4],
    pub area_max_dev: f64,
    /// Offset grid size; the two anchor sums 0 and π are checked in addition.
    pub grid_points: usize,
    pub residual: Residual,
    /// Largest deviation of a single-side marginal from that side's cell area.
    pub no_signaling_dev: f64,
    /// Largest difference between tables at equal `phi + psi`.
    pub chi_only_dev: f64,
}

impl ValidationReport {
    pub fn passed(&self, tol_max: f64) -> bool {
        self.partition_ok && self.area_max_dev <= 1e-9 && self.residual.max <= tol_max
    }

    pub fn to_kv(&self, tol_max: f64) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("partition_ok", self.partition_ok);
        for (side, areas) in [("left", self.left_areas), ("right", self.right_areas)] {
            for (i, a) in areas.iter().enumerate() {
                kv.set(
                    &format!("area.{side}.{}", OutcomeCell::from_index(i)),
                    format!("{a:.12}"),
                );
            }
        }
        kv.set("area_max_dev", format!("{:.3e}", self.area_max_dev));
        kv.set("grid_points", self.grid_points);
        kv.set("residual_max", format!("{:.6e}", self.residual.max));
        kv.set("residual_rms", format!("{:.6e}", self.residual.rms));
        kv.set("worst_chi", format!("{:.6}", self.residual.worst_chi.radians()));
        kv.set(
            "worst_entry",
            format!("{},{}", self.residual.worst_entry.0, self.residual.worst_entry.1),
        );
        kv.set("no_signaling_dev", format!("{:.3e}", self.no_signaling_dev));
        kv.set("chi_only_dev", format!("{:.3e}", self.chi_only_dev));
        kv.set("tol_max", format!("{tol_max:e}"));
        kv.set("status", if self.passed(tol_max) { "pass" } else { "fail" });
        kv
    }

    pub fn render_table(&self, tol_max: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "cell   left area   right area   (target {:.6})", PI / 2.0);
        for i in 0..4 {
            let _ = writeln!(
                s,
                "{:<5} {:>10.6}   {:>10.6}",
                OutcomeCell::from_index(i).label(),
                self.left_areas[i],
                self.right_areas[i]
            );
        }
        let _ = writeln!(
            s,
            "residual over {} chi points: max {:.3e}, rms {:.3e} (worst {} at chi = {:.4})",
            self.grid_points,
            self.residual.max,
            self.residual.rms,
            format_args!("{},{}", self.residual.worst_entry.0, self.residual.worst_entry.1),
            self.residual.worst_chi.radians()
        );
        let _ = writeln!(s, "no-signalling deviation {:.3e}", self.no_signaling_dev);
        let _ = writeln!(s, "chi-only deviation      {:.3e}", self.chi_only_dev);
        let _ = writeln!(s, "verdict: {}", if self.passed(tol_max) { "PASS" } else { "FAIL" });
        s
    }
}

pub fn validate(pair: &ModelPair) -> Result<ValidationReport> {
    validate_with(pair, 64, &JointOptions::default())
}

/// Settings sums added to the offset grid: the points of perfect
/// (anti)correlation, where slot-blind layouts miss the target by the most.
const ANCHORS: [f64; 2] = [0.0, PI];

/// The offset grid of `n` points followed by the anchor sums 0 and π.
pub fn validation_grid(n: usize) -> Vec<Angle> {
    let mut grid = chi_grid(n);
    grid.extend(ANCHORS.map(Angle::new));
    grid
}

pub fn validate_with(pair: &ModelPair, grid_points: usize, opts: &JointOptions) -> Result<ValidationReport> {
    let grid = validation_grid(grid_points);
    let tables = tables_on_grid(&pair.left, &pair.right, &grid, opts)?;
    let residual = residual_of(&grid, &tables);

    let left_areas = pair.left.cell_areas();
    let right_areas = pair.right.cell_areas();
    let area_max_dev = left_areas
        .iter()
        .chain(&right_areas)
        .map(|a| (a - PI / 2.0).abs())
        .fold(0.0, f64::max);

    let mut no_signaling_dev: f64 = 0.0;
    for t in &tables {
        let (lm, rm) = (t.left_marginal(), t.right_marginal());
        for i in 0..4 {
            no_signaling_dev = no_signaling_dev
                .max((lm[i] - left_areas[i] / TAU).abs())
                .max((rm[i] - right_areas[i] / TAU).abs());
        }
    }

    // same sum, different split between the two stations
    let probes = [(0.3, 1.1), (2.0, -0.7), (4.4, 2.9), (5.9, 0.05)];
    let mut chi_only_dev: f64 = 0.0;
    for (phi, delta) in probes {
        let psi = 1.7 - phi;
        let a = joint_table_with(&pair.left, &pair.right, Angle::new(phi), Angle::new(psi), opts)?;
        let b = joint_table_with(
            &pair.left,
            &pair.right,
            Angle::new(phi + delta),
            Angle::new(psi - delta),
            opts,
        )?;
        chi_only_dev = chi_only_dev.max(a.max_abs_diff(&b));
    }

    Ok(ValidationReport {
        partition_ok: true,
        left_areas,
        right_areas,
        area_max_dev,
        grid_points,
        residual,
        no_signaling_dev,
        chi_only_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_offset_by_half_a_step() {
        let g = chi_grid(4);
        assert!((g[0].radians() - TAU / 8.0).abs() < 1e-15);
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn quadrant_model_fails_by_an_eighth() {
        let report = validate(&ModelPair::quadrant()).unwrap();
        // (+E,+E) overlaps fully at chi = 0: 1/4 against a target of 1/8
        assert!(report.residual.max >= 0.125 - 1e-12, "{}", report.residual.max);
        assert_eq!(report.residual.worst_chi.radians(), 0.0);
        assert!(!report.passed(5e-3));
        assert!(report.no_signaling_dev < 1e-8);
        assert!(report.area_max_dev < 1e-12);
    }

    #[test]
    fn reference_model_passes() {
        let report = validate(&ModelPair::reference()).unwrap();
        assert!(report.passed(5e-3), "{}", report.render_table(5e-3));
        assert!(report.no_signaling_dev < 1e-8);
        assert!(report.chi_only_dev < 1e-8);
    }

    #[test]
    fn analytic_model_has_zero_residual() {
        let m = ModelPair::analytic();
        let r = residual(&m.left, &m.right, &chi_grid(64)).unwrap();
        assert!(r.max < 1e-10 && r.rms < 1e-10, "{r:?}");
    }

    #[test]
    fn residual_is_invariant_under_common_rotation() {
        let m = ModelPair::default_seed();
        let grid = chi_grid(16);
        let a = residual(&m.left, &m.right, &grid).unwrap();
        for off in [0.9, 3.3] {
            let left = m.left.rotated(off).unwrap();
            let right = m.right.rotated(off).unwrap();
            let b = residual(&left, &right, &grid).unwrap();
            assert!((a.max - b.max).abs() < 1e-8, "{} vs {}", a.max, b.max);
            assert!((a.rms - b.rms).abs() < 1e-8);
        }
    }
}
