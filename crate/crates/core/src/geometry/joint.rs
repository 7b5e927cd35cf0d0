use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::curve::{Primitive, SineCurve};
use super::model::{Column, HiddenVars, ModelPair, RegionModel, Side};
use super::quadrature::{integrate, SimpsonOptions};
use crate::bell::{reduce, Angle, JointTable, OutcomeCell};
use crate::Result;

/// Tolerances for [`joint_table_with`].
#[derive(Debug, Clone, Copy)]
pub struct JointOptions {
    /// Absolute tolerance per table entry.
    pub tol: f64,
    pub max_depth: u32,
}

impl Default for JointOptions {
    fn default() -> Self {
        JointOptions {
            tol: 1e-9,
            max_depth: 40,
        }
    }
}

/// Joint outcome probabilities of a model pair at settings `(phi, psi)`.
pub fn joint_table(left: &RegionModel, right: &RegionModel, phi: Angle, psi: Angle) -> Result<JointTable> {
    joint_table_with(left, right, phi, psi, &JointOptions::default())
}

/// Integrates over `theta` the length of the `r`-interval shared by each left
/// and right cell. The integration range is split at every column boundary of
/// either chart so the integrand is smooth apart from curve crossings.
pub fn joint_table_with(
    left: &RegionModel,
    right: &RegionModel,
    phi: Angle,
    psi: Angle,
    opts: &JointOptions,
) -> Result<JointTable> {
    let to_theta = |model: &RegionModel, setting: Angle, x: f64| match model.side() {
        Side::Left => reduce(x + setting.radians()),
        Side::Right => reduce(x - setting.radians()),
    };
    let mut breaks: Vec<f64> = vec![0.0, TAU];
    breaks.extend(left.breakpoints().into_iter().map(|x| to_theta(left, phi, x)));
    breaks.extend(right.breakpoints().into_iter().map(|x| to_theta(right, psi, x)));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let total_tol = opts.tol * TAU;
    let mut acc = [0.0; 16];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a < 1e-15 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let lc = &left.columns()[left.column_index(reduce(left.side().chart_x(mid, phi)))];
        let rc = &right.columns()[right.column_index(reduce(right.side().chart_x(mid, psi)))];
        let simpson = SimpsonOptions {
            tol: total_tol * (b - a) / TAU,
            min_depth: 3,
            max_depth: opts.max_depth,
        };
        let seg = integrate(
            &|theta: f64| {
                overlap_lengths(
                    lc,
                    rc,
                    left.side().chart_x(theta, phi),
                    right.side().chart_x(theta, psi),
                )
            },
            a,
            b,
            &simpson,
        )?;
        for (s, v) in acc.iter_mut().zip(seg) {
            *s += v;
        }
    }
    let mut t = JointTable::default();
    for (k, v) in acc.iter().enumerate() {
        t.p[k / 4][k % 4] = v / TAU;
    }
    Ok(t)
}

#[inline]
fn band_top(column: &Column, i: usize, x: f64, floor: f64) -> f64 {
    if i + 1 == column.layers.len() {
        1.0
    } else {
        column.layers[i].upper.eval(x).clamp(floor, 1.0)
    }
}

/// Lengths of `r`-overlap between every left and right cell at one `theta`.
#[inline]
fn overlap_lengths(lc: &Column, rc: &Column, x: f64, y: f64) -> [f64; 16] {
    let mut out = [0.0; 16];
    let (mut i, mut j) = (0, 0);
    let (mut l_lo, mut r_lo) = (0.0_f64, 0.0_f64);
    let mut l_hi = band_top(lc, 0, x, 0.0);
    let mut r_hi = band_top(rc, 0, y, 0.0);
    loop {
        let len = l_hi.min(r_hi) - l_lo.max(r_lo);
        if len > 0.0 {
            out[lc.layers[i].cell.index() * 4 + rc.layers[j].cell.index()] += len;
        }
        if l_hi <= r_hi {
            i += 1;
            if i == lc.layers.len() {
                break;
            }
            l_lo = l_hi;
            l_hi = band_top(lc, i, x, l_lo);
        } else {
            j += 1;
            if j == rc.layers.len() {
                break;
            }
            r_lo = r_hi;
            r_hi = band_top(rc, j, y, r_lo);
        }
    }
    out
}

/// Monte-Carlo estimate of the joint table from uniform hidden variables.
pub fn joint_table_monte_carlo(
    left: &RegionModel,
    right: &RegionModel,
    phi: Angle,
    psi: Angle,
    samples: u64,
    seed: u64,
) -> JointTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [[0u64; 4]; 4];
    for _ in 0..samples {
        let hv = HiddenVars::new(rng.random::<f64>() * TAU, rng.random::<f64>());
        let l = left.evaluate(phi, hv);
        let r = right.evaluate(psi, hv);
        counts[l.index()][r.index()] += 1;
    }
    let mut t = JointTable::default();
    for (row, c) in t.p.iter_mut().zip(&counts) {
        for (p, &n) in row.iter_mut().zip(c) {
            *p = n as f64 / samples as f64;
        }
    }
    t
}

/// Per-slot probability that a half-period sine sliver of amplitude `pi/8`
/// meets a receptor band on the complementary half-chart, as a function of
/// `chi = phi + psi`.
pub fn sliver_rectangle_overlap(chi: Angle) -> f64 {
    (1.0 - chi.cos()) / 16.0
}

/// The documented sliver and its receptor, located in a model pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliverPair {
    pub sliver_side: Side,
    pub sliver_cell: OutcomeCell,
    pub sliver: Primitive,
    pub receptor_cell: OutcomeCell,
    pub receptor: Primitive,
}

const SLIVER_AMPLITUDE: f64 = PI / 8.0;

fn is_half_chart(p: &Primitive) -> bool {
    let starts = [0.0, PI];
    starts
        .iter()
        .any(|&s| (p.x0 - s).abs() < 1e-9 && (p.x1 - s - PI).abs() < 1e-9)
}

/// Finds a sliver `0 <= r < (pi/8) |sin x|` over a half-chart in one station
/// and a rectangle of height at least `pi/8` on the complementary half of the
/// other station, in the opposite-sign, same-slot cell.
pub fn find_sliver_pair(pair: &ModelPair) -> Option<SliverPair> {
    for (a, b) in [(&pair.left, &pair.right), (&pair.right, &pair.left)] {
        for (cell, s) in a.primitives() {
            let phase_ok =
                (reduce(s.upper.phase - s.x0)).abs() < 1e-9 || (reduce(s.upper.phase - s.x0) - TAU).abs() < 1e-9;
            let sliver_ok = is_half_chart(s)
                && s.lower.same_as(&SineCurve::ZERO, 1e-9)
                && s.upper.offset.abs() < 1e-9
                && (s.upper.amplitude - SLIVER_AMPLITUDE).abs() < 1e-9
                && phase_ok;
            if !sliver_ok {
                continue;
            }
            let target = OutcomeCell::new(
                match cell.sign {
                    crate::bell::Sign::Plus => crate::bell::Sign::Minus,
                    crate::bell::Sign::Minus => crate::bell::Sign::Plus,
                },
                cell.slot,
            );
            let comp0 = reduce(s.x0 + PI);
            for rp in b.primitives_of(target) {
                if is_half_chart(rp)
                    && (rp.x0 - comp0).abs() < 1e-9
                    && rp.lower.same_as(&SineCurve::ZERO, 1e-9)
                    && rp.upper.is_flat()
                    && rp.upper.offset >= SLIVER_AMPLITUDE
                {
                    return Some(SliverPair {
                        sliver_side: a.side(),
                        sliver_cell: *cell,
                        sliver: *s,
                        receptor_cell: target,
                        receptor: *rp,
                    });
                }
            }
        }
    }
    None
}

/// Overlap probability of the isolated sliver/receptor pair at `chi`, by
/// quadrature (left setting 0, right setting `chi`).
pub fn sliver_overlap_quadrature(pair: &SliverPair, chi: Angle) -> Result<f64> {
    let (left, right) = match pair.sliver_side {
        Side::Left => (pair.sliver, pair.receptor),
        Side::Right => (pair.receptor, pair.sliver),
    };
    let c = chi.radians();
    let mut breaks = vec![0.0, TAU, left.x0, left.x1, reduce(right.x0 - c), reduce(right.x1 - c)];
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let opts = SimpsonOptions {
        tol: 1e-12,
        ..SimpsonOptions::default()
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let xm = reduce(mid);
        let ym = reduce(mid + c);
        let inside = xm >= left.x0 && xm < left.x1 && ym >= right.x0 && ym < right.x1;
        if !inside || b - a < 1e-15 {
            continue;
        }
        let [v] = integrate(
            &|t: f64| {
                let (x, y) = (t, t + c);
                let lo = left.lower.eval(x).max(right.lower.eval(y));
                let hi = left.upper.eval(x).min(right.upper.eval(y));
                [(hi - lo).max(0.0)]
            },
            a,
            b,
            &opts,
        )?;
        total += v;
    }
    Ok(total / TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::target_table;

    fn cell(s: &str) -> OutcomeCell {
        OutcomeCell::parse(s).unwrap()
    }

    #[test]
    fn quadrant_model_overlap_by_hand() {
        let q = ModelPair::quadrant();
        let t = joint_table(&q.left, &q.right, Angle::ZERO, Angle::ZERO).unwrap();
        assert!((t.get(cell("+E"), cell("+E")) - 0.25).abs() < 1e-9);
        assert!((t.total() - 1.0).abs() < 1e-9);
        let dev = t.max_abs_diff(&target_table(Angle::ZERO));
        assert!(dev >= 0.125 - 1e-9);
        // shifted by pi/2 the half-charts overlap by half
        let t = joint_table(&q.left, &q.right, Angle::ZERO, Angle::new(PI / 2.0)).unwrap();
        assert!((t.get(cell("+E"), cell("+E")) - 0.125).abs() < 1e-9);
    }

    #[test]
    fn analytic_entries() {
        let m = ModelPair::analytic();
        let t0 = joint_table(&m.left, &m.right, Angle::ZERO, Angle::ZERO).unwrap();
        assert!(t0.get(cell("+E"), cell("-E")).abs() < 1e-6);
        assert!((t0.total() - 1.0).abs() < 1e-9);
        let t = joint_table(&m.left, &m.right, Angle::new(0.4), Angle::new(PI / 2.0 - 0.4)).unwrap();
        assert!((t.get(cell("+E"), cell("+E")) - 0.0625).abs() < 1e-6);
    }

    /// Independent Monte-Carlo route for the analytic entry at chi = pi/2.
    #[test]
    fn analytic_entry_agrees_with_monte_carlo() {
        let m = ModelPair::analytic();
        let n = 10_000_000;
        let mc = joint_table_monte_carlo(&m.left, &m.right, Angle::ZERO, Angle::new(PI / 2.0), n, 3);
        let p = mc.get(cell("+E"), cell("+E"));
        let sigma = (0.0625 * (1.0 - 0.0625) / n as f64).sqrt();
        assert!((p - 0.0625).abs() < 5.0 * sigma, "{p}");
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature_entrywise() {
        let m = ModelPair::analytic();
        let n = 1_000_000u64;
        for (k, chi) in [0.3, 1.9, 4.4].into_iter().enumerate() {
            let q = joint_table(&m.left, &m.right, Angle::new(1.0), Angle::new(chi - 1.0)).unwrap();
            let mc = joint_table_monte_carlo(&m.left, &m.right, Angle::new(1.0), Angle::new(chi - 1.0), n, k as u64);
            for ((_, _, a), (_, _, b)) in q.entries().zip(mc.entries()) {
                let sigma = (a * (1.0 - a) / n as f64).sqrt().max(1.0 / n as f64);
                assert!((a - b).abs() <= 5.0 * sigma, "chi {chi}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sliver_law_closed_form() {
        assert_eq!(sliver_rectangle_overlap(Angle::ZERO), 0.0);
        assert!((sliver_rectangle_overlap(Angle::new(PI)) - 0.125).abs() < 1e-15);
        assert!((sliver_rectangle_overlap(Angle::new(PI / 2.0)) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn sliver_law_matches_quadrature_of_seed_pair() {
        let seed = ModelPair::default_seed();
        let pair = find_sliver_pair(&seed).expect("seed embeds the sliver pair");
        assert_eq!(pair.sliver_cell.sign, crate::bell::Sign::Plus);
        assert_eq!(pair.receptor_cell, cell("-E"));
        for k in 0..256 {
            let chi = Angle::new(k as f64 * TAU / 256.0);
            let q = sliver_overlap_quadrature(&pair, chi).unwrap();
            assert!((q - sliver_rectangle_overlap(chi)).abs() <= 1e-6, "k = {k}");
        }
    }

    #[test]
    fn quadrant_has_no_sliver() {
        assert!(find_sliver_pair(&ModelPair::quadrant()).is_none());
    }
}
