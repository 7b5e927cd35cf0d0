//! Closed-form two-photon predictions and Bell-type functionals.
//!
//! Settings enter the coincidence statistics only through the sum
//! `chi = phi + psi`. Correlations are `E = P(same) - P(different)` on whatever
//! ensemble is being considered; the chained functional below accepts any
//! lookup so the same code serves closed forms, quadrature and Monte-Carlo
//! estimates.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::{Error, Result};

/// A phase angle reduced into `[0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn new(radians: f64) -> Self {
        Angle(reduce(radians))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Representative in `(-pi, pi]`, used when printing settings.
    pub fn signed(self) -> f64 {
        if self.0 > PI {
            self.0 - TAU
        } else {
            self.0
        }
    }

    pub fn cos(self) -> f64 {
        self.0.cos()
    }
}

/// Reduce modulo `2pi` into `[0, 2pi)`.
pub fn reduce(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle::new(self.0 + rhs.0)
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle::new(self.0 - rhs.0)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle::new(-self.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.6}", self.signed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// Detection time slot: early (short path) or late (long path).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Early,
    Late,
}

impl Slot {
    pub fn label(self) -> &'static str {
        match self {
            Slot::Early => "E",
            Slot::Late => "L",
        }
    }

    pub fn parse(s: &str) -> Option<Slot> {
        match s {
            "E" => Some(Slot::Early),
            "L" => Some(Slot::Late),
            _ => None,
        }
    }
}

/// Per-station measurement result: a sign and a time slot.
///
/// Ordered `+E, -E, +L, -L`; [`OutcomeCell::index`] follows the same order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutcomeCell {
    pub sign: Sign,
    pub slot: Slot,
}

impl OutcomeCell {
    pub const ALL: [OutcomeCell; 4] = [
        OutcomeCell::new(Sign::Plus, Slot::Early),
        OutcomeCell::new(Sign::Minus, Slot::Early),
        OutcomeCell::new(Sign::Plus, Slot::Late),
        OutcomeCell::new(Sign::Minus, Slot::Late),
    ];

    pub const fn new(sign: Sign, slot: Slot) -> Self {
        OutcomeCell { sign, slot }
    }

    pub fn index(self) -> usize {
        let s = match self.sign {
            Sign::Plus => 0,
            Sign::Minus => 1,
        };
        let t = match self.slot {
            Slot::Early => 0,
            Slot::Late => 2,
        };
        s + t
    }

    pub fn from_index(i: usize) -> OutcomeCell {
        OutcomeCell::ALL[i]
    }

    pub fn label(self) -> &'static str {
        ["+E", "-E", "+L", "-L"][self.index()]
    }

    pub fn parse(s: &str) -> Option<OutcomeCell> {
        OutcomeCell::ALL.into_iter().find(|c| c.label() == s)
    }
}

impl PartialOrd for OutcomeCell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OutcomeCell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.index().cmp(&other.index())
    }
}

impl fmt::Display for OutcomeCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sixteen joint probabilities indexed by `[left cell][right cell]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointTable {
    pub p: [[f64; 4]; 4],
}

impl JointTable {
    pub fn get(&self, left: OutcomeCell, right: OutcomeCell) -> f64 {
        self.p[left.index()][right.index()]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn left_marginal(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (i, row) in self.p.iter().enumerate() {
            m[i] = row.iter().sum();
        }
        m
    }

    pub fn right_marginal(&self) -> [f64; 4] {
        let mut m = [0.0; 4];
        for row in &self.p {
            for (j, v) in row.iter().enumerate() {
                m[j] += v;
            }
        }
        m
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &JointTable) -> f64 {
        self.p
            .iter()
            .flatten()
            .zip(other.p.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Flattened entries in row-major `(left, right)` order.
    pub fn entries(&self) -> impl Iterator<Item = (OutcomeCell, OutcomeCell, f64)> + '_ {
        (0..16).map(move |k| {
            let (i, j) = (k / 4, k % 4);
            (OutcomeCell::from_index(i), OutcomeCell::from_index(j), self.p[i][j])
        })
    }

    /// Correlation of the signs restricted to pairs whose slots are
    /// `(left_slot, right_slot)`, with the weight of that slot class.
    pub fn slot_correlation(&self, left_slot: Slot, right_slot: Slot) -> (f64, f64) {
        let mut weight = 0.0;
        let mut corr = 0.0;
        for (l, r, p) in self.entries() {
            if l.slot == left_slot && r.slot == right_slot {
                weight += p;
                corr += p * f64::from(l.sign.value() * r.sign.value());
            }
        }
        if weight > 0.0 {
            (corr / weight, weight)
        } else {
            (0.0, 0.0)
        }
    }
}

fn check_visibility(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("visibility {v} is outside [0, 1]")))
    }
}

/// Probability of the coincident outcome `(l, m)` at settings `(phi, psi)`,
/// with interference contrast `visibility`.
pub fn coincidence_probability(l: Sign, m: Sign, phi: Angle, psi: Angle, visibility: f64) -> Result<f64> {
    check_visibility(visibility)?;
    let lm = f64::from(l.value() * m.value());
    Ok((1.0 + visibility * lm * (phi + psi).cos()) / 8.0)
}

/// Probability of one of the two non-coincident time classes with signs
/// `(l, m)`; no interference, so it is flat.
pub fn noncoincidence_probability(_l: Sign, _m: Sign) -> f64 {
    1.0 / 16.0
}

/// The joint table every valid hidden-variable model has to reproduce.
///
/// Coincident probability is split evenly between the early-early and
/// late-late classes; mixed-slot entries are flat.
pub fn target_table(chi: Angle) -> JointTable {
    let c = chi.cos();
    let mut t = JointTable::default();
    for l in OutcomeCell::ALL {
        for r in OutcomeCell::ALL {
            t.p[l.index()][r.index()] = if l.slot == r.slot {
                let lm = f64::from(l.sign.value() * r.sign.value());
                (1.0 + lm * c) / 16.0
            } else {
                1.0 / 16.0
            };
        }
    }
    t
}

/// Conditional correlation on coincident events.
pub fn conditional_correlation_qm(phi: Angle, psi: Angle, visibility: f64) -> Result<f64> {
    check_visibility(visibility)?;
    Ok(visibility * (phi + psi).cos())
}

/// Chained Bell expression over `n` settings per side.
///
/// `corr(i, j)` returns the correlation at the `i`-th left and `j`-th right
/// setting (zero-based). The expression is
/// `sum_k |E(k,k) + E(k+1,k)| + |E(n-1,n-1) - E(0,n-1)|`; `n = 2` is CHSH.
pub fn chained_quantity<F>(n: usize, mut corr: F) -> Result<f64>
where
    F: FnMut(usize, usize) -> Option<f64>,
{
    if n < 2 {
        return Err(Error::Domain(format!("chained quantity needs N >= 2, got {n}")));
    }
    let mut get = |i: usize, j: usize| corr(i, j).ok_or(Error::MissingCorrelation { phi: i, psi: j });
    let mut total = 0.0;
    for k in 0..n - 1 {
        total += (get(k, k)? + get(k + 1, k)?).abs();
    }
    total += (get(n - 1, n - 1)? - get(0, n - 1)?).abs();
    Ok(total)
}

/// The `(phi, psi)` index pairs that appear in the chained expression.
pub fn chain_terms(n: usize) -> Vec<(usize, usize)> {
    let mut terms = Vec::with_capacity(2 * n);
    for k in 0..n - 1 {
        terms.push((k, k));
        terms.push((k + 1, k));
    }
    terms.push((n - 1, n - 1));
    terms.push((0, n - 1));
    terms
}

/// Which ensemble a chained bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ensemble {
    /// A setting-independent (late-late) subensemble: the ordinary bound.
    PureLateLate,
    /// All coincidences after selection: half late-late, half early-early.
    Coincident,
}

/// Local bound of the chained expression.
pub fn lhv_bound(n: usize, ensemble: Ensemble) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("N must be at least 2, got {n}")));
    }
    let n = n as f64;
    Ok(match ensemble {
        Ensemble::PureLateLate => 2.0 * n - 2.0,
        Ensemble::Coincident => 2.0 * n - 1.0,
    })
}

/// Quantum maximum `2N cos(pi / 2N)` of the chained expression.
pub fn qm_max(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("N must be at least 2, got {n}")));
    }
    let n = n as f64;
    Ok(2.0 * n * (PI / (2.0 * n)).cos())
}

/// Minimum visibility for which the coincident-ensemble chained bound can be
/// exceeded. Values above 1 mean no violation is possible.
pub fn visibility_threshold(n: usize) -> Result<f64> {
    Ok(lhv_bound(n, Ensemble::Coincident)? / qm_max(n)?)
}

/// Settings for a chained test: `phi_1..phi_N`, `psi_1..psi_N` and optional
/// filter settings `(phi_0, psi_0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    pub phi: Vec<Angle>,
    pub psi: Vec<Angle>,
    pub filter: Option<(Angle, Angle)>,
}

impl AngleSet {
    pub fn new(phi: Vec<Angle>, psi: Vec<Angle>, filter: Option<(Angle, Angle)>) -> Result<Self> {
        if phi.len() != psi.len() || phi.len() < 2 {
            return Err(Error::Domain(format!(
                "angle set needs equal lists of at least 2 entries, got {} and {}",
                phi.len(),
                psi.len()
            )));
        }
        Ok(AngleSet { phi, psi, filter })
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Chained expression for a correlation given as a function of the angles.
    pub fn chained_with<F>(&self, mut corr: F) -> Result<f64>
    where
        F: FnMut(Angle, Angle) -> f64,
    {
        chained_quantity(self.n(), |i, j| Some(corr(self.phi[i], self.psi[j])))
    }

    /// Left settings as switched in an experiment: `phi_0` first when a
    /// filter is present, so chain index `k` maps to list index `k + 1`.
    pub fn station_lists(&self) -> (Vec<Angle>, Vec<Angle>) {
        match self.filter {
            Some((f0, g0)) => {
                let mut phi = vec![f0];
                phi.extend(&self.phi);
                let mut psi = vec![g0];
                psi.extend(&self.psi);
                (phi, psi)
            }
            None => (self.phi.clone(), self.psi.clone()),
        }
    }
}

/// Settings that maximise the chained expression for `cos(phi + psi)`:
/// `phi_j = -(j-1) pi / N`, `psi_k = (2k-1) pi / 2N`.
pub fn canonical_angles(n: usize) -> Result<AngleSet> {
    if n < 2 {
        return Err(Error::Domain(format!("N must be at least 2, got {n}")));
    }
    let nf = n as f64;
    let phi = (0..n).map(|j| Angle::new(-(j as f64) * PI / nf)).collect();
    let psi = (0..n)
        .map(|k| Angle::new((2.0 * k as f64 + 1.0) * PI / (2.0 * nf)))
        .collect();
    AngleSet::new(phi, psi, None)
}
