//! Event-level simulation of the two-station experiment.
//!
//! Time is counted in integer ticks, with `K` ticks per path difference. A
//! pair emitted at `t` reaches both stations along the short path at
//! `t_E = t + D/c`; a late detection happens at `t_E + K`. Each station sees
//! only its own switch, sampled at the retarded time `tick - t_ret`.

pub mod config;
pub mod io;
pub mod schedule;

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::bell::{Angle, Sign, Slot};
use crate::geometry::{HiddenVars, ModelPair, RegionModel, Side};
use crate::rng::{Domain, Substreams};
use crate::{Error, Result};
pub use config::{Engine, ExperimentConfig, Switching};
pub use schedule::{generate_schedule, SettingLookup, SettingSchedule, SparseSchedule};

/// Marks a detection whose originating pair is unknown.
pub const NO_PAIR: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub tick: u64,
    pub sign: Sign,
    /// Index of the emitted pair; a white-box tag never used for pairing.
    pub pair: u32,
}

impl Detection {
    const EMPTY: Detection = Detection {
        tick: 0,
        sign: Sign::Plus,
        pair: NO_PAIR,
    };
}

/// Hidden quantities of one emitted pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    /// Hidden variables of the LHV engine; NaN for the QM engine.
    pub theta: f64,
    pub r: f64,
    pub slot_left: Slot,
    pub slot_right: Slot,
    /// Unobservable slot of a QM coincidence.
    pub branch: Option<Slot>,
}

impl TruthRecord {
    const EMPTY: TruthRecord = TruthRecord {
        theta: f64::NAN,
        r: f64::NAN,
        slot_left: Slot::Early,
        slot_right: Slot::Early,
        branch: None,
    };
}

/// One station as seen by the LHV engine.
pub struct Station<'a> {
    pub model: &'a RegionModel,
    pub schedule: &'a dyn SettingLookup,
    pub angles: &'a [Angle],
    pub k: u64,
    pub t_ret: u64,
    pub beamsplitters: bool,
}

impl Station<'_> {
    fn setting(&self, tick: u64) -> Result<Angle> {
        let idx = self.schedule.setting_at(tick as i64 - self.t_ret as i64)?;
        Ok(self.angles[idx])
    }
}

/// Sign and detection tick of one station for hidden variables `hv` and
/// short-path arrival `t_e`.
///
/// The slot is fixed by the setting at `t_e - t_ret`; the sign by the setting
/// at `t_d - t_ret`, which differs from the first only for late detections.
pub fn station_response_lhv(station: &Station<'_>, hv: HiddenVars, t_e: u64) -> Result<(Sign, u64)> {
    if !station.beamsplitters {
        return Ok((Sign::Plus, t_e));
    }
    let slot = station.model.evaluate(station.setting(t_e)?, hv).slot;
    let t_d = match slot {
        Slot::Early => t_e,
        Slot::Late => t_e + station.k,
    };
    let sign = station.model.evaluate(station.setting(t_d)?, hv).sign;
    Ok((sign, t_d))
}

/// Emission ticks: a renewal process with exponential intervals, one
/// substream per pair.
pub fn emission_ticks(config: &ExperimentConfig) -> Vec<u64> {
    let streams = Substreams::new(config.seed, Domain::Emission);
    let exp = Exp::new(1.0 / config.mean_interval).expect("validated mean interval");
    let intervals: Vec<f64> = (0..config.n_pairs)
        .into_par_iter()
        .map(|i| exp.sample(&mut streams.stream(i)))
        .collect();
    let mut t = 0.0;
    intervals
        .iter()
        .map(|x| {
            t += x;
            t.floor() as u64
        })
        .collect()
}

/// First tick after the last possible detection.
pub fn run_horizon(config: &ExperimentConfig, emissions: &[u64]) -> u64 {
    emissions.last().copied().unwrap_or(0) + config.transit() + config.ticks_per_dl + 1
}

pub struct Detections {
    /// Time-sorted.
    pub left: Vec<Detection>,
    pub right: Vec<Detection>,
    /// Indexed by pair, present in white-box runs.
    pub truth: Option<Vec<TruthRecord>>,
}

pub struct SimulationOutput {
    pub config: ExperimentConfig,
    pub detections: Detections,
    pub left_schedule: SettingSchedule,
    pub right_schedule: SettingSchedule,
}

impl SimulationOutput {
    pub fn left(&self) -> &[Detection] {
        &self.detections.left
    }

    pub fn right(&self) -> &[Detection] {
        &self.detections.right
    }

    pub fn truth(&self) -> Option<&[TruthRecord]> {
        self.detections.truth.as_deref()
    }
}

/// Runs the configured experiment end to end.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SimulationOutput> {
    config.validate()?;
    let model = match config.engine {
        Engine::Lhv => Some(ModelPair::load(&config.model)?),
        Engine::Qm => None,
    };
    let emissions = emission_ticks(config);
    let horizon = run_horizon(config, &emissions);
    let left_schedule = generate_schedule(config, Side::Left, horizon);
    let right_schedule = generate_schedule(config, Side::Right, horizon);
    let detections = simulate_emissions(config, model.as_ref(), &emissions, &left_schedule, &right_schedule)?;
    Ok(SimulationOutput {
        config: config.clone(),
        detections,
        left_schedule,
        right_schedule,
    })
}

/// Runs the experiment against caller-supplied schedules.
pub fn simulate_with(
    config: &ExperimentConfig,
    model: Option<&ModelPair>,
    left: &dyn SettingLookup,
    right: &dyn SettingLookup,
) -> Result<Detections> {
    config.validate()?;
    let emissions = emission_ticks(config);
    simulate_emissions(config, model, &emissions, left, right)
}

const CHUNK: usize = 1 << 14;

fn simulate_emissions(
    config: &ExperimentConfig,
    model: Option<&ModelPair>,
    emissions: &[u64],
    left: &dyn SettingLookup,
    right: &dyn SettingLookup,
) -> Result<Detections> {
    if config.engine == Engine::Lhv && model.is_none() {
        return Err(Error::Domain("the LHV engine needs a region model".into()));
    }
    let (phi, psi) = config.station_lists();
    let ctx = PairContext {
        config,
        model,
        left,
        right,
        phi: &phi,
        psi: &psi,
        streams: Substreams::new(config.seed, Domain::Pair),
    };

    let n = emissions.len();
    let mut l = vec![Detection::EMPTY; n];
    let mut r = vec![Detection::EMPTY; n];
    let mut truth = if config.whitebox {
        vec![TruthRecord::EMPTY; n]
    } else {
        Vec::new()
    };
    let run_chunk = |c: usize, lc: &mut [Detection], rc: &mut [Detection], tc: Option<&mut [TruthRecord]>| {
        let mut tc = tc;
        for k in 0..lc.len() {
            let i = c * CHUNK + k;
            let (a, b, t) = ctx.simulate_pair(i as u32, emissions[i])?;
            lc[k] = a;
            rc[k] = b;
            if let Some(tc) = tc.as_deref_mut() {
                tc[k] = t;
            }
        }
        Ok::<(), Error>(())
    };
    if config.whitebox {
        l.par_chunks_mut(CHUNK)
            .zip(r.par_chunks_mut(CHUNK))
            .zip(truth.par_chunks_mut(CHUNK))
            .enumerate()
            .try_for_each(|(c, ((lc, rc), tc))| run_chunk(c, lc, rc, Some(tc)))?;
    } else {
        l.par_chunks_mut(CHUNK)
            .zip(r.par_chunks_mut(CHUNK))
            .enumerate()
            .try_for_each(|(c, (lc, rc))| run_chunk(c, lc, rc, None))?;
    }
    // pair indices are unique per station, so the order is total
    l.par_sort_unstable_by_key(|d| (d.tick, d.pair));
    r.par_sort_unstable_by_key(|d| (d.tick, d.pair));
    Ok(Detections {
        left: l,
        right: r,
        truth: config.whitebox.then_some(truth),
    })
}

struct PairContext<'a> {
    config: &'a ExperimentConfig,
    model: Option<&'a ModelPair>,
    left: &'a dyn SettingLookup,
    right: &'a dyn SettingLookup,
    phi: &'a [Angle],
    psi: &'a [Angle],
    streams: Substreams,
}

fn slot_of(t_d: u64, t_e: u64) -> Slot {
    if t_d == t_e {
        Slot::Early
    } else {
        Slot::Late
    }
}

impl PairContext<'_> {
    fn simulate_pair(&self, pair: u32, t_emit: u64) -> Result<(Detection, Detection, TruthRecord)> {
        let c = self.config;
        let t_e = t_emit + c.transit();
        let mut rng = self.streams.stream(u64::from(pair));
        let det = |tick, sign| Detection { tick, sign, pair };
        match c.engine {
            Engine::Lhv => {
                let model = self.model.expect("checked by caller");
                let hv = HiddenVars::new(rng.random::<f64>() * TAU, rng.random::<f64>());
                let station = |model, schedule, angles, t_ret, beamsplitters| Station {
                    model,
                    schedule,
                    angles,
                    k: c.ticks_per_dl,
                    t_ret,
                    beamsplitters,
                };
                let left = station(&model.left, self.left, self.phi, c.t_ret_left, c.beamsplitters_left);
                let right = station(&model.right, self.right, self.psi, c.t_ret_right, c.beamsplitters_right);
                let (sl, tl) = station_response_lhv(&left, hv, t_e)?;
                let (sr, tr) = station_response_lhv(&right, hv, t_e)?;
                let truth = TruthRecord {
                    theta: hv.theta.radians(),
                    r: hv.r,
                    slot_left: slot_of(tl, t_e),
                    slot_right: slot_of(tr, t_e),
                    branch: None,
                };
                Ok((det(tl, sl), det(tr, sr), truth))
            }
            Engine::Qm => {
                let k = c.ticks_per_dl;
                let class: f64 = rng.random();
                let random_sign = |rng: &mut rand_chacha::ChaCha8Rng| {
                    if rng.random::<bool>() {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    }
                };
                let (mut dl, mut dr, branch) = if class < 0.5 {
                    let branch = if rng.random::<bool>() { Slot::Late } else { Slot::Early };
                    let t_d = t_e + if branch == Slot::Late { k } else { 0 };
                    let phi = self.phi[self.left.setting_at(t_d as i64 - c.t_ret_left as i64)?];
                    let psi = self.psi[self.right.setting_at(t_d as i64 - c.t_ret_right as i64)?];
                    let p_same = 0.5 * (1.0 + c.visibility * (phi + psi).cos());
                    let same = rng.random::<f64>() < p_same;
                    let sl = random_sign(&mut rng);
                    let sr = match (same, sl) {
                        (true, s) => s,
                        (false, Sign::Plus) => Sign::Minus,
                        (false, Sign::Minus) => Sign::Plus,
                    };
                    (det(t_d, sl), det(t_d, sr), Some(branch))
                } else {
                    let (tl, tr) = if class < 0.75 { (t_e, t_e + k) } else { (t_e + k, t_e) };
                    let sl = random_sign(&mut rng);
                    let sr = random_sign(&mut rng);
                    (det(tl, sl), det(tr, sr), None)
                };
                // without beamsplitters the photon only takes the short path to detector +1
                if !c.beamsplitters_left {
                    dl = det(t_e, Sign::Plus);
                }
                if !c.beamsplitters_right {
                    dr = det(t_e, Sign::Plus);
                }
                let truth = TruthRecord {
                    theta: f64::NAN,
                    r: f64::NAN,
                    slot_left: slot_of(dl.tick, t_e),
                    slot_right: slot_of(dr.tick, t_e),
                    branch: branch.filter(|_| c.beamsplitters_left && c.beamsplitters_right),
                };
                Ok((dl, dr, truth))
            }
        }
    }
}

#[cfg(test)]
mod tests;
