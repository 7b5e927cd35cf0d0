//! Per-station setting histories.

use super::config::ExperimentConfig;
use crate::geometry::Side;
use crate::rng::{Domain, Substreams};
use crate::{Error, Result};

/// Setting index in force at a tick.
pub trait SettingLookup: Sync {
    fn setting_at(&self, tick: i64) -> Result<usize>;
    fn slot_len(&self) -> u64;
}

/// Iid uniform draw per slot, computed on demand from a counter-based stream
/// so that fast switching over billions of slots needs no storage.
#[derive(Debug, Clone)]
pub struct SettingSchedule {
    station: Side,
    slot_len: u64,
    n_settings: usize,
    /// First tick not covered.
    horizon: u64,
    streams: Substreams,
    /// Relabelling applied to every draw; identity unless set.
    relabel: Option<Vec<usize>>,
}

pub fn generate_schedule(config: &ExperimentConfig, station: Side, horizon: u64) -> SettingSchedule {
    let (phi, psi) = config.station_lists();
    let (domain, n) = match station {
        Side::Left => (Domain::ScheduleLeft, phi.len()),
        Side::Right => (Domain::ScheduleRight, psi.len()),
    };
    SettingSchedule {
        station,
        slot_len: config.slot_len(),
        n_settings: n,
        horizon,
        streams: Substreams::new(config.seed, domain),
        relabel: None,
    }
}

impl SettingSchedule {
    pub fn station(&self) -> Side {
        self.station
    }

    pub fn n_settings(&self) -> usize {
        self.n_settings
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn is_static(&self) -> bool {
        self.slot_len == u64::MAX
    }

    /// Number of slots up to the horizon.
    pub fn n_slots(&self) -> u64 {
        if self.is_static() {
            1
        } else {
            self.horizon.div_ceil(self.slot_len)
        }
    }

    pub fn slot_of(&self, tick: u64) -> u64 {
        if self.is_static() {
            0
        } else {
            tick / self.slot_len
        }
    }

    pub fn slot_start(&self, slot: u64) -> u64 {
        if self.is_static() {
            0
        } else {
            slot * self.slot_len
        }
    }

    pub fn setting_of_slot(&self, slot: u64) -> usize {
        let raw = self.streams.index_below(slot, self.n_settings);
        match &self.relabel {
            Some(p) => p[raw],
            None => raw,
        }
    }

    /// The same slot structure with every setting index `i` replaced by
    /// `perm[i]`.
    pub fn relabelled(&self, perm: Vec<usize>) -> Self {
        assert_eq!(perm.len(), self.n_settings, "permutation covers every setting");
        SettingSchedule {
            relabel: Some(perm),
            ..self.clone()
        }
    }

    /// An independent redraw of the same slot structure.
    pub fn reseeded(&self, seed: u64) -> Self {
        let domain = match self.station {
            Side::Left => Domain::ScheduleLeft,
            Side::Right => Domain::ScheduleRight,
        };
        SettingSchedule {
            streams: Substreams::new(seed, domain),
            ..self.clone()
        }
    }
}

impl SettingLookup for SettingSchedule {
    fn setting_at(&self, tick: i64) -> Result<usize> {
        if tick < 0 || tick as u64 >= self.horizon {
            return Err(Error::ScheduleRange {
                station: self.station.label().into(),
                tick,
            });
        }
        Ok(self.setting_of_slot(self.slot_of(tick as u64)))
    }

    fn slot_len(&self) -> u64 {
        self.slot_len
    }
}

/// Schedule known only on listed slots, as read back from a settings file.
#[derive(Debug, Clone)]
pub struct SparseSchedule {
    station: Side,
    slot_len: u64,
    /// `(slot start tick, setting)` sorted by start.
    slots: Vec<(u64, usize)>,
}

impl SparseSchedule {
    pub fn new(station: Side, slot_len: u64, mut slots: Vec<(u64, usize)>) -> Result<Self> {
        slots.sort_unstable();
        slots.dedup();
        if let Some(w) = slots.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain(format!(
                "{} schedule lists slot {} twice with different settings",
                station.label(),
                w[0].0
            )));
        }
        if let Some((start, _)) = slots.iter().find(|(s, _)| slot_len != u64::MAX && s % slot_len != 0) {
            return Err(Error::Domain(format!(
                "{} schedule slot start {start} is not a multiple of the slot length {slot_len}",
                station.label()
            )));
        }
        Ok(SparseSchedule {
            station,
            slot_len,
            slots,
        })
    }

    pub fn slots(&self) -> &[(u64, usize)] {
        &self.slots
    }
}

impl SettingLookup for SparseSchedule {
    fn setting_at(&self, tick: i64) -> Result<usize> {
        let missing = || Error::ScheduleRange {
            station: self.station.label().into(),
            tick,
        };
        if tick < 0 {
            return Err(missing());
        }
        let start = if self.slot_len == u64::MAX {
            0
        } else {
            tick as u64 / self.slot_len * self.slot_len
        };
        self.slots
            .binary_search_by_key(&start, |&(s, _)| s)
            .map(|i| self.slots[i].1)
            .map_err(|_| missing())
    }

    fn slot_len(&self) -> u64 {
        self.slot_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::Angle;
    use crate::sim::Switching;

    fn fast_config(n: usize) -> ExperimentConfig {
        ExperimentConfig {
            switching: Switching::Fast,
            phi: (0..n).map(|i| Angle::new(i as f64)).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn fast_settings_are_uniform() {
        let c = fast_config(4);
        let slots = 1_000_000u64;
        let s = generate_schedule(&c, Side::Left, slots * c.ticks_per_dl);
        assert_eq!(s.n_slots(), slots);
        let mut counts = [0u64; 4];
        for slot in 0..slots {
            counts[s.setting_of_slot(slot)] += 1;
        }
        let sigma = (slots as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - slots as f64 / 4.0).abs() < 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn static_schedule_has_one_slot() {
        let c = ExperimentConfig {
            switching: Switching::Static,
            ..Default::default()
        };
        let s = generate_schedule(&c, Side::Right, 1 << 40);
        assert_eq!(s.n_slots(), 1);
        let first = s.setting_at(0).unwrap();
        assert_eq!(s.setting_at((1 << 40) - 1).unwrap(), first);
    }

    #[test]
    fn same_seed_same_schedule() {
        let c = fast_config(3);
        let a = generate_schedule(&c, Side::Left, 80_000);
        let b = generate_schedule(&c, Side::Left, 80_000);
        let r = generate_schedule(&c, Side::Right, 80_000);
        let draws = |s: &SettingSchedule| (0..10_000).map(|k| s.setting_of_slot(k)).collect::<Vec<_>>();
        assert_eq!(draws(&a), draws(&b));
        assert_ne!(draws(&a), draws(&r));
    }

    #[test]
    fn queries_outside_the_run_fail() {
        let c = fast_config(2);
        let s = generate_schedule(&c, Side::Left, 100);
        assert!(s.setting_at(99).is_ok());
        assert!(matches!(s.setting_at(100), Err(Error::ScheduleRange { .. })));
        assert!(s.setting_at(-1).is_err());
    }

    #[test]
    fn sparse_schedule_answers_listed_slots_only() {
        let s = SparseSchedule::new(Side::Left, 8, vec![(16, 2), (0, 1)]).unwrap();
        assert_eq!(s.setting_at(3).unwrap(), 1);
        assert_eq!(s.setting_at(23).unwrap(), 2);
        assert!(s.setting_at(8).is_err());
        assert!(SparseSchedule::new(Side::Left, 8, vec![(0, 1), (0, 2)]).is_err());
        assert!(SparseSchedule::new(Side::Left, 8, vec![(3, 1)]).is_err());
    }
}
