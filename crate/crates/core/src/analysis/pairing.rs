//! Reconstruction of pairs from two detection streams.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::bell::Sign;
use crate::sim::{Detection, SettingLookup, NO_PAIR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    Coincident,
    /// Left detection `K` ticks after the right one.
    LeftLate,
    RightLate,
}

impl PairClass {
    pub fn label(self) -> &'static str {
        match self {
            PairClass::Coincident => "coincident",
            PairClass::LeftLate => "left-late",
            PairClass::RightLate => "right-late",
        }
    }
}

impl fmt::Display for PairClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PairClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "coincident" => Ok(PairClass::Coincident),
            "left-late" => Ok(PairClass::LeftLate),
            "right-late" => Ok(PairClass::RightLate),
            _ => Err(format!("unknown pair class {s:?}")),
        }
    }
}

/// A matched pair with the settings each station saw.
///
/// Setting fields are indices into the station angle lists, ordered
/// `[left, right]`. Early settings are read at `t_d - K - t_ret` and late ones
/// at `t_d - t_ret`, each from the station's own detection tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRecord {
    pub t_left: u64,
    pub t_right: u64,
    pub sign_l: Sign,
    pub sign_r: Sign,
    pub class: PairClass,
    pub early: [u32; 2],
    pub late: [u32; 2],
    /// Emission tags of the two detections, [`NO_PAIR`] when unknown.
    pub tags: [u32; 2],
}

impl PairRecord {
    pub fn same_sign(&self) -> bool {
        self.sign_l == self.sign_r
    }

    /// Both detections are known to come from the same emission.
    pub fn true_pair(&self) -> Option<u32> {
        (self.tags[0] == self.tags[1] && self.tags[0] != NO_PAIR).then_some(self.tags[0])
    }
}

/// Counts from one pairing pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairingSummary {
    pub left_detections: u64,
    pub right_detections: u64,
    pub coincident: u64,
    pub left_late: u64,
    pub right_late: u64,
    /// Matches at a time difference that is neither `0` nor `K`.
    pub accidental: u64,
    pub orphan_left: u64,
    pub orphan_right: u64,
}

impl PairingSummary {
    pub fn classified(&self) -> u64 {
        self.coincident + self.left_late + self.right_late
    }
}

/// A classified match before setting lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub left: Detection,
    pub right: Detection,
    pub class: PairClass,
}

fn check_sorted(v: &[Detection]) -> Result<()> {
    match v.windows(2).position(|w| w[0].tick > w[1].tick) {
        Some(i) => Err(Error::Unsorted(i + 1)),
        None => Ok(()),
    }
}

/// Greedy nearest-neighbour matching of two time-sorted streams.
///
/// Detections closer than `max_window` are grouped into clusters. Inside a
/// cluster, candidate matches are accepted in order of increasing time
/// difference, ties going to the earlier right detection, and each detection
/// is used at most once. Matches at a difference other than `0` or `K` are
/// counted as accidental and dropped.
pub fn pair_detections(
    left: &[Detection],
    right: &[Detection],
    k: u64,
    max_window: u64,
) -> Result<(Vec<Match>, PairingSummary)> {
    check_sorted(left)?;
    check_sorted(right)?;
    let mut summary = PairingSummary {
        left_detections: left.len() as u64,
        right_detections: right.len() as u64,
        ..Default::default()
    };
    let mut out = Vec::with_capacity(left.len().min(right.len()));
    let mut scratch = Cluster::default();
    let (mut i, mut j) = (0, 0);
    while i < left.len() || j < right.len() {
        let (i0, j0) = (i, j);
        let mut last = match (left.get(i), right.get(j)) {
            (Some(l), Some(r)) => l.tick.min(r.tick),
            (Some(l), None) => l.tick,
            (None, Some(r)) => r.tick,
            (None, None) => unreachable!(),
        };
        loop {
            let nl = left.get(i).filter(|d| d.tick <= last + max_window);
            let nr = right.get(j).filter(|d| d.tick <= last + max_window);
            match (nl, nr) {
                (Some(l), Some(r)) if l.tick <= r.tick => {
                    last = last.max(l.tick);
                    i += 1;
                }
                (_, Some(r)) => {
                    last = last.max(r.tick);
                    j += 1;
                }
                (Some(l), None) => {
                    last = last.max(l.tick);
                    i += 1;
                }
                (None, None) => break,
            }
        }
        scratch.resolve(&left[i0..i], &right[j0..j], k, max_window, &mut out, &mut summary);
    }
    Ok((out, summary))
}

#[derive(Default)]
struct Cluster {
    left: Vec<Detection>,
    right: Vec<Detection>,
    candidates: Vec<(u64, u64, u64, usize, usize)>,
    used_left: Vec<bool>,
    used_right: Vec<bool>,
    found: Vec<Match>,
}

impl Cluster {
    fn resolve(
        &mut self,
        left: &[Detection],
        right: &[Detection],
        k: u64,
        window: u64,
        out: &mut Vec<Match>,
        summary: &mut PairingSummary,
    ) {
        let classify = |l: &Detection, r: &Detection| {
            if l.tick == r.tick {
                Some(PairClass::Coincident)
            } else if l.tick == r.tick + k {
                Some(PairClass::LeftLate)
            } else if r.tick == l.tick + k {
                Some(PairClass::RightLate)
            } else {
                None
            }
        };
        let mut emit = |l: Detection, r: Detection, found: &mut Vec<Match>| match classify(&l, &r) {
            Some(class) => {
                match class {
                    PairClass::Coincident => summary.coincident += 1,
                    PairClass::LeftLate => summary.left_late += 1,
                    PairClass::RightLate => summary.right_late += 1,
                }
                found.push(Match {
                    left: l,
                    right: r,
                    class,
                });
            }
            None => summary.accidental += 1,
        };

        if left.len() <= 1 && right.len() <= 1 {
            match (left.first(), right.first()) {
                (Some(&l), Some(&r)) if l.tick.abs_diff(r.tick) <= window => emit(l, r, out),
                (l, r) => {
                    summary.orphan_left += l.is_some() as u64;
                    summary.orphan_right += r.is_some() as u64;
                }
            }
            return;
        }

        // canonical order so that input order among equal ticks is irrelevant
        let key = |d: &Detection| (d.tick, d.sign.value(), d.pair);
        self.left.clear();
        self.left.extend_from_slice(left);
        self.left.sort_by_key(key);
        self.right.clear();
        self.right.extend_from_slice(right);
        self.right.sort_by_key(key);

        self.candidates.clear();
        for (a, l) in self.left.iter().enumerate() {
            for (b, r) in self.right.iter().enumerate() {
                let gap = l.tick.abs_diff(r.tick);
                if gap <= window {
                    self.candidates.push((gap, r.tick, l.tick, b, a));
                }
            }
        }
        self.candidates.sort_unstable();
        self.used_left.clear();
        self.used_left.resize(self.left.len(), false);
        self.used_right.clear();
        self.used_right.resize(self.right.len(), false);
        self.found.clear();
        for &(_, _, _, b, a) in &self.candidates {
            if !self.used_left[a] && !self.used_right[b] {
                self.used_left[a] = true;
                self.used_right[b] = true;
                emit(self.left[a], self.right[b], &mut self.found);
            }
        }
        self.found.sort_by_key(|m| (m.left.tick, m.right.tick));
        out.extend_from_slice(&self.found);
        summary.orphan_left += self.used_left.iter().filter(|u| !**u).count() as u64;
        summary.orphan_right += self.used_right.iter().filter(|u| !**u).count() as u64;
    }
}

/// Station timing needed to look up settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub k: u64,
    pub t_ret_left: u64,
    pub t_ret_right: u64,
}

/// Attaches early and late settings to every match.
pub fn attach_settings(
    matches: &[Match],
    left: &dyn SettingLookup,
    right: &dyn SettingLookup,
    timing: Timing,
) -> Result<Vec<PairRecord>> {
    let at = |s: &dyn SettingLookup, tick: u64, back: u64| -> Result<u32> {
        Ok(s.setting_at(tick as i64 - back as i64)? as u32)
    };
    let Timing {
        k,
        t_ret_left,
        t_ret_right,
    } = timing;
    matches
        .iter()
        .map(|m| {
            let (tl, tr) = (m.left.tick, m.right.tick);
            Ok(PairRecord {
                t_left: tl,
                t_right: tr,
                sign_l: m.left.sign,
                sign_r: m.right.sign,
                class: m.class,
                early: [at(left, tl, k + t_ret_left)?, at(right, tr, k + t_ret_right)?],
                late: [at(left, tl, t_ret_left)?, at(right, tr, t_ret_right)?],
                tags: [m.left.pair, m.right.pair],
            })
        })
        .collect()
}

/// Writes `t_left,t_right,sign_l,sign_r,class,early_phi,early_psi,late_phi,late_psi`.
pub fn write_pairs(path: &Path, pairs: &[PairRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::with_capacity(1 << 20, f));
    w.write_record([
        "t_left",
        "t_right",
        "sign_l",
        "sign_r",
        "class",
        "early_phi",
        "early_psi",
        "late_phi",
        "late_psi",
    ])?;
    for p in pairs {
        w.write_record([
            p.t_left.to_string(),
            p.t_right.to_string(),
            p.sign_l.value().to_string(),
            p.sign_r.value().to_string(),
            p.class.label().to_string(),
            p.early[0].to_string(),
            p.early[1].to_string(),
            p.late[0].to_string(),
            p.late[1].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::with_capacity(1 << 20, f));
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    while r.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line()) as usize;
        let bad = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        if rec.len() != 9 {
            return Err(bad(format!("expected 9 columns, found {}", rec.len())));
        }
        let num = |i: usize| {
            rec[i]
                .parse::<u64>()
                .map_err(|_| bad(format!("bad number {:?}", &rec[i])))
        };
        let idx = |i: usize| {
            rec[i]
                .parse::<u32>()
                .map_err(|_| bad(format!("bad setting index {:?}", &rec[i])))
        };
        let sign = |i: usize| {
            rec[i]
                .parse::<i64>()
                .ok()
                .and_then(Sign::from_value)
                .ok_or_else(|| bad(format!("bad sign {:?}", &rec[i])))
        };
        out.push(PairRecord {
            t_left: num(0)?,
            t_right: num(1)?,
            sign_l: sign(2)?,
            sign_r: sign(3)?,
            class: rec[4].parse().map_err(bad)?,
            early: [idx(5)?, idx(6)?],
            late: [idx(7)?, idx(8)?],
            tags: [NO_PAIR; 2],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(tick: u64, sign: Sign, pair: u32) -> Detection {
        Detection { tick, sign, pair }
    }

    fn plus(tick: u64) -> Detection {
        det(tick, Sign::Plus, NO_PAIR)
    }

    #[test]
    fn equal_ticks_are_coincident() {
        let (m, s) = pair_detections(&[plus(100)], &[plus(100)], 8, 16).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].class, PairClass::Coincident);
        assert_eq!(s.coincident, 1);
    }

    #[test]
    fn later_left_detection_is_left_late() {
        let (m, _) = pair_detections(&[plus(108)], &[plus(100)], 8, 16).unwrap();
        assert_eq!(m[0].class, PairClass::LeftLate);
        let (m, _) = pair_detections(&[plus(100)], &[plus(108)], 8, 16).unwrap();
        assert_eq!(m[0].class, PairClass::RightLate);
    }

    #[test]
    fn each_detection_is_used_once() {
        let (m, s) = pair_detections(&[plus(100), plus(104)], &[plus(100)], 8, 16).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].left.tick, 100);
        assert_eq!((s.orphan_left, s.orphan_right), (1, 0));
    }

    #[test]
    fn odd_differences_are_accidental() {
        let (m, s) = pair_detections(&[plus(100)], &[plus(103)], 8, 16).unwrap();
        assert!(m.is_empty());
        assert_eq!(s.accidental, 1);
        let (m, s) = pair_detections(&[plus(100)], &[plus(200)], 8, 16).unwrap();
        assert!(m.is_empty());
        assert_eq!((s.orphan_left, s.orphan_right, s.accidental), (1, 1, 0));
    }

    #[test]
    fn ties_go_to_the_earlier_right_detection() {
        let (m, s) = pair_detections(&[plus(108)], &[plus(100), plus(116)], 8, 16).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].right.tick, 100);
        assert_eq!(s.orphan_right, 1);
    }

    #[test]
    fn nearest_match_wins_across_a_cluster() {
        // 100-108 is a valid late pair, but 108-108 is nearer
        let (m, s) = pair_detections(&[plus(100), plus(108)], &[plus(108)], 8, 16).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].class, PairClass::Coincident);
        assert_eq!(s.orphan_left, 1);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let err = pair_detections(&[plus(5), plus(3)], &[], 8, 16).unwrap_err();
        assert!(matches!(err, Error::Unsorted(1)));
    }

    #[test]
    fn settings_are_read_at_the_causal_times() {
        use crate::geometry::Side;
        use crate::sim::SparseSchedule;
        let left = SparseSchedule::new(Side::Left, 8, vec![(88, 1), (96, 2)]).unwrap();
        let right = SparseSchedule::new(Side::Right, 8, vec![(80, 3), (88, 0)]).unwrap();
        let m = Match {
            left: plus(100),
            right: plus(92),
            class: PairClass::LeftLate,
        };
        let timing = Timing {
            k: 8,
            t_ret_left: 2,
            t_ret_right: 2,
        };
        let p = attach_settings(&[m], &left, &right, timing).unwrap()[0];
        assert_eq!(p.early, [1, 3]);
        assert_eq!(p.late, [2, 0]);
    }

    #[test]
    fn pairs_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let p = PairRecord {
            t_left: 10,
            t_right: 2,
            sign_l: Sign::Minus,
            sign_r: Sign::Plus,
            class: PairClass::LeftLate,
            early: [0, 1],
            late: [2, 3],
            tags: [NO_PAIR; 2],
        };
        write_pairs(&path, &[p, p]).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), vec![p, p]);
    }

    fn stream() -> impl Strategy<Value = Vec<Detection>> {
        prop::collection::vec((0u64..400, any::<bool>(), 0u32..4), 0..40).prop_map(|v| {
            let mut d: Vec<_> = v
                .into_iter()
                .map(|(t, s, p)| det(t, if s { Sign::Plus } else { Sign::Minus }, p))
                .collect();
            d.sort_by_key(|d| d.tick);
            d
        })
    }

    proptest! {
        #[test]
        fn pairing_ignores_input_order(left in stream(), right in stream(), seed in any::<u64>()) {
            let (a, sa) = pair_detections(&left, &right, 8, 16).unwrap();
            let shuffle = |v: &[Detection], salt: u64| {
                let mut v = v.to_vec();
                v.sort_by_key(|d| (d.tick, (d.pair as u64 ^ salt).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
                v
            };
            let (b, sb) = pair_detections(&shuffle(&left, seed), &shuffle(&right, !seed), 8, 16).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(sa, sb);
        }

        #[test]
        fn every_detection_is_accounted_for(left in stream(), right in stream()) {
            let (m, s) = pair_detections(&left, &right, 8, 16).unwrap();
            prop_assert_eq!(m.len() as u64, s.classified());
            prop_assert_eq!(s.classified() + s.accidental + s.orphan_left, left.len() as u64);
            prop_assert_eq!(s.classified() + s.accidental + s.orphan_right, right.len() as u64);
            for x in &m {
                let gap = x.left.tick.abs_diff(x.right.tick);
                prop_assert!(gap == 0 || gap == 8);
            }
        }
    }
}
