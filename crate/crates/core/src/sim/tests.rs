use super::*;
use crate::bell::{target_table, OutcomeCell};
use crate::geometry::ModelPair;

fn lhv_config(n_pairs: u64) -> ExperimentConfig {
    ExperimentConfig {
        engine: Engine::Lhv,
        n_pairs,
        model: "analytic".into(),
        ..Default::default()
    }
}

fn fixed(station: Side, setting: usize) -> SparseSchedule {
    SparseSchedule::new(station, u64::MAX, vec![(0, setting)]).unwrap()
}

/// Slot boundaries every `len` ticks with settings taken from `pattern`.
fn periodic(station: Side, len: u64, pattern: &[usize], slots: u64) -> SparseSchedule {
    let rows = (0..slots)
        .map(|s| (s * len, pattern[s as usize % pattern.len()]))
        .collect();
    SparseSchedule::new(station, len, rows).unwrap()
}

/// Joint cell frequencies over detections matched by pair.
fn joint_frequencies(det: &Detections, t_emit: &[u64], transit: u64) -> [[f64; 4]; 4] {
    let mut left = vec![OutcomeCell::ALL[0]; t_emit.len()];
    let mut right = left.clone();
    let cell = |d: &Detection| {
        let t_e = t_emit[d.pair as usize] + transit;
        OutcomeCell::new(d.sign, if d.tick == t_e { Slot::Early } else { Slot::Late })
    };
    for d in &det.left {
        left[d.pair as usize] = cell(d);
    }
    for d in &det.right {
        right[d.pair as usize] = cell(d);
    }
    let mut f = [[0.0; 4]; 4];
    for (l, r) in left.iter().zip(&right) {
        f[l.index()][r.index()] += 1.0 / t_emit.len() as f64;
    }
    f
}

#[test]
fn sign_follows_the_setting_at_the_late_detection() {
    let model = ModelPair::analytic();
    // setting 0 for ticks [0, 10), setting 1 from tick 10 on
    let schedule = SparseSchedule::new(Side::Left, 10, vec![(0, 0), (10, 1), (20, 1)]).unwrap();
    let angles = [Angle::ZERO, Angle::new(std::f64::consts::PI)];
    let station = Station {
        model: &model.left,
        schedule: &schedule,
        angles: &angles,
        k: 8,
        t_ret: 2,
        beamsplitters: true,
    };
    let mut checked = 0;
    for i in 0..2000 {
        let hv = HiddenVars::new(i as f64 * 0.0031, (i as f64 * 0.618).fract());
        let (sign, t_d) = station_response_lhv(&station, hv, 8).unwrap();
        let first = model.left.evaluate(angles[0], hv);
        match first.slot {
            Slot::Early => {
                assert_eq!(t_d, 8);
                assert_eq!(sign, first.sign);
            }
            Slot::Late => {
                assert_eq!(t_d, 16);
                assert_eq!(sign, model.left.evaluate(angles[1], hv).sign);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn static_response_equals_chart_evaluation() {
    let model = ModelPair::analytic();
    let schedule = fixed(Side::Right, 1);
    let angles = [Angle::ZERO, Angle::new(0.7)];
    let station = Station {
        model: &model.right,
        schedule: &schedule,
        angles: &angles,
        k: 8,
        t_ret: 2,
        beamsplitters: true,
    };
    for i in 0..500 {
        let hv = HiddenVars::new(i as f64 * 0.0127, (i as f64 * 0.377).fract());
        let cell = model.right.evaluate(angles[1], hv);
        let (sign, t_d) = station_response_lhv(&station, hv, 100).unwrap();
        assert_eq!(sign, cell.sign);
        assert_eq!(t_d, if cell.slot == Slot::Early { 100 } else { 108 });
    }
}

#[test]
fn removed_beamsplitters_give_early_plus() {
    for engine in [Engine::Lhv, Engine::Qm] {
        let c = ExperimentConfig {
            engine,
            n_pairs: 2000,
            beamsplitters_left: false,
            model: "analytic".into(),
            ..Default::default()
        };
        let out = run_experiment(&c).unwrap();
        let t = emission_ticks(&c);
        for d in out.left() {
            assert_eq!(d.sign, Sign::Plus);
            assert_eq!(d.tick, t[d.pair as usize] + c.transit());
        }
        assert!(out.right().iter().any(|d| d.sign == Sign::Minus));
    }
}

#[test]
fn lhv_static_frequencies_match_the_target_table() {
    let c = lhv_config(200_000);
    let model = ModelPair::analytic();
    let (phi, psi) = c.station_lists();
    let t = emission_ticks(&c);
    for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let det = simulate_with(&c, Some(&model), &fixed(Side::Left, i), &fixed(Side::Right, j)).unwrap();
        let f = joint_frequencies(&det, &t, c.transit());
        let target = target_table(phi[i] + psi[j]);
        for l in OutcomeCell::ALL {
            for r in OutcomeCell::ALL {
                let (got, want) = (f[l.index()][r.index()], target.get(l, r));
                assert!((got - want).abs() < 0.004, "({i},{j}) {l:?} {r:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn qm_coincidences_follow_the_interference_law() {
    let c = ExperimentConfig {
        n_pairs: 200_000,
        whitebox: true,
        ..Default::default()
    };
    let t = emission_ticks(&c);
    let (phi, psi) = c.station_lists();
    for (i, j) in [(0, 0), (1, 1)] {
        let det = simulate_with(&c, None, &fixed(Side::Left, i), &fixed(Side::Right, j)).unwrap();
        let f = joint_frequencies(&det, &t, c.transit());
        let target = target_table(phi[i] + psi[j]);
        for l in OutcomeCell::ALL {
            for r in OutcomeCell::ALL {
                let (got, want) = (f[l.index()][r.index()], target.get(l, r));
                assert!((got - want).abs() < 0.004, "({i},{j}) {l:?} {r:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn qm_aligned_settings_give_perfect_correlation() {
    let c = ExperimentConfig {
        n_pairs: 20_000,
        phi: vec![Angle::ZERO, Angle::new(1.0)],
        psi: vec![Angle::ZERO, Angle::new(1.0)],
        ..Default::default()
    };
    let det = simulate_with(&c, None, &fixed(Side::Left, 0), &fixed(Side::Right, 0)).unwrap();
    let by_pair = |v: &[Detection]| {
        let mut m = vec![None; c.n_pairs as usize];
        for d in v {
            m[d.pair as usize] = Some(*d);
        }
        m
    };
    let (l, r) = (by_pair(&det.left), by_pair(&det.right));
    let mut coincident = 0usize;
    for (a, b) in l.iter().zip(&r) {
        let (a, b) = (a.unwrap(), b.unwrap());
        if a.tick == b.tick {
            coincident += 1;
            assert_eq!(a.sign, b.sign);
        }
    }
    let frac = coincident as f64 / c.n_pairs as f64;
    assert!((frac - 0.5).abs() < 0.015, "{frac}");
}

#[test]
fn singles_are_unbiased() {
    for engine in [Engine::Lhv, Engine::Qm] {
        let c = ExperimentConfig {
            engine,
            switching: Switching::Fast,
            ..lhv_config(100_000)
        };
        let out = run_experiment(&c).unwrap();
        for side in [out.left(), out.right()] {
            let plus = side.iter().filter(|d| d.sign == Sign::Plus).count() as f64 / side.len() as f64;
            assert!((plus - 0.5).abs() < 0.008, "{engine} {plus}");
        }
    }
}

#[test]
fn detections_are_sorted_and_complete() {
    let c = ExperimentConfig {
        switching: Switching::Fast,
        ..lhv_config(30_000)
    };
    let out = run_experiment(&c).unwrap();
    for side in [out.left(), out.right()] {
        assert_eq!(side.len(), 30_000);
        assert!(side.windows(2).all(|w| w[0].tick <= w[1].tick));
    }
}

#[test]
fn left_output_ignores_the_right_schedule() {
    let c = ExperimentConfig {
        switching: Switching::Fast,
        ..lhv_config(20_000)
    };
    let model = ModelPair::load(&c.model).unwrap();
    let t = emission_ticks(&c);
    let horizon = run_horizon(&c, &t);
    let left = generate_schedule(&c, Side::Left, horizon);
    let right = generate_schedule(&c, Side::Right, horizon);
    let base = simulate_with(&c, Some(&model), &left, &right).unwrap();
    for other in [right.relabelled(vec![1, 0]), right.reseeded(99)] {
        let alt = simulate_with(&c, Some(&model), &left, &other).unwrap();
        assert_eq!(alt.left, base.left);
        assert_ne!(alt.right, base.right);
    }
}

#[test]
fn crafted_switching_changes_late_signs_only() {
    // the left switch flips every K ticks between settings whose charts differ
    let c = ExperimentConfig {
        switching: Switching::Fast,
        ..lhv_config(5000)
    };
    let model = ModelPair::analytic();
    let t = emission_ticks(&c);
    let slots = run_horizon(&c, &t) / c.ticks_per_dl + 1;
    let flip = periodic(Side::Left, c.ticks_per_dl, &[0, 1], slots);
    let same = periodic(Side::Left, c.ticks_per_dl, &[0, 0], slots);
    let right = periodic(Side::Right, c.ticks_per_dl, &[0], slots);
    let a = simulate_with(&c, Some(&model), &flip, &right).unwrap();
    let b = simulate_with(&c, Some(&model), &same, &right).unwrap();
    let by_pair = |v: &[Detection]| {
        let mut m = vec![Detection::EMPTY; v.len()];
        for d in v {
            m[d.pair as usize] = *d;
        }
        m
    };
    let (a, b) = (by_pair(&a.left), by_pair(&b.left));
    let even_slot = |tick: u64| ((tick - c.t_ret_left) / c.ticks_per_dl).is_multiple_of(2);
    let mut differing = 0;
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        let t_e = t[i] + c.transit();
        if !even_slot(t_e) {
            continue;
        }
        // both switches agree when the slot is chosen
        assert_eq!(x.tick, y.tick);
        if x.tick == t_e {
            assert_eq!(x, y);
        } else if x.sign != y.sign {
            differing += 1;
        }
    }
    assert!(differing > 100);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let c = ExperimentConfig {
        switching: Switching::Fast,
        whitebox: true,
        ..lhv_config(40_000)
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&c).unwrap())
    };
    let one = run(1);
    for threads in [4, 8] {
        let other = run(threads);
        assert_eq!(other.left(), one.left());
        assert_eq!(other.right(), one.right());
        let (a, b) = (other.truth().unwrap(), one.truth().unwrap());
        assert!(a
            .iter()
            .zip(b)
            .all(|(x, y)| x.theta.to_bits() == y.theta.to_bits() && x.slot_left == y.slot_left));
    }
}

#[test]
fn csv_files_round_trip() {
    let c = ExperimentConfig {
        switching: Switching::Fast,
        whitebox: true,
        ..lhv_config(3000)
    };
    let out = run_experiment(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let det = dir.path().join("detections.csv");
    io::write_detections(&det, out.left(), out.right(), true).unwrap();
    let (l, r) = io::read_detections(&det).unwrap();
    assert_eq!((l.as_slice(), r.as_slice()), (out.left(), out.right()));

    let settings = dir.path().join("settings.csv");
    let k = c.ticks_per_dl;
    let tl = io::touched_slots(out.left(), &out.left_schedule, k, c.t_ret_left);
    let tr = io::touched_slots(out.right(), &out.right_schedule, k, c.t_ret_right);
    io::write_settings(&settings, &tl, &tr).unwrap();
    let (sl, _) = io::read_settings(&settings, c.slot_len()).unwrap();
    for d in out.left() {
        let t = d.tick as i64 - c.t_ret_left as i64;
        assert_eq!(sl.setting_at(t).unwrap(), out.left_schedule.setting_at(t).unwrap());
    }

    let truth = dir.path().join("truth.csv");
    io::write_truth(&truth, out.truth().unwrap()).unwrap();
    let back = io::read_truth(&truth).unwrap();
    assert_eq!(back.len(), 3000);
    assert!(back
        .iter()
        .zip(out.truth().unwrap())
        .all(|(a, b)| a.theta == b.theta && a.r == b.r));
}
