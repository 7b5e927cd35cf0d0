use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use franson_core::analysis::{self, Analysis, AnalysisOptions, Verdict};
use franson_core::bell::{
    canonical_angles, lhv_bound, qm_max, target_table, visibility_threshold, Angle, Ensemble, OutcomeCell,
};
use franson_core::geometry::{validate_with, JointOptions, ModelPair};
use franson_core::kv::KvFile;
use franson_core::sim::{self, config::parse_count, io, Engine, ExperimentConfig, Switching};
use franson_core::synth::{synthesize, FreeSet, SynthesisOptions};

use crate::args::*;
use crate::manifest::RunManifest;

/// Scientific outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn predict(a: &PredictArgs) -> Result<Outcome> {
    if let Some(chi) = a.chi {
        let t = target_table(Angle::new(chi));
        println!("joint table at chi = {chi}");
        print!("{:>6}", "");
        for r in OutcomeCell::ALL {
            print!("{:>10}", r.label());
        }
        println!();
        for l in OutcomeCell::ALL {
            print!("{:>6}", l.label());
            for r in OutcomeCell::ALL {
                print!("{:>10.6}", t.get(l, r));
            }
            println!();
        }
        println!();
    }
    let n = a.n;
    let value = a.visibility * qm_max(n)?;
    let bound = lhv_bound(n, Ensemble::Coincident)?;
    println!("chained expression, N = {n}");
    println!("quantum value          {value:.4} (visibility {})", a.visibility);
    println!("late-late bound        {:.0}", lhv_bound(n, Ensemble::PureLateLate)?);
    println!("coincident bound       {bound:.0}");
    println!("visibility threshold   {:.5}", visibility_threshold(n)?);
    let angles = canonical_angles(n)?;
    let fmt = |v: &[Angle]| {
        v.iter()
            .map(|x| format!("{:.4}", x.radians()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("phi                    {}", fmt(&angles.phi));
    println!("psi                    {}", fmt(&angles.psi));
    println!(
        "verdict                {:.4} vs bound {bound:.0}: {}",
        value,
        if value > bound { "violation" } else { "no violation" }
    );
    Ok(Outcome::Pass)
}

pub fn synth(a: &SynthArgs, argv: &[String]) -> Result<Outcome> {
    let seed = ModelPair::load(&a.seed).with_context(|| format!("cannot load seed layout {:?}", a.seed))?;
    let Some(free) = FreeSet::parse(&a.free) else {
        bail!("unknown free set {:?}; expected left-curves, curves or all", a.free);
    };
    let opts = SynthesisOptions {
        grid: a.grid,
        tol_max: a.tol,
        budget: a.budget,
        rng_seed: a.rng_seed,
        free,
        ..Default::default()
    };
    let result = synthesize(&seed, &opts)?;
    create_dir(&a.out)?;
    result.models.write(&a.out.join("model.model"))?;
    fs::write(a.out.join("report.json"), result.report_json(&opts) + "\n")?;
    let mut m = RunManifest::new("synth", argv);
    m.seed = Some(a.rng_seed);
    m.inputs = vec![a.seed.clone()];
    m.outputs = vec!["model.model".into(), "report.json".into()];
    m.write(&a.out)?;
    println!(
        "residual max {:.3e}, rms {:.3e} after {} evaluations: {}",
        result.residual_max,
        result.residual_rms,
        result.iterations,
        if result.failed { "FAIL" } else { "PASS" }
    );
    Ok(if result.failed { Outcome::Fail } else { Outcome::Pass })
}

pub fn validate(a: &ValidateArgs, argv: &[String]) -> Result<Outcome> {
    let models = ModelPair::load(&a.model).with_context(|| format!("cannot load model {:?}", a.model))?;
    let report = validate_with(&models, a.grid, &JointOptions::default())?;
    print!("{}", report.render_table(a.tol));
    if let Some(out) = &a.out {
        create_dir(out)?;
        report.to_kv(a.tol).write(&out.join("validation.txt"))?;
        let mut m = RunManifest::new("validate", argv);
        m.inputs = vec![a.model.clone()];
        m.outputs = vec!["validation.txt".into()];
        m.write(out)?;
    }
    Ok(if report.passed(a.tol) {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

/// Defaults, then the config file, then shortcut flags, then `--set` pairs.
pub fn resolve_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    if let Some(path) = &a.config {
        c.apply(&KvFile::read(path)?)?;
    }
    let mut kv = KvFile::new();
    if let Some(p) = &a.pairs {
        kv.set("n_pairs", p);
    }
    if let Some(s) = a.seed {
        kv.set("seed", s);
    }
    if let Some(e) = &a.engine {
        kv.set("engine", e);
    }
    if let Some(s) = &a.switching {
        kv.set("switching", s);
    }
    if let Some(v) = a.visibility {
        kv.set("visibility", format!("{v:?}"));
    }
    if a.whitebox {
        kv.set("whitebox", true);
    }
    if a.reference {
        kv.set("phi0", "0");
        kv.set("psi0", "0");
    }
    c.apply(&kv)?;
    if let Some(n) = a.n {
        let angles = canonical_angles(n)?;
        c.phi = angles.phi;
        c.psi = angles.psi;
    }
    let mut overrides = KvFile::new();
    for s in &a.set {
        let Some((k, v)) = s.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {s:?}");
        };
        overrides.set(k.trim(), v.trim());
    }
    c.apply(&overrides)?;
    c.validate()?;
    Ok(c)
}

const DETECTIONS: &str = "detections.csv";
const SETTINGS: &str = "settings.csv";
const TRUTH: &str = "truth.csv";
const CONFIG: &str = "config.txt";

pub fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<Outcome> {
    let c = resolve_config(&a.experiment)?;
    let out = sim::run_experiment(&c)?;
    create_dir(&a.out)?;
    let k = c.ticks_per_dl;
    io::write_detections(&a.out.join(DETECTIONS), out.left(), out.right(), c.whitebox)?;
    let tl = io::touched_slots(out.left(), &out.left_schedule, k, c.t_ret_left);
    let tr = io::touched_slots(out.right(), &out.right_schedule, k, c.t_ret_right);
    io::write_settings(&a.out.join(SETTINGS), &tl, &tr)?;
    let mut outputs = vec![CONFIG.to_string(), DETECTIONS.into(), SETTINGS.into()];
    if let Some(truth) = out.truth() {
        io::write_truth(&a.out.join(TRUTH), truth)?;
        outputs.push(TRUTH.into());
    }
    c.to_kv().write(&a.out.join(CONFIG))?;
    let mut m = RunManifest::new("simulate", argv);
    m.seed = Some(c.seed);
    m.outputs = outputs;
    m.config = Some(c.to_kv());
    m.write(&a.out)?;
    println!(
        "{} pairs, {} left and {} right detections written to {}",
        c.n_pairs,
        out.left().len(),
        out.right().len(),
        a.out.display()
    );
    Ok(Outcome::Pass)
}

fn analysis_options(s: &SelectionArgs) -> AnalysisOptions {
    AnalysisOptions {
        window: s.window,
        coincident_only: !s.all_classes,
        early_filter: s.early_filter,
        n: s.chain,
        ensemble: match s.ensemble {
            EnsembleArg::Coincident => Ensemble::Coincident,
            EnsembleArg::LateLate => Ensemble::PureLateLate,
        },
    }
}

fn write_report(dir: &Path, stem: &str, a: &Analysis) -> Result<Vec<String>> {
    let kv_name = format!("{stem}.txt");
    let table_name = format!("{stem}_table.txt");
    a.report.to_kv().write(&dir.join(&kv_name))?;
    fs::write(dir.join(&table_name), a.report.render_table())?;
    Ok(vec![kv_name, table_name])
}

pub fn analyze(a: &AnalyzeArgs, argv: &[String]) -> Result<Outcome> {
    let input = &a.input;
    let c = ExperimentConfig::from_kv(&KvFile::read(&input.join(CONFIG))?)?;
    let (left, right) = io::read_detections(&input.join(DETECTIONS))?;
    let (ls, rs) = io::read_settings(&input.join(SETTINGS), c.slot_len())?;
    let truth_path = input.join(TRUTH);
    let truth = if truth_path.exists() {
        Some(io::read_truth(&truth_path)?)
    } else {
        None
    };
    let opts = analysis_options(&a.selection);
    let result = analysis::analyze(&c, &left, &right, &ls, &rs, truth.as_deref(), &opts)?;
    create_dir(&a.out)?;
    analysis::write_pairs(&a.out.join("pairs.csv"), &result.pairs)?;
    let mut outputs = vec!["pairs.csv".to_string()];
    outputs.extend(write_report(&a.out, "report", &result)?);
    let mut m = RunManifest::new("analyze", argv);
    m.seed = Some(c.seed);
    m.inputs = vec![input.display().to_string()];
    m.outputs = outputs;
    m.config = Some(c.to_kv());
    m.write(&a.out)?;
    print!("{}", result.report.render_table());
    Ok(Outcome::Pass)
}

/// Pairs used by a demo when `--pairs` is absent.
fn demo_pairs(a: &DemoArgs, default: u64) -> Result<u64> {
    match &a.pairs {
        Some(p) => parse_count(p).map_err(anyhow::Error::msg),
        None => Ok(default),
    }
}

fn run_analysis(c: &ExperimentConfig, opts: &AnalysisOptions) -> Result<Analysis> {
    let out = sim::run_experiment(c)?;
    Ok(analysis::analyze(
        c,
        out.left(),
        out.right(),
        &out.left_schedule,
        &out.right_schedule,
        out.truth(),
        opts,
    )?)
}

/// Slow switching with a local model: CHSH on coincidences.
pub fn loophole_config(pairs: u64, seed: u64, model: &str) -> ExperimentConfig {
    ExperimentConfig {
        engine: Engine::Lhv,
        switching: Switching::Slow,
        n_pairs: pairs,
        seed,
        model: model.into(),
        ..Default::default()
    }
}

pub const LOOPHOLE_OPTIONS: AnalysisOptions = AnalysisOptions {
    window: None,
    coincident_only: true,
    early_filter: false,
    n: Some(2),
    ensemble: Ensemble::PureLateLate,
};

/// Fast switching, canonical angles and reference settings at index 0.
pub fn nogo_config(engine: Engine, n: usize, pairs: u64, seed: u64, model: &str) -> Result<ExperimentConfig> {
    let angles = canonical_angles(n)?;
    Ok(ExperimentConfig {
        engine,
        switching: Switching::Fast,
        n_pairs: pairs,
        seed,
        phi: angles.phi,
        psi: angles.psi,
        phi0: Some(Angle::ZERO),
        psi0: Some(Angle::ZERO),
        whitebox: engine == Engine::Lhv,
        model: model.into(),
        ..Default::default()
    })
}

pub const NOGO_OPTIONS: AnalysisOptions = AnalysisOptions {
    window: None,
    coincident_only: true,
    early_filter: true,
    n: None,
    ensemble: Ensemble::Coincident,
};

pub fn demo(a: &DemoArgs, argv: &[String]) -> Result<Outcome> {
    if let Some(out) = &a.out {
        create_dir(out)?;
    }
    let mut outputs = Vec::new();
    let mut save = |stem: &str, r: &Analysis| -> Result<()> {
        if let Some(out) = &a.out {
            outputs.extend(write_report(out, stem, r)?);
        }
        Ok(())
    };
    let pass = match a.kind {
        DemoKind::Loophole => {
            let c = loophole_config(demo_pairs(a, 2_000_000)?, a.seed, &a.model);
            let r = run_analysis(&c, &LOOPHOLE_OPTIONS)?;
            save("loophole", &r)?;
            let ch = &r.report.chain;
            let pass = r.report.verdict == Verdict::Violation;
            println!(
                "CHSH = {:.3} \u{b1} {:.3} {} {:.0} with LHV engine, slow switching ({} coincidences, z = {:.1})",
                ch.value,
                ch.sigma,
                if ch.value > r.report.bound { ">" } else { "<=" },
                r.report.bound,
                r.report.selected,
                r.report.z
            );
            pass
        }
        DemoKind::Nogo => {
            let pairs = demo_pairs(a, 20_000_000)?;
            let qm = run_analysis(&nogo_config(Engine::Qm, a.n, pairs, a.seed, &a.model)?, &NOGO_OPTIONS)?;
            save("nogo_qm", &qm)?;
            let q = &qm.report;
            println!(
                "QM : chained = {:.3} \u{b1} {:.3}, bound {:.0}, z = {:.1}: {}",
                q.chain.value,
                q.chain.sigma,
                q.bound,
                q.z,
                q.verdict.label()
            );
            let qm_pass = q.verdict == Verdict::Violation;
            drop(qm);

            let lhv = run_analysis(&nogo_config(Engine::Lhv, a.n, pairs, a.seed, &a.model)?, &NOGO_OPTIONS)?;
            save("nogo_lhv", &lhv)?;
            let l = &lhv.report;
            let lhv_pass = l.chain.value <= l.bound + 3.0 * l.chain.sigma;
            println!(
                "LHV: chained = {:.3} \u{b1} {:.3}, bound {:.0}, z = {:.1}: {}",
                l.chain.value,
                l.chain.sigma,
                l.bound,
                l.z,
                l.verdict.label()
            );
            if let Some(w) = &l.whitebox {
                println!(
                    "LHV late-late: chained = {:.3} \u{b1} {:.3} (bound {:.0}), CHSH = {:.3} \u{b1} {:.3}",
                    w.chain_ll.value, w.chain_ll.sigma, w.bound_ll, w.chsh_ll.value, w.chsh_ll.sigma
                );
            }
            qm_pass && lhv_pass
        }
    };
    if let Some(out) = &a.out {
        let mut m = RunManifest::new("demo", argv);
        m.seed = Some(a.seed);
        m.outputs = outputs;
        m.write(out)?;
    }
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

pub fn replay(a: &ReplayArgs) -> Result<Vec<String>> {
    let m = RunManifest::read(&a.manifest)?;
    let out: Option<PathBuf> = a.out.clone();
    m.replay_args(out.as_deref())
}
