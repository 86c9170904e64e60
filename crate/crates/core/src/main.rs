use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use ghz_stab::analysis::rate_bounds;
use ghz_stab::config::{RawConfig, ScenarioConfig};
use ghz_stab::control::FeedbackKind;
use ghz_stab::dynamics::DensityMatrix;
use ghz_stab::ensemble::{emit_csv, run_scenario, EnsembleResult};
use ghz_stab::model::{check_assumptions, spectral_data, GhzIndex, SystemModel};
use ghz_stab::oracle::{self, Functional, GeneratorEstimate};
use ghz_stab::reachability::{check_conditions, ConditionOptions, Verdict};
use ghz_stab::{Error, Result};

#[derive(Parser)]
#[command(name = "ghz-stab", version, about = "Feedback stabilization of GHZ states under continuous measurement")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or a built-in name (scenario_a, scenario_b).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of trajectories
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// Output file (CSV, verdict or estimate table depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override a config key, e.g. `--set dt=1e-4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Ensemble without feedback (u = 0).
    Reduce,
    /// Ensemble under the configured feedback law.
    Stabilize,
    /// Assumptions on the model and the stabilizability conditions of the law.
    CheckAssumptions {
        /// Samples for the sampled condition.
        #[arg(long, default_value_t = ConditionOptions::default().samples)]
        samples: usize,
    },
    /// Guaranteed decay rates for the configured target.
    Rate,
    /// Monte-Carlo generator estimates against the closed forms.
    GeneratorCheck {
        /// Number of random states.
        #[arg(long, default_value_t = 10)]
        states: usize,
        /// Antithetic sample pairs per state.
        #[arg(long, default_value_t = oracle::DEFAULT_SAMPLES)]
        samples: usize,
        /// Step of the one-step estimator.
        #[arg(long, default_value_t = oracle::DEFAULT_DT)]
        dt: f64,
    },
}

fn load(common: &Common, default: &str) -> Result<RawConfig> {
    let name = common.config.as_deref().unwrap_or(default);
    let path = Path::new(name);
    let mut raw = if path.exists() || ScenarioConfig::builtin_text(name).is_err() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            message: format!("{name}: {e}"),
        })?;
        RawConfig::parse(&text)?
    } else {
        RawConfig::parse(ScenarioConfig::builtin_text(name)?)?
    };
    if let Some(seed) = common.seed {
        raw.set("seed", &seed.to_string());
    }
    if let Some(n) = common.trajectories {
        raw.set("trajectories", &n.to_string());
    }
    for pair in &common.overrides {
        raw.set_pair(pair)?;
    }
    Ok(raw)
}

fn say(common: &Common, text: &str) {
    if !common.quiet {
        print!("{text}");
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn finish_ensemble(common: &Common, cfg: &ScenarioConfig, result: &EnsembleResult) -> Result<()> {
    let csv = common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)));
    emit_csv(result, &csv)?;
    let order: Vec<GhzIndex> = cfg.model()?.basis().indices().collect();
    let summary = result.summary(&order);
    let summary_path = csv.with_extension("summary.txt");
    write_text(&summary_path, &summary)?;
    say(common, &summary);
    say(common, &format!("wrote {} and {}\n", csv.display(), summary_path.display()));
    Ok(())
}

fn run_ensemble(common: &Common, cfg: &ScenarioConfig) -> Result<()> {
    info!(
        "{}: {} trajectories, dt = {}, horizon = {}",
        cfg.name, cfg.trajectories, cfg.dt, cfg.horizon
    );
    let result = run_scenario(cfg)?;
    finish_ensemble(common, cfg, &result)
}

fn reduce(common: &Common) -> Result<()> {
    let mut raw = load(common, "scenario_a")?;
    if raw.get("feedback").is_some_and(|f| f != "zero") {
        warn!("reduce ignores the configured feedback law");
    }
    raw.remove_tree("feedback");
    if raw.get("lyapunov").is_none() {
        raw.set("lyapunov", "reduction");
    }
    run_ensemble(common, &ScenarioConfig::from_raw(&raw)?)
}

fn stabilize(common: &Common) -> Result<()> {
    let cfg = ScenarioConfig::from_raw(&load(common, "scenario_b")?)?;
    if cfg.feedback == FeedbackKind::Zero {
        return Err(Error::Config {
            line: 0,
            message: "stabilize needs a feedback law (use reduce for u = 0)".into(),
        });
    }
    run_ensemble(common, &cfg)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn check(common: &Common, samples: usize) -> Result<()> {
    let cfg = ScenarioConfig::from_raw(&load(common, "scenario_a")?)?;
    let model = cfg.model()?;
    let law = cfg.law()?;
    let mut text = String::new();
    let mut verdicts: Vec<(String, String)> = Vec::new();
    let a = check_assumptions(&model);
    let _ = writeln!(text, "scenario {} (target ghz({},{}), feedback {})", cfg.name, cfg.target.k, cfg.target.sign, law.kind().name());
    let _ = writeln!(text, "A0 GHZ-diagonal operators: {}", if a.a0 { "pass" } else { "fail" });
    if let Some(v) = &a.a0_violation {
        let _ = writeln!(text, "   {} has entry {:.3e} at ({}, {})", v.operator, v.magnitude, v.row, v.col);
    }
    let _ = writeln!(text, "A1 distinct l_k: {}", if a.a1 { "pass" } else { "fail" });
    if let Some((i, j, value)) = a.a1_duplicate {
        let _ = writeln!(text, "   l_{i} = l_{j} = {value}");
    }
    verdicts.push(("a0".into(), if a.a0 { "pass" } else { "fail" }.into()));
    verdicts.push(("a1".into(), if a.a1 { "pass" } else { "fail" }.into()));
    if a.a0 && a.a1 {
        let s = spectral_data(&model, cfg.target)?;
        let _ = writeln!(text, "l = ({}), ell = {:.6}, c+ = {:.6}, c- = {:.6}", fmt_list(&s.l), s.ell, s.c_plus, s.c_minus);
        verdicts.push(("ell".into(), s.ell.to_string()));
        verdicts.push(("c_plus".into(), s.c_plus.to_string()));
        verdicts.push(("c_minus".into(), s.c_minus.to_string()));
    }
    let options = ConditionOptions {
        samples,
        seed: cfg.seed,
        ..ConditionOptions::default()
    };
    let r = check_conditions(&model, &law, &options)?;
    let _ = writeln!(text, "conditions ({:?} mode):", r.mode);
    let _ = writeln!(
        text,
        "  equilibria: {} (target drift {:.3e})",
        r.equilibrium.verdict.as_str(),
        r.equilibrium.target_drift
    );
    for (idx, u, drift) in &r.equilibrium.others {
        let _ = writeln!(text, "    ghz({},{}): u = ({}), drift {:.3e}", idx.k, idx.sign, fmt_list(u), drift);
    }
    let _ = writeln!(text, "  passage: {} ({})", r.passage.verdict.as_str(), r.passage.note);
    let _ = writeln!(text, "  rank (depth cap {}): {}", r.rank_cap, r.rank_verdict.as_str());
    for s in &r.ranks {
        let ranks: Vec<String> = s.ranks.iter().map(usize::to_string).collect();
        let _ = writeln!(
            text,
            "    seed ghz({},{}): ranks [{}], N-1 at {}, N at {}",
            s.seed.k,
            s.seed.sign,
            ranks.join(", "),
            s.almost_full_at.map_or("-".into(), |d| d.to_string()),
            s.full_at.map_or("-".into(), |d| d.to_string())
        );
    }
    verdicts.push(("equilibria".into(), r.equilibrium.verdict.as_str().into()));
    verdicts.push(("passage".into(), r.passage.verdict.as_str().into()));
    verdicts.push(("rank".into(), r.rank_verdict.as_str().into()));
    if let Some(s) = &r.sampled {
        let _ = writeln!(
            text,
            "  sampled: {} ({} vertices, {} samples, min margin {})",
            s.verdict.as_str(),
            s.vertices,
            s.samples,
            s.min_margin.map_or("-".into(), |m| format!("{m:.3e}"))
        );
        verdicts.push(("sampled".into(), s.verdict.as_str().into()));
    }
    let overall = a.a0 && a.a1 && r.pass();
    let _ = writeln!(text, "overall: {}", if overall { "pass" } else { "fail" });
    verdicts.push(("overall".into(), if overall { Verdict::Pass } else { Verdict::Fail }.as_str().into()));
    let path = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.verdict.txt", cfg.name)));
    let body: String = verdicts.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    write_text(&path, &body)?;
    say(common, &text);
    say(common, &format!("wrote {}\n", path.display()));
    Ok(())
}

fn rate(common: &Common) -> Result<()> {
    let cfg = ScenarioConfig::from_raw(&load(common, "scenario_a")?)?;
    let model = cfg.model()?;
    let s = spectral_data(&model, cfg.target)?;
    let r = rate_bounds(&model, cfg.target)?;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    let mut text = String::new();
    let _ = writeln!(text, "target     ghz({},{})", cfg.target.k, cfg.target.sign);
    let _ = writeln!(text, "l          ({})", fmt_list(&s.l));
    let _ = writeln!(text, "ell        {:.6}", s.ell);
    let _ = writeln!(text, "c+         {:.6}", s.c_plus);
    let _ = writeln!(text, "c-         {:.6}", s.c_minus);
    let _ = writeln!(text, "C_z        {:.6}", r.c_bar_z);
    let _ = writeln!(text, "C_x        {}", opt(r.c_bar_x));
    let _ = writeln!(text, "C          {:.6}   (exponent {:.6})", r.c_bar, r.exponent());
    let _ = writeln!(text, "C+         {}   (exponent {})", opt(r.c_bar_plus), opt(r.exponent_plus()));
    let _ = writeln!(text, "C-         {}   (exponent {})", opt(r.c_bar_minus), opt(r.exponent_minus()));
    say(common, &text);
    if let Some(path) = &common.out {
        write_text(path, &text)?;
    }
    Ok(())
}

fn estimate_row(w: &mut csv::Writer<std::fs::File>, state: &str, e: &GeneratorEstimate) -> Result<()> {
    w.write_record([
        state.to_string(),
        e.functional.label(),
        e.closed_form.to_string(),
        e.mean.to_string(),
        e.std_err.to_string(),
        e.z().to_string(),
    ])
    .map_err(|e| Error::Io(e.to_string()))
}

fn generator_check(common: &Common, states: usize, samples: usize, dt: f64) -> Result<()> {
    let cfg = ScenarioConfig::from_raw(&load(common, "scenario_a")?)?;
    let model: SystemModel = cfg.model()?.to_ghz_frame();
    let mixed = DensityMatrix::maximally_mixed(model.dim()).into_matrix();
    let mut text = String::new();
    for f in Functional::all(&model).into_iter().filter(|f| matches!(f, Functional::Pair(1, 2) | Functional::RootVx)) {
        let _ = writeln!(text, "closed form at I/N: L {} = {:.6}", f.label(), f.closed_form(&mixed, &model)?);
    }
    let rhos = oracle::random_states(&model, states, cfg.seed);
    let estimates = oracle::estimate_at_states(&rhos, &model, samples, dt, cfg.seed)?;
    let _ = writeln!(text, "{states} random states, {samples} antithetic samples, dt = {dt}");
    let _ = writeln!(text, "{:>5}  {:<14} {:>12} {:>12} {:>10} {:>7}", "state", "function", "closed", "monte-carlo", "std err", "z");
    let mut worst: f64 = 0.0;
    for (i, row) in estimates.iter().enumerate() {
        for e in row {
            worst = worst.max(e.z().abs());
            let _ = writeln!(
                text,
                "{:>5}  {:<14} {:>12.6} {:>12.6} {:>10.2e} {:>7.2}",
                i,
                e.functional.label(),
                e.closed_form,
                e.mean,
                e.std_err,
                e.z()
            );
        }
    }
    let _ = writeln!(
        text,
        "max |z| = {worst:.2}: {}",
        if worst <= oracle::DEFAULT_SIGMAS { "all within 3 standard errors" } else { "disagreement" }
    );
    say(common, &text);
    if let Some(path) = &common.out {
        let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["state", "function", "closed", "monte_carlo", "std_err", "z"])
            .map_err(|e| Error::Io(e.to_string()))?;
        for (i, row) in estimates.iter().enumerate() {
            for e in row {
                estimate_row(&mut w, &i.to_string(), e)?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let outcome = match cli.command {
        Command::Reduce => reduce(c),
        Command::Stabilize => stabilize(c),
        Command::CheckAssumptions { samples } => check(c, samples),
        Command::Rate => rate(c),
        Command::GeneratorCheck { states, samples, dt } => generator_check(c, states, samples, dt),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
