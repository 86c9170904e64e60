//! Ensembles of trajectories, their summaries and CSV output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{
    bures_to_ghz, classify_limit, estimate_exponent, lyapunov, rate_bounds, ExponentFit, LimitClass, LyapunovKind,
    LIMIT_THRESHOLD,
};
use crate::config::ScenarioConfig;
use crate::control::{FeedbackKind, FeedbackLaw};
use crate::dynamics::{run_trajectory, DensityMatrix, Diagnostics, IntegratorConfig};
use crate::error::{Error, Result};
use crate::model::{GhzIndex, SystemModel};

/// Significant digits of every CSV value.
pub const CSV_DIGITS: usize = 12;

/// Value of `traj` on aggregate rows.
pub const MEAN_LABEL: &str = "mean";

/// One sampled point of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub v: f64,
    pub bures: f64,
    /// `Tr(ρρ̄)`.
    pub fidelity: f64,
    pub u: Vec<f64>,
}

/// Everything needed to run an ensemble.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub name: String,
    /// Model in the computational frame.
    pub model: SystemModel,
    pub law: FeedbackLaw,
    pub lyapunov: LyapunovKind,
    /// Initial state in the computational frame.
    pub rho0: DensityMatrix,
    pub integrator: IntegratorConfig,
    pub horizon: f64,
    pub trajectories: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub name: String,
    pub law: FeedbackKind,
    pub lyapunov: LyapunovKind,
    pub target: GhzIndex,
    pub seed: u64,
    pub times: Vec<f64>,
    /// Number of control columns `u1, u2, …`.
    pub controls: usize,
    /// `samples[trajectory][time]`.
    pub samples: Vec<Vec<Sample>>,
    pub mean: Vec<Sample>,
    /// Exponent of the reference curve (`NaN` when no rate is known).
    pub reference_exponent: f64,
    /// `V(ρ₀)·exp(reference_exponent·t)`.
    pub reference: Vec<f64>,
    /// GHZ populations of each final state, in basis order.
    pub final_populations: Vec<Vec<f64>>,
    pub classes: Vec<LimitClass>,
    pub diagnostics: Vec<Diagnostics>,
}

/// Theoretical exponent paired with the law: `−C̄` without feedback and for
/// the mixed law, `−2C̄_±` for the fidelity law, none for the two-Hamiltonian law.
pub fn reference_exponent(model: &SystemModel, law: &FeedbackLaw) -> Result<f64> {
    let rates = rate_bounds(model, law.target())?;
    Ok(match law.kind() {
        FeedbackKind::Zero | FeedbackKind::MixedPower { .. } => rates.exponent(),
        FeedbackKind::FidelityPower { .. } => rates.exponent_plus().or(rates.exponent_minus()).unwrap_or(f64::NAN),
        FeedbackKind::TwoHamiltonian { .. } => f64::NAN,
    })
}

struct TrajectoryOutput {
    times: Vec<f64>,
    samples: Vec<Sample>,
    populations: Vec<f64>,
    class: LimitClass,
    diagnostics: Diagnostics,
}

impl Ensemble {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let model = cfg.model()?;
        let rho0 = cfg.initial_state(&model)?;
        Ok(Self {
            name: cfg.name.clone(),
            law: cfg.law()?,
            lyapunov: cfg.lyapunov_kind(),
            rho0,
            integrator: cfg.integrator()?,
            horizon: cfg.horizon,
            trajectories: cfg.trajectories,
            seed: cfg.seed,
            model,
        })
    }

    fn run_one(&self, frame: &SystemModel, rho0: &DensityMatrix, index: usize) -> Result<TrajectoryOutput> {
        let basis = frame.basis();
        let target = self.law.target();
        let mut times = Vec::new();
        let mut samples = Vec::new();
        let mut failure = None;
        let mut last = None;
        let diagnostics = run_trajectory(
            rho0,
            frame,
            &self.law,
            &self.integrator,
            self.horizon,
            self.seed,
            index,
            |t, rho, u| {
                let m = rho.matrix();
                let sample = (|| {
                    Ok(Sample {
                        v: lyapunov(self.lyapunov, m, frame)?,
                        bures: bures_to_ghz(m, basis, target)?,
                        fidelity: basis.population(m, target),
                        u: u.to_vec(),
                    })
                })();
                match sample {
                    Ok(s) => samples.push(s),
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
                times.push(t);
                last = Some(m.clone());
            },
        )?;
        if let Some(e) = failure {
            return Err(Error::TrajectoryAborted {
                trajectory: index,
                source: Box::new(e),
            });
        }
        let last = last.expect("observer sees the final state");
        Ok(TrajectoryOutput {
            times,
            samples,
            populations: basis.populations(&last),
            class: classify_limit(&last, basis, LIMIT_THRESHOLD)?,
            diagnostics,
        })
    }

    /// Runs every trajectory in parallel; results keep trajectory order and do
    /// not depend on the number of worker threads.
    pub fn run(&self) -> Result<EnsembleResult> {
        let frame = self.model.to_ghz_frame();
        let rho0 = DensityMatrix::new(frame.state_into_frame(self.rho0.matrix()))?;
        let outputs: Vec<TrajectoryOutput> = (0..self.trajectories)
            .into_par_iter()
            .map(|i| self.run_one(&frame, &rho0, i))
            .collect::<Result<_>>()?;
        let times = outputs.first().map(|o| o.times.clone()).unwrap_or_default();
        let controls = self.model.controls().len().max(1);
        let mut mean = Vec::with_capacity(times.len());
        let count = outputs.len() as f64;
        for j in 0..times.len() {
            let mut m = Sample {
                v: 0.0,
                bures: 0.0,
                fidelity: 0.0,
                u: vec![0.0; controls],
            };
            for o in &outputs {
                let s = &o.samples[j];
                m.v += s.v / count;
                m.bures += s.bures / count;
                m.fidelity += s.fidelity / count;
                for (acc, u) in m.u.iter_mut().zip(&s.u) {
                    *acc += u / count;
                }
            }
            mean.push(m);
        }
        let reference_exponent = reference_exponent(&self.model, &self.law)?;
        let v0 = lyapunov(self.lyapunov, rho0.matrix(), &frame)?;
        let reference = times.iter().map(|t| v0 * (reference_exponent * t).exp()).collect();
        let mut samples = Vec::with_capacity(outputs.len());
        let mut final_populations = Vec::with_capacity(outputs.len());
        let mut classes = Vec::with_capacity(outputs.len());
        let mut diagnostics = Vec::with_capacity(outputs.len());
        for o in outputs {
            samples.push(o.samples);
            final_populations.push(o.populations);
            classes.push(o.class);
            diagnostics.push(o.diagnostics);
        }
        Ok(EnsembleResult {
            name: self.name.clone(),
            law: self.law.kind(),
            lyapunov: self.lyapunov,
            target: self.law.target(),
            seed: self.seed,
            times,
            controls,
            samples,
            mean,
            reference_exponent,
            reference,
            final_populations,
            classes,
            diagnostics,
        })
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<EnsembleResult> {
    Ensemble::from_config(cfg)?.run()
}

impl EnsembleResult {
    pub fn trajectories(&self) -> usize {
        self.samples.len()
    }

    pub fn mean_v(&self) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.mean).map(|(&t, s)| (t, s.v)).collect()
    }

    pub fn mean_bures(&self) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.mean).map(|(&t, s)| (t, s.bures)).collect()
    }

    /// Exponent of the mean `V` over `window` (default: last two thirds).
    pub fn fit_v(&self, window: Option<(f64, f64)>) -> Result<ExponentFit> {
        estimate_exponent(&self.mean_v(), window)
    }

    /// Exponent of the mean Bures distance to the target.
    pub fn fit_bures(&self, window: Option<(f64, f64)>) -> Result<ExponentFit> {
        estimate_exponent(&self.mean_bures(), window)
    }

    pub fn final_fidelities(&self) -> Vec<f64> {
        self.samples.iter().filter_map(|s| s.last().map(|x| x.fidelity)).collect()
    }

    /// Number of final states in each limit class: every GHZ state in basis
    /// order, then the unresolved ones.
    pub fn class_counts(&self, basis_order: &[GhzIndex]) -> Vec<(LimitClass, usize)> {
        let mut out: Vec<(LimitClass, usize)> = basis_order
            .iter()
            .map(|&idx| (LimitClass::Ghz(idx), 0))
            .chain(std::iter::once((LimitClass::Unresolved, 0)))
            .collect();
        for c in &self.classes {
            if let Some(slot) = out.iter_mut().find(|(k, _)| k == c) {
                slot.1 += 1;
            }
        }
        out
    }

    /// Diagnostics folded over all trajectories.
    pub fn merged_diagnostics(&self) -> Option<Diagnostics> {
        let mut it = self.diagnostics.iter();
        let mut acc = it.next()?.clone();
        for d in it {
            acc.merge(d);
        }
        Some(acc)
    }

    /// Human-readable summary.
    pub fn summary(&self, basis_order: &[GhzIndex]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario      {}", self.name);
        let _ = writeln!(s, "feedback      {}", self.law.name());
        let _ = writeln!(s, "target        ghz({},{})", self.target.k, self.target.sign);
        let _ = writeln!(s, "lyapunov      {}", self.lyapunov.name());
        let _ = writeln!(s, "trajectories  {}", self.trajectories());
        let _ = writeln!(s, "seed          {}", self.seed);
        let _ = writeln!(s, "bound exponent    {:.6}", self.reference_exponent);
        match self.fit_v(None) {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "fitted exponent   {:.6}  (mean V on [{:.3}, {:.3}], {} points)",
                    f.slope, f.window.0, f.window.1, f.points
                );
            }
            Err(e) => {
                let _ = writeln!(s, "fitted exponent   unavailable ({e})");
            }
        }
        if let Ok(f) = self.fit_bures(None) {
            let _ = writeln!(s, "bures exponent    {:.6}  (mean d_B to target)", f.slope);
        }
        let mut fid = self.final_fidelities();
        if !fid.is_empty() {
            fid.sort_by(f64::total_cmp);
            let _ = writeln!(s, "final fidelity    median {:.6}  min {:.6}", fid[fid.len() / 2], fid[0]);
        }
        let _ = writeln!(s, "limit classes (fidelity >= {LIMIT_THRESHOLD}):");
        for (class, n) in self.class_counts(basis_order) {
            let label = match class {
                LimitClass::Ghz(idx) => format!("ghz({},{})", idx.k, idx.sign),
                LimitClass::Unresolved => "unresolved".to_string(),
            };
            let _ = writeln!(s, "  {label:<12} {n}");
        }
        if let Some(d) = self.merged_diagnostics() {
            let _ = writeln!(
                s,
                "diagnostics   max clip {:.3e}, clip events {}, min eigenvalue {:.3e}, max trace error {:.3e}, max hermitian error {:.3e}, rank drops {}, min population {:.3e}",
                d.max_clip,
                d.clip_events,
                d.min_eigenvalue,
                d.max_trace_error,
                d.max_hermitian_error,
                d.rank_drops,
                d.min_population
            );
        }
        s
    }
}

/// Decimal notation with [`CSV_DIGITS`] significant digits.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i64;
    let decimals = (CSV_DIGITS as i64 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn header(controls: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "traj", "V", "bures", "fidelity"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=controls).map(|i| format!("u{i}")));
    h.push("ref".into());
    h
}

fn record(t: f64, traj: &str, s: &Sample, controls: usize, reference: f64) -> Vec<String> {
    let mut r = vec![format_value(t), traj.to_string(), format_value(s.v), format_value(s.bures), format_value(s.fidelity)];
    r.extend((0..controls).map(|i| format_value(s.u.get(i).copied().unwrap_or(0.0))));
    r.push(format_value(reference));
    r
}

/// Writes the header, one row per (sample time, trajectory) and then one mean
/// row per sample time.
pub fn write_csv<W: Write>(result: &EnsembleResult, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header(result.controls)).map_err(io)?;
    for (j, &t) in result.times.iter().enumerate() {
        for (i, traj) in result.samples.iter().enumerate() {
            w.write_record(record(t, &i.to_string(), &traj[j], result.controls, result.reference[j]))
                .map_err(io)?;
        }
    }
    if !result.samples.is_empty() {
        for (j, &t) in result.times.iter().enumerate() {
            w.write_record(record(t, MEAN_LABEL, &result.mean[j], result.controls, result.reference[j]))
                .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &EnsembleResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(result, std::io::BufWriter::new(file))
}

/// A parsed CSV row; `traj` is `None` on mean rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub traj: Option<usize>,
    pub sample: Sample,
    pub reference: f64,
}

/// Reads a file written by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let bad = |m: String| Error::Config { line: 0, message: m };
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let controls = headers.len().checked_sub(6).ok_or_else(|| bad("short header".into()))?;
    let expected = header(controls);
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|_| Error::Config {
                line,
                message: format!("bad number {:?}", &rec[k]),
            })
        };
        let traj = match &rec[1] {
            MEAN_LABEL => None,
            s => Some(s.parse::<usize>().map_err(|_| Error::Config {
                line,
                message: format!("bad trajectory label {s:?}"),
            })?),
        };
        rows.push(CsvRow {
            t: num(0)?,
            traj,
            sample: Sample {
                v: num(2)?,
                bures: num(3)?,
                fidelity: num(4)?,
                u: (0..controls).map(|c| num(5 + c)).collect::<Result<_>>()?,
            },
            reference: num(5 + controls)?,
        });
    }
    Ok(rows)
}
