//! Fields of the stochastic master equation, the Euler–Maruyama integrator and
//! the deterministic support-theorem flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::control::FeedbackLaw;
use crate::error::{Error, Result};
use crate::model::{MeasurementChannel, SystemModel};
use crate::qmat::{self, eig_hermitian, eigenvalues_hermitian, ComplexMatrix, HermitianMatrix, C64, I};
use crate::tolerance;

/// When and how hard the post-step projection may repair a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionPolicy {
    /// Eigenvalues below `-clip_trigger` are clipped to zero.
    pub clip_trigger: f64,
    /// An eigenvalue below this value aborts the run.
    pub abort_below: f64,
}

impl Default for ProjectionPolicy {
    fn default() -> Self {
        Self {
            clip_trigger: tolerance::CLIP_TRIGGER,
            abort_below: tolerance::PROJECTION_ABORT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    EulerMaruyama,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub projection: ProjectionPolicy,
    /// Snapshot every `stride` steps.
    pub stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::EulerMaruyama,
            projection: ProjectionPolicy::default(),
            stride: 100,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, stride: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            stride,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps covering `[0, horizon]`.
    pub fn steps_for(&self, horizon: f64) -> Result<u64> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        Ok((horizon / self.dt).round() as u64)
    }
}

/// What the last projection found and repaired.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ProjectionReport {
    pub hermitian_error: f64,
    pub trace_error: f64,
    /// Smallest eigenvalue before clipping.
    pub min_eigenvalue: f64,
    /// Total negative mass removed by clipping.
    pub clip: f64,
    /// Eigenvalues above [`tolerance::STATE_RANK`] after projection.
    pub rank: usize,
}

/// Hermitize, clip negative eigenvalues, renormalize the trace.
pub fn project(m: &ComplexMatrix, policy: &ProjectionPolicy, t: f64) -> Result<(ComplexMatrix, ProjectionReport)> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let hermitian_error = m.hermitian_deviation();
    let h = HermitianMatrix::hermitized(m);
    let trace = h.matrix().trace().re;
    let trace_error = (trace - 1.0).abs();
    let values = eigenvalues_hermitian(&h)?;
    let min_eigenvalue = values[0];
    if min_eigenvalue < policy.abort_below {
        return Err(Error::ProjectionFailure { t, min_eigenvalue });
    }
    let (mut out, kept, clip) = if min_eigenvalue < -policy.clip_trigger {
        let mut eig = eig_hermitian(&h)?;
        let clip: f64 = eig.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
        for v in eig.values.iter_mut() {
            *v = v.max(0.0);
        }
        let kept = eig.values.clone();
        (HermitianMatrix::hermitized(&eig.reconstruct()).into_matrix(), kept, clip)
    } else {
        (h.into_matrix(), values, 0.0)
    };
    let norm = out.trace().re;
    if !(norm > 0.0) {
        return Err(Error::InvalidState(format!("trace {norm} after projection")));
    }
    if norm != 1.0 {
        out = out.scale_real(1.0 / norm);
    }
    let rank = kept.iter().filter(|v| **v / norm > tolerance::STATE_RANK).count();
    Ok((
        out,
        ProjectionReport {
            hermitian_error,
            trace_error,
            min_eigenvalue,
            clip,
            rank,
        },
    ))
}

/// A Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    report: ProjectionReport,
}

impl DensityMatrix {
    /// Accepts `m` only if it already satisfies every state invariant.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let (dev_h, dev_t, min) = state_deviation(&m)?;
        if dev_h > tolerance::HERMITIAN {
            return Err(Error::NotHermitian { deviation: dev_h });
        }
        if dev_t > tolerance::TRACE {
            return Err(Error::InvalidState(format!("trace deviates from 1 by {dev_t:e}")));
        }
        if min < tolerance::PSD {
            return Err(Error::InvalidState(format!("eigenvalue {min:e} below zero")));
        }
        let rank = rank_of(&m)?;
        Ok(Self {
            matrix: m,
            report: ProjectionReport {
                hermitian_error: dev_h,
                trace_error: dev_t,
                min_eigenvalue: min,
                clip: 0.0,
                rank,
            },
        })
    }

    /// Initial-state intake: violations above [`tolerance::INITIAL_STATE_REJECT`] are
    /// rejected, smaller ones are projected away. Returns whether a repair happened.
    pub fn from_initial(m: ComplexMatrix) -> Result<(Self, bool)> {
        let (dev_h, dev_t, min) = state_deviation(&m)?;
        let worst = dev_h.max(dev_t).max(-min);
        if worst > tolerance::INITIAL_STATE_REJECT {
            return Err(Error::InvalidState(format!(
                "initial state violates invariants by {worst:e} (hermitian {dev_h:e}, trace {dev_t:e}, min eigenvalue {min:e})"
            )));
        }
        if dev_h <= tolerance::HERMITIAN && dev_t <= tolerance::TRACE && min >= tolerance::PSD {
            return Ok((Self::new(m)?, false));
        }
        log::warn!("initial state off by {worst:e}; projecting");
        let policy = ProjectionPolicy {
            clip_trigger: 0.0,
            abort_below: f64::NEG_INFINITY,
        };
        let (matrix, report) = project(&m, &policy, 0.0)?;
        Ok((Self { matrix, report }, true))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64);
        Self {
            matrix: m,
            report: ProjectionReport {
                min_eigenvalue: 1.0 / dim as f64,
                rank: dim,
                ..Default::default()
            },
        }
    }

    /// `v v† / ‖v‖²`.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let n = qmat::norm(v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let u: Vec<C64> = v.iter().map(|z| z / n).collect();
        let mut m = ComplexMatrix::outer(&u);
        m = m.hermitize();
        let tr = m.trace().re;
        m = m.scale_real(1.0 / tr);
        Ok(Self {
            matrix: m,
            report: ProjectionReport {
                rank: 1,
                ..Default::default()
            },
        })
    }

    /// Random state `AA†/Tr(AA†)` with `A` a `dim × rank` matrix of entries
    /// with real and imaginary parts uniform in [−1, 1]; rank is `min(rank, dim)`
    /// almost surely.
    pub fn random(dim: usize, rank: usize, rng: &mut impl Rng) -> Self {
        let cols = rank.clamp(1, dim.max(1));
        let mut a = ComplexMatrix::zeros(dim, cols);
        for z in a.as_mut_slice() {
            *z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let m = a.matmul(&a.adjoint());
        let tr = m.trace().re;
        let matrix = m.scale_real(1.0 / tr).hermitize();
        let rank = rank_of(&matrix).unwrap_or(cols);
        Self {
            matrix,
            report: ProjectionReport {
                rank,
                ..Default::default()
            },
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn report(&self) -> &ProjectionReport {
        &self.report
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Numerical rank with threshold [`tolerance::STATE_RANK`].
    pub fn rank(&self) -> usize {
        self.report.rank
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

fn state_deviation(m: &ComplexMatrix) -> Result<(f64, f64, f64)> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::DimensionMismatch {
            op: "DensityMatrix",
            left: m.shape(),
            right: "square".into(),
        });
    }
    let dev_h = m.hermitian_deviation();
    let dev_t = (m.trace() - C64::new(1.0, 0.0)).norm();
    let values = eigenvalues_hermitian(&HermitianMatrix::hermitized(m))?;
    Ok((dev_h, dev_t, values[0]))
}

fn rank_of(m: &ComplexMatrix) -> Result<usize> {
    let values = eigenvalues_hermitian(&HermitianMatrix::hermitized(m))?;
    Ok(values.iter().filter(|v| **v > tolerance::STATE_RANK).count())
}

fn check_pair(op: &'static str, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if !a.is_square() || a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `F₀(ρ) = −i[H₀,ρ] − i Σ u_j [H_j,ρ]`.
pub fn drift_f0(rho: &ComplexMatrix, u: &[f64], model: &SystemModel) -> Result<ComplexMatrix> {
    check_pair("drift_f0", rho, model.h0().matrix())?;
    if u.len() != model.controls().len() {
        return Err(Error::DimensionMismatch {
            op: "drift_f0",
            left: format!("{} controls values", u.len()),
            right: format!("{} control Hamiltonians", model.controls().len()),
        });
    }
    let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
    add_hamiltonian(&mut out, rho, model, u, 1.0);
    Ok(out)
}

/// `F_k(ρ) = LρL − (L²ρ + ρL²)/2`.
pub fn lindblad_fk(rho: &ComplexMatrix, l: &HermitianMatrix) -> Result<ComplexMatrix> {
    check_pair("lindblad_fk", rho, l.matrix())?;
    let l = l.matrix();
    let lr = l.matmul(rho);
    let lrl = lr.matmul(l);
    let l2r = l.matmul(&lr);
    let mut out = lrl;
    out.axpy_real(-0.5, &l2r);
    out.axpy_real(-0.5, &l2r.adjoint());
    Ok(out)
}

/// `G_k(ρ) = Lρ + ρL − 2Tr(Lρ)ρ`.
pub fn diffusion_gk(rho: &ComplexMatrix, l: &HermitianMatrix) -> Result<ComplexMatrix> {
    check_pair("diffusion_gk", rho, l.matrix())?;
    let lr = l.matrix().matmul(rho);
    let mean = lr.trace().re;
    let mut out = &lr + &lr.adjoint();
    out.axpy_real(-2.0 * mean, rho);
    Ok(out)
}

/// `F̂_k(ρ) = (1−η)LρL − (1+η)/2 (L²ρ + ρL²) + 2η Tr(L²ρ)ρ + 2η Tr(Lρ) G_k(ρ)`.
pub fn hat_fk(rho: &ComplexMatrix, l: &HermitianMatrix, eta: f64) -> Result<ComplexMatrix> {
    check_pair("hat_fk", rho, l.matrix())?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("efficiency {eta} outside (0,1]")));
    }
    let lm = l.matrix();
    let lr = lm.matmul(rho);
    let lrl = lr.matmul(lm);
    let l2r = lm.matmul(&lr);
    let mean = lr.trace().re;
    let second = l2r.trace().re;
    let mut out = lrl.scale_real(1.0 - eta);
    out.axpy_real(-0.5 * (1.0 + eta), &l2r);
    out.axpy_real(-0.5 * (1.0 + eta), &l2r.adjoint());
    out.axpy_real(2.0 * eta * second, rho);
    let g = diffusion_gk(rho, l)?;
    out.axpy_real(2.0 * eta * mean, &g);
    Ok(out)
}

/// `out += scale · (−i[H₀,ρ] − i Σ u_j[H_j,ρ])`.
fn add_hamiltonian(out: &mut ComplexMatrix, rho: &ComplexMatrix, model: &SystemModel, u: &[f64], scale: f64) {
    let n = rho.rows();
    match model.h0_diagonal() {
        Some(h) => {
            for i in 0..n {
                for j in 0..n {
                    let d = h[i] - h[j];
                    if d != 0.0 {
                        out[(i, j)] += rho[(i, j)] * C64::new(0.0, -d * scale);
                    }
                }
            }
        }
        None => add_commutator(out, model.h0().matrix(), rho, scale),
    }
    if u.iter().any(|x| *x != 0.0) {
        let mut h = ComplexMatrix::zeros(n, n);
        for (uj, hj) in u.iter().zip(model.controls()) {
            if *uj != 0.0 {
                h.axpy_real(*uj, hj.matrix());
            }
        }
        add_commutator(out, &h, rho, scale);
    }
}

/// `out += scale · (−i[H,ρ])` using `ρH = (Hρ)†`.
fn add_commutator(out: &mut ComplexMatrix, h: &ComplexMatrix, rho: &ComplexMatrix, scale: f64) {
    let a = h.matmul(rho);
    let n = rho.rows();
    let f = -I * scale;
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] += (a[(i, j)] - a[(j, i)].conj()) * f;
        }
    }
}

/// Coefficients of one channel's contribution: `out += a·F(ρ) + b·G(ρ)` for the
/// Itô fields, or `out += a·F̂(ρ) + b·G(ρ)` when `hat` is set.
fn add_channel(out: &mut ComplexMatrix, rho: &ComplexMatrix, ch: &MeasurementChannel, a: f64, b: f64, hat: bool) {
    let n = rho.rows();
    let eta = ch.efficiency();
    match ch.scaled_diagonal() {
        Some(l) => {
            let mean: f64 = (0..n).map(|i| l[i] * rho[(i, i)].re).sum();
            let second: f64 = (0..n).map(|i| l[i] * l[i] * rho[(i, i)].re).sum();
            for i in 0..n {
                for j in 0..n {
                    let r = rho[(i, j)];
                    if r == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let g = l[i] + l[j] - 2.0 * mean;
                    let f = if hat {
                        (1.0 - eta) * l[i] * l[j] - 0.5 * (1.0 + eta) * (l[i] * l[i] + l[j] * l[j])
                            + 2.0 * eta * second
                            + 2.0 * eta * mean * g
                    } else {
                        -0.5 * (l[i] - l[j]) * (l[i] - l[j])
                    };
                    out[(i, j)] += r * (a * f + b * g);
                }
            }
        }
        None => {
            let l = ch.scaled();
            let f = if hat {
                hat_fk(rho, l, eta).expect("shapes checked")
            } else {
                lindblad_fk(rho, l).expect("shapes checked")
            };
            let g = diffusion_gk(rho, l).expect("shapes checked");
            out.axpy_real(a, &f);
            out.axpy_real(b, &g);
        }
    }
}

/// `F₀dt + Σ F_k dt + Σ √η_k G_k dW_k`.
pub fn em_increment(rho: &ComplexMatrix, model: &SystemModel, u: &[f64], dt: f64, dw: &[f64]) -> Result<ComplexMatrix> {
    check_pair("em_increment", rho, model.h0().matrix())?;
    if dw.len() != model.channels().len() {
        return Err(Error::DimensionMismatch {
            op: "em_increment",
            left: format!("{} Wiener increments", dw.len()),
            right: format!("{} channels", model.channels().len()),
        });
    }
    let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
    add_hamiltonian(&mut out, rho, model, u, dt);
    for (ch, w) in model.channels().iter().zip(dw) {
        add_channel(&mut out, rho, ch, dt, ch.efficiency().sqrt() * w, false);
    }
    Ok(out)
}

/// Running per-trajectory invariant diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub steps: u64,
    pub max_clip: f64,
    pub total_clip: f64,
    pub clip_events: u64,
    /// Smallest eigenvalue seen before projection.
    pub min_eigenvalue: f64,
    pub max_trace_error: f64,
    pub max_hermitian_error: f64,
    pub initial_rank: usize,
    pub rank: usize,
    pub rank_drops: u64,
    pub first_rank_drop: Option<f64>,
    /// Smallest GHZ population `Tr(ρ 𝐆𝐇𝐙^ε_k)` after projection.
    pub min_population: f64,
}

impl Diagnostics {
    fn new(rho: &DensityMatrix, model: &SystemModel) -> Self {
        Self {
            steps: 0,
            max_clip: 0.0,
            total_clip: 0.0,
            clip_events: 0,
            min_eigenvalue: rho.report().min_eigenvalue,
            max_trace_error: 0.0,
            max_hermitian_error: 0.0,
            initial_rank: rho.rank(),
            rank: rho.rank(),
            rank_drops: 0,
            first_rank_drop: None,
            min_population: min_population(rho.matrix(), model),
        }
    }

    fn record(&mut self, r: &ProjectionReport, rho: &ComplexMatrix, model: &SystemModel, t: f64) {
        self.steps += 1;
        self.max_clip = self.max_clip.max(r.clip);
        self.total_clip += r.clip;
        if r.clip > 0.0 {
            self.clip_events += 1;
        }
        self.min_eigenvalue = self.min_eigenvalue.min(r.min_eigenvalue);
        self.max_trace_error = self.max_trace_error.max(r.trace_error);
        self.max_hermitian_error = self.max_hermitian_error.max(r.hermitian_error);
        if r.rank < self.rank {
            self.rank_drops += 1;
            self.first_rank_drop.get_or_insert(t);
        }
        self.rank = r.rank;
        self.min_population = self.min_population.min(min_population(rho, model));
    }

    /// Folds another trajectory's diagnostics into this one.
    pub fn merge(&mut self, other: &Diagnostics) {
        self.steps += other.steps;
        self.max_clip = self.max_clip.max(other.max_clip);
        self.total_clip += other.total_clip;
        self.clip_events += other.clip_events;
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.max_hermitian_error = self.max_hermitian_error.max(other.max_hermitian_error);
        self.initial_rank = self.initial_rank.min(other.initial_rank);
        self.rank = self.rank.min(other.rank);
        self.rank_drops += other.rank_drops;
        self.first_rank_drop = match (self.first_rank_drop, other.first_rank_drop) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.min_population = self.min_population.min(other.min_population);
    }
}

fn min_population(rho: &ComplexMatrix, model: &SystemModel) -> f64 {
    let b = model.basis();
    b.indices().map(|idx| b.population(rho, idx)).fold(f64::INFINITY, f64::min)
}

/// State of one trajectory: `ρ_t`, time, its private random stream and diagnostics.
#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub rho: DensityMatrix,
    pub t: f64,
    pub step: u64,
    pub diagnostics: Diagnostics,
    rng: ChaCha8Rng,
}

impl TrajectoryState {
    /// The random stream is fixed by `(seed, index)`.
    pub fn new(rho: DensityMatrix, model: &SystemModel, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let diagnostics = Diagnostics::new(&rho, model);
        Self {
            rho,
            t: 0.0,
            step: 0,
            diagnostics,
            rng,
        }
    }

    /// Independent `N(0, dt)` increments, one per channel.
    pub fn draw_increments(&mut self, channels: usize, dt: f64) -> Vec<f64> {
        let s = dt.sqrt();
        (0..channels)
            .map(|_| {
                let z: f64 = self.rng.sample(StandardNormal);
                s * z
            })
            .collect()
    }
}

fn pad_controls(mut u: Vec<f64>, model: &SystemModel) -> Vec<f64> {
    u.resize(model.controls().len(), 0.0);
    u
}

/// One explicit step with controls `u` already evaluated at the pre-step state.
pub fn step_with_controls(
    state: &mut TrajectoryState,
    model: &SystemModel,
    u: &[f64],
    cfg: &IntegratorConfig,
    dw: &[f64],
) -> Result<()> {
    let rho = state.rho.matrix();
    let mut next = em_increment(rho, model, u, cfg.dt, dw)?;
    next.axpy_real(1.0, rho);
    let t = (state.step + 1) as f64 * cfg.dt;
    let (matrix, report) = project(&next, &cfg.projection, t)?;
    state.diagnostics.record(&report, &matrix, model, t);
    state.rho = DensityMatrix { matrix, report };
    state.step += 1;
    state.t = t;
    Ok(())
}

/// `ρ' = project(ρ + F₀dt + ΣF_k dt + Σ√η_k G_k dW_k)` with `u` from `law` at `ρ`.
pub fn em_step(
    state: &mut TrajectoryState,
    model: &SystemModel,
    law: &FeedbackLaw,
    cfg: &IntegratorConfig,
    dw: &[f64],
) -> Result<()> {
    let u = pad_controls(law.evaluate(state.rho.matrix(), model)?, model);
    step_with_controls(state, model, &u, cfg, dw)
}

/// A sampled point of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: ComplexMatrix,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
}

/// Integrates one trajectory on `[0, horizon]`, calling `observer(t, ρ_t, u(ρ_t))`
/// at every `stride`-th step and at the final step.
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory<F>(
    rho0: &DensityMatrix,
    model: &SystemModel,
    law: &FeedbackLaw,
    cfg: &IntegratorConfig,
    horizon: f64,
    seed: u64,
    index: usize,
    mut observer: F,
) -> Result<Diagnostics>
where
    F: FnMut(f64, &DensityMatrix, &[f64]),
{
    let wrap = |e: Error| Error::TrajectoryAborted {
        trajectory: index,
        source: Box::new(e),
    };
    cfg.validate()?;
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            op: "run_trajectory",
            left: rho0.matrix().shape(),
            right: format!("{0}x{0}", model.dim()),
        });
    }
    let steps = cfg.steps_for(horizon)?;
    let stride = cfg.stride as u64;
    let channels = model.channels().len();
    let mut state = TrajectoryState::new(rho0.clone(), model, seed, index as u64);
    loop {
        let u = pad_controls(law.evaluate(state.rho.matrix(), model).map_err(wrap)?, model);
        if state.step.is_multiple_of(stride) || state.step == steps {
            observer(state.t, &state.rho, &u);
        }
        if state.step == steps {
            break;
        }
        let dw = state.draw_increments(channels, cfg.dt);
        step_with_controls(&mut state, model, &u, cfg, &dw).map_err(wrap)?;
    }
    Ok(state.diagnostics)
}

/// [`run_trajectory`] collecting the snapshots.
#[allow(clippy::too_many_arguments)]
pub fn simulate_trajectory(
    rho0: &DensityMatrix,
    model: &SystemModel,
    law: &FeedbackLaw,
    cfg: &IntegratorConfig,
    horizon: f64,
    seed: u64,
    index: usize,
) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    let diagnostics = run_trajectory(rho0, model, law, cfg, horizon, seed, index, |t, rho, u| {
        snapshots.push(Snapshot {
            t,
            rho: rho.matrix().clone(),
            u: u.to_vec(),
        })
    })?;
    Ok(Trajectory { snapshots, diagnostics })
}

/// Euler step of `ρ̇ = F₀ + Σ F̂_k + Σ √η_k G_k v_k`, followed by the projection.
pub fn deterministic_step(
    rho: &DensityMatrix,
    model: &SystemModel,
    law: &FeedbackLaw,
    v: &[f64],
    dt: f64,
    policy: &ProjectionPolicy,
) -> Result<DensityMatrix> {
    if v.len() != model.channels().len() {
        return Err(Error::DimensionMismatch {
            op: "deterministic_step",
            left: format!("{} inputs", v.len()),
            right: format!("{} channels", model.channels().len()),
        });
    }
    if v.iter().any(|x| !x.is_finite()) || !(dt > 0.0) {
        return Err(Error::InvalidParameter("non-finite input or non-positive dt".into()));
    }
    let m = rho.matrix();
    check_pair("deterministic_step", m, model.h0().matrix())?;
    let u = pad_controls(law.evaluate(m, model)?, model);
    let mut next = m.clone();
    add_hamiltonian(&mut next, m, model, &u, dt);
    for (ch, vk) in model.channels().iter().zip(v) {
        add_channel(&mut next, m, ch, dt, ch.efficiency().sqrt() * vk * dt, true);
    }
    let (matrix, report) = project(&next, policy, 0.0)?;
    Ok(DensityMatrix { matrix, report })
}
