//! Monte-Carlo estimates of the generator `𝓛f(ρ) = lim E[f(ρ_dt) − f(ρ)]/dt`
//! at `u ≡ 0`, compared with the closed forms in [`crate::analysis`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analysis::{generator_reduction_pair, generator_vx, lambda_k, vx};
use crate::dynamics::{em_increment, DensityMatrix};
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::qmat::ComplexMatrix;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_DT: f64 = 1e-4;
/// Agreement threshold in standard errors.
pub const DEFAULT_SIGMAS: f64 = 3.0;

/// Which function the generator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Functional {
    /// `√(Λ_iΛ_j)`.
    Pair(usize, usize),
    /// `√V_x`.
    RootVx,
}

impl Functional {
    pub fn label(&self) -> String {
        match self {
            Self::Pair(i, j) => format!("sqrt(L{i}*L{j})"),
            Self::RootVx => "sqrt(Vx)".into(),
        }
    }

    pub fn value(&self, rho: &ComplexMatrix, model: &SystemModel) -> Result<f64> {
        let v = match *self {
            Self::Pair(i, j) => lambda_k(rho, model.basis(), i)? * lambda_k(rho, model.basis(), j)?,
            Self::RootVx => vx(rho, model)?,
        };
        Ok(v.max(0.0).sqrt())
    }

    pub fn closed_form(&self, rho: &ComplexMatrix, model: &SystemModel) -> Result<f64> {
        match *self {
            Self::Pair(i, j) => generator_reduction_pair(rho, i, j, model),
            Self::RootVx => generator_vx(rho, model),
        }
    }

    /// Every pair `i < j` and, with an x-channel, `√V_x`.
    pub fn all(model: &SystemModel) -> Vec<Self> {
        let half = model.basis().half();
        let mut out: Vec<Self> = (1..=half)
            .flat_map(|i| ((i + 1)..=half).map(move |j| Self::Pair(i, j)))
            .collect();
        if model.x_channel().is_some() {
            out.push(Self::RootVx);
        }
        out
    }
}

/// One Monte-Carlo estimate next to its closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorEstimate {
    pub functional: Functional,
    pub closed_form: f64,
    pub mean: f64,
    pub std_err: f64,
}

impl GeneratorEstimate {
    /// Deviation in standard errors.
    pub fn z(&self) -> f64 {
        let d = self.mean - self.closed_form;
        if self.std_err > 0.0 {
            d / self.std_err
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn agrees(&self, sigmas: f64) -> bool {
        self.z().abs() <= sigmas
    }
}

/// Estimates `𝓛f(ρ)` for each functional from `samples` antithetic pairs of
/// one Euler–Maruyama step: each observation is
/// `(f(ρ + Δ(dW)) + f(ρ + Δ(−dW)))/2 − f(ρ)`, divided by `dt`.
pub fn estimate_generators(
    rho: &ComplexMatrix,
    model: &SystemModel,
    functionals: &[Functional],
    samples: usize,
    dt: f64,
    seed: u64,
    stream: u64,
) -> Result<Vec<GeneratorEstimate>> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {samples}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    DensityMatrix::new(rho.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let u = vec![0.0; model.controls().len()];
    let channels = model.channels().len();
    let base: Vec<f64> = functionals.iter().map(|f| f.value(rho, model)).collect::<Result<_>>()?;
    let mut sum = vec![0.0; functionals.len()];
    let mut sum_sq = vec![0.0; functionals.len()];
    let sd = dt.sqrt();
    let mut dw = vec![0.0; channels];
    let mut neg = vec![0.0; channels];
    for _ in 0..samples {
        for (w, m) in dw.iter_mut().zip(neg.iter_mut()) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = sd * z;
            *m = -*w;
        }
        let mut up = em_increment(rho, model, &u, dt, &dw)?;
        up.axpy_real(1.0, rho);
        let mut down = em_increment(rho, model, &u, dt, &neg)?;
        down.axpy_real(1.0, rho);
        for (k, f) in functionals.iter().enumerate() {
            let y = (0.5 * (f.value(&up, model)? + f.value(&down, model)?) - base[k]) / dt;
            sum[k] += y;
            sum_sq[k] += y * y;
        }
    }
    let n = samples as f64;
    functionals
        .iter()
        .enumerate()
        .map(|(k, &functional)| {
            let mean = sum[k] / n;
            let var = ((sum_sq[k] - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(GeneratorEstimate {
                functional,
                closed_form: functional.closed_form(rho, model)?,
                mean,
                std_err: (var / n).sqrt(),
            })
        })
        .collect()
}

/// Estimates at several states in parallel; state `i` uses random stream `i`.
pub fn estimate_at_states(
    states: &[ComplexMatrix],
    model: &SystemModel,
    samples: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<Vec<GeneratorEstimate>>> {
    let functionals = Functional::all(model);
    states
        .par_iter()
        .enumerate()
        .map(|(i, rho)| estimate_generators(rho, model, &functionals, samples, dt, seed, i as u64))
        .collect()
}

/// `count` random full-rank states of the model's dimension, in the model's frame.
pub fn random_states(model: &SystemModel, count: usize, seed: u64) -> Vec<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DensityMatrix::random(model.dim(), model.dim(), &mut rng).into_matrix())
        .collect()
}
