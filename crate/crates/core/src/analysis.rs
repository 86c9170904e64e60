//! Scalar functionals of the state: invariant-set coordinates, variances, Bures
//! distances, Lyapunov functions, closed-form generators, rate constants and
//! exponent estimation.

use crate::dynamics::diffusion_gk;
use crate::error::{Error, Result};
use crate::model::{spectral_data, Frame, GhzBasis, GhzIndex, MeasurementChannel, Sign, SystemModel};
use crate::qmat::{self, ComplexMatrix, HermitianMatrix};
use crate::tolerance;

/// Default fidelity threshold of [`classify_limit`].
pub const LIMIT_THRESHOLD: f64 = 0.99;
/// Step of the central differences in [`noise_coefficients`].
pub const NOISE_FD_STEP: f64 = 1e-6;
/// Minimum number of points for [`estimate_exponent`].
pub const MIN_FIT_POINTS: usize = 10;

fn sqrt0(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

fn check_state(op: &'static str, rho: &ComplexMatrix, dim: usize) -> Result<()> {
    if !rho.is_square() || rho.rows() != dim {
        return Err(Error::DimensionMismatch {
            op,
            left: rho.shape(),
            right: format!("{dim}x{dim}"),
        });
    }
    Ok(())
}

/// `Λ_k(ρ) = Tr((𝐆𝐇𝐙⁺_k + 𝐆𝐇𝐙⁻_k)ρ)`.
pub fn lambda_k(rho: &ComplexMatrix, basis: &GhzBasis, k: usize) -> Result<f64> {
    basis.check(GhzIndex::plus(k))?;
    check_state("lambda_k", rho, basis.dim())?;
    Ok(match basis.frame() {
        Frame::Computational => rho[(k - 1, k - 1)].re + rho[(basis.dim() - k, basis.dim() - k)].re,
        Frame::Ghz => basis.population(rho, GhzIndex::plus(k)) + basis.population(rho, GhzIndex::minus(k)),
    })
}

/// `Λ_1, …, Λ_{N/2}`.
pub fn lambdas(rho: &ComplexMatrix, basis: &GhzBasis) -> Result<Vec<f64>> {
    (1..=basis.half()).map(|k| lambda_k(rho, basis, k)).collect()
}

/// `𝒱(ρ) = Tr(L²ρ) − Tr(Lρ)²`.
pub fn variance(rho: &ComplexMatrix, l: &HermitianMatrix) -> Result<f64> {
    let l = l.matrix();
    let mean = qmat::trace_product(l, rho)?.re;
    let second = qmat::trace_product(&l.matmul(l), rho)?.re;
    Ok(second - mean * mean)
}

/// Variance of a channel's scaled operator `L_i = √M_i · L`.
pub fn channel_variance(rho: &ComplexMatrix, channel: &MeasurementChannel) -> Result<f64> {
    variance(rho, channel.scaled())
}

/// `V_x(ρ) = 1 − Tr(L_xρ)²` with the unscaled `L_x`.
pub fn vx(rho: &ComplexMatrix, model: &SystemModel) -> Result<f64> {
    let x = model.x_channel().ok_or(Error::MissingXChannel)?;
    let mean = qmat::trace_product(x.operator().matrix(), rho)?.re;
    Ok(1.0 - mean * mean)
}

/// Total populations `(Σ_k Tr(𝐆𝐇𝐙⁺_kρ), Σ_k Tr(𝐆𝐇𝐙⁻_kρ))`.
pub fn sign_populations(rho: &ComplexMatrix, basis: &GhzBasis) -> Result<(f64, f64)> {
    check_state("sign_populations", rho, basis.dim())?;
    let p = basis.populations(rho);
    let half = basis.half();
    Ok((p[..half].iter().sum(), p[half..].iter().sum()))
}

/// `4 P₊ P₋`, equal to [`vx`] for every state.
pub fn vx_from_populations(rho: &ComplexMatrix, basis: &GhzBasis) -> Result<f64> {
    let (plus, minus) = sign_populations(rho, basis)?;
    Ok(4.0 * plus * minus)
}

fn bures_from_fidelity(f: f64) -> f64 {
    sqrt0(2.0 - 2.0 * sqrt0(f.min(1.0)))
}

fn check_pure(sigma: &ComplexMatrix) -> Result<()> {
    let dev_h = sigma.hermitian_deviation();
    let dev_t = (sigma.trace().re - 1.0).abs() + sigma.trace().im.abs();
    let dev_p = (&sigma.matmul(sigma) - sigma).max_abs();
    if dev_h > tolerance::HERMITIAN || dev_t > tolerance::TRACE || dev_p > tolerance::EIG_RECONSTRUCTION {
        return Err(Error::InvalidState(format!(
            "reference state is not a rank-one projector (hermitian {dev_h:e}, trace {dev_t:e}, idempotency {dev_p:e})"
        )));
    }
    Ok(())
}

/// `d_B(ρ,σ) = (2 − 2√Tr(ρσ))^{1/2}` for a pure `σ`.
pub fn bures_to_pure(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    check_pure(sigma)?;
    let f = qmat::trace_product(rho, sigma)?.re;
    Ok(bures_from_fidelity(f))
}

/// `min_σ d_B(ρ,σ)` over a set of pure states.
pub fn bures_to_set(rho: &ComplexMatrix, set: &[ComplexMatrix]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidParameter("empty reference set".into()));
    }
    set.iter()
        .map(|s| bures_to_pure(rho, s))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
}

/// `1 − Tr(ρ 𝐆𝐇𝐙^ε_k)`, summed over the other GHZ populations so that small
/// defects keep their relative precision.
pub fn fidelity_defect(rho: &ComplexMatrix, basis: &GhzBasis, idx: GhzIndex) -> Result<f64> {
    basis.check(idx)?;
    check_state("fidelity_defect", rho, basis.dim())?;
    let d: f64 = basis.indices().filter(|&j| j != idx).map(|j| basis.population(rho, j)).sum();
    Ok(d.clamp(0.0, 1.0))
}

/// `√(2 − 2√(1−δ))` written as `√(2δ / (1 + √(1−δ)))`.
fn bures_from_defect(d: f64) -> f64 {
    let d = d.clamp(0.0, 1.0);
    (2.0 * d / (1.0 + (1.0 - d).sqrt())).sqrt()
}

/// Bures distance to one GHZ state, read from the GHZ populations.
pub fn bures_to_ghz(rho: &ComplexMatrix, basis: &GhzBasis, idx: GhzIndex) -> Result<f64> {
    Ok(bures_from_defect(fidelity_defect(rho, basis, idx)?))
}

/// Bures distance to the set of all GHZ states.
pub fn bures_to_ghz_set(rho: &ComplexMatrix, basis: &GhzBasis) -> Result<f64> {
    check_state("bures_to_ghz_set", rho, basis.dim())?;
    let p = basis.populations(rho);
    let best = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).expect("nonempty basis");
    let d: f64 = p.iter().enumerate().filter(|(j, _)| *j != best).map(|(_, v)| v).sum();
    Ok(bures_from_defect(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LyapunovKind {
    /// `Σ_{i<j} √(Λ_iΛ_j) + √V_x`, the last term only when an x-channel is present.
    Reduction,
    /// `√(1 − Tr(ρρ̄))`.
    Fidelity(GhzIndex),
    /// `Σ_{n≠k} √Λ_n + √(1 − ε Tr(L_xρ))`.
    Mixed(GhzIndex),
}

impl LyapunovKind {
    pub fn target(&self) -> Option<GhzIndex> {
        match self {
            Self::Reduction => None,
            Self::Fidelity(t) | Self::Mixed(t) => Some(*t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Reduction => "reduction",
            Self::Fidelity(_) => "fidelity",
            Self::Mixed(_) => "mixed",
        }
    }
}

pub fn lyapunov(kind: LyapunovKind, rho: &ComplexMatrix, model: &SystemModel) -> Result<f64> {
    let basis = model.basis();
    check_state("lyapunov", rho, basis.dim())?;
    match kind {
        LyapunovKind::Reduction => {
            let l = lambdas(rho, basis)?;
            let mut v = 0.0;
            for i in 0..l.len() {
                for j in (i + 1)..l.len() {
                    v += sqrt0(l[i] * l[j]);
                }
            }
            if model.x_channel().is_some() {
                v += sqrt0(vx_from_populations(rho, basis)?);
            }
            Ok(v)
        }
        LyapunovKind::Fidelity(t) => {
            Ok(fidelity_defect(rho, basis, t)?.sqrt())
        }
        LyapunovKind::Mixed(t) => {
            basis.check(t)?;
            let l = lambdas(rho, basis)?;
            let others: f64 = l
                .iter()
                .enumerate()
                .filter(|(n, _)| n + 1 != t.k)
                .map(|(_, v)| sqrt0(*v))
                .sum();
            let (plus, minus) = sign_populations(rho, basis)?;
            let wrong = match t.sign {
                Sign::Plus => minus,
                Sign::Minus => plus,
            };
            Ok(others + sqrt0(2.0 * wrong))
        }
    }
}

/// Per-plane measurement signals `p_{n,c}` of every channel `c`: the scaled
/// eigenvalue for z-channels, `√M_x (P_{n+} − P_{n−})/Λ_n` for the x-channel.
fn plane_signals(rho: &ComplexMatrix, model: &SystemModel, n: usize, lambda: f64) -> Vec<(f64, f64)> {
    let basis = model.basis();
    model
        .channels()
        .iter()
        .map(|c| {
            let p = match c.kind() {
                crate::model::ChannelKind::Z => basis.population(c.scaled().matrix(), GhzIndex::plus(n)),
                crate::model::ChannelKind::X => {
                    if lambda > 0.0 {
                        let d = basis.population(rho, GhzIndex::plus(n)) - basis.population(rho, GhzIndex::minus(n));
                        c.strength().sqrt() * d / lambda
                    } else {
                        0.0
                    }
                }
            };
            (c.efficiency(), p)
        })
        .collect()
}

/// Closed-form `𝓛√(Λ_iΛ_j)` at `u ≡ 0`:
/// `−(√(Λ_iΛ_j)/2) Σ_c η_c (p_{i,c} − p_{j,c})²`.
pub fn generator_reduction_pair(rho: &ComplexMatrix, i: usize, j: usize, model: &SystemModel) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidParameter(format!("pair needs distinct planes, got ({i},{j})")));
    }
    let basis = model.basis();
    let li = lambda_k(rho, basis, i)?;
    let lj = lambda_k(rho, basis, j)?;
    let root = sqrt0(li * lj);
    if root == 0.0 {
        return Ok(0.0);
    }
    let pi = plane_signals(rho, model, i, li);
    let pj = plane_signals(rho, model, j, lj);
    let sum: f64 = pi.iter().zip(&pj).map(|((eta, a), (_, b))| eta * (a - b).powi(2)).sum();
    Ok(-0.5 * root * sum)
}

/// `Δ_c(ρ) = Tr(L_c L_x ρ) − Tr(L_c ρ) Tr(L_x ρ)` with scaled `L_c`, unscaled `L_x`.
pub fn delta_k(rho: &ComplexMatrix, channel: &MeasurementChannel, lx: &HermitianMatrix) -> Result<f64> {
    let lc = channel.scaled().matrix();
    let lx = lx.matrix();
    let joint = qmat::trace_product(&lc.matmul(lx), rho)?.re;
    let a = qmat::trace_product(lc, rho)?.re;
    let b = qmat::trace_product(lx, rho)?.re;
    Ok(joint - a * b)
}

/// Closed-form `𝓛√V_x` at `u ≡ 0`:
/// `−2η_xM_x√V_x − 2Σ_z η_cΔ_c²/V_x^{3/2}`; zero on `{V_x = 0}`.
pub fn generator_vx(rho: &ComplexMatrix, model: &SystemModel) -> Result<f64> {
    let x = model.x_channel().ok_or(Error::MissingXChannel)?;
    let v = vx(rho, model)?;
    if v <= 0.0 {
        return Ok(0.0);
    }
    let mut correction = 0.0;
    for c in model.z_channels() {
        let d = delta_k(rho, c, x.operator())?;
        correction += c.efficiency() * d * d;
    }
    Ok(-2.0 * x.efficiency() * x.strength() * v.sqrt() - 2.0 * correction / v.powf(1.5))
}

/// Closed-form `𝓛V` of the Reduction Lyapunov function at `u ≡ 0`.
pub fn generator_reduction(rho: &ComplexMatrix, model: &SystemModel) -> Result<f64> {
    let half = model.basis().half();
    let mut total = 0.0;
    for i in 1..=half {
        for j in (i + 1)..=half {
            total += generator_reduction_pair(rho, i, j, model)?;
        }
    }
    if model.x_channel().is_some() {
        total += generator_vx(rho, model)?;
    }
    Ok(total)
}

/// Guaranteed decay rates and the matching exponent references.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBounds {
    /// `Γ_z ℓ² / (2 m_z)`.
    pub c_bar_z: f64,
    /// `2 η_x M_x`, absent without an x-channel.
    pub c_bar_x: Option<f64>,
    /// `min` of the two above (only `c_bar_z` in z-only mode).
    pub c_bar: f64,
    /// `Γ_m (min{c₊,1})²`, defined when `c₊ > 0`.
    pub c_bar_plus: Option<f64>,
    /// `Γ_m (max{c₋,−1})²`, defined when `c₋ < 0`.
    pub c_bar_minus: Option<f64>,
}

impl RateBounds {
    pub fn exponent(&self) -> f64 {
        -self.c_bar
    }

    pub fn exponent_plus(&self) -> Option<f64> {
        self.c_bar_plus.map(|c| -2.0 * c)
    }

    pub fn exponent_minus(&self) -> Option<f64> {
        self.c_bar_minus.map(|c| -2.0 * c)
    }
}

pub fn rate_bounds(model: &SystemModel, target: GhzIndex) -> Result<RateBounds> {
    let s = spectral_data(model, target)?;
    let c_bar_z = s.gamma_z * s.ell * s.ell / (2.0 * s.z_count as f64);
    let c_bar_x = model.x_channel().map(|x| 2.0 * x.efficiency() * x.strength());
    let c_bar = c_bar_x.map_or(c_bar_z, |x| c_bar_z.min(x));
    let c_bar_plus = (s.c_plus > 0.0).then(|| s.gamma_m * s.c_plus.min(1.0).powi(2));
    let c_bar_minus = (s.c_minus < 0.0).then(|| s.gamma_m * s.c_minus.max(-1.0).powi(2));
    Ok(RateBounds {
        c_bar_z,
        c_bar_x,
        c_bar,
        c_bar_plus,
        c_bar_minus,
    })
}

/// Least-squares fit of `log(value) = a + slope·t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    pub window: (f64, f64),
    /// Points whose value was raised to [`tolerance::LOG_FLOOR`].
    pub clamped: usize,
}

/// Window covering the last two thirds of the sampled times.
pub fn default_window(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    let first = series.first()?.0;
    let last = series.last()?.0;
    Some((first + (last - first) / 3.0, last))
}

pub fn estimate_exponent(series: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<ExponentFit> {
    let window = match window {
        Some(w) => w,
        None => default_window(series).ok_or_else(|| Error::InvalidParameter("empty series".into()))?,
    };
    if !(window.0 <= window.1) {
        return Err(Error::InvalidParameter(format!("empty fit window {window:?}")));
    }
    let mut clamped = 0;
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .map(|&(t, v)| {
            if v <= 0.0 {
                clamped += 1;
                (t, tolerance::LOG_FLOOR.ln())
            } else {
                (t, v.ln())
            }
        })
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "{} points in window {window:?}, need at least {MIN_FIT_POINTS}",
            points.len()
        )));
    }
    if points.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite);
    }
    if clamped > 0 {
        log::warn!("{clamped} non-positive values clamped before the exponent fit");
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit window holds a single time".into()));
    }
    let slope = sxy / sxx;
    Ok(ExponentFit {
        slope,
        intercept: my - slope * mt,
        points: points.len(),
        window,
        clamped,
    })
}

/// Limit class of a final state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LimitClass {
    Ghz(GhzIndex),
    Unresolved,
}

/// The GHZ state with fidelity at least `threshold`, if any.
pub fn classify_limit(rho: &ComplexMatrix, basis: &GhzBasis, threshold: f64) -> Result<LimitClass> {
    if !(threshold > 0.5 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold {threshold} outside (0.5, 1)")));
    }
    check_state("classify_limit", rho, basis.dim())?;
    Ok(basis
        .indices()
        .find(|&idx| basis.population(rho, idx) >= threshold)
        .map_or(LimitClass::Unresolved, LimitClass::Ghz))
}

/// `g_i(ρ) = √η_i · (dV along G_i) / V`, by central differences with step
/// [`NOISE_FD_STEP`].
pub fn noise_coefficients(kind: LyapunovKind, rho: &ComplexMatrix, model: &SystemModel) -> Result<Vec<f64>> {
    let v = lyapunov(kind, rho, model)?;
    if v <= 0.0 {
        return Err(Error::InvalidState(format!("{} Lyapunov function vanishes", kind.name())));
    }
    let h = NOISE_FD_STEP;
    model
        .channels()
        .iter()
        .map(|c| {
            let g = diffusion_gk(rho, c.scaled())?;
            let mut up = rho.clone();
            up.axpy_real(h, &g);
            let mut down = rho.clone();
            down.axpy_real(-h, &g);
            let dv = (lyapunov(kind, &up, model)? - lyapunov(kind, &down, model)?) / (2.0 * h);
            Ok(c.efficiency().sqrt() * dv / v)
        })
        .collect()
}

/// Closed form of [`noise_coefficients`] for the Fidelity kind:
/// `g_i = √η_i · F (Tr(L_iρ) − λ_i) / (1 − F)` with `λ_i` the target eigenvalue.
pub fn fidelity_noise_coefficients(rho: &ComplexMatrix, model: &SystemModel, target: GhzIndex) -> Result<Vec<f64>> {
    let basis = model.basis();
    basis.check(target)?;
    check_state("fidelity_noise_coefficients", rho, basis.dim())?;
    let f = basis.population(rho, target);
    let v2 = 1.0 - f;
    if v2 <= 0.0 {
        return Err(Error::InvalidState("fidelity Lyapunov function vanishes".into()));
    }
    Ok(model
        .channels()
        .iter()
        .map(|c| {
            let l = c.scaled().matrix();
            let mean = qmat::trace_product_real(l, rho);
            let eigen = basis.population(l, target);
            c.efficiency().sqrt() * f * (mean - eigen) / v2
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DensityMatrix;
    use crate::model::{build_z_operator, ChannelKind, PatternFactor};
    use crate::qmat::{pauli, C64};
    use crate::scenario;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn model_a() -> SystemModel {
        scenario::scenario_a_model().unwrap()
    }

    fn mixed() -> ComplexMatrix {
        ComplexMatrix::identity(8).scale_real(0.125)
    }

    fn state(seed: u64, rank: usize) -> ComplexMatrix {
        let mut rng = StdRng::seed_from_u64(seed);
        DensityMatrix::random(8, rank, &mut rng).into_matrix()
    }

    #[test]
    fn lambda_examples() {
        let m = model_a();
        let b = m.basis();
        for idx in b.indices().collect::<Vec<_>>() {
            let p = b.projector(idx).unwrap();
            assert_abs_diff_eq!(lambda_k(&p, b, idx.k).unwrap(), 1.0, epsilon = 1e-15);
        }
        for k in 1..=4 {
            assert_abs_diff_eq!(lambda_k(&mixed(), b, k).unwrap(), 0.25, epsilon = 1e-15);
        }
        assert!(lambda_k(&mixed(), b, 0).is_err());
        assert!(lambda_k(&mixed(), b, 5).is_err());
        let rho = state(1, 8);
        let total: f64 = lambdas(&rho, b).unwrap().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_agrees_across_frames() {
        let m = model_a();
        let g = m.to_ghz_frame();
        let rho = state(2, 8);
        let rg = g.state_into_frame(&rho);
        for k in 1..=4 {
            assert_abs_diff_eq!(
                lambda_k(&rho, m.basis(), k).unwrap(),
                lambda_k(&rg, g.basis(), k).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn variance_examples() {
        let z = HermitianMatrix::new(pauli::z()).unwrap();
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        assert_abs_diff_eq!(variance(&half, &z).unwrap(), 1.0, epsilon = 1e-15);
        let up = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_abs_diff_eq!(variance(&up, &z).unwrap(), 0.0, epsilon = 1e-15);
        let m = model_a();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..1000 {
            let rank = rng.random_range(1..=8);
            let rho = DensityMatrix::random(8, rank, &mut rng).into_matrix();
            for c in m.channels() {
                assert!(channel_variance(&rho, c).unwrap() >= -1e-12);
            }
        }
    }

    #[test]
    fn variance_vanishes_exactly_on_eigenspaces() {
        let m = model_a();
        let b = m.basis();
        let z1 = &m.channels()[0];
        let block = |a: GhzIndex, c: GhzIndex, w: f64| {
            let mut r = b.projector(a).unwrap().scale_real(w);
            r.axpy_real(1.0 - w, &b.projector(c).unwrap());
            r
        };
        // planes 1 and 3 share the eigenvalue +1 of the first z-channel
        let same = block(GhzIndex::plus(1), GhzIndex::minus(3), 0.3);
        assert!(channel_variance(&same, z1).unwrap().abs() < 1e-12);
        let split = block(GhzIndex::plus(1), GhzIndex::plus(2), 0.3);
        let v = channel_variance(&split, z1).unwrap();
        assert_abs_diff_eq!(v, 1.1 * 4.0 * 0.3 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn vx_examples_and_product_identity() {
        let m = model_a();
        let b = m.basis();
        let ghz = b.projector(GhzIndex::plus(1)).unwrap();
        assert_abs_diff_eq!(vx(&ghz, &m).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vx(&mixed(), &m).unwrap(), 1.0, epsilon = 1e-15);
        for seed in 0..50 {
            let rho = state(seed, 8);
            assert_abs_diff_eq!(
                vx(&rho, &m).unwrap(),
                vx_from_populations(&rho, b).unwrap(),
                epsilon = 1e-12
            );
        }
        let zonly = scenario::scenario_b_model().unwrap();
        assert!(matches!(vx(&mixed(), &zonly), Err(Error::MissingXChannel)));
    }

    #[test]
    fn bures_examples() {
        let m = model_a();
        let b = m.basis();
        let p1 = b.projector(GhzIndex::plus(1)).unwrap();
        let m1 = b.projector(GhzIndex::minus(1)).unwrap();
        assert_abs_diff_eq!(bures_to_pure(&p1, &p1).unwrap(), 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(bures_to_pure(&p1, &m1).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        let expected = (2.0 - 2.0 * 0.125f64.sqrt()).sqrt();
        assert_abs_diff_eq!(bures_to_pure(&mixed(), &p1).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 1.137055, epsilon = 1e-6);
        assert!(bures_to_pure(&mixed(), &mixed()).is_err());
        let set: Vec<_> = b.indices().map(|i| b.projector(i).unwrap()).collect();
        assert_abs_diff_eq!(bures_to_set(&m1, &set).unwrap(), 0.0, epsilon = 1e-7);
        let rho = state(4, 8);
        assert_abs_diff_eq!(
            bures_to_set(&rho, &set).unwrap(),
            bures_to_ghz_set(&rho, b).unwrap(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            bures_to_pure(&rho, &p1).unwrap(),
            bures_to_ghz(&rho, b, GhzIndex::plus(1)).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lyapunov_examples() {
        let m = model_a();
        let b = m.basis();
        for idx in b.indices().collect::<Vec<_>>() {
            let p = b.projector(idx).unwrap();
            assert_abs_diff_eq!(lyapunov(LyapunovKind::Reduction, &p, &m).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(lyapunov(LyapunovKind::Fidelity(idx), &p, &m).unwrap(), 0.0, epsilon = 1e-7);
            assert_abs_diff_eq!(lyapunov(LyapunovKind::Mixed(idx), &p, &m).unwrap(), 0.0, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(lyapunov(LyapunovKind::Reduction, &mixed(), &m).unwrap(), 2.5, epsilon = 1e-12);
        let t = GhzIndex::plus(1);
        let mut rho = b.projector(t).unwrap().scale_real(0.75);
        rho.axpy_real(0.25, &b.projector(GhzIndex::minus(2)).unwrap());
        assert_abs_diff_eq!(lyapunov(LyapunovKind::Fidelity(t), &rho, &m).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mixed_lyapunov_matches_trace_form() {
        let m = model_a();
        let x = m.x_channel().unwrap().operator().matrix().clone();
        for seed in 0..20 {
            let rho = state(100 + seed, 8);
            for t in [GhzIndex::plus(2), GhzIndex::minus(3)] {
                let l = lambdas(&rho, m.basis()).unwrap();
                let others: f64 = l.iter().enumerate().filter(|(n, _)| n + 1 != t.k).map(|(_, v)| v.sqrt()).sum();
                let direct = others + (1.0 - t.sign.as_f64() * qmat::trace_product_real(&x, &rho)).sqrt();
                assert_abs_diff_eq!(lyapunov(LyapunovKind::Mixed(t), &rho, &m).unwrap(), direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn generator_check_values() {
        let m = model_a();
        assert_abs_diff_eq!(generator_reduction_pair(&mixed(), 1, 2, &m).unwrap(), -0.275, epsilon = 1e-12);
        assert_abs_diff_eq!(generator_vx(&mixed(), &m).unwrap(), -0.72, epsilon = 1e-12);
        let g = m.to_ghz_frame();
        assert_abs_diff_eq!(generator_reduction_pair(&mixed(), 1, 2, &g).unwrap(), -0.275, epsilon = 1e-12);
        assert_abs_diff_eq!(generator_vx(&mixed(), &g).unwrap(), -0.72, epsilon = 1e-12);
        let p = m.basis().projector(GhzIndex::plus(3)).unwrap();
        assert_eq!(generator_reduction_pair(&p, 1, 2, &m).unwrap(), 0.0);
        assert_eq!(generator_vx(&p, &m).unwrap(), 0.0);
        assert!(generator_reduction_pair(&p, 2, 2, &m).is_err());
    }

    #[test]
    fn generator_bounds_hold() {
        let m = model_a();
        let bounds = rate_bounds(&m, GhzIndex::plus(1)).unwrap();
        let x = m.x_channel().unwrap();
        for seed in 0..200 {
            let rho = state(200 + seed, 1 + (seed as usize % 8));
            for i in 1..=4 {
                for j in (i + 1)..=4 {
                    let root = (lambda_k(&rho, m.basis(), i).unwrap() * lambda_k(&rho, m.basis(), j).unwrap()).sqrt();
                    let g = generator_reduction_pair(&rho, i, j, &m).unwrap();
                    assert!(g <= -bounds.c_bar_z * root + 1e-12, "pair ({i},{j}) {g} vs {root}");
                }
            }
            let v = vx(&rho, &m).unwrap();
            let g = generator_vx(&rho, &m).unwrap();
            assert!(g <= -2.0 * x.efficiency() * x.strength() * v.sqrt() + 1e-12);
            let total = generator_reduction(&rho, &m).unwrap();
            let value = lyapunov(LyapunovKind::Reduction, &rho, &m).unwrap();
            assert!(total <= -bounds.c_bar * value + 1e-12);
        }
    }

    #[test]
    fn rate_bound_examples() {
        let m = model_a();
        let r = rate_bounds(&m, GhzIndex::plus(1)).unwrap();
        assert_abs_diff_eq!(r.c_bar, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.exponent(), -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(r.c_bar_x.unwrap(), 0.72, epsilon = 1e-12);
        let expected = -(9.0 - 6.0 * 2f64.sqrt()) / 5.0;
        assert_abs_diff_eq!(r.exponent_plus().unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, -0.1029, epsilon = 1e-4);
        assert!(r.c_bar_minus.is_none());
        let r4 = rate_bounds(&m, GhzIndex::minus(4)).unwrap();
        assert!(r4.c_bar_plus.is_none());
        assert_abs_diff_eq!(r4.c_bar_minus.unwrap(), 0.3 * (3.0 - 2.0 * 2f64.sqrt()), epsilon = 1e-12);
        let r2 = rate_bounds(&m, GhzIndex::plus(2)).unwrap();
        assert_abs_diff_eq!(r2.exponent(), -0.3, epsilon = 1e-12);
        let zonly = rate_bounds(&scenario::scenario_b_model().unwrap(), GhzIndex::plus(1)).unwrap();
        assert!(zonly.c_bar_x.is_none());
        assert_abs_diff_eq!(zonly.c_bar, zonly.c_bar_z, epsilon = 0.0);
    }

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..=300).map(|i| i as f64 * 0.1).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exponent_examples() {
        let fit = estimate_exponent(&series(|t| (-0.3 * t).exp()), None).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.3, epsilon = 1e-9);
        assert_eq!(fit.window, (10.0, 30.0));
        let fit = estimate_exponent(&series(|_| 2.0), None).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
        let wobble = series(|t| (-0.3 * t).exp() * (1.0 + 0.1 * t.sin()));
        let fit = estimate_exponent(&wobble, Some((5.0, 30.0))).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.3, epsilon = 0.02);
        assert!(estimate_exponent(&series(|t| (-t).exp())[..9], Some((0.0, 1.0))).is_err());
        let mut with_zero = series(|t| (-0.3 * t).exp());
        with_zero[250].1 = 0.0;
        let fit = estimate_exponent(&with_zero, None).unwrap();
        assert_eq!(fit.clamped, 1);
        let fit = estimate_exponent(&series(|t| (-3.0 * t).exp()), None).unwrap();
        assert_eq!(fit.clamped, 0);
        assert_abs_diff_eq!(fit.slope, -3.0, epsilon = 1e-9);
    }

    #[test]
    fn small_defects_keep_relative_precision() {
        let m = model_a().to_ghz_frame();
        let b = m.basis();
        let target = GhzIndex::plus(1);
        let delta = 1e-20;
        let rho = b
            .projector(target)
            .unwrap()
            .scale_real(1.0 - delta)
            .try_add(&b.projector(GhzIndex::minus(3)).unwrap().scale_real(delta))
            .unwrap();
        assert_eq!(fidelity_defect(&rho, b, target).unwrap(), delta);
        assert_abs_diff_eq!(bures_to_ghz(&rho, b, target).unwrap(), 1e-10, epsilon = 1e-22);
        assert_abs_diff_eq!(lyapunov(LyapunovKind::Fidelity(target), &rho, &m).unwrap(), 1e-10, epsilon = 1e-22);
        assert_abs_diff_eq!(bures_to_ghz_set(&rho, b).unwrap(), 1e-10, epsilon = 1e-22);
    }

    #[test]
    fn classify_examples() {
        let m = model_a();
        let b = m.basis();
        let p = b.projector(GhzIndex::minus(4)).unwrap();
        assert_eq!(classify_limit(&p, b, LIMIT_THRESHOLD).unwrap(), LimitClass::Ghz(GhzIndex::minus(4)));
        assert_eq!(classify_limit(&mixed(), b, LIMIT_THRESHOLD).unwrap(), LimitClass::Unresolved);
        assert!(classify_limit(&p, b, 0.5).is_err());
        assert!(classify_limit(&p, b, 1.0).is_err());
    }

    #[test]
    fn noise_coefficients_vanish_where_diffusion_vanishes() {
        // populations spread over planes 1 and 3: first z-channel and x-channel are silent
        let m = model_a();
        let b = m.basis();
        let mut rho = b.projector(GhzIndex::plus(1)).unwrap().scale_real(0.3);
        rho.axpy_real(0.7, &b.projector(GhzIndex::plus(3)).unwrap());
        let g = noise_coefficients(LyapunovKind::Reduction, &rho, &m).unwrap();
        assert_eq!(g.len(), 3);
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-9);
        assert!(g[1].abs() > 1e-3);
        let target = b.projector(GhzIndex::plus(1)).unwrap();
        assert!(noise_coefficients(LyapunovKind::Fidelity(GhzIndex::plus(1)), &target, &m).is_err());
    }

    #[test]
    fn fidelity_noise_matches_closed_form() {
        let m = model_a();
        let t = GhzIndex::plus(1);
        for seed in 0..20 {
            let rho = state(300 + seed, 8);
            let fd = noise_coefficients(LyapunovKind::Fidelity(t), &rho, &m).unwrap();
            let exact = fidelity_noise_coefficients(&rho, &m, t).unwrap();
            for (a, b) in fd.iter().zip(&exact) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn fidelity_noise_near_target_exceeds_rate() {
        let m = model_a();
        let t = GhzIndex::plus(1);
        let b = m.basis();
        let bound = 2.0 * rate_bounds(&m, t).unwrap().c_bar_plus.unwrap();
        let target = b.projector(t).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 200 {
            let noise = DensityMatrix::random(8, 8, &mut rng).into_matrix();
            let w = rng.random_range(1e-5..2e-3);
            let mut rho = target.scale_real(1.0 - w);
            rho.axpy_real(w, &noise);
            if bures_to_ghz(&rho, b, t).unwrap() > 0.05 {
                continue;
            }
            checked += 1;
            let f = b.population(&rho, t);
            let g = noise_coefficients(LyapunovKind::Fidelity(t), &rho, &m).unwrap();
            let k: f64 = g.iter().map(|x| x * x).sum();
            assert!(k >= 0.8 * bound * f * f, "K = {k} vs {bound}");
        }
    }

    #[test]
    fn z_variance_on_ghz_plane_states() {
        let op = build_z_operator(3, &[PatternFactor::SigmaZ, PatternFactor::SigmaZ, PatternFactor::Identity]).unwrap();
        let c = MeasurementChannel::new(op, 1.0, 0.5, ChannelKind::Z).unwrap();
        let b = GhzBasis::new(3).unwrap();
        let v: Vec<C64> = b.vector(GhzIndex::minus(2)).unwrap().to_vec();
        let rho = ComplexMatrix::outer(&v);
        assert!(channel_variance(&rho, &c).unwrap().abs() < 1e-15);
    }

    fn mixed_upper(half: usize) -> f64 {
        ((half - 1) as f64).sqrt() + 2f64.sqrt()
    }

    #[test]
    fn mixed_upper_constant_is_attained() {
        let m = model_a();
        let b = m.basis();
        let t = GhzIndex::plus(1);
        let delta: f64 = 1e-8;
        let mut v: Vec<C64> = b.vector(t).unwrap().iter().map(|z| z * (1.0 - delta).sqrt()).collect();
        for k in 2..=4 {
            for (a, z) in v.iter_mut().zip(b.vector(GhzIndex::minus(k)).unwrap()) {
                *a += z * (delta / 3.0).sqrt();
            }
        }
        let rho = ComplexMatrix::outer(&v);
        let ratio = lyapunov(LyapunovKind::Mixed(t), &rho, &m).unwrap() / bures_to_ghz(&rho, b, t).unwrap();
        assert!(ratio > 2.0);
        assert_abs_diff_eq!(ratio, mixed_upper(4), epsilon = 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn sandwich_bounds(seed in 0u64..u64::MAX, rank in 1usize..=8) {
            let m = model_a();
            let b = m.basis();
            let rho = state(seed, rank);
            let d_set = bures_to_ghz_set(&rho, b).unwrap();
            let v = lyapunov(LyapunovKind::Reduction, &rho, &m).unwrap();
            prop_assert!(d_set / 8.0 <= v + 1e-12 && v <= 28.0 * d_set + 1e-12);
            for t in [GhzIndex::plus(1), GhzIndex::plus(2), GhzIndex::minus(4)] {
                let d = bures_to_ghz(&rho, b, t).unwrap();
                let f = lyapunov(LyapunovKind::Fidelity(t), &rho, &m).unwrap();
                prop_assert!(std::f64::consts::FRAC_1_SQRT_2 * d <= f + 1e-12 && f <= d + 1e-12);
                let x = lyapunov(LyapunovKind::Mixed(t), &rho, &m).unwrap();
                prop_assert!(std::f64::consts::FRAC_1_SQRT_2 * d <= x + 1e-12 && x <= mixed_upper(4) * d + 1e-12);
            }
        }
    }
}
