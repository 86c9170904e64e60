//! Feedback laws and the scalar quantities they are built from.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{GhzIndex, SystemModel};
use crate::qmat::{self, commutator, trace_product, ComplexMatrix, C64, I};

/// Variant and parameters of a feedback law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeedbackKind {
    Zero,
    /// `u = α(1 − Tr(ρρ̄))^β`.
    FidelityPower { alpha: f64, beta: f64 },
    /// `u = α(l_𝐤 − Tr(𝐋_zρ))^β + γ(ε − Tr(L_xρ))^δ`.
    MixedPower { alpha: f64, beta: f64, gamma: f64, delta: f64 },
    /// `u₁ = γ − Tr(i[H₁,ρ]ρ̄)`, `u₂ = f(Tr(ρρ̄))(γ − Tr(i[H₂,ρ]ρ̄))`.
    TwoHamiltonian { gamma: f64, eps1: f64, eps2: f64 },
}

pub const DEFAULT_EPS1: f64 = 0.1;
pub const DEFAULT_EPS2: f64 = 0.6;

impl FeedbackKind {
    pub fn name(&self) -> &'static str {
        match self {
            FeedbackKind::Zero => "zero",
            FeedbackKind::FidelityPower { .. } => "fidelity-power",
            FeedbackKind::MixedPower { .. } => "mixed-power",
            FeedbackKind::TwoHamiltonian { .. } => "two-hamiltonian",
        }
    }

    /// Number of control inputs the law produces.
    pub fn outputs(&self) -> usize {
        match self {
            FeedbackKind::Zero => 0,
            FeedbackKind::FidelityPower { .. } | FeedbackKind::MixedPower { .. } => 1,
            FeedbackKind::TwoHamiltonian { .. } => 2,
        }
    }
}

/// A feedback law together with its target GHZ state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackLaw {
    kind: FeedbackKind,
    target: GhzIndex,
}

impl FeedbackLaw {
    pub fn new(kind: FeedbackKind, target: GhzIndex) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        let above_one = |name: &str, v: f64| {
            if v > 1.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must exceed 1")))
            }
        };
        match kind {
            FeedbackKind::Zero => {}
            FeedbackKind::FidelityPower { alpha, beta } => {
                positive("alpha", alpha)?;
                above_one("beta", beta)?;
            }
            FeedbackKind::MixedPower { alpha, beta, gamma, delta } => {
                positive("alpha", alpha)?;
                above_one("beta", beta)?;
                positive("gamma", gamma)?;
                above_one("delta", delta)?;
            }
            FeedbackKind::TwoHamiltonian { gamma, eps1, eps2 } => {
                if !gamma.is_finite() {
                    return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
                }
                if !(0.0 < eps1 && eps1 < eps2 && eps2 < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "need 0 < eps1 < eps2 < 1, got {eps1}, {eps2}"
                    )));
                }
            }
        }
        Ok(Self { kind, target })
    }

    pub fn zero(target: GhzIndex) -> Self {
        Self {
            kind: FeedbackKind::Zero,
            target,
        }
    }

    pub fn kind(&self) -> FeedbackKind {
        self.kind
    }

    pub fn target(&self) -> GhzIndex {
        self.target
    }

    /// Control values `u_j` for the state `ρ` (written in the model's frame).
    pub fn evaluate(&self, rho: &ComplexMatrix, model: &SystemModel) -> Result<Vec<f64>> {
        let basis = model.basis();
        basis.check(self.target)?;
        if rho.rows() != model.dim() || !rho.is_square() {
            return Err(Error::DimensionMismatch {
                op: "FeedbackLaw::evaluate",
                left: rho.shape(),
                right: format!("{0}x{0}", model.dim()),
            });
        }
        let needed = self.kind.outputs();
        if model.controls().len() < needed {
            return Err(Error::InvalidParameter(format!(
                "{} law needs {needed} control Hamiltonians, model has {}",
                self.kind.name(),
                model.controls().len()
            )));
        }
        let fidelity = basis.population(rho, self.target).clamp(0.0, 1.0);
        Ok(match self.kind {
            FeedbackKind::Zero => Vec::new(),
            FeedbackKind::FidelityPower { alpha, beta } => vec![alpha * signed_pow(1.0 - fidelity, beta)],
            FeedbackKind::MixedPower { alpha, beta, gamma, delta } => {
                let x = model.x_channel().ok_or(Error::MissingXChannel)?;
                let lz = model.lz_sum();
                let lk = basis.population(&lz, self.target);
                let z_residual = lk - qmat::trace_product_real(&lz, rho);
                let x_residual =
                    self.target.sign.as_f64() - qmat::trace_product_real(x.operator().matrix(), rho);
                vec![alpha * signed_pow(z_residual, beta) + gamma * signed_pow(x_residual, delta)]
            }
            FeedbackKind::TwoHamiltonian { gamma, eps1, eps2 } => {
                let v = basis.vector(self.target)?;
                let c1 = commutator_overlap(model.controls()[0].matrix(), rho, v);
                let c2 = commutator_overlap(model.controls()[1].matrix(), rho, v);
                let f = smoothstep_f(fidelity, eps1, eps2)?;
                vec![gamma - c1, f * (gamma - c2)]
            }
        })
    }
}

/// `sign(x)|x|^p`; for integer `p` this is the ordinary power.
pub fn signed_pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        x.powi(p as i32)
    } else {
        x.signum() * x.abs().powf(p)
    }
}

/// `Tr(i[H,ρ] v v†) = −2 Im((Hv)†ρv)`.
pub fn commutator_overlap(h: &ComplexMatrix, rho: &ComplexMatrix, v: &[C64]) -> f64 {
    let hv = h.mat_vec(v);
    let rv = rho.mat_vec(v);
    -2.0 * qmat::inner(&hv, &rv).im
}

/// C¹ half-sine switch: 0 below `ε₁`, 1 above `ε₂`.
pub fn smoothstep_f(x: f64, eps1: f64, eps2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("smoothstep argument {x} outside [0,1]")));
    }
    if !(0.0 < eps1 && eps1 < eps2 && eps2 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < eps1 < eps2 < 1, got {eps1}, {eps2}"
        )));
    }
    Ok(if x < eps1 {
        0.0
    } else if x < eps2 {
        0.5 * (PI * (2.0 * x - eps1 - eps2) / (2.0 * (eps2 - eps1))).sin() + 0.5
    } else {
        1.0
    })
}

/// `Θ_u(ρ) = u Tr(i[H,ρ]ρ̄)`.
pub fn theta_u(rho: &ComplexMatrix, h: &ComplexMatrix, target: &ComplexMatrix, u: f64) -> Result<f64> {
    let c = commutator(h, rho)?.scale(I);
    let z = trace_product(&c, target)?;
    Ok(u * z.re)
}

/// Outcome of the (A2) check on a single-control law.
#[derive(Clone, Debug, PartialEq)]
pub struct A2Report {
    pub u_at_target: f64,
    /// `(state, u(ρ), ‖[H₁,ρ]‖_F)` for each non-target GHZ state.
    pub others: Vec<(GhzIndex, f64, f64)>,
    pub pass: bool,
}

const A2_THRESHOLD: f64 = 1e-8;

/// Checks `u(ρ̄) = 0` and `u(ρ)[H₁,ρ] ≠ 0` on every other GHZ state.
pub fn check_a2(law: &FeedbackLaw, model: &SystemModel) -> Result<A2Report> {
    if law.kind().outputs() > 1 {
        return Err(Error::InvalidParameter("(A2) applies to single-control laws".into()));
    }
    let basis = model.basis();
    basis.check(law.target())?;
    let h1 = model
        .controls()
        .first()
        .ok_or_else(|| Error::InvalidParameter("model has no control Hamiltonian".into()))?
        .matrix();
    let u_of = |rho: &ComplexMatrix| -> Result<f64> {
        Ok(law.evaluate(rho, model)?.first().copied().unwrap_or(0.0))
    };
    let u_at_target = u_of(&basis.projector(law.target())?)?;
    let mut others = Vec::new();
    let mut pass = u_at_target.abs() <= A2_THRESHOLD;
    for idx in basis.indices().filter(|i| *i != law.target()) {
        let rho = basis.projector(idx)?;
        let u = u_of(&rho)?;
        let c = commutator(h1, &rho)?;
        let norm = c.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        pass &= u.abs() * norm > A2_THRESHOLD;
        others.push((idx, u, norm));
    }
    Ok(A2Report {
        u_at_target,
        others,
        pass,
    })
}
