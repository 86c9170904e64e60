//! Rank matrices for passage between GHZ states and the stabilizability condition checks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::analysis::{bures_to_ghz, channel_variance};
use crate::control::{theta_u, FeedbackKind, FeedbackLaw};
use crate::error::{Error, Result};
use crate::model::{GhzIndex, SystemModel};
use crate::qmat::{self, commutator, ComplexMatrix, C64};
use crate::tolerance;

/// Relative singular-value threshold of [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = tolerance::MATRIX_RANK;
/// Fixed-point threshold for equilibrium and drift checks.
pub const DRIFT_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    /// Columns `ξ, …, L_z^{(i)} H₁^j ξ, L_x H₁^j ξ, …`.
    Full,
    /// As [`Flavor::Full`] without the `L_x` blocks.
    ZOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankMatrix {
    columns: Vec<Vec<C64>>,
    depth: usize,
    flavor: Flavor,
}

impl RankMatrix {
    pub fn columns(&self) -> &[Vec<C64>] {
        &self.columns
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    /// `N × columns` matrix.
    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.columns).expect("columns of equal length")
    }
}

fn first_control(model: &SystemModel) -> Result<&ComplexMatrix> {
    Ok(model
        .controls()
        .first()
        .ok_or_else(|| Error::InvalidParameter("model has no control Hamiltonian".into()))?
        .matrix())
}

/// Columns in block order `H₁^jξ, L_z^{(1)}H₁^jξ, …, L_z^{(m_z)}H₁^jξ[, L_xH₁^jξ]`
/// for `j = 1..=depth`, after the leading `ξ`. Operators are unscaled.
pub fn build_rank_matrix(model: &SystemModel, xi: &[C64], depth: usize, flavor: Flavor) -> Result<RankMatrix> {
    if xi.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            op: "build_rank_matrix",
            left: format!("vector of length {}", xi.len()),
            right: format!("dimension {}", model.dim()),
        });
    }
    let x = match flavor {
        Flavor::Full => Some(model.x_channel().ok_or(Error::MissingXChannel)?.operator().matrix()),
        Flavor::ZOnly => None,
    };
    let h1 = first_control(model)?;
    let zs: Vec<&ComplexMatrix> = model.z_channels().map(|c| c.operator().matrix()).collect();
    let mut columns = vec![xi.to_vec()];
    let mut power = xi.to_vec();
    for _ in 0..depth {
        power = h1.mat_vec(&power);
        columns.push(power.clone());
        for z in &zs {
            columns.push(z.mat_vec(&power));
        }
        if let Some(x) = x {
            columns.push(x.mat_vec(&power));
        }
    }
    Ok(RankMatrix { columns, depth, flavor })
}

/// Number of singular values above `tol` times the largest.
pub fn numeric_rank(m: &RankMatrix, tol: f64) -> usize {
    matrix_rank(&m.matrix(), tol)
}

pub fn matrix_rank(m: &ComplexMatrix, tol: f64) -> usize {
    let s = qmat::singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|v| **v > tol * top).count(),
        _ => 0,
    }
}

/// Ranks for `l = 0..=cap` from one seed vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RankSearch {
    pub seed: GhzIndex,
    pub flavor: Flavor,
    pub ranks: Vec<usize>,
    /// Smallest depth with rank `N`.
    pub full_at: Option<usize>,
    /// Smallest depth with rank at least `N − 1`.
    pub almost_full_at: Option<usize>,
}

pub fn rank_search(model: &SystemModel, seed: GhzIndex, flavor: Flavor, cap: usize) -> Result<RankSearch> {
    let xi = model.basis().vector(seed)?.to_vec();
    let n = model.dim();
    let mut ranks = Vec::with_capacity(cap + 1);
    for l in 0..=cap {
        let m = build_rank_matrix(model, &xi, l, flavor)?;
        ranks.push(numeric_rank(&m, DEFAULT_RANK_TOL));
    }
    let full_at = ranks.iter().position(|&r| r == n);
    let almost_full_at = ranks.iter().position(|&r| r + 1 >= n);
    Ok(RankSearch {
        seed,
        flavor,
        ranks,
        full_at,
        almost_full_at,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Holds because the quantified set is empty.
    Vacuous,
    /// Not computable; rests on the law's analytic properties.
    Assumed,
}

impl Verdict {
    pub fn ok(self) -> bool {
        !matches!(self, Verdict::Fail)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Vacuous => "vacuous",
            Verdict::Assumed => "assumed",
        }
    }
}

/// Which family of conditions applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionMode {
    /// z-channels plus an x-channel, one control: conditions (i)–(iii).
    WithX,
    /// z-channels only: conditions (A)–(C).
    ZOnly,
}

/// Non-target GHZ states are not equilibria, the target is.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumCheck {
    /// `‖Σ_j u_j(ρ̄)[H_j,ρ̄]‖_F`.
    pub target_drift: f64,
    /// `(state, u(ρ), ‖u₁(ρ)[H₁,ρ]‖_F)`.
    pub others: Vec<(GhzIndex, Vec<f64>, f64)>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyVerdict {
    pub verdict: Verdict,
    pub note: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledCondition {
    /// Vertices of the polytope of populations with the target's channel means.
    pub vertices: usize,
    pub samples: usize,
    /// `min (LHS − RHS)` over the samples.
    pub min_margin: Option<f64>,
    pub worst_state: Option<ComplexMatrix>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub mode: ConditionMode,
    pub target: GhzIndex,
    pub law: &'static str,
    pub equilibrium: EquilibriumCheck,
    pub passage: FamilyVerdict,
    pub rank_cap: usize,
    /// One search per GHZ seed, in storage order.
    pub ranks: Vec<RankSearch>,
    pub rank_verdict: Verdict,
    pub sampled: Option<SampledCondition>,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.equilibrium.verdict.ok()
            && self.passage.verdict.ok()
            && self.rank_verdict.ok()
            && self.sampled.as_ref().is_none_or(|s| s.verdict.ok())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionOptions {
    /// Largest rank-matrix depth; `None` means `2N`.
    pub depth_cap: Option<usize>,
    pub samples: usize,
    /// Samples within this Bures distance of the target are skipped.
    pub exclusion_radius: f64,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            depth_cap: None,
            samples: 10_000,
            exclusion_radius: 0.05,
            seed: 0,
        }
    }
}

fn frobenius(m: &ComplexMatrix) -> f64 {
    m.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn control_drift(model: &SystemModel, u: &[f64], rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(model.dim(), model.dim());
    for (h, &uj) in model.controls().iter().zip(u) {
        out.axpy_real(uj, &commutator(h.matrix(), rho)?);
    }
    Ok(out)
}

pub fn check_equilibria(law: &FeedbackLaw, model: &SystemModel) -> Result<EquilibriumCheck> {
    let basis = model.basis();
    let target = law.target();
    basis.check(target)?;
    let h1 = first_control(model)?;
    let bar = basis.projector(target)?;
    let u_bar = law.evaluate(&bar, model)?;
    let target_drift = frobenius(&control_drift(model, &u_bar, &bar)?);
    let mut ok = target_drift <= DRIFT_THRESHOLD;
    if law.kind().outputs() == 1 {
        ok &= u_bar[0].abs() <= DRIFT_THRESHOLD;
    }
    let mut others = Vec::new();
    for idx in basis.indices().filter(|i| *i != target) {
        let rho = basis.projector(idx)?;
        let u = law.evaluate(&rho, model)?;
        let u1 = u.first().copied().unwrap_or(0.0);
        let push = u1.abs() * frobenius(&commutator(h1, &rho)?);
        ok &= push > DRIFT_THRESHOLD && u.iter().skip(1).all(|v| v.abs() <= DRIFT_THRESHOLD);
        others.push((idx, u, push));
    }
    Ok(EquilibriumCheck {
        target_drift,
        others,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
    })
}

/// Condition (i)/(B) for the built-in families, established by hand.
pub fn passage_verdict(law: &FeedbackLaw) -> FamilyVerdict {
    match law.kind() {
        FeedbackKind::Zero => FamilyVerdict {
            verdict: Verdict::Fail,
            note: "u vanishes identically, so its gradient vanishes on the zero-fidelity slice",
        },
        FeedbackKind::FidelityPower { .. } => FamilyVerdict {
            verdict: Verdict::Vacuous,
            note: "u = alpha > 0 wherever the target fidelity is zero",
        },
        FeedbackKind::MixedPower { .. } => FamilyVerdict {
            verdict: Verdict::Assumed,
            note: "relies on alpha and gamma being large enough",
        },
        FeedbackKind::TwoHamiltonian { gamma, .. } => {
            if gamma != 0.0 {
                FamilyVerdict {
                    verdict: Verdict::Vacuous,
                    note: "u1 = gamma != 0 and u2 = 0 wherever the target fidelity is zero",
                }
            } else {
                FamilyVerdict {
                    verdict: Verdict::Fail,
                    note: "gamma = 0 leaves u1 = 0 on the zero-fidelity slice",
                }
            }
        }
    }
}

/// Per-slot channel values (unscaled z-operators, then `L_x` when present) and the
/// target's values.
fn slot_features(model: &SystemModel, target: GhzIndex) -> (Vec<Vec<f64>>, Vec<f64>) {
    let basis = model.basis();
    let mut ops: Vec<&ComplexMatrix> = model.z_channels().map(|c| c.operator().matrix()).collect();
    if let Some(x) = model.x_channel() {
        ops.push(x.operator().matrix());
    }
    let features = basis
        .indices()
        .map(|idx| ops.iter().map(|op| basis.population(op, idx)).collect())
        .collect();
    let goal = ops.iter().map(|op| basis.population(op, target)).collect();
    (features, goal)
}

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
    while let Some((cur, start)) = stack.pop() {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max {
            continue;
        }
        for i in start..n {
            let mut next = cur.clone();
            next.push(i);
            stack.push((next, i + 1));
        }
    }
    out
}

/// Vertices of `{p ≥ 0, Σp = 1, Σ p_s f_s = goal}` over the GHZ slots.
pub fn population_vertices(model: &SystemModel, target: GhzIndex) -> Result<Vec<Vec<f64>>> {
    model.basis().check(target)?;
    let (features, goal) = slot_features(model, target);
    let slots = features.len();
    let rows = goal.len() + 1;
    let mut b = DVector::zeros(rows);
    b[0] = 1.0;
    for (i, g) in goal.iter().enumerate() {
        b[i + 1] = *g;
    }
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for subset in subsets(slots, rows) {
        let mut a = DMatrix::zeros(rows, subset.len());
        for (c, &s) in subset.iter().enumerate() {
            a[(0, c)] = 1.0;
            for (r, f) in features[s].iter().enumerate() {
                a[(r + 1, c)] = *f;
            }
        }
        let svd = a.clone().svd(true, true);
        if svd.rank(1e-10) < subset.len() {
            continue;
        }
        let Ok(w) = svd.solve(&b, 1e-12) else { continue };
        if (&a * &w - &b).amax() > 1e-10 || w.iter().any(|x| *x < -1e-12) {
            continue;
        }
        let mut p = vec![0.0; slots];
        for (c, &s) in subset.iter().enumerate() {
            p[s] = w[c].max(0.0);
        }
        if !vertices.iter().any(|v| v.iter().zip(&p).all(|(x, y)| (x - y).abs() < 1e-10)) {
            vertices.push(p);
        }
    }
    Ok(vertices)
}

/// Mixture of three random-phase pure states sharing the populations `p`.
fn state_with_populations(model: &SystemModel, p: &[f64], rng: &mut impl Rng) -> Result<ComplexMatrix> {
    let basis = model.basis();
    let n = model.dim();
    let mut rho = ComplexMatrix::zeros(n, n);
    let weights: Vec<f64> = (0..3).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let mut psi = vec![C64::new(0.0, 0.0); n];
        for (idx, &ps) in basis.indices().zip(p) {
            if ps <= 0.0 {
                continue;
            }
            let phase = C64::from_polar(ps.sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
            for (a, v) in psi.iter_mut().zip(basis.vector(idx)?) {
                *a += v * phase;
            }
        }
        rho.axpy_real(w / total, &ComplexMatrix::outer(&psi));
    }
    Ok(rho.hermitize())
}

/// Condition (iii): `2 Tr(ρρ̄) Σ_z η_i 𝒱_i(ρ) > u Tr(i[H₁,ρ]ρ̄)` on sampled states with
/// the target's channel means, away from `ρ̄`.
pub fn sample_condition_iii(
    law: &FeedbackLaw,
    model: &SystemModel,
    options: &ConditionOptions,
) -> Result<SampledCondition> {
    let basis = model.basis();
    let target = law.target();
    let vertices = population_vertices(model, target)?;
    let h1 = first_control(model)?;
    let bar = basis.projector(target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut samples = 0;
    let mut min_margin: Option<f64> = None;
    let mut worst_state = None;
    let non_target = vertices.iter().any(|v| v.iter().enumerate().any(|(s, p)| *p > 0.0 && s != basis.slot(target)));
    if non_target {
        let mut attempts = 0usize;
        while samples < options.samples && attempts < 20 * options.samples {
            attempts += 1;
            let w: Vec<f64> = vertices.iter().map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = w.iter().sum();
            let mut p = vec![0.0; basis.dim()];
            for (wi, v) in w.iter().zip(&vertices) {
                for (a, b) in p.iter_mut().zip(v) {
                    *a += wi / total * b;
                }
            }
            let rho = state_with_populations(model, &p, &mut rng)?;
            if bures_to_ghz(&rho, basis, target)? < options.exclusion_radius {
                continue;
            }
            samples += 1;
            let u = law.evaluate(&rho, model)?.first().copied().unwrap_or(0.0);
            let f = basis.population(&rho, target);
            let mut spread = 0.0;
            for c in model.z_channels() {
                spread += c.efficiency() * channel_variance(&rho, c)?;
            }
            let margin = 2.0 * f * spread - theta_u(&rho, h1, &bar, u)?;
            if min_margin.is_none_or(|m| margin < m) {
                min_margin = Some(margin);
                worst_state = Some(rho);
            }
        }
    }
    let verdict = match min_margin {
        None => Verdict::Vacuous,
        Some(m) if m > 0.0 => Verdict::Pass,
        Some(_) => Verdict::Fail,
    };
    Ok(SampledCondition {
        vertices: vertices.len(),
        samples,
        min_margin,
        worst_state,
        verdict,
    })
}

pub fn check_conditions(model: &SystemModel, law: &FeedbackLaw, options: &ConditionOptions) -> Result<ConditionReport> {
    let basis = model.basis();
    let target = law.target();
    basis.check(target)?;
    let mode = if model.x_channel().is_some() && law.kind().outputs() <= 1 {
        ConditionMode::WithX
    } else {
        ConditionMode::ZOnly
    };
    let flavor = match mode {
        ConditionMode::WithX => Flavor::Full,
        ConditionMode::ZOnly => Flavor::ZOnly,
    };
    let cap = options.depth_cap.unwrap_or(2 * model.dim());
    let equilibrium = check_equilibria(law, model)?;
    let ranks = basis
        .indices()
        .map(|idx| rank_search(model, idx, flavor, cap))
        .collect::<Result<Vec<_>>>()?;
    let rank_ok = match mode {
        ConditionMode::WithX => ranks.iter().any(|r| r.seed == target && r.almost_full_at.is_some()),
        ConditionMode::ZOnly => ranks.iter().all(|r| r.full_at.is_some()),
    };
    let sampled = match mode {
        ConditionMode::WithX => Some(sample_condition_iii(law, model, options)?),
        ConditionMode::ZOnly => None,
    };
    Ok(ConditionReport {
        mode,
        target,
        law: law.kind().name(),
        equilibrium,
        passage: passage_verdict(law),
        rank_cap: cap,
        ranks,
        rank_verdict: if rank_ok { Verdict::Pass } else { Verdict::Fail },
        sampled,
    })
}
