//! GHZ basis, measurement operators, the system model and its spectral constants.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qmat::{kron_all, pauli, ComplexMatrix, HermitianMatrix, C64, ONE, ZERO};
use crate::tolerance;

/// Sign `ε` of a GHZ state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Address of a GHZ state: `k ∈ {1..N/2}` (one-based) and the sign `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GhzIndex {
    pub k: usize,
    pub sign: Sign,
}

impl GhzIndex {
    pub fn new(k: usize, sign: Sign) -> Self {
        Self { k, sign }
    }

    pub fn plus(k: usize) -> Self {
        Self::new(k, Sign::Plus)
    }

    pub fn minus(k: usize) -> Self {
        Self::new(k, Sign::Minus)
    }
}

impl fmt::Display for GhzIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.k, self.sign)
    }
}

/// Parses `"k,+"`, `"k,-"`, `"k+"` or `"k-"`.
impl FromStr for GhzIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace() && *c != ',' && *c != ':').collect();
        let bad = || Error::InvalidParameter(format!("bad GHZ index {s:?} (expected e.g. \"1,+\")"));
        let sign = match t.chars().last() {
            Some('+') => Sign::Plus,
            Some('-') => Sign::Minus,
            _ => return Err(bad()),
        };
        let k = t[..t.len() - 1].parse::<usize>().map_err(|_| bad())?;
        Ok(GhzIndex::new(k, sign))
    }
}

/// Which representation the basis vectors (and the model operators) are written in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// The computational basis `|b₁…bₙ⟩`.
    Computational,
    /// Coordinates with respect to the GHZ basis, in storage order.
    Ghz,
}

/// The `2^n` GHZ vectors, stored as `(k,+)` for `k = 1..N/2` followed by `(k,−)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzBasis {
    n: usize,
    dim: usize,
    frame: Frame,
    vectors: Vec<Vec<C64>>,
}

impl GhzBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 4 {
            return Err(Error::InvalidParameter(format!("qubit count {n} outside 1..=4")));
        }
        let dim = 1usize << n;
        let mut vectors = Vec::with_capacity(dim);
        for sign in [Sign::Plus, Sign::Minus] {
            for k in 1..=dim / 2 {
                vectors.push(ghz_vector(n, k, sign)?);
            }
        }
        Ok(Self {
            n,
            dim,
            frame: Frame::Computational,
            vectors,
        })
    }

    /// Same basis with vectors expressed in GHZ coordinates (unit vectors).
    pub fn to_ghz_frame(&self) -> Self {
        let vectors = (0..self.dim)
            .map(|j| {
                let mut v = vec![ZERO; self.dim];
                v[j] = ONE;
                v
            })
            .collect();
        Self {
            n: self.n,
            dim: self.dim,
            frame: Frame::Ghz,
            vectors,
        }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half(&self) -> usize {
        self.dim / 2
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn check(&self, idx: GhzIndex) -> Result<()> {
        if idx.k == 0 || idx.k > self.half() {
            return Err(Error::IndexOutOfRange(format!(
                "GHZ index k={} outside 1..={}",
                idx.k,
                self.half()
            )));
        }
        Ok(())
    }

    pub(crate) fn slot(&self, idx: GhzIndex) -> usize {
        match idx.sign {
            Sign::Plus => idx.k - 1,
            Sign::Minus => self.half() + idx.k - 1,
        }
    }

    pub fn vector(&self, idx: GhzIndex) -> Result<&[C64]> {
        self.check(idx)?;
        Ok(&self.vectors[self.slot(idx)])
    }

    pub fn projector(&self, idx: GhzIndex) -> Result<ComplexMatrix> {
        Ok(ComplexMatrix::outer(self.vector(idx)?))
    }

    /// All indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = GhzIndex> + '_ {
        [Sign::Plus, Sign::Minus]
            .into_iter()
            .flat_map(move |s| (1..=self.half()).map(move |k| GhzIndex::new(k, s)))
    }

    /// Unitary whose columns are the GHZ vectors in storage order.
    pub fn unitary(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.vectors).expect("square basis")
    }

    /// `Tr(ρ 𝐆𝐇𝐙^ε_k) = v† ρ v`.
    pub fn population(&self, rho: &ComplexMatrix, idx: GhzIndex) -> f64 {
        let slot = self.slot(idx);
        match self.frame {
            Frame::Ghz => rho[(slot, slot)].re,
            Frame::Computational => {
                let (lo, hi, s) = self.support(slot);
                0.5 * (rho[(lo, lo)].re + rho[(hi, hi)].re) + s * rho[(lo, hi)].re
            }
        }
    }

    /// Populations of every GHZ state, in storage order.
    pub fn populations(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.indices().map(|idx| self.population(rho, idx)).collect()
    }

    /// Computational indices `(k−1, N−k)` of a slot and the relative sign.
    fn support(&self, slot: usize) -> (usize, usize, f64) {
        let half = self.half();
        let (k, s) = if slot < half { (slot + 1, 1.0) } else { (slot - half + 1, -1.0) };
        (k - 1, self.dim - k, s)
    }

    /// Slots containing computational index `i`, with the amplitude signs.
    fn slots_of(&self, i: usize) -> [(usize, f64); 2] {
        let half = self.half();
        let (k, hi) = if i < half { (i + 1, false) } else { (self.dim - i, true) };
        let minus = if hi { -1.0 } else { 1.0 };
        [(k - 1, 1.0), (half + k - 1, minus)]
    }

    /// Rewrites an operator from the computational basis into GHZ coordinates, `U†XU`.
    pub fn rotate_in(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for a in 0..self.dim {
            let (la, ha, sa) = self.support(a);
            for b in 0..self.dim {
                let (lb, hb, sb) = self.support(b);
                let v = x[(la, lb)] + x[(la, hb)] * sb + x[(ha, lb)] * sa + x[(ha, hb)] * (sa * sb);
                out[(a, b)] = v * 0.5;
            }
        }
        out
    }

    /// Inverse of [`rotate_in`](Self::rotate_in), `U Y U†`.
    pub fn rotate_out(&self, y: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let si = self.slots_of(i);
            for j in 0..self.dim {
                let sj = self.slots_of(j);
                let mut v = ZERO;
                for (a, ca) in si {
                    for (b, cb) in sj {
                        v += y[(a, b)] * (ca * cb);
                    }
                }
                out[(i, j)] = v * 0.5;
            }
        }
        out
    }
}

/// `ghz^ε_k = (⊗|k_j⟩ ± ⊗|1−k_j⟩)/√2` with `k₁ = 0` and `k₂..k_n` the binary digits of `k−1`.
pub fn ghz_vector(n: usize, k: usize, sign: Sign) -> Result<Vec<C64>> {
    if n == 0 || n >= usize::BITS as usize {
        return Err(Error::InvalidParameter(format!("qubit count {n}")));
    }
    let dim = 1usize << n;
    if k == 0 || k > dim / 2 {
        return Err(Error::IndexOutOfRange(format!("GHZ index k={k} outside 1..={}", dim / 2)));
    }
    // leading qubit is 0, so ⊗|k_j⟩ is the computational index k−1 and its complement N−k
    let lo = k - 1;
    let hi = dim - k;
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![ZERO; dim];
    v[lo] = C64::new(amp, 0.0);
    v[hi] = C64::new(sign.as_f64() * amp, 0.0);
    Ok(v)
}

/// One tensor factor of a z-type measurement pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternFactor {
    SigmaZ,
    Identity,
}

fn pattern_matrix(pattern: &[PatternFactor]) -> ComplexMatrix {
    let factors: Vec<ComplexMatrix> = pattern
        .iter()
        .map(|f| match f {
            PatternFactor::SigmaZ => pauli::z(),
            PatternFactor::Identity => pauli::identity(),
        })
        .collect();
    kron_all(&factors)
}

/// Kronecker product of `σ_z`/`𝟙` factors with an even, non-zero number of `σ_z`.
pub fn build_z_operator(n: usize, pattern: &[PatternFactor]) -> Result<HermitianMatrix> {
    if pattern.len() != n {
        return Err(Error::InvalidPattern(format!(
            "pattern has {} factors for {n} qubits",
            pattern.len()
        )));
    }
    let count = pattern.iter().filter(|f| **f == PatternFactor::SigmaZ).count();
    if count == 0 {
        return Err(Error::InvalidPattern(
            "identity pattern carries no information; use build_identity_pattern".into(),
        ));
    }
    if count % 2 == 1 {
        return Err(Error::InvalidPattern(format!("odd number ({count}) of σ_z factors")));
    }
    HermitianMatrix::new(pattern_matrix(pattern))
}

/// The all-identity pattern; only meaningful for span computations.
pub fn build_identity_pattern(n: usize) -> HermitianMatrix {
    HermitianMatrix::new(ComplexMatrix::identity(1 << n)).expect("identity is Hermitian")
}

/// `σ_x^{⊗n}`.
pub fn build_x_operator(n: usize) -> HermitianMatrix {
    let xs = vec![pauli::x(); n];
    HermitianMatrix::new(kron_all(&xs)).expect("σ_x^⊗n is Hermitian")
}

/// Every valid z-pattern (even, non-zero σ_z count) for `n` qubits.
pub fn all_z_patterns(n: usize) -> Vec<Vec<PatternFactor>> {
    (1usize..(1 << n))
        .filter(|mask| mask.count_ones() % 2 == 0)
        .map(|mask| {
            (0..n)
                .map(|q| {
                    if mask >> (n - 1 - q) & 1 == 1 {
                        PatternFactor::SigmaZ
                    } else {
                        PatternFactor::Identity
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Z,
    X,
}

/// A measurement channel `L = √M · operator` observed with efficiency `η`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementChannel {
    operator: HermitianMatrix,
    scaled: HermitianMatrix,
    scaled_diag: Option<Vec<f64>>,
    strength: f64,
    efficiency: f64,
    kind: ChannelKind,
}

impl MeasurementChannel {
    pub fn new(operator: HermitianMatrix, strength: f64, efficiency: f64, kind: ChannelKind) -> Result<Self> {
        if !(strength > 0.0 && strength.is_finite()) {
            return Err(Error::InvalidParameter(format!("measurement strength {strength} must be > 0")));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!("efficiency {efficiency} outside (0,1]")));
        }
        if kind == ChannelKind::Z {
            let m = operator.matrix();
            let n = m.rows();
            let diag = m.exact_diagonal().ok_or_else(|| {
                Error::InvalidPattern("z-type operator is not diagonal".into())
            })?;
            for i in 0..n / 2 {
                if (diag[i] - diag[n - 1 - i]).norm() > tolerance::HERMITIAN {
                    return Err(Error::InvalidPattern(
                        "z-type diagonal is not mirror symmetric".into(),
                    ));
                }
            }
        }
        let scaled = operator.scale(strength.sqrt());
        let scaled_diag = scaled.matrix().exact_diagonal().map(|d| d.iter().map(|z| z.re).collect());
        Ok(Self {
            operator,
            scaled,
            scaled_diag,
            strength,
            efficiency,
            kind,
        })
    }

    /// z-type channel from a pattern with an overall real coefficient (e.g. `2 σ_z⊗σ_z⊗𝟙`).
    pub fn z(n: usize, pattern: &[PatternFactor], coefficient: f64, strength: f64, efficiency: f64) -> Result<Self> {
        let op = build_z_operator(n, pattern)?.scale(coefficient);
        Self::new(op, strength, efficiency, ChannelKind::Z)
    }

    /// x-type channel `σ_x^{⊗n}`.
    pub fn x(n: usize, strength: f64, efficiency: f64) -> Result<Self> {
        Self::new(build_x_operator(n), strength, efficiency, ChannelKind::X)
    }

    /// Unscaled operator (`L^{(i)}_z` or `L_x`).
    pub fn operator(&self) -> &HermitianMatrix {
        &self.operator
    }

    /// `L = √M · operator`.
    pub fn scaled(&self) -> &HermitianMatrix {
        &self.scaled
    }

    /// Diagonal of the scaled operator when it is exactly diagonal in the current frame.
    pub fn scaled_diagonal(&self) -> Option<&[f64]> {
        self.scaled_diag.as_deref()
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    fn with_operator(&self, operator: HermitianMatrix) -> Self {
        let scaled = operator.scale(self.strength.sqrt());
        let scaled_diag = scaled.matrix().exact_diagonal().map(|d| d.iter().map(|z| z.re).collect());
        Self {
            operator,
            scaled,
            scaled_diag,
            strength: self.strength,
            efficiency: self.efficiency,
            kind: self.kind,
        }
    }
}

/// Free Hamiltonian, measurement channels and control Hamiltonians of an `n`-qubit system.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    basis: GhzBasis,
    h0: HermitianMatrix,
    h0_diag: Option<Vec<f64>>,
    channels: Vec<MeasurementChannel>,
    controls: Vec<HermitianMatrix>,
}

impl SystemModel {
    pub fn new(
        n: usize,
        h0: HermitianMatrix,
        channels: Vec<MeasurementChannel>,
        controls: Vec<HermitianMatrix>,
    ) -> Result<Self> {
        let basis = GhzBasis::new(n)?;
        let dim = basis.dim();
        let check = |what: &str, m: &HermitianMatrix| -> Result<()> {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    op: "SystemModel::new",
                    left: format!("{what} is {}", m.matrix().shape()),
                    right: format!("{dim}x{dim}"),
                });
            }
            Ok(())
        };
        check("H0", &h0)?;
        for c in &channels {
            check("channel", c.operator())?;
        }
        for h in &controls {
            check("control", h)?;
        }
        if channels.iter().filter(|c| c.kind == ChannelKind::X).count() > 1 {
            return Err(Error::InvalidParameter("at most one x-type channel".into()));
        }
        let h0_diag = h0.matrix().exact_diagonal().map(|d| d.iter().map(|z| z.re).collect());
        Ok(Self {
            basis,
            h0,
            h0_diag,
            channels,
            controls,
        })
    }

    pub fn qubits(&self) -> usize {
        self.basis.qubits()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &GhzBasis {
        &self.basis
    }

    pub fn frame(&self) -> Frame {
        self.basis.frame()
    }

    pub fn h0(&self) -> &HermitianMatrix {
        &self.h0
    }

    pub(crate) fn h0_diagonal(&self) -> Option<&[f64]> {
        self.h0_diag.as_deref()
    }

    pub fn channels(&self) -> &[MeasurementChannel] {
        &self.channels
    }

    pub fn controls(&self) -> &[HermitianMatrix] {
        &self.controls
    }

    pub fn z_channels(&self) -> impl Iterator<Item = &MeasurementChannel> {
        self.channels.iter().filter(|c| c.kind == ChannelKind::Z)
    }

    pub fn x_channel(&self) -> Option<&MeasurementChannel> {
        self.channels.iter().find(|c| c.kind == ChannelKind::X)
    }

    pub fn z_count(&self) -> usize {
        self.z_channels().count()
    }

    /// `𝐋_z = Σ L^{(i)}_z` (unscaled), in the model's frame.
    pub fn lz_sum(&self) -> ComplexMatrix {
        let dim = self.dim();
        self.z_channels()
            .fold(ComplexMatrix::zeros(dim, dim), |acc, c| &acc + c.operator().matrix())
    }

    /// The same model written in GHZ coordinates. Operators that pass the (A0)
    /// diagonality check are stored exactly diagonal.
    pub fn to_ghz_frame(&self) -> Self {
        if self.frame() == Frame::Ghz {
            return self.clone();
        }
        let basis = self.basis.to_ghz_frame();
        let rotate = |m: &HermitianMatrix, snap: bool| -> HermitianMatrix {
            let r = basis.rotate_in(m.matrix());
            let (off, _, _) = r.max_off_diagonal();
            if snap && off <= tolerance::GHZ_DIAGONAL {
                let d: Vec<f64> = r.diagonal().iter().map(|z| z.re).collect();
                HermitianMatrix::new(ComplexMatrix::from_real_diagonal(&d)).expect("real diagonal")
            } else {
                HermitianMatrix::hermitized(&r)
            }
        };
        let h0 = rotate(&self.h0, true);
        let h0_diag = h0.matrix().exact_diagonal().map(|d| d.iter().map(|z| z.re).collect());
        let channels = self
            .channels
            .iter()
            .map(|c| c.with_operator(rotate(c.operator(), true)))
            .collect();
        let controls = self.controls.iter().map(|h| rotate(h, false)).collect();
        Self {
            basis,
            h0,
            h0_diag,
            channels,
            controls,
        }
    }

    /// Rewrites a computational-basis matrix into this model's frame.
    pub fn state_into_frame(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        match self.frame() {
            Frame::Computational => rho.clone(),
            Frame::Ghz => self.basis.rotate_in(rho),
        }
    }
}

/// Verdict on assumption (A0) for one operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalityViolation {
    pub operator: String,
    pub row: GhzIndex,
    pub col: GhzIndex,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// (A0): `H₀` and every measurement operator are diagonal in the GHZ basis.
    pub a0: bool,
    pub a0_violation: Option<DiagonalityViolation>,
    /// (A1): the entries `l_k` of `𝐋_z` are pairwise distinct.
    pub a1: bool,
    pub a1_duplicate: Option<(usize, usize, f64)>,
}

fn ghz_frame_matrix(model: &SystemModel, m: &ComplexMatrix) -> ComplexMatrix {
    match model.frame() {
        Frame::Ghz => m.clone(),
        Frame::Computational => model.basis.rotate_in(m),
    }
}

fn index_of_slot(basis: &GhzBasis, slot: usize) -> GhzIndex {
    let half = basis.half();
    if slot < half {
        GhzIndex::plus(slot + 1)
    } else {
        GhzIndex::minus(slot - half + 1)
    }
}

/// Checks (A0) and (A1) numerically; failures are report content, not errors.
pub fn check_assumptions(model: &SystemModel) -> AssumptionReport {
    let mut named: Vec<(String, &HermitianMatrix)> = vec![("H0".into(), model.h0())];
    for (i, c) in model.channels().iter().enumerate() {
        named.push((format!("L{}", i + 1), c.scaled()));
    }
    let mut worst: Option<DiagonalityViolation> = None;
    for (name, op) in named {
        let g = ghz_frame_matrix(model, op.matrix());
        let (mag, r, c) = g.max_off_diagonal();
        if mag > tolerance::GHZ_DIAGONAL && worst.as_ref().is_none_or(|w| mag > w.magnitude) {
            worst = Some(DiagonalityViolation {
                operator: name,
                row: index_of_slot(&model.basis, r),
                col: index_of_slot(&model.basis, c),
                magnitude: mag,
            });
        }
    }
    let l = lz_diagonal(model);
    let dup = first_duplicate(&l);
    AssumptionReport {
        a0: worst.is_none(),
        a0_violation: worst,
        a1: dup.is_none() && model.z_count() > 0,
        a1_duplicate: dup,
    }
}

/// `(l₁, …, l_{N/2})`: the GHZ-frame eigenvalues of `𝐋_z` on the planes `k = 1..N/2`.
pub fn lz_diagonal(model: &SystemModel) -> Vec<f64> {
    let lz = model.lz_sum();
    (1..=model.basis.half())
        .map(|k| model.basis.population(&lz, GhzIndex::plus(k)))
        .collect()
}

fn first_duplicate(l: &[f64]) -> Option<(usize, usize, f64)> {
    for i in 0..l.len() {
        for j in (i + 1)..l.len() {
            if (l[i] - l[j]).abs() <= tolerance::GHZ_DIAGONAL {
                return Some((i + 1, j + 1, l[i]));
            }
        }
    }
    None
}

/// Spectral constants of a model (for a chosen target).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    /// Diagonal of `𝐋_z` on the planes `k = 1..N/2`.
    pub l: Vec<f64>,
    /// Minimal gap `ℓ = min_{i≠j} |l_i − l_j|`.
    pub ell: f64,
    /// `channel_eigenvalues[i][k-1]` = eigenvalue of the unscaled z-operator `i` on plane `k`.
    pub channel_eigenvalues: Vec<Vec<f64>>,
    pub target: GhzIndex,
    pub c_plus: f64,
    pub c_minus: f64,
    /// `min η_i M_i` over z-channels.
    pub gamma_z: f64,
    /// `min η_i M_i` over all channels.
    pub gamma_m: f64,
    pub z_count: usize,
}

impl SpectralData {
    /// Eigenvalues of the scaled operators, `√M_i · l^{(i)}_k`.
    pub fn scaled_channel_eigenvalues(&self, model: &SystemModel) -> Vec<Vec<f64>> {
        model
            .z_channels()
            .zip(&self.channel_eigenvalues)
            .map(|(c, row)| row.iter().map(|l| c.strength().sqrt() * l).collect())
            .collect()
    }
}

pub fn spectral_data(model: &SystemModel, target: GhzIndex) -> Result<SpectralData> {
    model.basis.check(target)?;
    let z_count = model.z_count();
    if z_count == 0 {
        return Err(Error::InvalidParameter("model has no z-type channel".into()));
    }
    let l = lz_diagonal(model);
    if let Some((i, j, value)) = first_duplicate(&l) {
        return Err(Error::DegenerateSpectrum { i, j, value });
    }
    let mut ell = f64::INFINITY;
    for i in 0..l.len() {
        for j in (i + 1)..l.len() {
            ell = ell.min((l[i] - l[j]).abs());
        }
    }
    let half = model.basis.half();
    let channel_eigenvalues = model
        .z_channels()
        .map(|c| {
            (1..=half)
                .map(|k| model.basis.population(c.operator().matrix(), GhzIndex::plus(k)))
                .collect()
        })
        .collect();
    let lk = l[target.k - 1];
    let others = l.iter().enumerate().filter(|(i, _)| *i + 1 != target.k).map(|(_, v)| *v);
    let (max_other, min_other) = others.fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| (hi.max(v), lo.min(v)));
    let root = (z_count as f64).sqrt();
    let rate = |c: &MeasurementChannel| c.efficiency() * c.strength();
    let gamma_z = model.z_channels().map(rate).fold(f64::INFINITY, f64::min);
    let gamma_m = model.channels().iter().map(rate).fold(f64::INFINITY, f64::min);
    Ok(SpectralData {
        l,
        ell,
        channel_eigenvalues,
        target,
        c_plus: (lk - max_other) / root - 1.0,
        c_minus: (lk - min_other) / root + 1.0,
        gamma_z,
        gamma_m,
        z_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{qmat, scenario};
    use approx::assert_abs_diff_eq;
    use PatternFactor::{Identity as I1, SigmaZ as Z};

    fn approx_vec(v: &[C64], expected: &[f64]) {
        assert_eq!(v.len(), expected.len());
        for (a, b) in v.iter().zip(expected) {
            assert_abs_diff_eq!(a.re, *b, epsilon = 1e-15);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn ghz_vector_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut e = [0.0; 8];
        e[0] = r;
        e[7] = r;
        approx_vec(&ghz_vector(3, 1, Sign::Plus).unwrap(), &e);
        let mut e = [0.0; 8];
        e[1] = r;
        e[6] = r;
        approx_vec(&ghz_vector(3, 2, Sign::Plus).unwrap(), &e);
        let mut e = [0.0; 8];
        e[3] = r;
        e[4] = -r;
        approx_vec(&ghz_vector(3, 4, Sign::Minus).unwrap(), &e);
    }

    #[test]
    fn ghz_vector_rejects_bad_index() {
        assert!(matches!(ghz_vector(3, 0, Sign::Plus), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(ghz_vector(3, 5, Sign::Minus), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn ghz_basis_is_orthonormal() {
        for n in 1..=4 {
            let b = GhzBasis::new(n).unwrap();
            let idx: Vec<_> = b.indices().collect();
            assert_eq!(idx.len(), 1 << n);
            for (a, i) in idx.iter().enumerate() {
                for (c, j) in idx.iter().enumerate() {
                    let ip = qmat::inner(b.vector(*i).unwrap(), b.vector(*j).unwrap());
                    let want = if a == c { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(want, 0.0)).norm() <= tolerance::GHZ_ORTHONORMAL);
                }
            }
        }
    }

    #[test]
    fn z_operator_examples() {
        let d = build_z_operator(3, &[Z, I1, Z]).unwrap();
        assert_eq!(
            d.matrix(),
            &ComplexMatrix::from_real_diagonal(&[1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0])
        );
        let d = build_z_operator(3, &[Z, Z, I1]).unwrap();
        assert_eq!(
            d.matrix(),
            &ComplexMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0])
        );
        let d = build_z_operator(2, &[Z, Z]).unwrap();
        assert_eq!(d.matrix(), &ComplexMatrix::from_real_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn z_operator_rejects_odd_and_empty_patterns() {
        assert!(matches!(build_z_operator(3, &[Z, I1, I1]), Err(Error::InvalidPattern(_))));
        assert!(matches!(build_z_operator(3, &[I1, I1, I1]), Err(Error::InvalidPattern(_))));
        assert!(matches!(build_z_operator(2, &[Z, Z, Z]), Err(Error::InvalidPattern(_))));
    }

    #[test]
    fn z_patterns_span_the_mirror_diagonals() {
        for n in 2..=4 {
            let patterns = all_z_patterns(n);
            assert_eq!(patterns.len(), (1 << (n - 1)) - 1);
            let dim = 1 << n;
            let mut cols: Vec<Vec<C64>> = patterns
                .iter()
                .map(|p| build_z_operator(n, p).unwrap().matrix().diagonal())
                .collect();
            cols.push(build_identity_pattern(n).matrix().diagonal());
            for c in &cols {
                for i in 0..dim / 2 {
                    assert_eq!(c[i], c[dim - 1 - i]);
                }
            }
            let m = ComplexMatrix::from_columns(&cols).unwrap();
            let s = qmat::singular_values(&m);
            let rank = s.iter().filter(|&&x| x > 1e-10 * s[0]).count();
            assert_eq!(rank, 1 << (n - 1));
        }
    }

    #[test]
    fn ghz_states_are_common_eigenvectors() {
        let model = scenario::scenario_a_model().unwrap();
        let basis = model.basis();
        for c in model.channels() {
            let l = c.scaled().matrix();
            for idx in basis.indices() {
                let v = basis.vector(idx).unwrap();
                let lv = l.mat_vec(v);
                let lambda = qmat::inner(v, &lv);
                for (a, b) in lv.iter().zip(v) {
                    assert!((a - lambda * b).norm() < 1e-12);
                }
                if c.kind() == ChannelKind::X {
                    assert_abs_diff_eq!(lambda.re, idx.sign.as_f64() * c.strength().sqrt(), epsilon = 1e-12);
                }
            }
        }
        let lx = model.x_channel().unwrap().scaled().matrix();
        let g = basis.rotate_in(lx);
        assert!(g.max_off_diagonal().0 < 1e-12);
    }

    #[test]
    fn spectral_data_for_three_qubit_scenario() {
        let model = scenario::scenario_a_model().unwrap();
        let s = spectral_data(&model, GhzIndex::plus(1)).unwrap();
        for (a, b) in s.l.iter().zip([3.0, 1.0, -1.0, -3.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.ell, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.c_plus, 2f64.sqrt() - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_z, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.gamma_m, 0.3, epsilon = 1e-12);
        let s4 = spectral_data(&model, GhzIndex::minus(4)).unwrap();
        assert_abs_diff_eq!(s4.c_minus, 1.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.channel_eigenvalues[0], vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(s.channel_eigenvalues[1], vec![2.0, 2.0, -2.0, -2.0]);
    }

    #[test]
    fn assumptions_on_three_qubit_scenario() {
        let model = scenario::scenario_a_model().unwrap();
        let r = check_assumptions(&model);
        assert!(r.a0 && r.a1, "{r:?}");
        let r = check_assumptions(&model.to_ghz_frame());
        assert!(r.a0 && r.a1, "{r:?}");
    }

    #[test]
    fn duplicated_channel_violates_a1() {
        let n = 3;
        let c1 = MeasurementChannel::z(n, &[Z, I1, Z], 1.0, 1.1, 0.5).unwrap();
        let c2 = MeasurementChannel::z(n, &[Z, I1, Z], 1.0, 1.0, 0.3).unwrap();
        let h0 = HermitianMatrix::new(ComplexMatrix::zeros(8, 8)).unwrap();
        let model = SystemModel::new(n, h0, vec![c1, c2], vec![]).unwrap();
        let r = check_assumptions(&model);
        assert!(r.a0);
        assert!(!r.a1);
        assert!(r.a1_duplicate.is_some());
        assert!(matches!(
            spectral_data(&model, GhzIndex::plus(1)),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn transverse_h0_violates_a0() {
        let base = scenario::scenario_a_model().unwrap();
        let h0 = HermitianMatrix::new(kron_all(&[pauli::x(), pauli::identity(), pauli::identity()])).unwrap();
        let model = SystemModel::new(3, h0, base.channels().to_vec(), vec![]).unwrap();
        let r = check_assumptions(&model);
        assert!(!r.a0);
        let v = r.a0_violation.unwrap();
        assert_eq!(v.operator, "H0");
        assert!(v.magnitude > 0.5);
        assert!(r.a1);
    }

    #[test]
    fn frame_rotation_matches_dense_product() {
        let b = GhzBasis::new(3).unwrap();
        let u = b.unitary();
        let h = scenario::scenario_a_model().unwrap().controls()[0].matrix().clone();
        let dense = u.adjoint().matmul(&h).matmul(&u);
        let fast = b.rotate_in(&h);
        assert!((&dense - &fast).max_abs() < 1e-14);
        assert!((&b.rotate_out(&fast) - &h).max_abs() < 1e-14);
        let rho = b.projector(GhzIndex::minus(3)).unwrap();
        let g = b.rotate_in(&rho);
        let gb = b.to_ghz_frame();
        assert_abs_diff_eq!(gb.population(&g, GhzIndex::minus(3)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.population(&rho, GhzIndex::minus(3)), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ghz_index_parses() {
        assert_eq!("1,+".parse::<GhzIndex>().unwrap(), GhzIndex::plus(1));
        assert_eq!("4-".parse::<GhzIndex>().unwrap(), GhzIndex::minus(4));
        assert_eq!(" 2 , - ".parse::<GhzIndex>().unwrap(), GhzIndex::minus(2));
        assert!("x".parse::<GhzIndex>().is_err());
    }
}
