//! The three-qubit reference models and Pauli-string Hamiltonians.

use crate::error::{Error, Result};
use crate::model::{MeasurementChannel, PatternFactor, SystemModel};
use crate::qmat::{kron_all, pauli, ComplexMatrix, HermitianMatrix};

pub const OMEGA: f64 = 0.3;
pub const STRENGTHS: [f64; 3] = [1.1, 1.0, 0.9];
pub const EFFICIENCIES: [f64; 3] = [0.5, 0.3, 0.4];

/// `(𝟙⊗𝟙 + 𝟙⊗σ_x + σ_z⊗σ_x + σ_z⊗σ_y)⊗σ_x`.
pub const H1_TERMS: &str = "+1*IIX, +1*IXX, +1*ZXX, +1*ZYX";
/// `−σ_x⊗σ_x⊗𝟙 − 𝟙⊗σ_x⊗σ_x − σ_z⊗σ_x⊗σ_x − σ_y⊗σ_z⊗𝟙`.
pub const H2_TERMS: &str = "-1*XXI, -1*IXX, -1*ZXX, -1*YZI";

/// Parses a comma-separated sum of weighted Pauli strings, e.g. `"+1*IIX, -0.5*ZZI"`.
/// A term without `*` has weight one.
pub fn parse_pauli_sum(n: usize, text: &str) -> Result<HermitianMatrix> {
    let dim = 1usize << n;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    let mut terms = 0;
    for raw in text.split(',') {
        let term = raw.trim();
        if term.is_empty() {
            continue;
        }
        let (weight, label) = match term.split_once('*') {
            Some((w, l)) => {
                let w = w.trim();
                let w = w.strip_prefix('+').unwrap_or(w);
                let weight = w
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad weight in Pauli term {term:?}")))?;
                (weight, l.trim())
            }
            None => match term.strip_prefix('-') {
                Some(l) => (-1.0, l.trim()),
                None => (1.0, term.strip_prefix('+').unwrap_or(term).trim()),
            },
        };
        if label.chars().count() != n {
            return Err(Error::InvalidParameter(format!(
                "Pauli string {label:?} has {} factors for {n} qubits",
                label.chars().count()
            )));
        }
        let factors = label
            .chars()
            .map(|c| {
                pauli::from_label(c)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown Pauli factor {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        acc.axpy_real(weight, &kron_all(&factors));
        terms += 1;
    }
    if terms == 0 {
        return Err(Error::InvalidParameter("empty Pauli sum".into()));
    }
    HermitianMatrix::new(acc)
}

fn z_channels() -> Result<Vec<MeasurementChannel>> {
    use PatternFactor::{Identity as I1, SigmaZ as Z};
    Ok(vec![
        MeasurementChannel::z(3, &[Z, I1, Z], 1.0, STRENGTHS[0], EFFICIENCIES[0])?,
        MeasurementChannel::z(3, &[Z, Z, I1], 2.0, STRENGTHS[1], EFFICIENCIES[1])?,
    ])
}

fn h0(channels: &[MeasurementChannel]) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(8, 8);
    for c in channels {
        m.axpy_real(OMEGA, c.operator().matrix());
    }
    HermitianMatrix::new(m).expect("diagonal")
}

/// z- and x-type measurements with the single control `H₁`.
pub fn scenario_a_model() -> Result<SystemModel> {
    let mut channels = z_channels()?;
    let h0 = h0(&channels);
    channels.push(MeasurementChannel::x(3, STRENGTHS[2], EFFICIENCIES[2])?);
    SystemModel::new(3, h0, channels, vec![parse_pauli_sum(3, H1_TERMS)?])
}

/// z-type measurements only, with controls `H₁` and `H₂`.
pub fn scenario_b_model() -> Result<SystemModel> {
    let channels = z_channels()?;
    let h0 = h0(&channels);
    SystemModel::new(
        3,
        h0,
        channels,
        vec![parse_pauli_sum(3, H1_TERMS)?, parse_pauli_sum(3, H2_TERMS)?],
    )
}
