//! Physical parameters, the single-excitation basis and the Hamiltonian
//! restricted to it.
//!
//! Basis ordering (1-based): qubit `j` excited ↦ `2j − 1`, resonator `j`
//! holding the photon ↦ `2j`, bridge excited ↦ `2n + 1`.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Physical inputs with ħ = 1. Frequencies default to units of Δ = ω_q − ω_r,
/// with ω_q = 5, ω_r = 4 and the bridge tuned to the qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub n: usize,
    pub omega_r: f64,
    pub omega_q: f64,
    pub omega_a: f64,
    pub g: f64,
    pub f: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub kappa: f64,
}

impl SystemParams {
    pub fn new(n: usize, g: f64, f: f64) -> Self {
        Self {
            n,
            omega_r: 4.0,
            omega_q: 5.0,
            omega_a: 5.0,
            g,
            f,
            gamma: 1.0,
            gamma_prime: 1.0,
            kappa: 12.0,
        }
    }

    pub fn with_frequencies(mut self, omega_r: f64, omega_q: f64, omega_a: f64) -> Self {
        self.omega_r = omega_r;
        self.omega_q = omega_q;
        self.omega_a = omega_a;
        self
    }

    pub fn with_rates(mut self, gamma: f64, gamma_prime: f64, kappa: f64) -> Self {
        self.gamma = gamma;
        self.gamma_prime = gamma_prime;
        self.kappa = kappa;
        self
    }

    /// Same system with the bridge moved to `ω_a = ω_q + Δ'`.
    pub fn with_delta_prime(mut self, delta_prime: f64) -> Self {
        self.omega_a = self.omega_q + delta_prime;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        let finite = [
            self.omega_r,
            self.omega_q,
            self.omega_a,
            self.g,
            self.f,
            self.gamma,
            self.gamma_prime,
            self.kappa,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        for (name, v) in [
            ("g", self.g),
            ("f", self.f),
            ("gamma", self.gamma),
            ("gamma_prime", self.gamma_prime),
            ("kappa", self.kappa),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be non-negative")));
            }
        }
        if self.delta() == 0.0 {
            return Err(Error::Resonant);
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        delta(self)
    }

    pub fn delta_prime(&self) -> f64 {
        delta_prime(self)
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }
}

/// Qubit–resonator detuning Δ = ω_q − ω_r.
pub fn delta(params: &SystemParams) -> f64 {
    params.omega_q - params.omega_r
}

/// Bridge–qubit detuning Δ' = ω_a − ω_q.
pub fn delta_prime(params: &SystemParams) -> f64 {
    params.omega_a - params.omega_q
}

/// A single-excitation basis state. Qubit and resonator labels are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExcitationState {
    QubitExcited(usize),
    ResonatorExcited(usize),
    BridgeExcited,
}

impl fmt::Display for ExcitationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::QubitExcited(j) => write!(f, "qubit {j}"),
            Self::ResonatorExcited(j) => write!(f, "resonator {j}"),
            Self::BridgeExcited => write!(f, "bridge"),
        }
    }
}

/// 1-based position of `state` in the (2n+1)-dimensional basis.
pub fn basis_index(state: ExcitationState, n: usize) -> Result<usize> {
    let invalid = || Error::InvalidState {
        state: state.to_string(),
        n,
    };
    match state {
        ExcitationState::QubitExcited(j) if (1..=n).contains(&j) => Ok(2 * j - 1),
        ExcitationState::ResonatorExcited(j) if (1..=n).contains(&j) => Ok(2 * j),
        ExcitationState::BridgeExcited if n >= 1 => Ok(2 * n + 1),
        _ => Err(invalid()),
    }
}

/// Inverse of [`basis_index`].
pub fn basis_state(index: usize, n: usize) -> Result<ExcitationState> {
    match index {
        i if i == 2 * n + 1 && n >= 1 => Ok(ExcitationState::BridgeExcited),
        i if (1..=2 * n).contains(&i) && i % 2 == 1 => {
            Ok(ExcitationState::QubitExcited(i.div_ceil(2)))
        }
        i if (1..=2 * n).contains(&i) => Ok(ExcitationState::ResonatorExcited(i / 2)),
        _ => Err(Error::InvalidState {
            state: format!("index {index}"),
            n,
        }),
    }
}

/// Diagonal energy of a basis state: ½ω_a σ_az + Σ_j (ω_r N_j + ½ω_q σ_jz).
pub fn bare_energy(params: &SystemParams, state: ExcitationState) -> f64 {
    let n = params.n as f64;
    let all_down = -0.5 * params.omega_a - 0.5 * n * params.omega_q;
    match state {
        ExcitationState::QubitExcited(_) => all_down + params.omega_q,
        ExcitationState::ResonatorExcited(_) => all_down + params.omega_r,
        ExcitationState::BridgeExcited => all_down + params.omega_a,
    }
}

/// The Hamiltonian restricted to the single-excitation subspace.
pub fn build_hamiltonian(params: &SystemParams) -> Result<SquareMatrix> {
    params.validate()?;
    let n = params.n;
    let mut h = SquareMatrix::zeros(2 * n + 1);
    let bridge = 2 * n;
    h[(bridge, bridge)] = bare_energy(params, ExcitationState::BridgeExcited);
    for j in 0..n {
        let (qubit, res) = (2 * j, 2 * j + 1);
        h[(qubit, qubit)] = bare_energy(params, ExcitationState::QubitExcited(j + 1));
        h[(res, res)] = bare_energy(params, ExcitationState::ResonatorExcited(j + 1));
        h[(qubit, res)] = -params.g;
        h[(res, qubit)] = -params.g;
        h[(res, bridge)] = -params.f;
        h[(bridge, res)] = -params.f;
    }
    Ok(h)
}
