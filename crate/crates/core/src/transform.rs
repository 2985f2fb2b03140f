//! Closed-form orthogonal transforms for identical qubits: the (2n+1)-dim
//! `U_n = e^M` that separates resonator states from qubit/bridge states, and
//! the (n+1)-dim `Ũ_{n,2}` that removes the residual qubit–bridge coupling.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Below this rotation angle the q-dependent ratios use their Taylor series.
pub const SMALL_Q: f64 = 1e-6;

/// Rotation parameters of the two transforms plus the bridge detuning Δ' that
/// makes the first one block-diagonalize the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformAngles {
    pub n: usize,
    pub phi: f64,
    pub theta: f64,
    /// Unset until the qubit–bridge stage has been solved.
    pub eta: Option<f64>,
    pub delta_prime: f64,
}

impl TransformAngles {
    pub fn new(n: usize, phi: f64, theta: f64, delta_prime: f64) -> Self {
        Self {
            n,
            phi,
            theta,
            eta: None,
            delta_prime,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    /// q = sqrt(φ² + nθ²), always recomputed.
    pub fn q(&self) -> f64 {
        rotation_angle(self.phi, self.theta, self.n)
    }

    pub fn eta(&self) -> Result<f64> {
        self.eta.ok_or(Error::MissingEta)
    }
}

pub fn rotation_angle(phi: f64, theta: f64, n: usize) -> f64 {
    (phi * phi + n as f64 * theta * theta).sqrt()
}

/// sin(q)/q.
pub fn sinc(q: f64) -> f64 {
    if q.abs() < SMALL_Q {
        let q2 = q * q;
        1.0 - q2 / 6.0 + q2 * q2 / 120.0 - q2 * q2 * q2 / 5040.0
    } else {
        q.sin() / q
    }
}

/// (1 − cos q)/q².
pub fn versine_ratio(q: f64) -> f64 {
    if q.abs() < SMALL_Q {
        let q2 = q * q;
        0.5 - q2 / 24.0 + q2 * q2 / 720.0 - q2 * q2 * q2 / 40320.0
    } else {
        (1.0 - q.cos()) / (q * q)
    }
}

pub type Block2 = [[f64; 2]; 2];

/// Diagonal 2×2 block acting within one qubit/resonator pair.
pub fn block_q(phi: f64, theta: f64, n: usize) -> Block2 {
    let nf = n as f64;
    let q = rotation_angle(phi, theta, n);
    let w = (nf - 1.0) / nf;
    // φ²cos q/(nq²) + θ²/q² rewritten as 1/n − φ²(1 − cos q)/(nq²).
    let q11 = 1.0 / nf - phi * phi / nf * versine_ratio(q) + w * phi.cos();
    let q12 = phi / nf * sinc(q) + w * phi.sin();
    let q22 = q.cos() / nf + w * phi.cos();
    [[q11, q12], [-q12, q22]]
}

/// Off-diagonal 2×2 block coupling two different pairs.
pub fn block_t(phi: f64, theta: f64, n: usize) -> Block2 {
    let nf = n as f64;
    let q = rotation_angle(phi, theta, n);
    let t11 = 1.0 / nf - phi * phi / nf * versine_ratio(q) - phi.cos() / nf;
    let t12 = phi / nf * sinc(q) - phi.sin() / nf;
    let t22 = (q.cos() - phi.cos()) / nf;
    [[t11, t12], [-t12, t22]]
}

/// Last-column block (pair rows, bridge column).
pub fn block_c(phi: f64, theta: f64, n: usize) -> [f64; 2] {
    let q = rotation_angle(phi, theta, n);
    [-phi * theta * versine_ratio(q), -theta * sinc(q)]
}

/// Last-row block (bridge row, pair columns).
pub fn block_cp(phi: f64, theta: f64, n: usize) -> [f64; 2] {
    let q = rotation_angle(phi, theta, n);
    [-phi * theta * versine_ratio(q), theta * sinc(q)]
}

/// `[U_n]_{2n+1,2n+1} = (φ² + nθ² cos q)/q²`.
pub fn corner(phi: f64, theta: f64, n: usize) -> f64 {
    let q = rotation_angle(phi, theta, n);
    1.0 - n as f64 * theta * theta * versine_ratio(q)
}

/// Antisymmetric generator `M` of `U_n` in the model basis.
pub fn generator(phi: f64, theta: f64, n: usize) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(2 * n + 1);
    let bridge = 2 * n;
    for j in 0..n {
        let (qubit, res) = (2 * j, 2 * j + 1);
        m[(res, qubit)] = -phi;
        m[(qubit, res)] = phi;
        m[(res, bridge)] = -theta;
        m[(bridge, res)] = theta;
    }
    m
}

/// Generator of `Ũ_{n,2}` on (qubit 1..n, bridge).
pub fn generator_tilde(eta: f64, n: usize) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(n + 1);
    for j in 0..n {
        m[(j, n)] = -eta;
        m[(n, j)] = eta;
    }
    m
}

/// `U_n` assembled from the closed-form blocks.
pub fn assemble_u(angles: &TransformAngles) -> SquareMatrix {
    assemble_u_from(angles.phi, angles.theta, angles.n)
}

pub fn assemble_u_from(phi: f64, theta: f64, n: usize) -> SquareMatrix {
    let q = block_q(phi, theta, n);
    let t = block_t(phi, theta, n);
    let c = block_c(phi, theta, n);
    let cp = block_cp(phi, theta, n);
    let bridge = 2 * n;
    let mut u = SquareMatrix::zeros(2 * n + 1);
    for i in 0..n {
        for j in 0..n {
            let b = if i == j { &q } else { &t };
            for (r, row) in b.iter().enumerate() {
                for (s, &x) in row.iter().enumerate() {
                    u[(2 * i + r, 2 * j + s)] = x;
                }
            }
        }
        u[(2 * i, bridge)] = c[0];
        u[(2 * i + 1, bridge)] = c[1];
        u[(bridge, 2 * i)] = cp[0];
        u[(bridge, 2 * i + 1)] = cp[1];
    }
    u[(bridge, bridge)] = corner(phi, theta, n);
    u
}

/// `Ũ_{n,2}` on (qubit 1..n, bridge).
pub fn assemble_u_tilde(eta: f64, n: usize) -> SquareMatrix {
    let nf = n as f64;
    let root = nf.sqrt();
    let (s, c) = (root * eta).sin_cos();
    SquareMatrix::from_fn(n + 1, |i, j| match (i == n, j == n) {
        (true, true) => c,
        (false, true) => -s / root,
        (true, false) => s / root,
        (false, false) if i == j => (nf - 1.0 + c) / nf,
        (false, false) => (c - 1.0) / nf,
    })
}

/// `UᵀHU`.
pub fn conjugate(h: &SquareMatrix, u: &SquareMatrix) -> Result<SquareMatrix> {
    if h.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: u.dim(),
        });
    }
    let hu = h.checked_mul(u)?;
    u.transpose().checked_mul(&hu)
}
