//! Independent numerical ground truth: a scaling-and-squaring matrix
//! exponential, a cyclic Jacobi eigensolver and the Fock-truncated full-space
//! Hamiltonian. Nothing here uses the closed forms in `transform` or
//! `effective`.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::model::SystemParams;

const ANTISYMMETRY_TOL: f64 = 1e-13;
const SYMMETRY_TOL: f64 = 1e-13;
const TAYLOR_TERMS: usize = 13;
/// Largest n accepted by the full-space builder (dimension 2^(2n+1)).
pub const MAX_FULL_SPACE_N: usize = 6;

fn inf_norm(m: &SquareMatrix) -> f64 {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^M` for antisymmetric `M`: scale so `‖M/2^k‖∞ < 0.5`, sum a 13-term
/// Taylor series and square `k` times.
pub fn expm_antisymmetric(m: &SquareMatrix) -> Result<SquareMatrix> {
    let defect = m.antisymmetry_defect();
    if defect > ANTISYMMETRY_TOL {
        return Err(Error::NotStructured {
            kind: "antisymmetric",
            deviation: defect,
        });
    }
    let dim = m.dim();
    let norm = inf_norm(m);
    let mut squarings = 0u32;
    while norm / 2f64.powi(squarings as i32) >= 0.5 {
        squarings += 1;
    }
    let scale = 2f64.powi(-(squarings as i32));
    let a = m.as_nalgebra() * scale;

    let mut sum = nalgebra::DMatrix::<f64>::identity(dim, dim);
    let mut term = sum.clone();
    for k in 1..=TAYLOR_TERMS {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(SquareMatrix::from(sum))
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues come back ascending; eigenvector `k` is column `k`.
pub fn eig_symmetric(h: &SquareMatrix) -> Result<(Vec<f64>, SquareMatrix)> {
    let defect = h.symmetry_defect();
    let scale = h.max_abs().max(1.0);
    if defect > SYMMETRY_TOL * scale {
        return Err(Error::NotStructured {
            kind: "symmetric",
            deviation: defect,
        });
    }
    let n = h.dim();
    let mut a = h.clone();
    let mut v = SquareMatrix::identity(n);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = SquareMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(h: &SquareMatrix) -> Result<Vec<f64>> {
    eig_symmetric(h).map(|(values, _)| values)
}

/// One configuration of the truncated full space: qubit spins, resonator
/// photon numbers in {0, 1} and the bridge spin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullSpaceIndex {
    pub qubit_up: Vec<bool>,
    pub photons: Vec<u8>,
    pub bridge_up: bool,
}

impl FullSpaceIndex {
    /// Bit 2j is qubit j, bit 2j+1 resonator j, bit 2n the bridge (0-based j).
    pub fn from_index(index: usize, n: usize) -> Self {
        Self {
            qubit_up: (0..n).map(|j| index >> (2 * j) & 1 == 1).collect(),
            photons: (0..n).map(|j| (index >> (2 * j + 1) & 1) as u8).collect(),
            bridge_up: index >> (2 * n) & 1 == 1,
        }
    }

    pub fn to_index(&self) -> usize {
        let n = self.qubit_up.len();
        let mut idx = usize::from(self.bridge_up) << (2 * n);
        for j in 0..n {
            idx |= usize::from(self.qubit_up[j]) << (2 * j);
            idx |= usize::from(self.photons[j]) << (2 * j + 1);
        }
        idx
    }

    pub fn s_z(up: bool) -> f64 {
        if up {
            0.5
        } else {
            -0.5
        }
    }

    /// Σ_j (s_jz + ½ + N_rj) + (s_az + ½).
    pub fn excitation_number(&self) -> usize {
        let spin = |up: bool| (Self::s_z(up) + 0.5) as usize;
        self.qubit_up
            .iter()
            .zip(&self.photons)
            .map(|(&up, &np)| spin(up) + np as usize)
            .sum::<usize>()
            + spin(self.bridge_up)
    }
}

fn full_space_guard(n: usize) -> Result<usize> {
    if n > MAX_FULL_SPACE_N {
        return Err(Error::DimensionLimit {
            n,
            max: MAX_FULL_SPACE_N,
        });
    }
    Ok(1usize << (2 * n + 1))
}

/// The rotating-wave Hamiltonian on the full truncated space, built operator by
/// operator from spin flips and photon ladders.
pub fn build_full_hamiltonian(params: &SystemParams) -> Result<SquareMatrix> {
    params.validate()?;
    let n = params.n;
    let dim = full_space_guard(n)?;
    let mut h = SquareMatrix::zeros(dim);
    for idx in 0..dim {
        let cfg = FullSpaceIndex::from_index(idx, n);
        let mut diag = params.omega_a * FullSpaceIndex::s_z(cfg.bridge_up);
        for j in 0..n {
            diag += params.omega_r * cfg.photons[j] as f64
                + params.omega_q * FullSpaceIndex::s_z(cfg.qubit_up[j]);
        }
        h[(idx, idx)] = diag;

        for j in 0..n {
            // a_j† σ_j−: qubit j down, one photon created.
            if cfg.qubit_up[j] && cfg.photons[j] == 0 {
                let mut to = cfg.clone();
                to.qubit_up[j] = false;
                to.photons[j] = 1;
                let t = to.to_index();
                h[(t, idx)] -= params.g;
                h[(idx, t)] -= params.g;
            }
            // a_j† σ_a−: bridge down, one photon created in resonator j.
            if cfg.bridge_up && cfg.photons[j] == 0 {
                let mut to = cfg.clone();
                to.bridge_up = false;
                to.photons[j] = 1;
                let t = to.to_index();
                h[(t, idx)] -= params.f;
                h[(idx, t)] -= params.f;
            }
        }
    }
    Ok(h)
}

/// Entrywise max of the commutator `[H, 𝒩_e]` on the full space.
pub fn check_conservation(params: &SystemParams) -> Result<f64> {
    let h = build_full_hamiltonian(params)?;
    let n = params.n;
    let ne: Vec<f64> = (0..h.dim())
        .map(|i| FullSpaceIndex::from_index(i, n).excitation_number() as f64)
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..h.dim() {
        for j in 0..h.dim() {
            worst = worst.max((h[(i, j)] * (ne[j] - ne[i])).abs());
        }
    }
    Ok(worst)
}

/// Block of the full Hamiltonian with fixed excitation number, in increasing
/// full-space index order.
pub fn excitation_block(
    params: &SystemParams,
    excitations: usize,
) -> Result<(SquareMatrix, Vec<FullSpaceIndex>)> {
    let h = build_full_hamiltonian(params)?;
    let members: Vec<usize> = (0..h.dim())
        .filter(|&i| FullSpaceIndex::from_index(i, params.n).excitation_number() == excitations)
        .collect();
    let configs = members
        .iter()
        .map(|&i| FullSpaceIndex::from_index(i, params.n))
        .collect();
    Ok((h.submatrix(&members), configs))
}

/// The 𝒩_e = 1 block reordered to the model basis (qubit j, resonator j, ...,
/// bridge).
pub fn single_excitation_block(params: &SystemParams) -> Result<SquareMatrix> {
    let n = params.n;
    let h = build_full_hamiltonian(params)?;
    let mut order = Vec::with_capacity(2 * n + 1);
    for j in 0..n {
        order.push(1usize << (2 * j));
        order.push(1usize << (2 * j + 1));
    }
    order.push(1usize << (2 * n));
    Ok(h.submatrix(&order))
}
