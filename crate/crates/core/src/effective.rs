//! Effective qubit/bridge Hamiltonian after the first transform, its
//! diagonalization by the second transform, and the resulting coupling J_n.

use log::warn;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::model::{build_hamiltonian, SystemParams};
use crate::solver::{solve, solve_eta, Solution, SolverConfig};
use crate::transform::{assemble_u, conjugate, sinc, TransformAngles};

/// Closed forms are only evaluated where sec q stays moderate.
pub const MIN_ABS_COS_Q: f64 = 0.1;
/// Closed-form vs conjugation disagreement tolerated, in units of |Δ|.
pub const CLOSED_FORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingElements {
    pub e_q: f64,
    pub e_a: f64,
    pub j_q: f64,
    pub j_a: f64,
}

impl CouplingElements {
    pub fn eps(&self) -> f64 {
        self.e_a - self.e_q
    }

    fn max_abs_diff(&self, o: &Self) -> f64 {
        [
            self.e_q - o.e_q,
            self.e_a - o.e_a,
            self.j_q - o.j_q,
            self.j_a - o.j_a,
        ]
        .iter()
        .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// A = Δ cos 2φ + 2g sin 2φ.
pub fn intermediate_a(delta: f64, g: f64, phi: f64) -> f64 {
    delta * (2.0 * phi).cos() + 2.0 * g * (2.0 * phi).sin()
}

/// B = Δ cos 2q + (2/q)(nθf + φg) sin 2q.
pub fn intermediate_b(delta: f64, g: f64, f: f64, angles: &TransformAngles) -> f64 {
    let q = angles.q();
    let p = angles.n as f64 * angles.theta * f + angles.phi * g;
    delta * (2.0 * q).cos() + 4.0 * p * sinc(2.0 * q)
}

/// Printed closed forms for (e_q, e_a, j_q, j_a), with the bridge at the
/// Δ' carried by `angles`.
pub fn coupling_elements_closed_form(
    params: &SystemParams,
    angles: &TransformAngles,
) -> Result<CouplingElements> {
    check_n(params, angles)?;
    let p = params.with_delta_prime(angles.delta_prime);
    let n = p.n as f64;
    let (phi, theta, dp) = (angles.phi, angles.theta, angles.delta_prime);
    let q = angles.q();
    let c = q.cos();
    if c.abs() <= MIN_ABS_COS_Q {
        return Err(Error::SecantSingularity { cos_q: c });
    }
    let offset = -p.omega_a / 2.0 + (1.0 - n / 2.0) * p.omega_q;
    if q == 0.0 {
        return Ok(CouplingElements {
            e_q: offset,
            e_a: offset + dp,
            j_q: 0.0,
            j_a: 0.0,
        });
    }
    let delta = p.delta();
    let a = intermediate_a(delta, p.g, phi);
    let b = intermediate_b(delta, p.g, p.f, angles);
    let sec = 1.0 / c;
    let (q2, q4) = (q * q, q.powi(4));
    let (ph2, th2) = (phi * phi, theta * theta);
    let shared = dp * ph2 * th2 / q4 * (1.0 - 2.0 * sec + c * c);
    let j_q = -(q2 * a - ph2 * b - n * th2 * delta) / (2.0 * n * q2) + shared;
    let j_a = phi * theta / (2.0 * q2) * (b - delta)
        + dp * phi * theta / q4 * (n * th2 * c * c + (ph2 - n * th2) * sec - ph2);
    let e_q = (n - 1.0) / (2.0 * n) * a
        + (ph2 * b - n * (q2 - th2) * delta) / (2.0 * n * q2)
        + shared
        + offset;
    let e_a = n * n * th2 / (2.0 * n * q2) * (b - delta)
        + dp / q4 * (ph2 * ph2 + 2.0 * n * ph2 * th2 * sec + n * n * th2 * th2 * c * c)
        + offset;
    Ok(CouplingElements {
        e_q,
        e_a,
        j_q: if p.n == 1 { 0.0 } else { j_q },
        j_a,
    })
}

fn check_n(params: &SystemParams, angles: &TransformAngles) -> Result<()> {
    if params.n != angles.n {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: 2 * angles.n + 1,
        });
    }
    Ok(())
}

/// UᵀHU with the bridge retuned to the Δ' carried by `angles`.
pub fn transformed_hamiltonian(
    params: &SystemParams,
    angles: &TransformAngles,
) -> Result<SquareMatrix> {
    check_n(params, angles)?;
    let h = build_hamiltonian(&params.with_delta_prime(angles.delta_prime))?;
    conjugate(&h, &assemble_u(angles))
}

/// Qubit/bridge block (rows 1, 3, …, 2n+1 in 1-based order).
pub fn qubit_block(h_tilde: &SquareMatrix) -> SquareMatrix {
    let d = h_tilde.dim();
    let idx: Vec<usize> = (0..d).step_by(2).collect();
    h_tilde.submatrix(&idx)
}

/// Resonator block (rows 2, 4, …, 2n in 1-based order).
pub fn resonator_block(h_tilde: &SquareMatrix) -> SquareMatrix {
    let d = h_tilde.dim();
    let idx: Vec<usize> = (1..d).step_by(2).collect();
    h_tilde.submatrix(&idx)
}

/// Coupling elements read from the numerically transformed Hamiltonian.
pub fn coupling_elements_conjugated(
    params: &SystemParams,
    angles: &TransformAngles,
) -> Result<CouplingElements> {
    let ht = transformed_hamiltonian(params, angles)?;
    let n = params.n;
    let bridge = 2 * n;
    Ok(CouplingElements {
        e_q: ht[(0, 0)],
        e_a: ht[(bridge, bridge)],
        j_q: if n > 1 { ht[(0, 2)] } else { 0.0 },
        j_a: ht[(0, bridge)],
    })
}

/// Conjugated values, cross-checked against the closed forms wherever they
/// are defined. Returns the elements and the observed deviation, if checked.
pub fn coupling_elements_checked(
    params: &SystemParams,
    angles: &TransformAngles,
) -> Result<(CouplingElements, Option<f64>)> {
    let numeric = coupling_elements_conjugated(params, angles)?;
    let deviation = match coupling_elements_closed_form(params, angles) {
        Ok(closed) => {
            let dev = closed.max_abs_diff(&numeric);
            if dev > CLOSED_FORM_TOL * params.delta().abs() {
                warn!(
                    "closed-form coupling elements deviate from conjugation by {dev:e} \
                     (n={}, g={}, f={}); using conjugated values",
                    params.n, params.g, params.f
                );
            }
            Some(dev)
        }
        Err(Error::SecantSingularity { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok((numeric, deviation))
}

/// (e_q, e_a, j_q, j_a), conjugated values taking precedence.
pub fn coupling_elements(
    params: &SystemParams,
    angles: &TransformAngles,
) -> Result<CouplingElements> {
    coupling_elements_checked(params, angles).map(|(c, _)| c)
}

/// Exchange-symmetric (n+1)-dim matrix: `diag` on the first n entries, `last`
/// at the end, `pair` between qubits, `edge` between qubits and the bridge.
fn exchange_matrix(diag: f64, last: f64, pair: f64, edge: f64, n: usize) -> SquareMatrix {
    SquareMatrix::from_fn(n + 1, |i, j| match (i == n, j == n) {
        (true, true) => last,
        (true, false) | (false, true) => edge,
        _ if i == j => diag,
        _ => pair,
    })
}

/// Qubit/bridge Hamiltonian after the first transform.
pub fn build_h_tilde_2(e_q: f64, e_a: f64, j_q: f64, j_a: f64, n: usize) -> SquareMatrix {
    exchange_matrix(e_q, e_a, j_q, j_a, n)
}

/// Diagonal entries (ε_n^q, ε_n^a) of the fully transformed block.
pub fn effective_energies(
    eps: f64,
    j_q: f64,
    j_a: f64,
    eta: f64,
    e_q: f64,
    n: usize,
) -> (f64, f64) {
    let nf = n as f64;
    let root = nf.sqrt();
    let x = root * eta;
    let s2 = x.sin().powi(2);
    let sin2 = (2.0 * x).sin();
    let eps_nq = (eps - (nf - 1.0) * j_q) * s2 / nf + j_a * sin2 / root + e_q;
    let eps_na = eps * x.cos().powi(2) + (nf - 1.0) * j_q * s2 - root * j_a * sin2 + e_q;
    (eps_nq, eps_na)
}

/// Sign taken in front of the square root of the explicit J_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSign {
    Plus,
    Minus,
}

impl RootSign {
    pub fn value(&self) -> f64 {
        match self {
            RootSign::Plus => 1.0,
            RootSign::Minus => -1.0,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            RootSign::Plus => "+",
            RootSign::Minus => "-",
        }
    }
}

/// Explicit J_n on the root that vanishes with j_a, which is the root
/// selected by `solve_eta`. Returns the value and the sign used.
pub fn coupling_strength_jn(j_q: f64, j_a: f64, eps: f64, n: usize) -> (f64, RootSign) {
    let nf = n as f64;
    let d = (nf - 1.0) * j_q - eps;
    let sign = if d < 0.0 {
        RootSign::Minus
    } else {
        RootSign::Plus
    };
    let root = (d * d + 4.0 * nf * j_a * j_a).sqrt();
    (
        ((nf + 1.0) * j_q + eps + sign.value() * root) / (2.0 * nf),
        sign,
    )
}

/// J_n expressed through η.
pub fn coupling_strength_from_eta(j_q: f64, j_a: f64, eps: f64, eta: f64, n: usize) -> f64 {
    let nf = n as f64;
    let x = 2.0 * nf.sqrt() * eta;
    ((nf + 1.0) * j_q + eps + ((nf - 1.0) * j_q - eps) * x.cos() + 2.0 * nf.sqrt() * j_a * x.sin())
        / (2.0 * nf)
}

/// (ω'_q, ω'_a) of the effective spin Hamiltonian.
pub fn effective_frequencies(eps_nq: f64, eps_na: f64, n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::UndefinedFrequencies);
    }
    let nf = n as f64;
    let omega_q = -(eps_nq + eps_na) / (nf - 1.0);
    let omega_a = -(nf * eps_nq - (nf - 2.0) * eps_na) / (nf - 1.0);
    Ok((omega_q, omega_a))
}

/// Single-excitation diagonal (qubit, bridge) of the spin Hamiltonian with
/// frequencies (ω'_q, ω'_a).
pub fn spin_diagonals(omega_q: f64, omega_a: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let qubit = (2.0 - nf) * omega_q / 2.0 - omega_a / 2.0;
    let bridge = -nf * omega_q / 2.0 + omega_a / 2.0;
    (qubit, bridge)
}

/// Fully decoupled qubit/bridge Hamiltonian.
pub fn build_h_star(eps_nq: f64, eps_na: f64, j_n: f64, n: usize) -> SquareMatrix {
    exchange_matrix(eps_nq, eps_na, j_n, 0.0, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveModel {
    pub n: usize,
    pub e_q: f64,
    pub e_a: f64,
    pub j_q: f64,
    pub j_a: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub eta: f64,
    pub eps_nq: f64,
    pub eps_na: f64,
    pub j_n: f64,
    pub root_sign: RootSign,
    /// None for n = 1.
    pub omega_q_eff: Option<f64>,
    pub omega_a_eff: Option<f64>,
    /// Closed-form vs conjugation deviation, when the closed forms apply.
    pub closed_form_deviation: Option<f64>,
}

impl EffectiveModel {
    pub fn h_tilde_2(&self) -> SquareMatrix {
        build_h_tilde_2(self.e_q, self.e_a, self.j_q, self.j_a, self.n)
    }

    pub fn h_star(&self) -> SquareMatrix {
        build_h_star(self.eps_nq, self.eps_na, self.j_n, self.n)
    }
}

/// Builds the effective model from solved first-stage angles. Returns the
/// model and the angles with η filled in.
pub fn effective_model(
    params: &SystemParams,
    angles: &TransformAngles,
) -> Result<(EffectiveModel, TransformAngles)> {
    params.validate()?;
    let (el, closed_form_deviation) = coupling_elements_checked(params, angles)?;
    let n = params.n;
    let eps = el.eps();
    let eta = solve_eta(el.j_q, el.j_a, eps, n);
    let (eps_nq, eps_na) = effective_energies(eps, el.j_q, el.j_a, eta, el.e_q, n);
    let (j_n, root_sign) = coupling_strength_jn(el.j_q, el.j_a, eps, n);
    let freqs = effective_frequencies(eps_nq, eps_na, n).ok();
    let delta = params.delta();
    let model = EffectiveModel {
        n,
        e_q: el.e_q,
        e_a: el.e_a,
        j_q: el.j_q,
        j_a: el.j_a,
        a: intermediate_a(delta, params.g, angles.phi),
        b: intermediate_b(delta, params.g, params.f, angles),
        eps,
        eta,
        eps_nq,
        eps_na,
        j_n,
        root_sign,
        omega_q_eff: freqs.map(|f| f.0),
        omega_a_eff: freqs.map(|f| f.1),
        closed_form_deviation,
    };
    Ok((model, angles.with_eta(eta)))
}

/// Solver output together with the effective model built on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Analysis {
    pub params: SystemParams,
    pub solution: Solution,
    /// Solved angles including η.
    pub angles: TransformAngles,
    pub model: EffectiveModel,
}

/// Solves and evaluates the effective model in one go.
pub fn analyze(params: &SystemParams, cfg: &SolverConfig) -> Result<Analysis> {
    let solution = solve(params, cfg)?;
    let (model, angles) = effective_model(params, &solution.angles)?;
    Ok(Analysis {
        params: params.with_delta_prime(angles.delta_prime),
        solution,
        angles,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::eigenvalues;
    use crate::transform::assemble_u_tilde;
    use approx::assert_abs_diff_eq;

    fn solved(n: usize, g: f64, f: f64) -> Analysis {
        analyze(&SystemParams::new(n, g, f), &SolverConfig::default()).unwrap()
    }

    #[test]
    fn no_interaction_gives_zero_couplings() {
        let a = solved(2, 0.0, 0.0);
        assert_eq!(a.model.j_q, 0.0);
        assert_eq!(a.model.j_a, 0.0);
        assert_eq!(a.model.j_n, 0.0);
    }

    #[test]
    fn h_tilde_examples() {
        assert_eq!(
            build_h_tilde_2(1.0, 2.0, 0.0, 0.0, 2),
            SquareMatrix::from_diagonal(&[1.0, 1.0, 2.0])
        );
        let ev = eigenvalues(&build_h_tilde_2(0.5, 3.0, 0.1, 0.0, 3)).unwrap();
        let expected = [0.4, 0.4, 0.7, 3.0];
        for (a, b) in ev.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity_rotation_energies() {
        let (nq, na) = effective_energies(0.7, 0.1, 0.2, 0.0, -0.3, 3);
        assert_eq!(nq, -0.3);
        assert_abs_diff_eq!(na, 0.4, epsilon = 1e-16);
    }

    #[test]
    fn frequency_examples() {
        let (wq, wa) = effective_frequencies(-1.0, -2.0, 3).unwrap();
        assert_abs_diff_eq!(wq, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wa, 0.5, epsilon = 1e-15);
        let (wq, wa) = (0.8, 1.3);
        let (eq, ea) = spin_diagonals(wq, wa, 2);
        assert_abs_diff_eq!(eq, -wa / 2.0, epsilon = 1e-16);
        assert_abs_diff_eq!(ea, -wq + wa / 2.0, epsilon = 1e-16);
        let back = effective_frequencies(eq, ea, 2).unwrap();
        assert_abs_diff_eq!(back.0, wq, epsilon = 1e-15);
        assert_abs_diff_eq!(back.1, wa, epsilon = 1e-15);
        assert_eq!(
            effective_frequencies(0.0, 0.0, 1),
            Err(Error::UndefinedFrequencies)
        );
    }

    #[test]
    fn h_star_examples() {
        assert_eq!(
            build_h_star(0.0, 1.0, 0.0, 2),
            SquareMatrix::from_diagonal(&[0.0, 0.0, 1.0])
        );
        let n = 4;
        let h = build_h_star(0.3, 1.1, -0.05, n);
        let mut w = vec![1.0 / (n as f64).sqrt(); n];
        w.push(0.0);
        let hw = h.mul_vec(&w).unwrap();
        let lambda = 0.3 + 3.0 * -0.05;
        for (x, y) in hw.iter().zip(&w) {
            assert!((x - lambda * y).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_forms_agree_with_conjugation_on_small_branch() {
        let cfg = SolverConfig {
            branch: crate::solver::Branch::SmallAngle,
            ..SolverConfig::default()
        };
        for n in 1..=4 {
            let p = SystemParams::new(n, 0.1, 0.08);
            let s = solve(&p, &cfg).unwrap();
            let closed = coupling_elements_closed_form(&p, &s.angles).unwrap();
            let num = coupling_elements_conjugated(&p, &s.angles).unwrap();
            assert!(closed.max_abs_diff(&num) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn closed_forms_refused_near_secant_pole() {
        let p = SystemParams::new(2, 0.01, 0.01);
        let a = TransformAngles::new(2, 0.0, 1.55 / 2f64.sqrt(), 0.1);
        assert!(matches!(
            coupling_elements_closed_form(&p, &a),
            Err(Error::SecantSingularity { .. })
        ));
        assert!(coupling_elements(&p, &a).is_ok());
    }

    #[test]
    fn f_zero_leaves_distinct_cavities_uncoupled() {
        let a = solved(3, 0.3, 0.0);
        assert!(a.model.j_q.abs() < 1e-15);
        assert!(a.model.j_a.abs() < 1e-15);
        assert!(a.model.j_n.abs() < 1e-15);
    }

    #[test]
    fn second_transform_removes_bridge_coupling() {
        for n in 1..=4 {
            let a = solved(n, 0.3, 0.3);
            let ut = assemble_u_tilde(a.model.eta, n);
            let hs = conjugate(&a.model.h_tilde_2(), &ut).unwrap();
            assert!(hs.max_abs_diff(&a.model.h_star()) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn both_forms_of_jn_agree() {
        for &(g, f) in &[(0.05, 0.05), (0.3, 0.1), (0.1, 0.4)] {
            let m = solved(3, g, f).model;
            let via_eta = coupling_strength_from_eta(m.j_q, m.j_a, m.eps, m.eta, 3);
            assert_abs_diff_eq!(via_eta, m.j_n, epsilon = 1e-12);
        }
        let (j, s) = coupling_strength_jn(0.0, 0.2, 0.0, 2);
        assert_eq!(s, RootSign::Plus);
        assert_abs_diff_eq!(
            j,
            coupling_strength_from_eta(0.0, 0.2, 0.0, solve_eta(0.0, 0.2, 0.0, 2), 2),
            epsilon = 1e-15
        );
    }
}
