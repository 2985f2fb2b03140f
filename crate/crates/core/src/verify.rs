//! Property suite run by `qbridge verify`: every closed form is compared with
//! its numeric counterpart over a parameter grid.

use std::fmt;

use rayon::prelude::*;

use crate::effective::{
    coupling_strength_from_eta, effective_model, resonator_block, spin_diagonals,
    transformed_hamiltonian,
};
use crate::error::Result;
use crate::model::{build_hamiltonian, SystemParams};
use crate::observables::{transport_uniform, w_decomposition};
use crate::oracle::{check_conservation, eigenvalues, expm_antisymmetric, single_excitation_block};
use crate::solver::{residual_offdiagonal, solve, SolverConfig};
use crate::transform::{assemble_u_from, assemble_u_tilde, conjugate, generator, generator_tilde};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// n ≤ 3 and a coarser grid.
    pub quick: bool,
    /// Added to every solved θ before the parity check; for exercising the
    /// failure path.
    pub theta_perturbation: f64,
    pub solver: SolverConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            quick: false,
            theta_perturbation: 0.0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Points where the computation itself failed.
    pub failures: usize,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.max_deviation < self.tolerance
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{:.3e},{:.1e},{}",
            self.name,
            self.max_deviation,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        if self.failures > 0 {
            write!(f, ",{} point(s) failed", self.failures)?;
        }
        Ok(())
    }
}

fn fold<I: IntoIterator<Item = Result<f64>>>(
    name: &'static str,
    tolerance: f64,
    items: I,
) -> PropertyResult {
    let mut max_deviation = 0.0f64;
    let mut failures = 0;
    for item in items {
        match item {
            Ok(d) if d.is_finite() => max_deviation = max_deviation.max(d),
            _ => failures += 1,
        }
    }
    PropertyResult {
        name,
        max_deviation,
        tolerance,
        failures,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

struct Grid {
    ns: Vec<usize>,
    couplings: Vec<f64>,
}

impl Grid {
    fn new(quick: bool) -> Self {
        if quick {
            Self {
                ns: vec![1, 2, 3],
                couplings: vec![0.1, 0.3, 0.5],
            }
        } else {
            Self {
                ns: (1..=5).collect(),
                couplings: (1..=10).map(|k| 0.05 * k as f64).collect(),
            }
        }
    }

    fn points(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &g in &self.couplings {
                for &f in &self.couplings {
                    out.push((n, g, f));
                }
            }
        }
        out
    }
}

/// Runs the suite and returns one result per property.
pub fn run_suite(opts: &VerifyOptions) -> Vec<PropertyResult> {
    let grid = Grid::new(opts.quick);
    let points = grid.points();
    let cfg = opts.solver;

    let mut out = Vec::new();

    let angle_samples: Vec<(f64, f64)> = (0..5)
        .flat_map(|i| (0..5).map(move |j| (0.05 + 0.2 * i as f64, 0.1 + 0.2 * j as f64)))
        .collect();
    let max_n = if opts.quick { 3 } else { 6 };
    out.push(fold(
        "transform_closed_form_vs_expm",
        1e-10,
        (1..=max_n).flat_map(|n| {
            angle_samples.iter().map(move |&(phi, theta)| {
                let e = expm_antisymmetric(&generator(phi, theta, n))?;
                Ok(assemble_u_from(phi, theta, n).max_abs_diff(&e))
            })
        }),
    ));
    out.push(fold(
        "transform_orthogonality",
        1e-12,
        (1..=max_n).flat_map(|n| {
            angle_samples.iter().flat_map(move |&(phi, theta)| {
                [
                    Ok(assemble_u_from(phi, theta, n).orthogonality_defect()),
                    Ok(assemble_u_tilde(phi - theta, n).orthogonality_defect()),
                ]
            })
        }),
    ));
    out.push(fold(
        "second_transform_vs_expm",
        1e-12,
        (1..=max_n).flat_map(|n| {
            angle_samples.iter().map(move |&(eta, _)| {
                let e = expm_antisymmetric(&generator_tilde(eta - 0.5, n))?;
                Ok(assemble_u_tilde(eta - 0.5, n).max_abs_diff(&e))
            })
        }),
    ));

    let solved: Vec<Result<(SystemParams, crate::effective::Analysis)>> = points
        .par_iter()
        .map(|&(n, g, f)| {
            let p = SystemParams::new(n, g, f);
            let a = crate::effective::analyze(&p, &cfg)?;
            Ok((p, a))
        })
        .collect();

    out.push(fold(
        "block_parity_residual",
        cfg.offdiag_tol,
        solved.iter().map(|r| {
            let (p, a) = r.as_ref().map_err(Clone::clone)?;
            let mut angles = a.solution.angles;
            angles.theta += opts.theta_perturbation;
            residual_offdiagonal(p, &angles)
        }),
    ));
    out.push(fold(
        "spectral_invariance",
        1e-8,
        solved.iter().map(|r| {
            let (_, a) = r.as_ref().map_err(Clone::clone)?;
            let exact = eigenvalues(&build_hamiltonian(&a.params)?)?;
            let ht = transformed_hamiltonian(&a.params, &a.angles)?;
            let mut parts = eigenvalues(&resonator_block(&ht))?;
            parts.extend(eigenvalues(&a.model.h_star())?);
            parts.sort_by(f64::total_cmp);
            Ok(max_abs_diff(&exact, &parts))
        }),
    ));
    out.push(fold(
        "second_transform_clears_bridge",
        1e-10,
        solved.iter().map(|r| {
            let (_, a) = r.as_ref().map_err(Clone::clone)?;
            let hs = conjugate(
                &a.model.h_tilde_2(),
                &assemble_u_tilde(a.model.eta, a.model.n),
            )?;
            Ok(hs.max_abs_diff(&a.model.h_star()))
        }),
    ));
    out.push(fold(
        "coupling_eta_form_vs_explicit",
        1e-12,
        solved.iter().map(|r| {
            let (_, a) = r.as_ref().map_err(Clone::clone)?;
            let m = &a.model;
            Ok((coupling_strength_from_eta(m.j_q, m.j_a, m.eps, m.eta, m.n) - m.j_n).abs())
        }),
    ));
    out.push(fold(
        "effective_frequency_round_trip",
        1e-12,
        solved
            .iter()
            .filter(|r| r.as_ref().map_or(true, |(p, _)| p.n >= 2))
            .map(|r| {
                let (_, a) = r.as_ref().map_err(Clone::clone)?;
                let m = &a.model;
                let (wq, wa) = (
                    m.omega_q_eff.unwrap_or(f64::NAN),
                    m.omega_a_eff.unwrap_or(f64::NAN),
                );
                let (dq, da) = spin_diagonals(wq, wa, m.n);
                Ok((dq - m.eps_nq).abs().max((da - m.eps_na).abs()))
            }),
    ));
    out.push(fold(
        "w_state_closed_form_vs_transport",
        1e-10,
        solved.iter().map(|r| {
            let (_, a) = r.as_ref().map_err(Clone::clone)?;
            let w = w_decomposition(&a.angles)?;
            Ok(max_abs_diff(&w.to_vector(), &transport_uniform(&a.angles)?)
                .max((w.norm_sq() - 1.0).abs()))
        }),
    ));

    let anchor_ns: Vec<usize> = grid.ns.iter().copied().filter(|&n| n >= 2).collect();
    let anchors: Vec<Result<f64>> = anchor_ns
        .par_iter()
        .flat_map_iter(|&n| {
            grid.couplings
                .iter()
                .flat_map(move |&x| [(n, x, 0.0), (n, 0.0, x)])
                .collect::<Vec<_>>()
        })
        .map(|(n, g, f)| {
            let p = SystemParams::new(n, g, f);
            let s = solve(&p, &cfg)?;
            let (m, _) = effective_model(&p, &s.angles)?;
            Ok(m.j_n.abs())
        })
        .collect();
    out.push(fold("decoupled_anchors", 1e-10, anchors));

    let full_ns = if opts.quick { 1..=2 } else { 1..=3 };
    out.push(fold(
        "excitation_conservation",
        1e-12,
        full_ns
            .clone()
            .map(|n| check_conservation(&SystemParams::new(n, 0.3, 0.2))),
    ));
    out.push(fold(
        "full_space_block_vs_model",
        1e-13,
        full_ns.map(|n| {
            let p = SystemParams::new(n, 0.3, 0.2);
            Ok(single_excitation_block(&p)?.max_abs_diff(&build_hamiltonian(&p)?))
        }),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let results = run_suite(&VerifyOptions {
            quick: true,
            ..VerifyOptions::default()
        });
        for r in &results {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn injected_theta_error_fails_parity() {
        let results = run_suite(&VerifyOptions {
            quick: true,
            theta_perturbation: 0.01,
            ..VerifyOptions::default()
        });
        let parity = results
            .iter()
            .find(|r| r.name == "block_parity_residual")
            .unwrap();
        assert!(!parity.passed());
        assert!(parity.max_deviation > 1e-4);
        assert!(parity.to_string().ends_with("FAIL"));
    }
}
