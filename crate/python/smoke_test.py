"""Smoke test for the qbridge Python extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import math

import qbridge_py as qb


def off_diagonal_residual(h, u):
    n = len(h)
    ut_h_u = [
        [sum(u[k][i] * h[k][l] * u[l][j] for k in range(n) for l in range(n)) for j in range(n)]
        for i in range(n)
    ]
    return max(abs(ut_h_u[i][j]) for i in range(n) for j in range(n) if (i + j) % 2 == 1)


def main():
    p = qb.SystemParams(2, 0.3, 0.3)
    sol = qb.solve(p)
    assert sol.residual < 1e-9, sol.residual
    assert sol.branch == "large"
    a = sol.angles
    assert math.isclose(a.phi, 0.5 * math.atan(0.6), rel_tol=1e-12)
    assert a.delta_prime / p.delta < 1.0

    retuned = qb.SystemParams(2, 0.3, 0.3, omega_a=p.omega_q + a.delta_prime)
    res = off_diagonal_residual(retuned.hamiltonian(), a.unitary())
    assert res < 1e-9, res

    an = qb.analyze(p)
    assert an.angles.eta is not None
    assert an.model.j_n < 0.0

    c_odd, c_even, c_bridge, fidelity = qb.w_decomposition(an.angles)
    norm = 2 * c_odd**2 + 2 * c_even**2 + c_bridge**2
    assert abs(norm - 1.0) < 1e-10
    assert 0.0 <= fidelity <= 1.0

    ground, excited = qb.hybrid_eigenstates(an.angles)
    assert abs(sum(x * y for x, y in zip(ground, excited))) < 1e-10

    gamma_g, gamma_e = qb.decay_rates(p)
    assert 1.0 <= gamma_g <= 12.0 and 1.0 <= gamma_e <= 12.0

    levels = qb.labeled_spectrum(p)
    assert len(levels) == 5

    try:
        qb.solve(p, branch="sideways")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown branch accepted")

    print(f"phi={a.phi:.6f} theta={a.theta:.6f} delta'={a.delta_prime:.6f} "
          f"J={an.model.j_n:.6e} F={fidelity:.6f}")
    print("smoke test ok")


if __name__ == "__main__":
    main()
