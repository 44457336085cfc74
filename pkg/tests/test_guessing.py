import numpy as np
import pytest

from sdiqrng.behaviors import Behavior, apply_uniform_noise, family_behavior
from sdiqrng.bounds import random_dilation
from sdiqrng.guessing import (
    BehaviorInfeasibleError,
    DualCertificate,
    SolverOptions,
    feasibility_margin,
    kappa_matrices,
    predictability_bound,
    solve_dual,
    solve_primal_oracle,
    verify_dual_feasible,
)

QUICK = SolverOptions(starts=16, max_iter=3000, polish_starts=4,
                      polish_scales=(1e-2, 1e-4))


def test_dual_endpoints_exact():
    for delta in (0.0, 1.0):
        cert = solve_dual(family_behavior(delta), delta)
        assert cert.objective == pytest.approx(1.0, abs=1e-6)
        assert verify_dual_feasible(cert, 1e-9)
        assert cert.margin <= 1e-12


def test_dual_sandwich_at_half():
    b = family_behavior(0.5)
    cert = solve_dual(b, 0.5, QUICK)
    assert max(b.prob(0, 0), b.prob(1, 0)) - 1e-9 <= cert.objective <= 1.0


def test_duality_gap_against_primal_oracle():
    for delta in (0.3, 0.5, 0.7):
        b = family_behavior(delta)
        cert = solve_dual(b, delta)
        primal = solve_primal_oracle(b, delta)
        assert primal.objective <= cert.objective + 1e-6
        assert cert.objective - primal.objective <= 2e-3


def test_deterministic_column_primal_is_exact():
    # independent truth: the x=1 column forces the measurement, leaving
    # Eve the better marginal guess, so P_guess = max(delta, 1 - delta)
    for delta in (0.1, 0.25, 0.5, 0.75, 0.9):
        p = solve_primal_oracle(family_behavior(delta), delta)
        assert p.objective == pytest.approx(max(delta, 1 - delta), abs=1e-12)


def test_verify_feasible_all_ones():
    for delta in (0.0, 0.3, 0.8, 1.0):
        cert = DualCertificate(
            nu=np.ones((2, 2)),
            H=(np.zeros((2, 2), dtype=complex), np.zeros((2, 2), dtype=complex)),
            delta=delta, objective=2.0, margin=0.0,
        )
        assert verify_dual_feasible(cert, 1e-9)


def test_verify_infeasible_all_zeros():
    cert = DualCertificate(
        nu=np.zeros((2, 2)),
        H=(np.zeros((2, 2), dtype=complex), np.zeros((2, 2), dtype=complex)),
        delta=0.5, objective=0.0, margin=1.0,
    )
    assert not verify_dual_feasible(cert, 1e-9)


def test_kappa_eigenvalue_oracle_agrees_with_margin():
    rng = np.random.default_rng(3)
    for _ in range(20):
        nu = rng.normal(size=(2, 2))
        H = tuple(
            (lambda m: (m + m.conj().T) / 2)(
                rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            )
            for _ in range(2)
        )
        delta = rng.uniform(0.05, 0.95)
        kappas = kappa_matrices(nu, H, delta)
        direct = max(np.linalg.eigvalsh(k)[-1] for k in kappas.values())
        assert feasibility_margin(nu, H, delta) == pytest.approx(direct, abs=1e-12)
        cert = DualCertificate(nu=nu, H=H, delta=delta, objective=0.0, margin=direct)
        assert verify_dual_feasible(cert, 1e-9) == (direct <= 1e-9 * 2)


def test_predictability_bound_formula():
    b = family_behavior(0.0)
    cert = solve_dual(b, 0.0)
    assert predictability_bound(cert, b) == pytest.approx(1.0, abs=1e-9)
    fake = DualCertificate(
        nu=np.full((2, 2), 0.375),  # objective 0.75 on any behavior
        H=(np.zeros((2, 2), dtype=complex),) * 2,
        delta=0.5, objective=0.75, margin=0.0,
    )
    assert predictability_bound(fake, family_behavior(0.5)) == pytest.approx(0.5)


def test_predictability_bound_dominates_dilation_behaviors():
    rng = np.random.default_rng(17)
    delta = 0.4
    cert = solve_dual(family_behavior(delta), delta, QUICK)
    for _ in range(50):
        d = random_dilation(delta, int(rng.integers(1, 4)), rng,
                            extra_overlap=float(rng.uniform(0, 0.3)))
        b = d.behavior()
        bound = predictability_bound(cert, b)
        assert bound >= abs(b.prob(0, 0) - b.prob(1, 0)) - 1e-8


def test_weak_duality_on_dilation_behaviors():
    rng = np.random.default_rng(23)
    delta = 0.35
    for _ in range(5):
        d = random_dilation(delta, 2, rng, extra_overlap=float(rng.uniform(0, 0.2)))
        b = d.behavior()
        cert = solve_dual(b, delta, QUICK)
        primal = solve_primal_oracle(b, delta, QUICK)
        assert primal.objective <= cert.objective + 1e-6 + primal.psd_residual


def test_dual_symmetry_under_relabeling():
    for delta in (0.2, 0.35):
        a = solve_dual(family_behavior(delta), delta)
        b = solve_dual(family_behavior(1 - delta), 1 - delta)
        assert abs(a.objective - b.objective) < 1e-4


def test_certificate_json_round_trip():
    cert = solve_dual(family_behavior(0.3), 0.3, QUICK)
    again = DualCertificate.from_json(cert.to_json())
    assert np.abs(again.nu - cert.nu).max() == 0.0
    assert all(np.abs(h1 - h2).max() == 0.0 for h1, h2 in zip(again.H, cert.H))
    assert again.certificate_id() == cert.certificate_id()
    assert verify_dual_feasible(again, 1e-9)


def test_primal_infeasible_behavior_detected():
    # family(0.3) cannot be realized with states of fidelity >= 0.6
    with pytest.raises(BehaviorInfeasibleError):
        solve_primal_oracle(family_behavior(0.3), 0.6, QUICK)


def test_primal_uniform_behavior_identical_states():
    b = Behavior.from_entries(0.5, 0.5, 0.5, 0.5)
    p = solve_primal_oracle(b, 1.0)
    assert p.objective >= 0.5 - 1e-9


def test_primal_solution_invariants():
    b = apply_uniform_noise(family_behavior(0.45), 0.03)
    p = solve_primal_oracle(b, 0.45, QUICK)
    total = [p.N[0][lam] + p.N[1][lam] for lam in (0, 1)]
    for block in total:
        # completeness: each lambda block proportional to the identity
        off = abs(block[0, 1]) + abs(block[0, 0] - block[1, 1])
        assert off < 1e-8
    for a in (0, 1):
        for lam in (0, 1):
            w = np.linalg.eigvalsh((p.N[a][lam] + p.N[a][lam].conj().T) / 2)
            assert w[0] >= -1e-8
    assert p.data_residual <= 1e-9
