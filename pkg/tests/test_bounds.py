import numpy as np
import pytest

from sdiqrng.behaviors import apply_uniform_noise, family_behavior
from sdiqrng.bounds import (
    Dilation,
    MultiRoundState,
    OverlapAssumptionError,
    SizeOverflowError,
    c_operator,
    check_q_identities,
    check_thm1,
    correlated_fixture_state,
    epsilon_multi_bit,
    epsilon_multi_bit_iid,
    epsilon_single_bit,
    epsilon_single_bit_iid,
    exact_cq_state,
    fixture_dilation,
    g_operator,
    noisy_fixture_dilation,
    q_operator,
    random_dilation,
    random_joint_state,
    round_operator,
    trace_distance_to_ideal,
)
from sdiqrng.extractors import construct_random_extractor, parity_table
from sdiqrng.guessing import DualCertificate, solve_dual
from sdiqrng.linalg import dagger, ident, kron_all, outer, partial_trace, sqrtm_psd

rng = np.random.default_rng(20260801)


def interior_cert(delta, gamma=0.02):
    return solve_dual(apply_uniform_noise(family_behavior(delta), gamma), delta)


CERT_HALF = interior_cert(0.5)
CERT_03 = interior_cert(0.3)


def ones_cert(delta):
    return DualCertificate(
        nu=np.ones((2, 2)), H=(np.zeros((2, 2), dtype=complex),) * 2,
        delta=delta, objective=2.0, margin=0.0,
    )


def test_round_operator_matches_partial_trace():
    d = random_dilation(0.4, 3, rng)
    t = round_operator(d, 0, 1)
    joint = np.kron(d.rho[1], ident(3)) @ d.projectors[0]
    expect = partial_trace(joint, [2, 3], keep=[1])
    assert np.abs(t - expect).max() == 0.0
    assert np.abs(t - dagger(t)).max() < 1e-12


def test_g_operator_with_all_ones_nu():
    # 2 sum_a,x T^{a,x} - 1 = 2 * (1 + 1) - 1 = 3
    for _ in range(5):
        d = random_dilation(0.5, 2, rng)
        g = g_operator(d, ones_cert(0.5))
        assert np.abs(g - 3.0 * ident(d.dim_m)).max() < 1e-10


def test_g_operator_hermitian():
    d = random_dilation(0.2, 4, rng)
    g = g_operator(d, CERT_03)
    assert np.abs(g - dagger(g)).max() < 1e-10


def test_check_thm1_deterministic_dilation():
    e0, e1 = np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)
    d = Dilation(
        rho=(e0.copy(), e1.copy()),
        projectors=(np.kron(e0, ident(2)), np.kron(e1, ident(2))),
        sigma=ident(2) / 2,
    ).validate()
    cert = solve_dual(family_behavior(0.0), 0.0)
    margin = check_thm1(d, cert)
    assert margin >= -1e-10


def test_check_thm1_randomized():
    cert = solve_dual(family_behavior(0.5), 0.5)
    worst = np.inf
    for _ in range(100):
        d = random_dilation(0.5, int(rng.integers(1, 5)), rng,
                            mixed_states=bool(rng.integers(2)),
                            extra_overlap=float(rng.uniform(0, 0.3)))
        worst = min(worst, check_thm1(d, cert))
    assert worst >= -1e-8


def test_check_thm1_overlap_precondition():
    d = random_dilation(0.2, 2, rng)  # fidelity ~0.2 < 0.8
    cert = solve_dual(family_behavior(0.8), 0.8)
    with pytest.raises(OverlapAssumptionError):
        check_thm1(d, cert)


def test_check_thm1_unitary_invariance():
    d = random_dilation(0.5, 2, rng)
    cert = CERT_HALF
    base = check_thm1(d, cert)
    from sdiqrng.linalg import random_unitary

    u = random_unitary(2, rng)
    big_u = np.kron(ident(2), u)
    rotated = Dilation(
        rho=d.rho,
        projectors=tuple(big_u @ p @ dagger(big_u) for p in d.projectors),
        sigma=u @ d.sigma @ dagger(u),
    ).validate()
    assert abs(check_thm1(rotated, cert) - base) < 1e-9


def test_q_identities():
    for _ in range(20):
        d = random_dilation(0.3, int(rng.integers(1, 5)), rng)
        r1, r2 = check_q_identities(d, CERT_03)
        assert r1 <= 1e-10 and r2 <= 1e-10


def test_q_operator_deterministic_entries():
    e0, e1 = np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)
    d = Dilation(
        rho=(e0.copy(), e1.copy()),
        projectors=(np.kron(e0, ident(2)), np.kron(e1, ident(2))),
        sigma=ident(2) / 2,
    ).validate()
    q = q_operator(d, 0, 0)
    assert np.abs(q - 0.5 * ident(2)).max() < 1e-12
    assert np.abs(q_operator(d, 1, 0)).max() < 1e-12


def test_exact_cq_state_single_round_pure():
    e0, e1 = np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)
    d = Dilation(
        rho=(e0.copy(), e1.copy()),
        projectors=(np.kron(e0, ident(2)), np.kron(e1, ident(2))),
        sigma=outer(np.array([1.0, 0.0])),
    ).validate()
    s = exact_cq_state([d], MultiRoundState.iid(d.sigma, 1), parity_table(1))
    # outcome is deterministic (a=0), so one block carries a pure state
    assert abs(np.trace(s.blocks[0]) - 1.0) < 1e-12
    assert np.abs(s.blocks[1]).max() < 1e-12
    w = np.linalg.eigvalsh(s.blocks[0])
    assert w[-1] == pytest.approx(1.0, abs=1e-10)


def test_exact_cq_state_matches_classical_parity():
    # ancilla-trivial fixture: blocks are classical mixtures of sigma^T
    delta = 0.3
    d = fixture_dilation(delta, theta=0.5, mix=0.2)
    for n in (2, 3):
        s = exact_cq_state([d] * n, MultiRoundState.iid(d.sigma, n), parity_table(n))
        p1 = family_behavior(delta).prob(1, 0)
        probs = np.zeros(2)
        for a in range(1 << n):
            ones = bin(a).count("1")
            probs[ones % 2] += p1**ones * (1 - p1) ** (n - ones)
        for k in (0, 1):
            assert abs(np.trace(s.blocks[k]) - probs[k]) < 1e-10


def test_exact_cq_state_trace_preservation():
    for n in (1, 2, 3):
        dils = [random_dilation(0.5, 2, rng) for _ in range(n)]
        joint = random_joint_state([2] * n, rng, correlated=True)
        s = exact_cq_state(dils, joint, parity_table(n))
        assert abs(sum(np.trace(b) for b in s.blocks) - 1.0) < 1e-9
        for b in s.blocks:
            assert np.linalg.eigvalsh((b + dagger(b)) / 2)[0] >= -1e-9


def test_exact_cq_state_literal_oracle():
    """Full-space construction: explicit purification, projector strings,
    partial trace over everything but the adversary."""
    for n in (1, 2):
        dils = [random_dilation(0.4, 2, rng) for _ in range(n)]
        joint = random_joint_state([2] * n, rng, correlated=True)
        g = parity_table(n)
        s = exact_cq_state(dils, joint, g)
        dm = 2**n
        root = sqrtm_psd(joint.sigma_joint)
        omega = np.zeros(dm * dm, dtype=complex)
        omega[:: dm + 1] = 1.0
        phi = np.kron(root, ident(dm)) @ omega
        purif = np.outer(phi, phi.conj())
        rho_s = kron_all([d.rho[0] for d in dils])
        blocks = [np.zeros((dm, dm), dtype=complex) for _ in range(2)]
        for a in range(1 << n):
            projs = [dils[i].projectors[(a >> i) & 1] for i in range(n)]
            big = kron_all(projs)  # ordered (S1 M1 S2 M2 ...)
            dims = []
            for i in range(n):
                dims += [2, 2]
            perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
            t = big.reshape(dims + dims)
            order = [perm.index(i) for i in range(2 * n)]
            t = np.moveaxis(t, list(range(2 * n)), order)
            t = np.moveaxis(
                t, [2 * n + i for i in range(2 * n)], [2 * n + o for o in order]
            )
            big = t.reshape(2**n * dm, 2**n * dm)
            full = kron_all([big, ident(dm)]) @ kron_all([rho_s, purif])
            blocks[int(g.table[a])] += partial_trace(full, [2**n, dm, dm], keep=[2])
        for got, want in zip(s.blocks, blocks):
            assert np.abs(got - want).max() < 1e-10


def test_trace_distance_examples():
    sigma = np.diag([0.25, 0.25, 0.25, 0.25]).astype(complex)
    from sdiqrng.bounds import CqState

    ideal = CqState(m=2, blocks=tuple(sigma / 4 for _ in range(4)))
    assert trace_distance_to_ideal(ideal) == pytest.approx(0.0, abs=1e-12)
    point_mass = CqState(
        m=2, blocks=(sigma, np.zeros_like(sigma), np.zeros_like(sigma), np.zeros_like(sigma))
    )
    assert trace_distance_to_ideal(point_mass) == pytest.approx(0.75, abs=1e-12)


def test_distance_in_unit_interval():
    for _ in range(5):
        dils = [random_dilation(0.5, 2, rng) for _ in range(3)]
        joint = random_joint_state([2] * 3, rng)
        s = exact_cq_state(dils, joint, parity_table(3))
        assert -1e-12 <= trace_distance_to_ideal(s) <= 1.0 + 1e-12


def test_epsilon_single_bit_formula_and_iid():
    assert epsilon_single_bit_iid(0.75, 10) == pytest.approx(0.5 * 0.5**10)
    assert epsilon_single_bit_iid(0.75, 10) == pytest.approx(4.8828125e-4)
    d = noisy_fixture_dilation(0.5, 0.05, coherence=0.1)
    cert = CERT_HALF
    obj = float(np.sum(cert.nu * d.behavior().p))
    for n in (1, 4):
        eps = epsilon_single_bit([d] * n, MultiRoundState.iid(d.sigma, n), cert)
        assert eps == pytest.approx(epsilon_single_bit_iid(obj, n), abs=1e-9)
    single = epsilon_single_bit([d], MultiRoundState.iid(d.sigma, 1), cert)
    assert single == pytest.approx(0.5 * (2 * obj - 1), abs=1e-12)


def test_epsilon_multi_bit_formula_and_vacuous_flag():
    val = epsilon_multi_bit_iid(0.6, 20, 2)
    assert val.value == pytest.approx(20**2 * np.sqrt(2.0) ** (2 - 20 - 2) * 1.2**20)
    # convergent regime (objective < sqrt(2)/2) still needs many rounds
    assert val.vacuous and not epsilon_multi_bit_iid(0.6, 100, 2).vacuous
    # objective >= sqrt(2)/2 diverges with n_r: a proof-technique artifact
    grow = [epsilon_multi_bit_iid(0.75, n, 2).value for n in (10, 20, 40)]
    assert grow[0] < grow[1] < grow[2]
    assert epsilon_multi_bit_iid(0.75, 40, 2).vacuous


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_bounds_dominate_exact_distance():
    g5, _ = construct_random_extractor(5, 3, seed=11, max_attempts=500)
    for delta, gamma in ((0.3, 0.05), (0.5, 0.08)):
        cert = interior_cert(delta, gamma)
        d = noisy_fixture_dilation(delta, gamma, coherence=0.05)
        for n in range(1, 6):
            for weight in (0.0, 1.0):
                joint = correlated_fixture_state(d, n, weight)
                s = exact_cq_state([d] * n, joint, parity_table(n))
                dist = trace_distance_to_ideal(s)
                assert epsilon_single_bit([d] * n, joint, cert) >= dist - 1e-8
                if n == 5:
                    s2 = exact_cq_state([d] * n, joint, g5)
                    d2 = trace_distance_to_ideal(s2)
                    assert epsilon_multi_bit([d] * n, joint, cert, 3).value >= d2 - 1e-8


def test_c_operator_reconstructs_projectors():
    d = random_dilation(0.5, 2, rng)
    c_sm = d.projectors[0] - d.projectors[1]
    for a in (0, 1):
        recon = 0.5 * (ident(4) + (-1) ** a * c_sm)
        assert np.abs(recon - d.projectors[a]).max() < 1e-12
    assert np.abs(c_operator(d) - (round_operator(d, 0, 0) - round_operator(d, 1, 0))).max() == 0


def test_size_overflow():
    dils = [random_dilation(0.5, 4, rng) for _ in range(4)]  # 4^4 = 256 > 64
    joint = MultiRoundState(n_r=4, sigma_joint=ident(256) / 256)
    with pytest.raises(SizeOverflowError):
        exact_cq_state(dils, joint, parity_table(4))


def test_dilation_validation_and_json():
    d = noisy_fixture_dilation(0.4, 0.1, coherence=0.1)
    again = Dilation.from_json(d.to_json()).validate()
    assert np.abs(again.sigma - d.sigma).max() < 1e-15
    assert abs(again.measured_fidelity() - 0.4) < 1e-9
    with pytest.raises(ValueError):
        Dilation(
            rho=d.rho,
            projectors=(d.projectors[0], d.projectors[0]),
            sigma=d.sigma,
        ).validate()
