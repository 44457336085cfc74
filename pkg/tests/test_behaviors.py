import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdiqrng.behaviors import (
    Behavior,
    apply_uniform_noise,
    behavior_from_dilation,
    canonical_states,
    check_delta,
    derived_rng,
    family_behavior,
    sample_outcome,
)
from sdiqrng.bounds import fixture_dilation, random_dilation


def test_family_midpoint():
    b = family_behavior(0.5)
    assert b.prob(0, 0) == 0.5 and b.prob(1, 0) == 0.5
    assert b.prob(0, 1) == 1.0 and b.prob(1, 1) == 0.0


def test_family_deterministic_endpoints():
    b0 = family_behavior(0.0)
    assert b0.prob(0, 0) == 0.0 and b0.prob(1, 0) == 1.0
    assert b0.prob(0, 1) == 1.0 and b0.prob(1, 1) == 0.0
    b1 = family_behavior(1.0)
    assert b1.prob(0, 0) == 1.0 and b1.prob(1, 0) == 0.0


@given(st.floats(0.0, 1.0))
@settings(max_examples=40)
def test_family_relabel_symmetry(delta):
    b = family_behavior(delta)
    mirror = family_behavior(1.0 - delta)
    for a in (0, 1):
        assert b.prob(a, 0) == pytest.approx(mirror.prob(1 - a, 0), abs=1e-15)
        assert b.prob(a, 1) == mirror.prob(a, 1)


def test_canonical_states_overlap():
    for delta in (0.0, 0.25, 0.5, 1.0):
        psi0, psi1 = canonical_states(delta)
        assert np.linalg.norm(psi0) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(psi1) == pytest.approx(1.0, abs=1e-12)
        assert abs(np.vdot(psi0, psi1)) ** 2 == pytest.approx(delta, abs=1e-12)


def test_noise_identity_and_uniform():
    b = family_behavior(0.3)
    assert np.array_equal(apply_uniform_noise(b, 0.0).p, b.p)
    u = apply_uniform_noise(b, 1.0)
    assert np.abs(u.p - 0.5).max() < 1e-15


def test_noise_formula_value():
    b = apply_uniform_noise(family_behavior(0.5), 0.1)
    assert b.prob(0, 1) == pytest.approx(0.95, abs=1e-15)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=40)
def test_noise_composition_affine(delta, g1, g2):
    b = family_behavior(delta)
    twice = apply_uniform_noise(apply_uniform_noise(b, g1), g2)
    once = apply_uniform_noise(b, 1.0 - (1.0 - g1) * (1.0 - g2))
    assert np.abs(twice.p - once.p).max() < 1e-12


def test_sampling_deterministic_behavior():
    b = family_behavior(0.0)
    rng = derived_rng(7)
    assert all(sample_outcome(b, 0, rng) == 1 for _ in range(50))


def test_sampling_reproducible():
    b = family_behavior(0.5)
    seq1 = [sample_outcome(b, 0, derived_rng(42, k)) for k in range(32)]
    seq2 = [sample_outcome(b, 0, derived_rng(42, k)) for k in range(32)]
    assert seq1 == seq2


def test_sampling_frequency_3sigma():
    b = family_behavior(0.3)
    rng = derived_rng(11)
    n = 100_000
    draws = sum(sample_outcome(b, 0, rng) for _ in range(n))
    p = b.prob(1, 0)
    sigma = np.sqrt(n * p * (1 - p))
    assert abs(draws - n * p) <= 3 * sigma


def test_behavior_from_dilation_deterministic():
    # computational-basis projectors on S, basis-state preparations
    e0 = np.diag([1.0, 0.0]).astype(complex)
    e1 = np.diag([0.0, 1.0]).astype(complex)
    from sdiqrng.bounds import Dilation

    d = Dilation(
        rho=(e0.copy(), e1.copy()),
        projectors=(np.kron(e0, np.eye(2, dtype=complex)),
                    np.kron(e1, np.eye(2, dtype=complex))),
        sigma=np.eye(2, dtype=complex) / 2.0,
    ).validate()
    b = behavior_from_dilation(d)
    assert b.prob(0, 0) == pytest.approx(1.0, abs=1e-12)
    assert b.prob(1, 1) == pytest.approx(1.0, abs=1e-12)


def test_behavior_from_dilation_normalized():
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = random_dilation(0.4, int(rng.integers(1, 4)), rng)
        b = behavior_from_dilation(d)  # Behavior invariants checked on build
        assert np.all(b.p >= 0) and np.all(b.p <= 1)


def test_fixture_dilation_realizes_family():
    for delta in (0.1, 0.5, 0.9):
        d = fixture_dilation(delta, theta=0.3, mix=0.4)
        assert np.abs(behavior_from_dilation(d).p - family_behavior(delta).p).max() < 1e-8


def test_json_round_trip():
    b = apply_uniform_noise(family_behavior(0.37), 0.05)
    again = Behavior.from_json(b.to_json())
    assert np.abs(again.p - b.p).max() < 1e-15


def test_invalid_tables_rejected():
    with pytest.raises(ValueError):
        Behavior(np.array([[0.6, 0.5], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        check_delta(1.5)
