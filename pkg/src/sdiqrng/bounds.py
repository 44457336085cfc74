"""Dilations, the certificate operator inequality, and distance bounds.

Any binary measurement can be taken projective on the system plus an
ancilla M (the adversary holds a purification of M's state), so the
security statements become operator inequalities on M.  For a dual
certificate (nu, H) at overlap delta, the central object is

    G = 2 sum_{a,x} nu_{a,x} Tr_S[(rho^x (x) 1) Pi^a] - 1,

which dominates +/- Tr_S[(rho^0 (x) 1)(Pi^0 - Pi^1)] whenever the
prepared states have fidelity >= delta.  Products of per-round G factors
bound the distance between the extracted cq-state and uniform:

    eps_xor   = 1/2 Tr[sigma prod_i G_i]
    eps_multi = n_r^2 sqrt(2)^(m - n_r - 2) Tr[sigma prod_i (1 + G_i)]

Everything here is validated against an exact small-round cq-state
oracle: with E a copy of the joint ancilla and the canonical
purification |Phi> = (sqrt(sigma) (x) 1)|Omega>, the adversary block for
outcome string a collapses to (sqrt(sigma) T^a sqrt(sigma))^T with
per-round 2x2 factors T_i^a = Tr_S[(rho^0 (x) 1) Pi_i^a], so states up
to six rounds fit comfortably in dense arrays.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .behaviors import behavior_from_dilation, canonical_states, check_delta
from .extractors import ExtractorFunction
from .linalg import (
    dagger,
    fidelity,
    ident,
    is_psd,
    kron_all,
    max_abs,
    outer,
    partial_trace,
    random_density,
    random_unitary,
    require_hermitian,
    sqrtm_psd,
    trace_norm,
)

PROJECTIVE_TOL = 1e-10


class OverlapAssumptionError(ValueError):
    """The dilation's state pair violates the certificate's overlap bound."""


class SizeOverflowError(ValueError):
    """Joint-system dimension beyond the exact oracle's limit."""


@dataclass(frozen=True)
class Dilation:
    """Explicit projective realization of a binary measurement.

    rho: the two prepared states on S (2x2); projectors: two projectors
    on S (x) M summing to the identity; sigma: the ancilla state on M.
    """

    rho: tuple
    projectors: tuple
    sigma: np.ndarray

    def __post_init__(self):
        rho = tuple(np.asarray(r, dtype=complex) for r in self.rho)
        projectors = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        sigma = np.asarray(self.sigma, dtype=complex)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "projectors", projectors)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim_m(self):
        return self.sigma.shape[0]

    def validate(self):
        for r in self.rho:
            require_hermitian(r, "prepared state")
            if abs(np.trace(r) - 1.0) > 1e-10 or not is_psd(r, 1e-9):
                raise ValueError("prepared states must be density matrices")
        require_hermitian(self.sigma, "ancilla state")
        if abs(np.trace(self.sigma) - 1.0) > 1e-10 or not is_psd(self.sigma, 1e-9):
            raise ValueError("ancilla state must be a density matrix")
        d = 2 * self.dim_m
        total = self.projectors[0] + self.projectors[1]
        if max_abs(total - ident(d)) > PROJECTIVE_TOL:
            raise ValueError("projectors must sum to the identity")
        for p in self.projectors:
            require_hermitian(p, "projector")
            if max_abs(p @ p - p) > PROJECTIVE_TOL:
                raise ValueError("measurement must be projective")
        return self

    def measured_fidelity(self):
        return fidelity(self.rho[0], self.rho[1])

    def behavior(self):
        return behavior_from_dilation(self)

    def to_json(self):
        """Audit record: matrices, realized behavior, certified overlap."""
        import json

        def mat(m):
            return {
                "re": np.real(m).tolist(),
                "im": np.imag(m).tolist(),
            }

        return json.dumps(
            {
                "rho": [mat(r) for r in self.rho],
                "projectors": [mat(p) for p in self.projectors],
                "sigma": mat(self.sigma),
                "behavior": json.loads(self.behavior().to_json()),
                "fidelity": self.measured_fidelity(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        import json

        def mat(d):
            return np.array(d["re"]) + 1j * np.array(d["im"])

        d = json.loads(text)
        return cls(
            rho=tuple(mat(r) for r in d["rho"]),
            projectors=tuple(mat(p) for p in d["projectors"]),
            sigma=mat(d["sigma"]),
        )


@dataclass(frozen=True)
class MultiRoundState:
    """Joint ancilla state across rounds (arbitrary correlations allowed)."""

    n_r: int
    sigma_joint: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma_joint, dtype=complex)
        object.__setattr__(self, "sigma_joint", s)

    def validate(self, dims=None):
        require_hermitian(self.sigma_joint, "joint ancilla state")
        if abs(np.trace(self.sigma_joint) - 1.0) > 1e-10:
            raise ValueError("joint ancilla state must have unit trace")
        if not is_psd(self.sigma_joint, 1e-9):
            raise ValueError("joint ancilla state must be PSD")
        return self

    @classmethod
    def iid(cls, sigma, n_r):
        return cls(n_r=n_r, sigma_joint=kron_all([sigma] * n_r) if n_r > 1 else np.asarray(sigma, dtype=complex))


@dataclass(frozen=True)
class CqState:
    """Classical-quantum state: one adversary block per output word."""

    m: int
    blocks: tuple

    def rho_e(self):
        return sum(self.blocks)


def round_operator(d, a, x):
    """T^{a,x} = Tr_S[(rho^x (x) 1_M) Pi^a], an operator on M."""
    joint = np.kron(d.rho[x], ident(d.dim_m)) @ d.projectors[a]
    return partial_trace(joint, [2, d.dim_m], keep=[1])


def q_operator(d, a, x):
    """Per-round estimation operator Q^{a,x} = T^{a,x} / 2.

    The four of them resolve the identity, and the certificate operator
    satisfies G = sum (4 nu - 1) Q.
    """
    return 0.5 * round_operator(d, a, x)


def g_operator(d, cert):
    """G = 2 sum nu_{a,x} T^{a,x} - 1 on the ancilla."""
    g = -ident(d.dim_m)
    for a in (0, 1):
        for x in (0, 1):
            g = g + 2.0 * cert.nu[a, x] * round_operator(d, a, x)
    return g


def c_operator(d):
    """Tr_S[(rho^0 (x) 1)(Pi^0 - Pi^1)]: the outcome-difference operator."""
    return round_operator(d, 0, 0) - round_operator(d, 1, 0)


def check_thm1(d, cert):
    """Feasibility margin of +/- C <= G; nonnegative up to solver noise.

    Raises OverlapAssumptionError when F(rho^0, rho^1) < delta (the
    inequality is only claimed under the overlap assumption).
    """
    f = d.measured_fidelity()
    if f < cert.delta - 1e-9:
        raise OverlapAssumptionError(
            f"dilation fidelity {f:.6f} below certificate delta {cert.delta}"
        )
    g = g_operator(d, cert)
    c = c_operator(d)
    lo_minus = np.linalg.eigvalsh((g - c + dagger(g - c)) / 2.0)[0]
    lo_plus = np.linalg.eigvalsh((g + c + dagger(g + c)) / 2.0)[0]
    return float(min(lo_minus, lo_plus))


def check_q_identities(d, cert):
    """Max entrywise residuals of sum Q = 1 and G = sum (4 nu - 1) Q."""
    dim = d.dim_m
    total = np.zeros((dim, dim), dtype=complex)
    recon = np.zeros((dim, dim), dtype=complex)
    for a in (0, 1):
        for x in (0, 1):
            q = q_operator(d, a, x)
            total = total + q
            recon = recon + (4.0 * cert.nu[a, x] - 1.0) * q
    r1 = max_abs(total - ident(dim))
    r2 = max_abs(recon - g_operator(d, cert))
    return r1, r2


def _per_round_g(dilations, cert):
    gs = []
    for d in dilations:
        f = d.measured_fidelity()
        if f < cert.delta - 1e-9:
            raise OverlapAssumptionError(
                f"round dilation fidelity {f:.6f} below delta {cert.delta}"
            )
        gs.append(g_operator(d, cert))
    return gs


def epsilon_single_bit(dilations, joint, cert):
    """Parity-extraction distance bound: 1/2 Tr[sigma prod G_i]."""
    gs = _per_round_g(dilations, cert)
    return 0.5 * float(np.real(np.trace(joint.sigma_joint @ kron_all(gs))))


class MultiBitBound(NamedTuple):
    value: float
    vacuous: bool  # > 1: no information, reported as-is


def epsilon_multi_bit(dilations, joint, cert, m):
    """Distance bound for a verified m-bit table.

    n_r^2 sqrt(2)^(m - n_r - 2) Tr[sigma prod (1 + G_i)]; values above 1
    are flagged vacuous but never clamped, so convergence studies see
    the raw bound.
    """
    gs = _per_round_g(dilations, cert)
    n_r = len(gs)
    ops = [ident(g.shape[0]) + g for g in gs]
    tr = float(np.real(np.trace(joint.sigma_joint @ kron_all(ops))))
    value = n_r**2 * np.sqrt(2.0) ** (m - n_r - 2) * tr
    return MultiBitBound(value=value, vacuous=value > 1.0)


def epsilon_single_bit_iid(objective, n_r):
    """Closed form under IID rounds: 1/2 (2 sum nu p - 1)^n_r."""
    return 0.5 * (2.0 * objective - 1.0) ** n_r


def epsilon_multi_bit_iid(objective, n_r, m):
    """Closed form under IID rounds: n_r^2 sqrt(2)^(m-n_r-2) (2 sum nu p)^n_r."""
    value = n_r**2 * np.sqrt(2.0) ** (m - n_r - 2) * (2.0 * objective) ** n_r
    return MultiBitBound(value=value, vacuous=value > 1.0)


def exact_cq_state(dilations, joint, g):
    """Exact extracted cq-state for raw-key rounds (inputs fixed to 0).

    E is a copy of the joint ancilla; with the canonical purification
    the block for outcome string a is (sqrt(sigma) T^a sqrt(sigma))^T,
    where T^a is the tensor product of per-round outcome operators.
    Grouping by the extractor output word gives the blocks.
    """
    n_r = len(dilations)
    if n_r == 0:
        raise ValueError("need at least one raw-key round")
    if not isinstance(g, ExtractorFunction) or g.n_r != n_r:
        raise ValueError("extractor input length must match the round count")
    dim = int(np.prod([d.dim_m for d in dilations]))
    if dim > 64:
        raise SizeOverflowError(f"joint ancilla dimension {dim} exceeds 64")
    root = sqrtm_psd(joint.sigma_joint)
    t = [(round_operator(d, 0, 0), round_operator(d, 1, 0)) for d in dilations]
    blocks = [np.zeros((dim, dim), dtype=complex) for _ in range(1 << g.m)]
    for a_string in range(1 << n_r):
        factors = [t[i][(a_string >> i) & 1] for i in range(n_r)]
        t_a = kron_all(factors)
        block = (root @ t_a @ root).T
        blocks[int(g.table[a_string])] += block
    return CqState(m=g.m, blocks=tuple(blocks))


def trace_distance_to_ideal(s):
    """1/2 || rho_KE - u_K (x) rho_E ||_1, block-diagonal in the output word."""
    rho_e = s.rho_e()
    scale = 2.0 ** (-s.m)
    total = 0.0
    for block in s.blocks:
        diff = block - scale * rho_e
        total += trace_norm((diff + dagger(diff)) / 2.0)
    return 0.5 * total


# --- fixtures ---------------------------------------------------------------


def fixture_dilation(delta, theta=0.0, mix=0.0):
    """Two-parameter family realizing the behavior family exactly.

    The S measurement is the forced one (project onto psi1 vs its
    orthocomplement); theta rotates the ancilla basis and mix blends the
    ancilla toward maximally mixed, so purification-sensitive paths are
    exercised while the behavior stays pinned to family_behavior(delta).
    """
    delta = check_delta(delta)
    psi0, psi1 = canonical_states(delta)
    phi = np.array([psi1[1], -psi1[0]], dtype=complex)
    m_state = np.array([np.cos(theta), np.sin(theta)], dtype=complex)
    sigma = (1.0 - mix) * outer(m_state) + mix * ident(2) / 2.0
    return Dilation(
        rho=(outer(psi0), outer(psi1)),
        projectors=(np.kron(outer(psi1), ident(2)), np.kron(outer(phi), ident(2))),
        sigma=sigma,
    ).validate()


def noisy_fixture_dilation(delta, gamma, coherence=0.0):
    """Ancilla-controlled fixture realizing the uniform-noise family.

    The ancilla selects between the forced measurement basis and its
    flip, so sigma = [[1-gamma/2, c], [c, gamma/2]] reproduces
    apply_uniform_noise(family_behavior(delta), gamma) exactly while the
    measurement genuinely couples S and M; the off-diagonal ``coherence``
    c (capped by positivity) is invisible to the behavior but not to the
    adversary's purification, which is what the distance bounds must
    dominate.
    """
    delta = check_delta(delta)
    eta = check_delta(gamma) / 2.0
    psi0, psi1 = canonical_states(delta)
    phi = np.array([psi1[1], -psi1[0]], dtype=complex)
    p_keep, p_flip = outer(psi1), outer(phi)
    e0, e1 = np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)
    cmax = np.sqrt(max(eta * (1.0 - eta), 0.0))
    c = float(np.clip(coherence, -cmax, cmax))
    sigma = np.array([[1.0 - eta, c], [c, eta]], dtype=complex)
    return Dilation(
        rho=(outer(psi0), outer(psi1)),
        projectors=(
            np.kron(p_keep, e0) + np.kron(p_flip, e1),
            np.kron(p_flip, e0) + np.kron(p_keep, e1),
        ),
        sigma=sigma,
    ).validate()


def correlated_fixture_state(d, n_r, weight):
    """Joint ancilla state with cross-round correlations, marginals fixed.

    Blends the IID product of ``d.sigma`` with a classically correlated
    diagonal state having the same per-round control populations, so the
    per-round behavior is unchanged while the adversary's side
    information becomes genuinely multi-round.
    """
    sigma = d.sigma
    eta = float(np.real(sigma[1, 1]))
    prod = kron_all([sigma] * n_r) if n_r > 1 else np.asarray(sigma, dtype=complex)
    dim = 2**n_r
    corr = np.zeros((dim, dim), dtype=complex)
    corr[0, 0] = 1.0 - eta
    corr[dim - 1, dim - 1] = eta
    joint = (1.0 - weight) * prod + weight * corr
    return MultiRoundState(n_r=n_r, sigma_joint=joint).validate()


def random_dilation(delta, dim_m, rng, mixed_states=False, extra_overlap=0.0):
    """Random projective dilation whose state pair satisfies F >= delta.

    The prepared pair is the canonical one at overlap delta+extra_overlap
    conjugated by a random unitary on S (optionally mixed with a little
    depolarizing weight, which can only raise the fidelity); the
    projector pair comes from a random unitary on S (x) M and a random
    rank split, and the ancilla state is a random density matrix.
    """
    target = min(1.0, check_delta(delta) + extra_overlap)
    psi0, psi1 = canonical_states(target)
    u = random_unitary(2, rng)
    rho0, rho1 = outer(u @ psi0), outer(u @ psi1)
    if mixed_states:
        w = rng.uniform(0.0, 0.2)
        rho0 = (1 - w) * rho0 + w * ident(2) / 2.0
        rho1 = (1 - w) * rho1 + w * ident(2) / 2.0
    d = 2 * dim_m
    v = random_unitary(d, rng)
    rank = int(rng.integers(1, d))
    diag = np.zeros(d)
    diag[:rank] = 1.0
    pi0 = v @ np.diag(diag).astype(complex) @ dagger(v)
    return Dilation(
        rho=(rho0, rho1),
        projectors=(pi0, ident(d) - pi0),
        sigma=random_density(dim_m, rng),
    ).validate()


def random_joint_state(dims, rng, correlated=True):
    """Random joint ancilla state over per-round factors."""
    total = int(np.prod(dims))
    if correlated:
        return MultiRoundState(n_r=len(dims), sigma_joint=random_density(total, rng)).validate()
    return MultiRoundState(
        n_r=len(dims), sigma_joint=kron_all([random_density(d, rng) for d in dims])
    ).validate()
