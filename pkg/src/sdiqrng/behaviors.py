"""Behavior data model and the one-parameter behavior family.

A behavior is the conditional table p(a|x) for binary input and output;
the family implemented here interpolates between two deterministic
endpoints and is maximally unpredictable in the middle:

    p(a|0) = a*(1 - 2*delta) + delta,     p(a|1) = 1 - a.

``delta`` is the assumed lower bound on the fidelity of the two prepared
states; the canonical pure-state pair saturating it is |psi0> = |0> and
|psi1> = sqrt(delta)|0> + sqrt(1-delta)|1>.
"""

import json
from dataclasses import dataclass

import numpy as np

NORMALIZATION_TOL = 1e-12


def check_delta(delta):
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"overlap bound delta={delta} outside [0, 1]")
    return delta


def check_gamma(gamma):
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"noise rate gamma={gamma} outside [0, 1]")
    return gamma


@dataclass(frozen=True)
class Behavior:
    """Conditional distribution p(a|x), stored as a 2x2 table indexed [a][x]."""

    p: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.p, dtype=float)
        if table.shape != (2, 2):
            raise ValueError("behavior table must be 2x2 (indexed [a][x])")
        if np.any(table < -NORMALIZATION_TOL) or np.any(table > 1 + NORMALIZATION_TOL):
            raise ValueError("behavior entries must lie in [0, 1]")
        col = table.sum(axis=0)
        if np.max(np.abs(col - 1.0)) > NORMALIZATION_TOL:
            raise ValueError(f"behavior columns must sum to 1, got {col}")
        table = np.clip(table, 0.0, 1.0)
        table.setflags(write=False)
        object.__setattr__(self, "p", table)

    def prob(self, a, x):
        return float(self.p[a, x])

    def flat(self):
        """(p(0|0), p(0|1), p(1|0), p(1|1)) in a-major order."""
        return (
            float(self.p[0, 0]),
            float(self.p[0, 1]),
            float(self.p[1, 0]),
            float(self.p[1, 1]),
        )

    def to_json(self):
        return json.dumps(
            {
                "p00": self.p[0, 0],
                "p10": self.p[1, 0],
                "p01": self.p[0, 1],
                "p11": self.p[1, 1],
            }
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls.from_entries(d["p00"], d["p10"], d["p01"], d["p11"])

    @classmethod
    def from_entries(cls, p00, p10, p01, p11):
        return cls(np.array([[p00, p01], [p10, p11]], dtype=float))


def canonical_states(delta):
    """Pure-state pair with |<psi0|psi1>|^2 = delta (psi0 = |0>)."""
    delta = check_delta(delta)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    psi1 = np.array([np.sqrt(delta), np.sqrt(1.0 - delta)], dtype=complex)
    return psi0, psi1


def family_behavior(delta):
    """The behavior family p_delta; deterministic at delta in {0, 1}."""
    delta = check_delta(delta)
    p = np.empty((2, 2))
    for a in (0, 1):
        p[a, 0] = a * (1.0 - 2.0 * delta) + delta
        p[a, 1] = 1.0 - a
    return Behavior(p)


def apply_uniform_noise(b, gamma):
    """Mix every entry with the uniform distribution at rate gamma."""
    gamma = check_gamma(gamma)
    return Behavior((1.0 - gamma) * b.p + gamma / 2.0)


def sample_outcome(b, x, rng):
    """One outcome draw for input x: returns 1 with probability p(1|x)."""
    return int(rng.random() < b.p[1, x])


def behavior_from_dilation(d):
    """Behavior realized by a dilation: p(a|x) = Tr[(rho^x (x) sigma) Pi^a]."""
    p = np.empty((2, 2))
    for a in (0, 1):
        for x in (0, 1):
            joint = np.kron(d.rho[x], d.sigma)
            p[a, x] = float(np.real(np.trace(joint @ d.projectors[a])))
    col = p.sum(axis=0)
    if np.max(np.abs(col - 1.0)) > 1e-10:
        raise ValueError(f"dilation behavior not normalized: columns {col}")
    # renormalize the 1e-10-level float residue so Behavior's invariant holds
    return Behavior(p / col[None, :])


def derived_rng(seed, *path):
    """Seeded generator for a worker identified by ``path``.

    The 64-bit run seed and the integer path entries are mixed by
    numpy's SeedSequence, so transcripts reproduce bit-exactly across
    machines and across worker partitions.
    """
    entropy = (int(seed),) + tuple(int(p) for p in path)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
