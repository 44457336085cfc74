"""Spot-checking generation protocol: transcripts and output lengths.

Each round is independently labeled estimation (probability p_e, input
drawn uniformly, tuple (a, x) recorded) or raw key (input fixed to 0).
The output length is certified from the estimation counts by maximizing

    f = sum_z w_z alpha_z  +  u * beta  +  const(epsilon, n_r)

over a dual-feasible (nu, H) and beta, where the alpha are eliminated
through the per-tuple equality constraints

    XOR mode:        p_r sqrt(2)^(beta-1) (4 nu_z - 1) + p_e sqrt(2)^alpha_z = 1
    multi-bit mode:  4 p_r sqrt(2)^(beta-1) nu_z       + p_e sqrt(2)^alpha_z = 1.

All logarithms are base 2 (the error telescopes to exactly epsilon with
bit-denominated lengths).  Any feasible point certifies a valid (maybe
shorter) output, so every solve here is a lower bound; the epsilon- and
n_r-dependent constants are added after the core maximization, which
makes the certified length monotone in epsilon by construction.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .behaviors import check_delta, derived_rng
from .bounds import check_q_identities as check_identities  # noqa: F401  (re-export)
from .bounds import MultiRoundState, exact_cq_state, q_operator, trace_distance_to_ideal
from .extractors import apply as apply_extractor
from .extractors import parity_table, xor_extract
from .guessing import (
    DualCertificate,
    SolverOptions,
    _repair_nu,
    _state_data,
    _theta_to_H,
    feasibility_margin,
)
from .linalg import kron_all, partial_trace

SINGLE_BIT = "single-bit"
MULTI_BIT = "multi-bit"

# inner-loop preset: warm starts carry most of the information
FAST_OPTIONS = SolverOptions(
    starts=8, max_iter=2500, polish_starts=4, polish_scales=(1e-2, 1e-4)
)

_TRANSCRIPT_MAGIC = b"SDTR"
_TRANSCRIPT_HEADER = struct.Struct("<4sBB2xQdddQ")


class ExtractorMismatchError(ValueError):
    """Supplied table does not fit the transcript or certified length."""


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    p_e: float
    epsilon: float
    ext_type: str = MULTI_BIT
    delta: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one round")
        # p_e = 1 is allowed as a degenerate case: every round estimates,
        # no raw key exists and no output is ever produced
        if not 0.0 < self.p_e <= 1.0:
            raise ValueError("estimation probability must lie in (0, 1]")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("security parameter must lie in (0, 1]")
        if self.ext_type not in (SINGLE_BIT, MULTI_BIT):
            raise ValueError(f"unknown extractor type {self.ext_type!r}")
        check_delta(self.delta)

    @property
    def p_r(self):
        return 1.0 - self.p_e


def trivial_certificate(delta):
    """The always-feasible point nu = [[1,0],[1,0]], H = 0 (objective 1)."""
    nu = np.array([[1.0, 0.0], [1.0, 0.0]])
    H = (np.zeros((2, 2), dtype=complex), np.zeros((2, 2), dtype=complex))
    return DualCertificate(
        nu=nu, H=H, delta=check_delta(delta), objective=1.0,
        margin=feasibility_margin(nu, H, delta),
    )


@dataclass(frozen=True)
class ProtocolTranscript:
    """Round labels, estimation tuples, raw bits and their counts."""

    labels: np.ndarray  # bool, True = estimation round
    z_a: np.ndarray
    z_x: np.ndarray
    raw: np.ndarray

    def __post_init__(self):
        for name in ("labels", "z_a", "z_x", "raw"):
            supplied = getattr(self, name)
            arr = np.asarray(supplied)
            if arr is supplied and arr.flags.writeable:
                arr = arr.copy()  # never freeze a caller-owned array
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.z_a.shape != self.z_x.shape:
            raise ValueError("estimation tuples must pair up")
        if int(self.labels.sum()) != self.z_a.size:
            raise ValueError("label count does not match estimation data")
        if self.labels.size - self.z_a.size != self.raw.size:
            raise ValueError("raw-round count does not match raw data")

    @property
    def n(self):
        return int(self.labels.size)

    @property
    def n_e(self):
        return int(self.z_a.size)

    @property
    def n_r(self):
        return int(self.raw.size)

    @property
    def counts(self):
        """2x2 table c[a][x] of estimation tuple frequencies."""
        c = np.zeros((2, 2), dtype=np.int64)
        np.add.at(c, (self.z_a.astype(int), self.z_x.astype(int)), 1)
        return c

    def save(self, path, cfg):
        """Binary format: header, RLE labels, z tuples, packed raw bits."""
        mode = 0 if cfg.ext_type == SINGLE_BIT else 1
        runs = []
        if self.n:
            cur = bool(self.labels[0])
            length = 0
            for v in self.labels:
                if bool(v) == cur and length < 0xFFFFFFFF:
                    length += 1
                else:
                    runs.append((cur, length))
                    cur, length = bool(v), 1
            runs.append((cur, length))
        with open(path, "wb") as fh:
            fh.write(
                _TRANSCRIPT_HEADER.pack(
                    _TRANSCRIPT_MAGIC, 1, mode, self.n, cfg.p_e, cfg.epsilon,
                    cfg.delta, cfg.seed,
                )
            )
            fh.write(struct.pack("<I", len(runs)))
            for label, length in runs:
                fh.write(struct.pack("<BI", int(label), length))
            fh.write(struct.pack("<I", self.n_e))
            fh.write(
                (np.asarray(self.z_a, dtype=np.uint8) * 2
                 + np.asarray(self.z_x, dtype=np.uint8)).tobytes()
            )
            fh.write(struct.pack("<I", self.n_r))
            fh.write(
                np.packbits(np.asarray(self.raw, dtype=np.uint8), bitorder="little").tobytes()
            )

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            head = _TRANSCRIPT_HEADER.unpack(fh.read(_TRANSCRIPT_HEADER.size))
            magic, version, mode, n, p_e, epsilon, delta, seed = head
            if magic != _TRANSCRIPT_MAGIC or version != 1:
                raise ValueError(f"{path}: not a transcript file")
            (nruns,) = struct.unpack("<I", fh.read(4))
            labels = np.zeros(n, dtype=bool)
            pos = 0
            for _ in range(nruns):
                label, length = struct.unpack("<BI", fh.read(5))
                labels[pos : pos + length] = bool(label)
                pos += length
            (n_e,) = struct.unpack("<I", fh.read(4))
            tuples = np.frombuffer(fh.read(n_e), dtype=np.uint8)
            (n_r,) = struct.unpack("<I", fh.read(4))
            raw = np.unpackbits(
                np.frombuffer(fh.read((n_r + 7) // 8), dtype=np.uint8),
                count=n_r, bitorder="little",
            )
        cfg = ProtocolConfig(
            n=n, p_e=p_e, epsilon=epsilon,
            ext_type=SINGLE_BIT if mode == 0 else MULTI_BIT,
            delta=delta, seed=seed,
        )
        return cls(labels=labels, z_a=tuples // 2, z_x=tuples % 2, raw=raw), cfg


@dataclass(frozen=True)
class LengthSolution:
    """Certified output length and the feasible point behind it.

    ``objective`` is the full f value including the epsilon and n_r
    constants; ``alpha`` follows from (beta, nu) through the equality
    constraints, so the stored residual is float rounding only.
    """

    mode: str
    alpha: np.ndarray
    beta: float
    cert: DualCertificate
    objective: float
    m_out: int
    n_r: int
    epsilon: float
    p_e: float

    def constraint_residual(self):
        s = np.power(2.0, 0.5 * (self.beta - 1.0))
        p_r = 1.0 - self.p_e
        worst = 0.0
        for a in (0, 1):
            for x in (0, 1):
                if self.mode == SINGLE_BIT:
                    lhs = p_r * s * (4.0 * self.cert.nu[a, x] - 1.0)
                else:
                    lhs = 4.0 * p_r * s * self.cert.nu[a, x]
                lhs += self.p_e * np.power(2.0, 0.5 * self.alpha[a, x])
                worst = max(worst, abs(lhs - 1.0))
        return worst

    def to_json(self):
        return json.dumps(
            {
                "mode": self.mode,
                "alpha": [[self.alpha[a, x] for x in (0, 1)] for a in (0, 1)],
                "beta": self.beta,
                "objective": self.objective,
                "m_out": self.m_out,
                "n_r": self.n_r,
                "epsilon": self.epsilon,
                "p_e": self.p_e,
                "certificate": json.loads(self.cert.to_json()),
            },
            sort_keys=True,
        )


def run_rounds(cfg, b):
    """Generate one honest transcript (reproducible from cfg.seed).

    Draw order: round labels, estimation inputs, estimation outcomes,
    raw outcomes; each block vectorized over rounds.
    """
    rng = derived_rng(cfg.seed)
    est = rng.random(cfg.n) < cfg.p_e
    n_e = int(est.sum())
    z_x = rng.integers(0, 2, size=n_e, dtype=np.uint8)
    z_a = (rng.random(n_e) < b.p[1, z_x]).astype(np.uint8)
    raw = (rng.random(cfg.n - n_e) < b.p[1, 0]).astype(np.uint8)
    return ProtocolTranscript(labels=est, z_a=z_a, z_x=z_x, raw=raw)


def _alpha_from(mode, beta, nu, p_e):
    """Eliminate alpha through the equality constraints; None if infeasible."""
    s = np.power(2.0, 0.5 * (beta - 1.0))
    p_r = 1.0 - p_e
    alpha = np.empty((2, 2))
    for a in (0, 1):
        for x in (0, 1):
            if mode == SINGLE_BIT:
                arg = 1.0 - p_r * s * (4.0 * nu[a, x] - 1.0)
            else:
                arg = 1.0 - 4.0 * p_r * s * nu[a, x]
            if arg <= 0.0:
                return None
            alpha[a, x] = 2.0 * np.log2(arg / p_e)
    return alpha


def _core_value(mode, beta, nu, weights, u, p_e):
    alpha = _alpha_from(mode, beta, nu, p_e)
    if alpha is None:
        return None, -np.inf
    return alpha, float(np.sum(weights * alpha) + u * beta)


def _beta_scan(mode, nu, weights, u, p_e, points=64):
    """1-D scan of the core value over the feasible beta range."""
    p_r = 1.0 - p_e
    if mode == SINGLE_BIT:
        coeff = p_r * max(4.0 * float(np.max(nu)) - 1.0, 1e-12)
    else:
        coeff = 4.0 * p_r * max(float(np.max(nu)), 1e-12)
    beta_max = 1.0 - 2.0 * np.log2(coeff)
    best = (None, -np.inf, beta_max - 8.0)
    # the saturation point where the tightest argument equals p_e exactly
    grid = [beta_max + 2.0 * np.log2(1.0 - p_e)]
    grid += [beta_max + 2.0 * np.log2(1.0 - 0.5 ** (0.25 * k)) for k in range(1, points + 1)]
    for beta in grid:
        alpha, val = _core_value(mode, beta, nu, weights, u, p_e)
        if val > best[1]:
            best = (alpha, val, beta)
    return best


def _length_theta(beta, nu, H):
    h = []
    for m in H:
        h += [
            float(np.real(m[0, 0])),
            float(np.real(m[1, 1])),
            float(np.real(m[0, 1])),
            float(np.imag(m[0, 1])),
        ]
    return [beta, nu[0, 0], nu[0, 1], nu[1, 0], nu[1, 1]] + h


def optimize_length_core(mode, weights, u, cfg, warm=None, opts=FAST_OPTIONS):
    """Maximize sum w alpha + u beta over feasible (beta, nu, H).

    Returns (core_value, alpha, beta, cert) with an exactly feasible
    certificate, or None when no feasible point was found.  ``warm`` may
    be a LengthSolution or DualCertificate whose (nu, H) seed the search.
    """
    weights = np.asarray(weights, dtype=float)
    q00, q01, q11 = _state_data(cfg.delta)
    kind = K.KIND_LENGTH_XOR if mode == SINGLE_BIT else K.KIND_LENGTH_MUL
    w = list(weights.ravel())
    data = [q00, q01, q11, w[0], w[1], w[2], w[3], float(u), cfg.p_e, cfg.p_r, 1e8]

    rng = np.random.default_rng(opts.seed + 7)
    zero_h = (np.zeros((2, 2), dtype=complex),) * 2
    # the balanced point nu = 1/2, H = (P1 - P0)/2 is feasible at every
    # overlap and certifies the objective value 0 exactly; the searches
    # that matter start from it or from the caller's warm point
    psi0 = np.array([1.0, 0.0])
    psi1 = np.array([np.sqrt(cfg.delta), np.sqrt(1.0 - cfg.delta)])
    h_bal = 0.5 * (np.outer(psi1, psi1) - np.outer(psi0, psi0)).astype(complex)
    anchors = [
        (np.array([[1.0, 0.0], [1.0, 0.0]]), zero_h),
        (np.full((2, 2), 0.5), (h_bal, h_bal.copy())),
        (np.array([[1.0, 0.0], [0.0, 1.0]]), zero_h),
    ]
    if isinstance(warm, LengthSolution):
        anchors.append((warm.cert.nu, warm.cert.H))
    elif isinstance(warm, DualCertificate):
        anchors.append((warm.nu, warm.H))

    starts = []
    for nu, H in anchors:
        _, _, beta0 = _beta_scan(mode, nu, weights, u, cfg.p_e)
        starts.append(_length_theta(beta0, nu, H))
    base = starts[-1]
    while len(starts) < opts.starts:
        jit = rng.normal(0.0, 0.3, size=13)
        starts.append([base[i] + jit[i] for i in range(13)])

    best = None  # (core_value, alpha, beta, nu, H)

    def consider(theta):
        nonlocal best
        beta = float(theta[0])
        nu = np.array([[theta[1], theta[2]], [theta[3], theta[4]]])
        H = _theta_to_H(theta, 5)
        if feasibility_margin(nu, H, cfg.delta) > 0.0:
            try:
                nu, margin = _repair_nu(nu, H, cfg.delta)
            except Exception:
                return
            if margin > 0.0:
                return
        alpha, val = _core_value(mode, beta, nu, weights, u, cfg.p_e)
        backoff = 1e-9
        while alpha is None and backoff < 1.0:
            beta -= backoff
            backoff *= 4.0
            alpha, val = _core_value(mode, beta, nu, weights, u, cfg.p_e)
        if alpha is None:
            return
        if best is None or val > best[0]:
            best = (val, alpha, beta, nu, H)

    for x0 in starts:
        consider(x0)
        x, _, _ = K.minimize(kind, data, list(x0), opts.max_iter, opts.ftol, opts.xtol)
        consider(x)

    if best is None:
        return None
    for scale in opts.polish_scales:
        incumbent = _length_theta(best[2], best[3], best[4])
        for _ in range(opts.polish_starts):
            x0 = [
                v * (1.0 + rng.normal(0.0, scale)) + rng.normal(0.0, scale)
                for v in incumbent
            ]
            x, _, _ = K.minimize(kind, data, x0, opts.max_iter, opts.ftol, opts.xtol, scale)
            consider(x)

    core, alpha, beta, nu, H = best
    # certificate objective at the weight distribution: weights are
    # (estimation mass) * p(a|x)/2, so twice their normalized nu-average
    # recovers sum nu_{a,x} p(a|x)
    wsum = float(weights.sum())
    objective = 2.0 * float(np.sum(nu * weights)) / wsum if wsum > 0 else 1.0
    cert = DualCertificate(
        nu=nu, H=H, delta=cfg.delta, objective=objective,
        margin=feasibility_margin(nu, H, cfg.delta),
    )
    return core, alpha, beta, cert


def _length_constant(mode, n_r, epsilon):
    if mode == SINGLE_BIT:
        return -float(n_r) - 2.0 * np.log2(1.0 / epsilon)
    return -2.0 * np.log2(1.0 / epsilon) - 4.0 * np.log2(n_r)


def solve_length(mode, counts, n_r, cfg, warm=None, opts=FAST_OPTIONS,
                 cap_constructible=True):
    """Certify an output length from estimation counts.

    The epsilon/n_r constants are added after the core maximization;
    n_r = 0 certifies nothing (no raw rounds, no output).  The returned
    certificate is exactly feasible and the equality constraints hold to
    float rounding.
    """
    counts = np.asarray(counts, dtype=float)
    if n_r == 0:
        return LengthSolution(
            mode=mode, alpha=np.zeros((2, 2)), beta=0.0,
            cert=trivial_certificate(cfg.delta), objective=-np.inf,
            m_out=0, n_r=0, epsilon=cfg.epsilon, p_e=cfg.p_e,
        )
    core = optimize_length_core(mode, counts, float(n_r), cfg, warm=warm, opts=opts)
    if core is None:
        return LengthSolution(
            mode=mode, alpha=np.zeros((2, 2)), beta=0.0,
            cert=trivial_certificate(cfg.delta), objective=-np.inf,
            m_out=0, n_r=n_r, epsilon=cfg.epsilon, p_e=cfg.p_e,
        )
    value, alpha, beta, cert = core
    f = value + _length_constant(mode, n_r, cfg.epsilon)
    if mode == SINGLE_BIT:
        m_out = 1 if f >= 0.0 else 0
    else:
        cap = n_r - 1 if cap_constructible else n_r
        m_out = int(max(0, min(cap, np.floor(f)))) if np.isfinite(f) else 0
    return LengthSolution(
        mode=mode, alpha=alpha, beta=beta, cert=cert, objective=float(f),
        m_out=m_out, n_r=n_r, epsilon=cfg.epsilon, p_e=cfg.p_e,
    )


@dataclass(frozen=True)
class ProtocolResult:
    transcript: ProtocolTranscript
    solution: LengthSolution
    output: int | None  # m_out-bit word, None when no output is produced


def run_protocol(cfg, b, g=None, warm=None, opts=FAST_OPTIONS):
    """One full protocol run: rounds, length certification, extraction.

    When ``g`` is omitted (or m_out = 0) only lengths are reported; a
    supplied table must match the realized raw length, the certified
    output length, and carry a verified property check in multi-bit
    mode.
    """
    transcript = run_rounds(cfg, b)
    solution = solve_length(cfg.ext_type, transcript.counts, transcript.n_r, cfg,
                            warm=warm, opts=opts)
    output = None
    if solution.m_out > 0 and transcript.n_r > 0:
        if cfg.ext_type == SINGLE_BIT:
            output = xor_extract(transcript.raw)
        elif g is not None:
            if g.n_r != transcript.n_r:
                raise ExtractorMismatchError(
                    f"table expects {g.n_r} raw bits, transcript has {transcript.n_r}"
                )
            if g.m != solution.m_out:
                raise ExtractorMismatchError(
                    f"table emits {g.m} bits, certified length is {solution.m_out}"
                )
            if not g.verified:
                raise ExtractorMismatchError("multi-bit table must be verified")
            output = apply_extractor(g, transcript.raw)
    return ProtocolResult(transcript=transcript, solution=solution, output=output)


def average_security(d, joint, cfg, extractor_provider=None, opts=FAST_OPTIONS,
                     cap_constructible=True):
    """Exhaustive average-security accounting at toy scale.

    Enumerates every label assignment t and estimation record z for an
    n-round device built from one dilation per round and a joint ancilla
    state, computes p(t, z) through the estimation operators Q, the
    conditional raw-round ancilla state, the certified length m(t, z)
    (cached by counts), and the exact conditional trace distance when an
    output is produced.  Returns (sum of p * distance, diagnostics);
    the sum must stay below cfg.epsilon.
    """
    n = joint.n_r
    dims = [d.dim_m] * n
    q = {(a, x): q_operator(d, a, x) for a in (0, 1) for x in (0, 1)}
    eye = np.eye(d.dim_m, dtype=complex)
    length_cache = {}
    g_cache = {}

    def table_for(n_r, m):
        if (n_r, m) not in g_cache:
            if cfg.ext_type == SINGLE_BIT:
                g_cache[(n_r, m)] = parity_table(n_r)
            elif extractor_provider is not None:
                g_cache[(n_r, m)] = extractor_provider(n_r, m)
            else:
                import warnings

                from .extractors import construct_random_extractor

                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    g_cache[(n_r, m)], _ = construct_random_extractor(
                        n_r, m, max_attempts=2000, seed=1000 * n_r + m
                    )
        return g_cache[(n_r, m)]

    total = 0.0
    prob_mass = 0.0
    outputs = 0
    sigma = joint.sigma_joint
    for t_mask in range(1 << n):
        est_pos = [i for i in range(n) if (t_mask >> i) & 1]
        raw_pos = [i for i in range(n) if not (t_mask >> i) & 1]
        n_e, n_r = len(est_pos), len(raw_pos)
        p_t = cfg.p_e**n_e * cfg.p_r**n_r
        for z_code in range(4**n_e):
            tuples = [(z_code // 4**j) % 4 for j in range(n_e)]
            ops = [eye] * n
            counts = np.zeros((2, 2), dtype=np.int64)
            for j, code in zip(est_pos, tuples):
                a, x = code // 2, code % 2
                ops[j] = q[(a, x)]
                counts[a, x] += 1
            weighted = sigma @ kron_all(ops)
            p_z = float(np.real(np.trace(weighted)))
            prob_mass += p_t * max(p_z, 0.0)
            if p_z <= 1e-15:
                continue
            key = (tuple(counts.ravel()), n_r)
            if key not in length_cache:
                length_cache[key] = solve_length(
                    cfg.ext_type, counts, n_r, cfg, opts=opts,
                    cap_constructible=cap_constructible,
                )
            sol = length_cache[key]
            if sol.m_out == 0 or n_r == 0:
                continue
            outputs += 1
            cond = partial_trace(weighted, dims, keep=raw_pos) / p_z
            cond = (cond + cond.conj().T) / 2.0
            state = MultiRoundState(n_r=n_r, sigma_joint=cond)
            g = table_for(n_r, sol.m_out)
            s = exact_cq_state([d] * n_r, state, g)
            dist = trace_distance_to_ideal(s)
            total += p_t * p_z * dist
    return total, {
        "probability_mass": prob_mass,
        "outputs_produced": outputs,
        "length_solves": len(length_cache),
    }
