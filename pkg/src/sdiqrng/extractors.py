"""Seedless extractors: XOR, multi-bit lookup tables, and bias spectra.

A multi-bit extractor is a plain lookup table g: {0,1}^n_r -> {0,1}^m.
Its usefulness rests on a bound on all Walsh coefficients of the
centered output indicators,

    | sum_a (delta_{k,g(a)} - 2^-m) (-1)^(a.r) |  <=  n_r^2 sqrt(2)^(n_r-m),

which this module checks exactly: spectra are computed by fast
Walsh-Hadamard transforms in int64 and the bound comparison is done on
squared integers (value^2 * 2^(2m) vs n_r^4 * 2^(n_r+m)), so no float
rounding can flip a verdict.  Valid tables are found by rejection
sampling uniformly random functions; no explicit construction is known.

Input-bit packing: bit i of a table index is raw-key round i+1, i.e.
round 1 is the least significant bit.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

EXACT_INPUT_LIMIT = 24  # 2^24 int64 table: the exact-arithmetic path

_MAGIC = b"XTAB"
_HEADER = struct.Struct("<4sBBBxQ")  # magic, version, n_r, m, pad, seed


class TableSizeError(ValueError):
    """Input length beyond the exact-arithmetic table limit."""


class ConstructionBudgetError(RuntimeError):
    """Rejection sampling exhausted its attempt budget."""

    def __init__(self, message, best_witness):
        super().__init__(message)
        self.best_witness = best_witness


@dataclass(frozen=True)
class ExtractorFunction:
    """Lookup table for g: {0,1}^n_r -> {0,1}^m plus its verification flag."""

    n_r: int
    m: int
    table: np.ndarray
    verified: bool = False
    seed: int = 0

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.uint32)
        if self.n_r < 0 or self.n_r > EXACT_INPUT_LIMIT:
            raise TableSizeError(
                f"n_r={self.n_r} outside the exact path (limit {EXACT_INPUT_LIMIT})"
            )
        if table.shape != (1 << self.n_r,):
            raise ValueError(
                f"table length {table.shape} does not match n_r={self.n_r}"
            )
        if self.m < 1 or self.m >= 32:
            raise ValueError(f"m={self.m} out of range")
        if table.size and int(table.max()) >> self.m:
            raise ValueError(f"table entries must be < 2^{self.m}")
        if table is self.table and table.flags.writeable:
            table = table.copy()  # never freeze a caller-owned array
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def save(self, path):
        """Flat binary format: header then 2^n_r little-endian uint32 words."""
        with open(path, "wb") as fh:
            fh.write(
                _HEADER.pack(_MAGIC, 1, self.n_r, self.m | (0x80 if self.verified else 0), self.seed)
            )
            fh.write(self.table.astype("<u4").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            magic, version, n_r, mflags, seed = _HEADER.unpack(head)
            if magic != _MAGIC or version != 1:
                raise ValueError(f"{path}: not an extractor table file")
            verified = bool(mflags & 0x80)
            m = mflags & 0x7F
            table = np.frombuffer(fh.read(4 << n_r), dtype="<u4")
        return cls(n_r=n_r, m=m, table=table.astype(np.uint32), verified=verified, seed=seed)


@dataclass(frozen=True)
class BiasSpectrum:
    """Centered-indicator Walsh spectra, one row per output word.

    values[k][r] is exact: an integer whenever m <= n_r, and in general
    the dyadic rational (scaled[k][r] / 2^m) stored without rounding.
    """

    n_r: int
    m: int
    values: np.ndarray
    scaled: np.ndarray  # values * 2^m, exact int64


def xor_extract(bits):
    """Parity of a nonempty bit sequence."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ValueError("xor_extract needs at least one bit")
    return int(np.bitwise_xor.reduce(bits) & 1)


def parity_table(n_r):
    """The XOR function as an m=1 lookup table."""
    idx = np.arange(1 << n_r, dtype=np.uint32)
    table = np.zeros(1 << n_r, dtype=np.uint32)
    for bit in range(n_r):
        table ^= (idx >> bit) & 1
    return ExtractorFunction(n_r=n_r, m=1, table=table)


def identity_table(n_r):
    return ExtractorFunction(
        n_r=n_r, m=n_r, table=np.arange(1 << n_r, dtype=np.uint32)
    )


def constant_table(n_r, m, word=0):
    return ExtractorFunction(
        n_r=n_r, m=m, table=np.full(1 << n_r, word, dtype=np.uint32)
    )


def bias_spectrum(g):
    """Exact spectrum of every output word via fast Walsh-Hadamard.

    For each k: WHT of the 0/1 indicator of {a : g(a) = k}, scaled by
    2^m, with the 2^(n_r) mass of the uniform correction subtracted at
    r = 0 only.
    """
    n = 1 << g.n_r
    scaled = np.empty(((1 << g.m), n), dtype=np.int64)
    for k in range(1 << g.m):
        row = (g.table == k).astype(np.int64)
        K.wht_inplace(row)
        row *= 1 << g.m
        row[0] -= n
        scaled[k] = row
    values = scaled / float(1 << g.m)
    return BiasSpectrum(n_r=g.n_r, m=g.m, values=values, scaled=scaled)


def check_property(g, spectrum=None):
    """Exact check of the Walsh-coefficient bound; returns a witness.

    The comparison |value| <= n_r^2 sqrt(2)^(n_r - m) is squared into
    scaled^2 <= n_r^4 * 2^(n_r + m), all in exact integers.  Returns
    (ok, (k, r, value)) with the witness maximizing |value| (smallest
    (k, r) on ties), and a verified copy of the function when it holds.
    """
    if spectrum is None:
        spectrum = bias_spectrum(g)
    sq = spectrum.scaled.astype(object) ** 2
    flat = int(np.argmax(sq))
    k, r = divmod(flat, spectrum.scaled.shape[1])
    witness = (int(k), int(r), float(spectrum.values[k, r]))
    bound_sq = g.n_r**4 * (1 << (g.n_r + g.m))
    ok = bool(int(sq[k, r]) <= bound_sq)
    verified = (
        ExtractorFunction(
            n_r=g.n_r, m=g.m, table=g.table, verified=True, seed=g.seed
        )
        if ok
        else g
    )
    return ok, witness, verified


def property_bound(n_r, m):
    """The right-hand side n_r^2 sqrt(2)^(n_r - m) as a float."""
    return n_r**2 * np.sqrt(2.0) ** (n_r - m)


def construct_random_extractor(n_r, m, max_attempts=1000, rng=None, seed=0):
    """Rejection-sample uniformly random tables until the bound holds.

    Functions with the required spectra exist in abundance for
    n_r > 5, n_r > m; outside that regime a warning is emitted and the
    budget may well be exhausted (ConstructionBudgetError carries the
    best witness seen).  Keeps the first success, no margin tuning.
    """
    if not (n_r > m and n_r > 5):
        import warnings

        warnings.warn(
            f"(n_r={n_r}, m={m}) is outside the regime where valid tables "
            "are guaranteed to be abundant",
            stacklevel=2,
        )
    if rng is None:
        rng = np.random.default_rng(seed)
    best = None
    for attempt in range(1, max_attempts + 1):
        table = rng.integers(0, 1 << m, size=1 << n_r, dtype=np.uint32)
        g = ExtractorFunction(n_r=n_r, m=m, table=table, seed=seed)
        ok, witness, verified = check_property(g)
        if ok:
            return verified, attempt
        if best is None or abs(witness[2]) < abs(best[2]):
            best = witness
    raise ConstructionBudgetError(
        f"no valid table in {max_attempts} attempts at (n_r={n_r}, m={m}); "
        f"best witness |value|={abs(best[2])} vs bound {property_bound(n_r, m)}",
        best_witness=best,
    )


def apply(g, bits):
    """Look up the output word for a full raw-bit string.

    Bit i of the table index is round i+1's raw bit (round 1 = LSB).
    """
    bits = np.asarray(bits, dtype=np.uint64)
    if bits.shape != (g.n_r,):
        raise ValueError(f"expected {g.n_r} raw bits, got {bits.shape}")
    index = int((bits << np.arange(g.n_r, dtype=np.uint64)).sum())
    return int(g.table[index])
