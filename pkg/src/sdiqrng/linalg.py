"""Dense complex Hermitian linear algebra sized for this problem.

Everything here works on plain complex128 numpy arrays of dimension 2
through ~64 (tensor products of qubit-sized factors).  Tolerances are
relative, so the same checks survive overlap parameters near 0 and near
1/2 alike.
"""

import numpy as np

HERMITICITY_RTOL = 1e-12


class NonHermitianError(ValueError):
    """Raised when an operation requires a Hermitian matrix."""


class DimensionMismatchError(ValueError):
    """Raised when subsystem dimensions do not match a matrix shape."""


def ident(n):
    return np.eye(n, dtype=complex)


def dagger(a):
    return np.conj(np.asarray(a)).T


def outer(v):
    """Rank-one projector |v><v|."""
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def max_abs(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(a, rtol=HERMITICITY_RTOL):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return max_abs(a - dagger(a)) <= rtol * (1.0 + max_abs(a))


def require_hermitian(a, what="matrix", rtol=HERMITICITY_RTOL):
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, rtol):
        raise NonHermitianError(
            f"{what} is not Hermitian within {rtol} relative tolerance"
        )
    return a


def kron(a, b):
    """Kronecker product (dimensions multiply)."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(mats):
    """Kronecker product of a sequence, left to right."""
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def partial_trace(a, dims, keep):
    """Reduce ``a`` to the subsystems listed in ``keep``.

    ``dims`` are the tensor-factor dimensions (their product must equal
    the matrix dimension); ``keep`` is an iterable of 0-based factor
    indices.  The trace of the output equals the trace of the input.
    """
    a = np.asarray(a, dtype=complex)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if a.ndim != 2 or a.shape != (total, total):
        raise DimensionMismatchError(
            f"matrix shape {a.shape} incompatible with dims {dims}"
        )
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatchError(f"keep indices {keep} out of range")
    t = a.reshape(dims + dims)
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out_sub = keep + [n + k for k in keep]
    res = np.einsum(t, row + col, out_sub)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return res.reshape(d_keep, d_keep)


def eigh(a):
    """Spectral decomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvector columns); the
    reconstruction V diag(w) V^dag reproduces the input.
    """
    a = require_hermitian(a)
    w, v = np.linalg.eigh(a)
    return w, v


def is_psd(a, tol=1e-9):
    """True iff the smallest eigenvalue is >= -tol*(1 + spectral radius)."""
    a = require_hermitian(a, "is_psd input")
    w = np.linalg.eigvalsh(a)
    radius = float(np.max(np.abs(w))) if w.size else 0.0
    return bool(w[0] >= -tol * (1.0 + radius))


def trace_norm(a):
    """Sum of absolute eigenvalues (Hermitian input only)."""
    a = require_hermitian(a, "trace_norm input")
    w = np.linalg.eigvalsh(a)
    return float(np.sum(np.abs(w)))


def sqrtm_psd(a, clip_tol=1e-12):
    """Hermitian square root of a PSD matrix via eigendecomposition."""
    w, v = eigh(a)
    w = np.where(w > clip_tol, w, np.maximum(w, 0.0))
    return (v * np.sqrt(w)) @ dagger(v)


def fidelity(rho, sigma):
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Falls back to the pure-state shortcut Tr[rho sigma] when both
    arguments are rank one.
    """
    rho = require_hermitian(rho, "fidelity input")
    sigma = require_hermitian(sigma, "fidelity input")
    wr = np.linalg.eigvalsh(rho)
    ws = np.linalg.eigvalsh(sigma)
    if wr[-1] >= 1.0 - 1e-12 and ws[-1] >= 1.0 - 1e-12:
        return float(np.real(np.trace(rho @ sigma)))
    root = sqrtm_psd(rho)
    w = np.linalg.eigvalsh(root @ sigma @ root)
    w = np.clip(w, 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)


# seeded random matrix helpers (tests and theorem-validation suites)

def random_unitary(dim, rng):
    """Haar-ish random unitary from the QR of a complex Ginibre matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_pure(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(dim, rng, rank=None):
    """Random mixed state (normalized Wishart of the given rank)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ dagger(g)
    return m / np.real(np.trace(m))
