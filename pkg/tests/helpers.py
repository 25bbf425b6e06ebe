import numpy as np

from everettropy import DensityState, Operator, SystemLayout

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
BELL = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


def qubit(label="S"):
    return SystemLayout(((label, 2),))


def two(da=2, db=2, a="A", b="B"):
    return SystemLayout(((a, da), (b, db)))


def random_unitary(rng, n):
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (z + z.conj().T)


def random_density(rng, n, rank=None):
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_state(rng, layout, rank=None):
    return DensityState(Operator(layout, random_density(rng, layout.total_dim, rank)))


def random_normal(rng, n, degenerate=False):
    vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    if degenerate and n > 1:
        vals[1] = vals[0]
    u = random_unitary(rng, n)
    return u @ np.diag(vals) @ u.conj().T


def random_matrix(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def entropy_bits_oracle(m):
    # independent of the library: eigenvalues by numpy eigvals, Shannon sum
    w = np.linalg.eigvals(m).real
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


def partial_trace_oracle(m, dims, keep):
    """Explicit index loops; layout-ordered kept factors."""
    dims = list(dims)
    n = len(dims)
    idx = np.array(list(np.ndindex(*dims)))
    kept_dims = [dims[k] for k in keep]
    dk = int(np.prod(kept_dims))
    out = np.zeros((dk, dk), dtype=complex)
    for i, ri in enumerate(idx):
        for j, rj in enumerate(idx):
            if all(ri[t] == rj[t] for t in range(n) if t not in keep):
                a = np.ravel_multi_index([ri[k] for k in keep], kept_dims)
                b = np.ravel_multi_index([rj[k] for k in keep], kept_dims)
                out[a, b] += m[i, j]
    return out
