"""Dense operator algebra on finite chains.

Conventions used throughout the package:

* Site 0 is the leftmost tensor factor.
* Operators are vectorized by column stacking, ``vec(A)[r + D*c] = A[r, c]``,
  so that ``vec(A X B) = (B^T kron A) vec(X)``. Every superoperator matrix in
  the package is written against this convention.
* Hilbert-Schmidt inner product ``<A, B> = Tr(A^dagger B)``; the adjoint of a
  superoperator matrix is its conjugate transpose.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

HEISENBERG = "heisenberg"
SCHRODINGER = "schrodinger"

# above this size spectral norms switch from full SVD to an iterative solver
DENSE_NORM_LIMIT = 4096

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z)


class DimensionError(ValueError):
    """Raised when operator, support or chain dimensions do not fit together."""


def as_support(sites: Sequence[int] | int) -> tuple[int, ...]:
    """Normalize a site or collection of sites to a strictly increasing tuple."""
    if isinstance(sites, (int, np.integer)):
        return (int(sites),)
    support = tuple(int(s) for s in sites)
    if any(b <= a for a, b in zip(support, support[1:])):
        raise DimensionError(f"support {support} is not strictly increasing")
    return support


def _check_support(support: tuple[int, ...], n_sites: int) -> None:
    if not support:
        raise DimensionError("empty support")
    if support[0] < 0 or support[-1] >= n_sites:
        raise DimensionError(f"support {support} out of range for {n_sites} sites")


def _log_dim(dim: int, local_dim: int) -> int:
    k = int(round(np.log(dim) / np.log(local_dim))) if dim > 1 else 0
    if local_dim**k != dim:
        raise DimensionError(f"dimension {dim} is not a power of local_dim={local_dim}")
    return k


def embed(local: np.ndarray, support, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """Embed ``local`` acting on ``support`` into the full chain of ``n_sites``.

    Identity is placed on every site outside the support. Sites inside the
    support keep their relative order.

    >>> embed(SIGMA_Z, 0, 2).real.diagonal()
    array([ 1.,  1., -1., -1.])
    """
    support = as_support(support)
    _check_support(support, n_sites)
    local = np.asarray(local, dtype=complex)
    k = len(support)
    if local.shape != (local_dim**k, local_dim**k):
        raise DimensionError(
            f"local operator of shape {local.shape} does not act on {k} sites of dim {local_dim}")
    rest = [s for s in range(n_sites) if s not in support]
    full = np.kron(local, np.eye(local_dim ** len(rest)))
    # axes of ``full`` are ordered (support..., rest...) for rows and columns
    order = list(support) + rest
    perm = np.argsort(order)
    tensor = full.reshape((local_dim,) * (2 * n_sites))
    tensor = tensor.transpose(list(perm) + [n_sites + p for p in perm])
    dim = local_dim**n_sites
    return tensor.reshape(dim, dim)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise DimensionError(f"cannot commute shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value.

    Full SVD up to ``DENSE_NORM_LIMIT``; beyond that an ARPACK solve on
    ``A^dagger A`` is used.
    """
    a = np.asarray(a)
    if a.size == 0 or not np.any(a):
        return 0.0
    if max(a.shape) <= DENSE_NORM_LIMIT:
        return float(scipy.linalg.svdvals(a)[0])
    op = scipy.sparse.linalg.aslinearoperator(a)
    gram = scipy.sparse.linalg.LinearOperator(
        (a.shape[1], a.shape[1]), matvec=lambda v: op.rmatvec(op.matvec(v)), dtype=complex)
    top = scipy.sparse.linalg.eigsh(gram, k=1, which="LA", tol=1e-14, return_eigenvectors=False)
    return float(np.sqrt(max(top[0].real, 0.0)))


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.sum(scipy.linalg.svdvals(a)))


def partial_trace(a: np.ndarray, traced, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """Trace out the sites in ``traced``; the remaining sites keep their order."""
    traced = as_support(traced)
    _check_support(traced, n_sites)
    a = np.asarray(a)
    dim = local_dim**n_sites
    if a.shape != (dim, dim):
        raise DimensionError(f"operator of shape {a.shape} is not on {n_sites} sites")
    tensor = a.reshape((local_dim,) * (2 * n_sites))
    kept = [s for s in range(n_sites) if s not in traced]
    letters = [chr(ord("a") + i) for i in range(2 * n_sites)]
    for s in traced:
        letters[n_sites + s] = letters[s]
    out = [letters[s] for s in kept] + [letters[n_sites + s] for s in kept]
    result = np.einsum("".join(letters) + "->" + "".join(out), tensor)
    kdim = local_dim ** len(kept)
    return result.reshape(kdim, kdim)


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    v = np.asarray(v)
    if shape is None:
        dim = int(round(np.sqrt(v.size)))
        if dim * dim != v.size:
            raise DimensionError(f"vector of length {v.size} is not a square operator")
        shape = (dim, dim)
    return v.reshape(shape, order="F")


@dataclass(frozen=True)
class Superoperator:
    """Linear map on operators, stored as a matrix acting on ``vec``.

    ``dim`` is the Hilbert-space dimension the operators act on, so the
    matrix is ``dim**2 x dim**2``.
    """

    matrix: np.ndarray
    picture: str = HEISENBERG

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"superoperator matrix must be square, got {m.shape}")
        if int(round(np.sqrt(m.shape[0]))) ** 2 != m.shape[0]:
            raise DimensionError(f"matrix size {m.shape[0]} is not an operator-space dimension")
        if self.picture not in (HEISENBERG, SCHRODINGER):
            raise ValueError(f"unknown picture {self.picture!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return apply_super(self, a)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        _same_picture(self, other)
        return Superoperator(self.matrix + other.matrix, self.picture)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        _same_picture(self, other)
        return Superoperator(self.matrix - other.matrix, self.picture)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        """Composition, ``(S @ T)[A] = S[T[A]]``."""
        _same_picture(self, other)
        return Superoperator(self.matrix @ other.matrix, self.picture)

    def scaled(self, factor: complex) -> "Superoperator":
        return Superoperator(factor * self.matrix, self.picture)


def _same_picture(s: Superoperator, t: Superoperator) -> None:
    if s.picture != t.picture:
        raise ValueError("cannot combine superoperators from different pictures")
    if s.dim_in != t.dim_in:
        raise DimensionError(f"superoperator sizes differ: {s.dim_in} vs {t.dim_in}")


def apply_super(s: Superoperator, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.shape != (s.dim, s.dim):
        raise DimensionError(f"operator of shape {a.shape} does not match superoperator dim {s.dim}")
    return unvec(s.matrix @ vec(a), a.shape)


def hs_adjoint(s: Superoperator) -> Superoperator:
    flipped = SCHRODINGER if s.picture == HEISENBERG else HEISENBERG
    return Superoperator(s.matrix.conj().T, flipped)


def identity_super(dim: int, picture: str = HEISENBERG) -> Superoperator:
    return Superoperator(np.eye(dim * dim, dtype=complex), picture)


def super_from_map(fn: Callable[[np.ndarray], np.ndarray], dim: int,
                   picture: str = HEISENBERG) -> Superoperator:
    """Tabulate a linear map on ``dim x dim`` matrices over the matrix-unit basis."""
    m = np.zeros((dim * dim, dim * dim), dtype=complex)
    for k in range(dim * dim):
        basis = np.zeros(dim * dim, dtype=complex)
        basis[k] = 1.0
        m[:, k] = vec(fn(unvec(basis)))
    return Superoperator(m, picture)


def left_multiplication(h: np.ndarray, picture: str = HEISENBERG) -> Superoperator:
    h = np.asarray(h, dtype=complex)
    return Superoperator(np.kron(np.eye(h.shape[0]), h), picture)


def right_multiplication(h: np.ndarray, picture: str = HEISENBERG) -> Superoperator:
    h = np.asarray(h, dtype=complex)
    return Superoperator(np.kron(h.T, np.eye(h.shape[0])), picture)


def conjugation(u: np.ndarray, picture: str = HEISENBERG) -> Superoperator:
    """The map ``A -> U A U^dagger``."""
    u = np.asarray(u, dtype=complex)
    return Superoperator(np.kron(u.conj(), u), picture)


def _super_permutation(support: tuple[int, ...], n_sites: int, local_dim: int) -> np.ndarray:
    """Index map taking (local, rest) ordering of vec indices to global ordering.

    Global vec indices are the C-order flattening of (cols..., rows...) with
    site 0 most significant, a consequence of column stacking.
    """
    rest = [s for s in range(n_sites) if s not in support]
    # axes of the (local, rest) kron tensor: cols_S, rows_S, cols_R, rows_R;
    # column axis of site s is global axis s, row axis is n_sites + s
    order = (list(support) + [n_sites + s for s in support]
             + rest + [n_sites + r for r in rest])
    # ``order[j]`` says which global axis sits at position j of the local tensor
    size = local_dim ** (2 * n_sites)
    idx = np.arange(size).reshape((local_dim,) * (2 * n_sites))
    return idx.transpose(order).reshape(-1)


def embed_super_sparse(local: np.ndarray, support, n_sites: int,
                       local_dim: int = 2) -> scipy.sparse.csr_matrix:
    """Sparse global matrix of a superoperator acting on ``support`` only."""
    support = as_support(support)
    _check_support(support, n_sites)
    local = np.asarray(local, dtype=complex)
    k = len(support)
    if local.shape != (local_dim ** (2 * k),) * 2:
        raise DimensionError(f"local superoperator of shape {local.shape} does not fit {k} sites")
    rest_dim = local_dim ** (2 * (n_sites - k))
    kron = scipy.sparse.kron(scipy.sparse.csr_matrix(local),
                             scipy.sparse.identity(rest_dim, dtype=complex, format="csr"),
                             format="coo")
    perm = _super_permutation(support, n_sites, local_dim)
    # row i of ``kron`` corresponds to global index perm[i]
    return scipy.sparse.csr_matrix((kron.data, (perm[kron.row], perm[kron.col])),
                                   shape=kron.shape)


def embed_super(s: Superoperator, support, n_sites: int, local_dim: int = 2) -> Superoperator:
    """Dense global version of :func:`embed_super_sparse`."""
    m = embed_super_sparse(s.matrix, support, n_sites, local_dim).toarray()
    return Superoperator(m, s.picture)


def apply_local_super(local: np.ndarray, tensor: np.ndarray, support: tuple[int, ...],
                      n_sites: int, local_dim: int) -> np.ndarray:
    """Apply a local superoperator to a chain operator held as a rank-2n tensor.

    ``tensor`` has axes (rows..., cols...) with ``local_dim`` entries each.
    Cost is O(d^{2n} d^{2|X|}); the global superoperator is never formed.
    """
    k = len(support)
    d = local_dim
    # local vec index (C order) is (cols_S, rows_S); out axes first, then in axes
    t = local.reshape((d,) * (4 * k))
    in_axes = list(range(2 * k, 4 * k))
    a_axes = [n_sites + s for s in support] + list(support)
    out = np.tensordot(t, tensor, axes=(in_axes, a_axes))
    # ``out`` axes: cols_S, rows_S, then tensor axes not contracted in order
    remaining = [a for a in range(2 * n_sites) if a not in a_axes]
    current = [n_sites + s for s in support] + list(support) + remaining
    return out.transpose(np.argsort(current))


def random_hermitian(dim: int, rng: np.random.Generator, norm: float | None = None) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = (g + g.conj().T) / 2
    if norm is not None:
        h *= norm / spectral_norm(h)
    return h


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def is_hermiticity_preserving(s: Superoperator, tol: float = 1e-10) -> bool:
    """Check ``S[A^dagger] = S[A]^dagger`` on the matrix-unit basis."""
    d = s.dim
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            lhs = apply_super(s, e.conj().T)
            rhs = apply_super(s, e).conj().T
            if np.max(np.abs(lhs - rhs)) > tol:
                return False
    return True
