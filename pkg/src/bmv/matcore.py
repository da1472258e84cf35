"""Matrix foundations: validated hermitian/positive arrays, spectral calculus,
exact rational matrices and seeded random instances.

Float matrices are plain ``numpy.ndarray`` objects.  The constructors
:func:`hermitian` and :func:`positive` validate their input, symmetrize it and
return a read-only copy, so downstream code can rely on the invariants
without re-checking them.

The exact path works on real symmetric matrices with :class:`fractions.Fraction`
entries.  Products of rational matrices are carried out on integer numerators
with a common denominator, which keeps the cost at plain ``int`` arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from bmv.errors import DomainError, EigenError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
RECONSTRUCT_TOL = 1e-10
# exp overflows double precision just above 709
EXP_OVERFLOW = 700.0


def _readonly(M: np.ndarray) -> np.ndarray:
    M = np.array(M, copy=True)
    M.setflags(write=False)
    return M


def hermitian(M, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(M + M^H) / 2`` after checking that ``M`` is hermitian.

    Raises DomainError if ``M`` is not square or if its anti-hermitian part
    exceeds ``tol * max(1, ||M||_F)``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DomainError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.issubdtype(M.dtype, np.complexfloating):
        M = M.astype(float)
    fro = np.linalg.norm(M)
    skew = np.linalg.norm(M - M.conj().T)
    if skew > tol * max(1.0, fro):
        raise DomainError(f"matrix is not hermitian: ||M - M^H||_F = {skew:.3e}")
    H = (M + M.conj().T) / 2
    if np.iscomplexobj(H) and not np.any(H.imag):
        H = H.real
    return _readonly(H)


def positive(M, definite: bool = False, tol: float = PSD_TOL) -> np.ndarray:
    """Validate a positive (semi)definite matrix and return it hermitian.

    Eigenvalues down to ``-tol * lambda_max`` are accepted as round-off on the
    semidefinite path.  With ``definite=True`` the smallest eigenvalue must be
    strictly positive.
    """
    H = hermitian(M)
    ev = np.linalg.eigvalsh(H)
    top = max(abs(ev[-1]), abs(ev[0]))
    if ev[0] < -tol * top:
        raise DomainError(f"matrix is not positive: lambda_min = {ev[0]:.3e}")
    if definite and ev[0] <= 0:
        raise DomainError(f"matrix is not positive definite: lambda_min = {ev[0]:.3e}")
    return H


def is_hermitian(M, tol: float = HERMITIAN_TOL) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    return np.linalg.norm(M - M.conj().T) <= tol * max(1.0, np.linalg.norm(M))


class SpectralDecomposition(NamedTuple):
    """``M = U diag(eigenvalues) U^H`` with eigenvalues ascending."""

    eigenvalues: np.ndarray
    unitary: np.ndarray

    def apply(self, fn) -> np.ndarray:
        """Return ``U diag(fn(eigenvalues)) U^H``."""
        U = self.unitary
        out = (U * fn(self.eigenvalues)) @ U.conj().T
        return (out + out.conj().T) / 2

    def reconstruct(self) -> np.ndarray:
        return self.apply(lambda x: x)


def eig(M) -> SpectralDecomposition:
    """Spectral decomposition of a hermitian matrix (LAPACK ``heevd``)."""
    H = hermitian(M)
    try:
        w, U = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenError(f"eigendecomposition did not converge: {exc}", residual=np.inf) from exc
    dec = SpectralDecomposition(w, U)
    n = H.shape[0]
    orth = np.linalg.norm(U @ U.conj().T - np.eye(n))
    resid = np.linalg.norm(dec.reconstruct() - H)
    if orth > RECONSTRUCT_TOL or resid > RECONSTRUCT_TOL * max(1.0, np.linalg.norm(H)):
        raise EigenError(
            f"eigendecomposition residual too large (orthogonality {orth:.2e}, "
            f"reconstruction {resid:.2e})",
            residual=max(orth, resid),
        )
    return dec


def _is_nonneg_int(p) -> bool:
    return float(p).is_integer() and p >= 0


def matrix_power(M, p: float) -> np.ndarray:
    """Hermitian power ``M^p`` through the spectral decomposition.

    Non-negative integer powers are defined for every hermitian ``M``; any
    other exponent requires ``M`` positive definite.
    """
    H = hermitian(M)
    n = H.shape[0]
    if p == 0:
        return _readonly(np.eye(n, dtype=H.dtype))
    if p == 1:
        return H
    if _is_nonneg_int(p):
        return hermitian(np.linalg.matrix_power(H, int(p)))
    dec = eig(H)
    if dec.eigenvalues[0] <= 0:
        raise DomainError(
            f"power {p} needs a positive definite matrix, lambda_min = {dec.eigenvalues[0]:.3e}"
        )
    return _readonly(dec.apply(lambda x: x**p))


def matrix_exp(M) -> np.ndarray:
    """``exp(M)`` for hermitian ``M``; the result is positive definite."""
    dec = eig(M)
    if dec.eigenvalues[-1] > EXP_OVERFLOW:
        raise DomainError(f"exp overflows: lambda_max = {dec.eigenvalues[-1]:.3e}")
    return _readonly(dec.apply(np.exp))


def lambda_min(M) -> float:
    return float(np.linalg.eigvalsh(hermitian(M))[0])


# ---------------------------------------------------------------------------
# exact rational path
# ---------------------------------------------------------------------------


def as_fraction_array(M) -> np.ndarray:
    """Object array of Fractions (accepts ints, Fractions or exact floats)."""
    A = np.asarray(M, dtype=object)
    out = np.empty(A.shape, dtype=object)
    for idx, v in np.ndenumerate(A):
        out[idx] = Fraction(v)
    return out


def exact_det(M) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    A = [[Fraction(v) for v in row] for row in np.asarray(M, dtype=object)]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return det


def exact_inverse(M) -> np.ndarray:
    """Inverse by Gauss-Jordan elimination over the rationals."""
    A = [[Fraction(v) for v in row] for row in np.asarray(M, dtype=object)]
    n = len(A)
    aug = [row + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if aug[r][c] != 0), None)
        if piv is None:
            raise DomainError("matrix is singular")
        aug[c], aug[piv] = aug[piv], aug[c]
        pv = aug[c][c]
        aug[c] = [x / pv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c]:
                f = aug[r][c]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
    return np.array([row[n:] for row in aug], dtype=object)


def leading_minors(M) -> list[Fraction]:
    A = np.asarray(M, dtype=object)
    return [exact_det(A[:k, :k]) for k in range(1, A.shape[0] + 1)]


def principal_minors(M) -> list[Fraction]:
    from itertools import combinations

    A = np.asarray(M, dtype=object)
    n = A.shape[0]
    return [exact_det(A[np.ix_(S, S)]) for k in range(1, n + 1) for S in combinations(range(n), k)]


@dataclass(frozen=True)
class RationalSymmetricMatrix:
    """Real symmetric matrix with exact rational entries."""

    entries: tuple[tuple[Fraction, ...], ...]
    psd: bool = False

    def __post_init__(self):
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.entries)
        n = len(rows)
        if n < 1 or any(len(r) != n for r in rows):
            raise DomainError("rational matrix must be square and non-empty")
        for i in range(n):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise DomainError(f"rational matrix not symmetric at ({i}, {j})")
        object.__setattr__(self, "entries", rows)
        if self.psd and any(m < 0 for m in principal_minors(self.array)):
            raise DomainError("rational matrix flagged PSD has a negative principal minor")

    @classmethod
    def from_array(cls, M, psd: bool = False) -> "RationalSymmetricMatrix":
        return cls(tuple(tuple(row) for row in as_fraction_array(M)), psd=psd)

    @property
    def n(self) -> int:
        return len(self.entries)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=object)

    def integer_form(self) -> tuple[np.ndarray, int]:
        """Return ``(N, d)`` with integer object array ``N`` and ``M = N / d``."""
        d = reduce(math.lcm, (v.denominator for row in self.entries for v in row), 1)
        N = np.array([[int(v * d) for v in row] for row in self.entries], dtype=object)
        return N, d

    def to_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "num": [[v.numerator for v in row] for row in self.entries],
            "den": [[v.denominator for v in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, data: dict, psd: bool = False) -> "RationalSymmetricMatrix":
        num, den = data["num"], data["den"]
        rows = [[Fraction(a, b) for a, b in zip(r1, r2)] for r1, r2 in zip(num, den)]
        if len(rows) != data["n"]:
            raise DomainError("'n' does not match the number of rows")
        return cls(tuple(tuple(r) for r in rows), psd=psd)


# ---------------------------------------------------------------------------
# matrix JSON files
# ---------------------------------------------------------------------------


def matrix_to_json(M) -> dict:
    if isinstance(M, RationalSymmetricMatrix):
        return M.to_json()
    M = np.asarray(M)
    out = {"n": int(M.shape[0]), "re": np.real(M).tolist()}
    if np.iscomplexobj(M) and np.any(M.imag):
        out["im"] = np.imag(M).tolist()
    return out


def matrix_from_json(data: dict):
    """Parse either matrix format; rational files give a RationalSymmetricMatrix."""
    if "num" in data:
        return RationalSymmetricMatrix.from_json(data)
    re = np.array(data["re"], dtype=float)
    if re.shape != (data["n"], data["n"]):
        raise DomainError(f"'re' has shape {re.shape}, expected n = {data['n']}")
    if "im" in data:
        return re + 1j * np.array(data["im"], dtype=float)
    return re


def save_matrix(path, M) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(M)))


def load_matrix(path):
    return matrix_from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# seeded random instances
# ---------------------------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_unitary(n: int, rng, real: bool = False) -> np.ndarray:
    """Haar-distributed unitary (orthogonal when ``real``)."""
    Z = rng.standard_normal((n, n))
    if not real:
        Z = Z + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def sample_psd(
    n: int,
    seed,
    cond: float = 100.0,
    rational: bool = False,
    definite: bool = True,
    scale: float = 1.0,
    real: bool = False,
    rank: int | None = None,
    entry_bound: int = 3,
):
    """Seeded positive matrix.

    Float path: ``U diag(ev) U^H`` with ``ev`` log-uniform in ``[scale,
    scale * cond]`` (the two extremes are always attained, so the spread
    equals ``cond``).  ``rank < n`` zeroes the smallest eigenvalues.

    Rational path: ``G^T G / d`` with integer ``G`` in ``[-entry_bound,
    entry_bound]`` and small ``d``; ``definite`` adds the identity.  The
    result is exactly PSD by construction.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = _rng(seed)
    if rational:
        G = rng.integers(-entry_bound, entry_bound + 1, size=(n, n))
        N = G.T @ G
        if definite:
            N = N + np.eye(n, dtype=int)
        d = int(rng.integers(1, 4))
        M = np.array([[Fraction(int(v), d) for v in row] for row in N], dtype=object)
        return RationalSymmetricMatrix.from_array(M, psd=True)
    if cond < 1:
        raise DomainError("condition bound must be >= 1")
    ev = scale * np.exp(rng.uniform(0.0, math.log(cond), n))
    if n > 1:
        ev[0], ev[-1] = scale, scale * cond
    rng.shuffle(ev)
    if rank is not None and rank < n:
        ev = np.sort(ev)
        ev[: n - rank] = 0.0
    U = random_unitary(n, rng, real=real)
    M = (U * ev) @ U.conj().T
    return positive((M + M.conj().T) / 2, definite=definite and (rank is None or rank >= n))


def sample_hermitian(n: int, seed, scale: float = 1.0, real: bool = False) -> np.ndarray:
    """Seeded hermitian matrix; real and imaginary parts of entries lie in ``[-scale, scale]``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = _rng(seed)
    re = rng.uniform(-scale, scale, (n, n))
    re = (re + re.T) / 2
    if real:
        return hermitian(re)
    im = rng.uniform(-scale, scale, (n, n))
    im = (im - im.T) / 2
    return hermitian(re + 1j * im)


def as_float(M) -> np.ndarray:
    if isinstance(M, RationalSymmetricMatrix):
        return M.to_float()
    return np.asarray(M)


def frob_rel(X, Y) -> float:
    """``||X - Y||_F / max(1, ||Y||_F)``."""
    return float(np.linalg.norm(np.asarray(X) - np.asarray(Y)) / max(1.0, np.linalg.norm(Y)))


def object_matmul(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Exact product of object arrays (int or Fraction entries)."""
    return np.dot(X, Y)


def object_trace(X: np.ndarray):
    return sum(X[i, i] for i in range(X.shape[0]))


def identity_object(n: int) -> np.ndarray:
    I = np.zeros((n, n), dtype=object)
    np.fill_diagonal(I, 1)
    return I


def sequence_product(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.dot, mats)
