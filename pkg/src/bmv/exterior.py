"""Compound matrices, elementary symmetric functions and wedge-space lifts.

All wedge-space objects use one basis: the sorted ``j``-subsets of
``range(n)`` in lexicographic order, i.e. the order of
``itertools.combinations(range(n), j)``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from bmv.errors import DomainError
from bmv.matcore import exact_det, identity_object


@lru_cache(maxsize=None)
def wedge_basis(n: int, j: int) -> tuple[tuple[int, ...], ...]:
    """Sorted ``j``-subsets of ``range(n)`` in lexicographic order."""
    return tuple(combinations(range(n), j))


def wedge_dim(n: int, j: int) -> int:
    return comb(n, j)


def _check_order(n: int, j: int) -> None:
    if not 1 <= j <= n:
        raise DomainError(f"order j={j} outside 1..{n}")


def _square(M) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {M.shape}")
    return M


def is_exact(M) -> bool:
    return np.asarray(M).dtype == object


def compound(M, j: int) -> np.ndarray:
    """``j``-th compound matrix: all ``j x j`` minors, rows ``S`` and columns ``T``.

    Object (exact) arrays give exact minors; float arrays are evaluated with
    a batched LU determinant.
    """
    M = _square(M)
    n = M.shape[0]
    _check_order(n, j)
    if j == 1:
        return M.copy()
    basis = wedge_basis(n, j)
    if is_exact(M):
        m = len(basis)
        C = np.empty((m, m), dtype=object)
        for a, S in enumerate(basis):
            for b, T in enumerate(basis):
                C[a, b] = exact_det(M[np.ix_(S, T)])
        return C
    idx = np.array(basis)
    sub = M[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


# the product lift B ^ B ^ ... ^ B is the compound matrix itself
wedge_product_lift = compound


def elem_sym_from_eigs(eigs, j: int):
    """``e_j`` of a list of numbers via the product expansion of ``prod (1 + x t)``.

    Each step adds non-negative terms when the inputs are non-negative, so the
    recurrence is free of cancellation on positive spectra.
    """
    eigs = list(eigs)
    _check_order(len(eigs), j)
    e = [1] + [0] * j
    for x in eigs:
        for k in range(j, 0, -1):
            e[k] = e[k] + x * e[k - 1]
    return e[j]


def elem_sym_brute(eigs, j: int):
    """Sum of all ``j``-fold products by subset enumeration (test oracle)."""
    total = 0
    for S in combinations(eigs, j):
        prod = 1
        for x in S:
            prod = prod * x
        total = total + prod
    return total


def char_poly(M, upto: int | None = None) -> list:
    """Coefficients ``[1, a_1, ..., a_n]`` of ``det(x I - M)`` (Faddeev-LeVerrier).

    Exact for object arrays of ints or Fractions.  ``upto`` stops after
    ``a_upto``.
    """
    M = _square(M)
    n = M.shape[0]
    upto = n if upto is None else upto
    exact = is_exact(M)
    I = identity_object(n) if exact else np.eye(n, dtype=M.dtype)
    coeffs = [1]
    N = I
    for k in range(1, upto + 1):
        MN = M @ N
        tr = sum(MN[i, i] for i in range(n))
        a = -Fraction(tr) / k if exact else -tr / k
        coeffs.append(a)
        N = MN + a * I
    return coeffs


def e_j_of_matrix(M, j: int):
    """``e_j`` of the eigenvalues of any square matrix, from its characteristic polynomial.

    ``det(x I - M) = sum_j (-1)^j e_j x^(n-j)``.  Valid for non-normal input
    such as products of positive matrices.  Exact on object arrays.
    """
    M = _square(M)
    _check_order(M.shape[0], j)
    a = char_poly(M, upto=j)[j]
    e = a if j % 2 == 0 else -a
    if not is_exact(M) and np.iscomplexobj(e) and abs(e.imag) <= 1e-12 * max(1.0, abs(e)):
        e = e.real
    return e


def e_j_hermitian(M, j: int) -> float:
    """``e_j`` of a hermitian matrix from its (real) eigenvalues."""
    return float(elem_sym_from_eigs(np.linalg.eigvalsh(M), j))


def e_j_all(M) -> list:
    """``[e_1, ..., e_n]`` of any square matrix."""
    a = char_poly(M)
    return [a[k] if k % 2 == 0 else -a[k] for k in range(1, len(a))]


def wedge_sum_lift(M, j: int) -> np.ndarray:
    """Derivation lift ``M^1^..^1 + 1^M^..^1 + ... + 1^..^1^M`` on the ``j``-th wedge space.

    Satisfies ``exp(wedge_sum_lift(M, j)) = compound(exp(M), j)``.  Entry
    ``(S, T)`` is ``sum_{i in S} M_ii`` on the diagonal and
    ``(-1)^(pos_S(s) + pos_T(t)) M_st`` when ``S = K + {s}`` and
    ``T = K + {t}`` share ``j - 1`` indices; all others vanish.
    """
    M = _square(M)
    n = M.shape[0]
    _check_order(n, j)
    if j == 1:
        return M.copy()
    basis = wedge_basis(n, j)
    m = len(basis)
    L = np.zeros((m, m), dtype=M.dtype)
    for a, S in enumerate(basis):
        Sset = set(S)
        L[a, a] = sum((M[i, i] for i in S), start=L[a, a])
        for b, T in enumerate(basis):
            if a == b:
                continue
            only_s = Sset.difference(T)
            if len(only_s) != 1:
                continue
            (s,) = only_s
            (t,) = set(T).difference(S)
            sign = -1 if (S.index(s) + T.index(t)) % 2 else 1
            L[a, b] = sign * M[s, t]
    return L
