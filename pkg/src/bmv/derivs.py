"""Derivatives of ``F_p(lambda) = Tr (A + lambda B)^p`` and the duality identity.

Four independent evaluation paths:

* ``spectral-FD``: Richardson-extrapolated central differences of the
  spectral value (:func:`derivative_fd`).
* ``block-taylor``: the power function applied to the block upper
  bidiagonal matrix with ``X = A + lambda B`` on the diagonal and ``B`` on
  the superdiagonal; block ``(0, r)`` is the ``r``-th Taylor coefficient of
  ``(X + mu B)^p`` in ``mu``.  Accurate to a few ulps times ``r!``.
* ``integral-rep``: the Stieltjes-type representation of fractional powers
  together with the closed form of resolvent derivatives.
* ``exact-integer``: polynomial coefficients from word sums for integer
  ``p >= 0``; exact for rational inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import fractional_matrix_power

from bmv import matcore
from bmv.errors import ConsistencyError, DomainError, QuadratureError
from bmv.matcore import RationalSymmetricMatrix

FD_ORDER_CAP = 8
TOL_REL = 1e-8


def ceil_p(p: float) -> int:
    """Smallest integer not less than ``p``."""
    return math.ceil(p)


def _is_int(p) -> bool:
    return float(p).is_integer()


def _needs_pd(p) -> bool:
    return not (_is_int(p) and p >= 0)


# ---------------------------------------------------------------------------
# spectral values
# ---------------------------------------------------------------------------


def f_p_value(A, B, lam: float, p: float) -> float:
    """``Tr (A + lam B)^p`` from the eigenvalues of ``A + lam B``."""
    X = matcore.hermitian(np.asarray(A) + lam * np.asarray(B))
    ev = np.linalg.eigvalsh(X)
    if _needs_pd(p) and ev[0] <= 0:
        raise DomainError(f"power {p} needs A + lam B positive definite, lambda_min = {ev[0]:.3e}")
    if _is_int(p) and p >= 0:
        return float(np.sum(ev ** int(p)))
    return float(np.sum(ev**p))


def pd_radius(X0, D) -> float:
    """Largest ``rho`` with ``X0 + mu D`` positive definite for all ``|mu| < rho``."""
    lmin = float(np.linalg.eigvalsh(X0)[0])
    nd = float(np.linalg.norm(D, 2))
    if lmin <= 0:
        return 0.0
    return math.inf if nd == 0 else lmin / nd


# ---------------------------------------------------------------------------
# finite differences with Richardson extrapolation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def central_stencil(r: int) -> tuple[tuple[int, ...], tuple[Fraction, ...]]:
    """Offsets and exact weights of the symmetric second-order stencil for ``f^(r)``."""
    m = (r + 1) // 2
    offsets = tuple(range(-m, m + 1))
    size = len(offsets)
    V = np.array([[Fraction(j) ** q for j in offsets] for q in range(size)], dtype=object)
    rhs = [Fraction(math.factorial(r)) if q == r else Fraction(0) for q in range(size)]
    Vinv = matcore.exact_inverse(V)
    w = tuple(sum(Vinv[i, q] * rhs[q] for q in range(size)) for i in range(size))
    return offsets, w


@dataclass
class FDResult:
    value: float
    error: float
    step: float
    low_confidence: bool = False


def derivative_fd(
    fn: Callable[[float], float],
    lam: float,
    r: int,
    h: float | None = None,
    levels: int = 4,
    tol: float | None = None,
    ratio: float = 2.0,
) -> FDResult:
    """``fn^(r)(lam)`` by central differences and Richardson extrapolation.

    Step sizes ``h, h/c, ..., h/c^(levels-1)`` with contraction ``c =
    ratio``; the symmetric stencil has an even error expansion, so column
    ``k`` of the tableau eliminates ``h^(2k)``.  The returned estimate is the tableau entry with the smallest
    error indicator (difference to its neighbours), floored by the
    round-off bound ``eps * sum |w_i f_i| / h^r``.
    """
    if r < 0:
        raise DomainError("derivative order must be >= 0")
    if r > FD_ORDER_CAP:
        raise DomainError(f"finite differences are capped at order {FD_ORDER_CAP}")
    if r == 0:
        return FDResult(float(fn(lam)), 0.0, 0.0)
    if h is None:
        h = max(1e-2, 1e-2 * abs(lam))
    offsets, weights = central_stencil(r)
    wf = [float(w) for w in weights]
    T: list[list[float]] = []
    rounding = []
    best = (math.inf, math.nan)
    cur = h
    for i in range(levels):
        vals = [fn(lam + j * cur) for j in offsets]
        est = sum(w * v for w, v in zip(wf, vals)) / cur**r
        rounding.append(np.finfo(float).eps * sum(abs(w * v) for w, v in zip(wf, vals)) / cur**r)
        row = [est]
        for k in range(1, i + 1):
            fac = ratio ** (2 * k)
            row.append(row[k - 1] + (row[k - 1] - T[i - 1][k - 1]) / (fac - 1))
            err = max(abs(row[k] - row[k - 1]), abs(row[k] - T[i - 1][k - 1]))
            err = max(err, 10 * rounding[i])
            if err < best[0]:
                best = (err, row[k])
        T.append(row)
        cur /= ratio
    if levels == 1:
        best = (10 * rounding[0], T[0][0])
    err, value = best
    return FDResult(float(value), float(err), h, low_confidence=tol is not None and err > tol)


def fd_step(X0, D, r: int, fraction: float = 0.5) -> float:
    """Initial step keeping every stencil point within a fraction of the PD radius."""
    m = max(1, (r + 1) // 2)
    rho = pd_radius(X0, D)
    if not math.isfinite(rho):
        return 0.25
    return fraction * rho / m


def _ridders(X0, D, r: int) -> dict:
    # wide start and slow contraction: values are only good to eps * F, and
    # low-order derivatives can be many orders below F
    return {"h": fd_step(X0, D, r, fraction=0.7), "levels": 10, "ratio": 1.4}


def f_p_derivative_fd(A, B, lam: float, p: float, r: int, levels: int = 4) -> FDResult:
    """Spectral-FD path for ``F_p^(r)(lam)`` with a domain-aware step."""
    A, B = np.asarray(A), np.asarray(B)
    X = np.asarray(A) + lam * np.asarray(B)
    if _needs_pd(p):
        kw = _ridders(X, B, r)
    else:
        kw = {"h": max(1e-2, 0.1 / max(1.0, np.linalg.norm(B, 2))), "levels": levels}
    return derivative_fd(lambda x: f_p_value(A, B, x, p), lam, r, **kw)


# ---------------------------------------------------------------------------
# block-bidiagonal Taylor coefficients
# ---------------------------------------------------------------------------


def _power_nonnormal(T: np.ndarray, p: float) -> np.ndarray:
    if _is_int(p):
        P = np.linalg.matrix_power(T, abs(int(p)))
        return P if p >= 0 else np.linalg.inv(P)
    return fractional_matrix_power(T, p)


def block_taylor_derivatives(A, B, lam: float, p: float, r_max: int) -> np.ndarray:
    """``[F_p^(r)(lam) for r in 0..r_max]`` via the block bidiagonal construction.

    ``B`` is pre-scaled by ``eps = lambda_min(X) / (2 ||B||)`` so that all
    Taylor blocks have comparable magnitude; the ``r``-th block is scaled back
    by ``r! / eps^r``.
    """
    A, B = np.asarray(A), np.asarray(B)
    X = matcore.hermitian(A + lam * B)
    n = X.shape[0]
    lmin = float(np.linalg.eigvalsh(X)[0])
    if _needs_pd(p) and lmin <= 0:
        raise DomainError(f"power {p} needs A + lam B positive definite, lambda_min = {lmin:.3e}")
    nb = float(np.linalg.norm(B, 2))
    if nb == 0:
        out = np.zeros(r_max + 1)
        out[0] = f_p_value(A, B, lam, p)
        return out
    base = lmin if lmin > 0 else float(np.linalg.norm(X, 2)) or 1.0
    eps = 0.5 * base / nb
    m = r_max + 1
    T = np.kron(np.eye(m), X) + np.kron(np.eye(m, k=1), eps * B)
    P = _power_nonnormal(T, p)
    out = np.empty(m)
    for k in range(m):
        tr = np.trace(P[:n, k * n : (k + 1) * n])
        out[k] = tr.real * math.factorial(k) / eps**k
    return out


def block_taylor_error(A, B, lam: float, p: float, r: int) -> float:
    """A priori bound on the rounding error of ``block_taylor_derivatives``.

    The matrix power of the block operator is accurate to about
    ``u * lambda_max^p`` in norm; undoing the ``eps^r`` scaling gives
    ``u * lambda_max^p * r! * (||B|| / lambda_min)^r``.  This dominates when
    ``r > p`` on a wide spectrum, where the derivative is carried by the
    smallest eigenvalues.
    """
    X = matcore.hermitian(np.asarray(A) + lam * np.asarray(B))
    w = np.linalg.eigvalsh(X)
    if w[0] <= 0:
        return math.inf
    nb = float(np.linalg.norm(B, 2))
    return float(np.finfo(float).eps * w[-1] ** p * math.factorial(r) * (nb / w[0]) ** r)


def derivative_bound(A, B, lam: float, p: float, r: int) -> float:
    """Upper bound on ``|F_p^(r)(lam)|`` summed term by term.

    In the eigenbasis of ``X = A + lam B`` the derivative is ``r!`` times a
    sum over index loops of divided differences of ``x^p`` times products of
    entries of ``B``; bounding each divided difference by
    ``max |f^(r)| / r!`` over the spectrum hull gives
    ``Tr(|B'|^r) * max |f^(r)|``.
    """
    X = matcore.hermitian(np.asarray(A) + lam * np.asarray(B))
    w, U = np.linalg.eigh(X)
    Bp = np.abs(U.conj().T @ np.asarray(B) @ U)
    loops = float(np.trace(np.linalg.matrix_power(Bp, r))) if r > 0 else X.shape[0]
    ff = math.prod(p - i for i in range(r))
    if ff == 0:
        return 0.0
    if w[0] <= 0:
        return math.inf
    return loops * abs(ff) * max(w[0] ** (p - r), w[-1] ** (p - r))


# ---------------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------------


def resolvent_derivative(A, B, t: float, lam: float, r: int, factorial: bool = True) -> np.ndarray:
    """``d^r/dlambda^r (A + lam B + t)^(-1) = (-1)^r r! R (B R)^r``.

    ``factorial=False`` drops the ``r!`` (useful to show that the factor is
    needed).
    """
    A, B = np.asarray(A), np.asarray(B)
    n = A.shape[0]
    Y = A + lam * B + t * np.eye(n)
    try:
        R = np.linalg.inv(Y)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"A + lam B + t is singular at t={t}, lam={lam}") from exc
    if not np.all(np.isfinite(R)) or np.linalg.cond(Y) > 1e14:
        raise DomainError(f"A + lam B + t is numerically singular at t={t}, lam={lam}")
    out = R
    for _ in range(r):
        out = out @ B @ R
    c = (-1) ** r * (math.factorial(r) if factorial else 1)
    return c * out


# ---------------------------------------------------------------------------
# integral representation
# ---------------------------------------------------------------------------

def loglinear_integral(small, large, a: float, d: float, span: tuple[float, float],
                       rtol: float = 1e-10, h0: float = 0.5, max_halvings: int = 6):
    """``int_0^inf g(t) t^a dt`` for ``g`` analytic off the negative axis, ``g ~ t^-d``.

    Requires ``a > -1`` and ``d - a > 1``.  With ``t = e^x`` the integrand
    ``g(e^x) e^((a+1)x)`` decays exponentially at both ends and is analytic
    in a strip, so the trapezoid rule converges geometrically.  ``small(t)``
    returns ``g(t)`` (used for ``t <= 1``) and ``large(u)`` returns
    ``g(1/u) / u^d`` (used for ``t > 1``), so no node ever forms a huge
    ``t``.  ``span`` is the range of the spectrum; the window extends until
    the exponential envelopes fall below ``1e-17``.  Halves the step until
    two successive estimates agree to ``rtol``.  Returns ``(value, error)``.
    """
    if a <= -1 or d - a <= 1:
        raise DomainError(f"integral does not converge for a={a}, d={d}")
    left_rate, right_rate = a + 1.0, d - a - 1.0
    reach = 40.0
    lo = min(0.0, math.log(span[0])) - reach / left_rate
    hi = max(0.0, math.log(span[1])) + reach / right_rate

    def integrand(x):
        out = np.empty_like(x)
        neg = x <= 0
        if np.any(neg):
            xs = x[neg]
            out[neg] = small(np.exp(xs)) * np.exp(left_rate * xs)
        if np.any(~neg):
            xl = x[~neg]
            out[~neg] = large(np.exp(-xl)) * np.exp(-right_rate * xl)
        return out

    h = h0
    x = np.arange(lo, hi + h, h)
    vals = integrand(x)
    prev = h * float(np.sum(vals))
    absum = h * float(np.sum(np.abs(vals)))
    for _ in range(max_halvings):
        mid = x[:-1] + h / 2
        vm = integrand(mid)
        cur = 0.5 * prev + (h / 2) * float(np.sum(vm))
        absum = 0.5 * absum + (h / 2) * float(np.sum(np.abs(vm)))
        x = np.sort(np.concatenate([x, mid]))
        h /= 2
        err = max(abs(cur - prev), 4 * np.finfo(float).eps * absum)
        if err <= rtol * max(abs(cur), 1e-300):
            return cur, err
        prev = cur
    raise QuadratureError(
        f"trapezoid rule did not converge to rtol={rtol} (last change {err:.3e})",
        nodes=len(x), estimate=cur,
    )


def _stacked_inv(X, c):
    """``(X + c_k)^(-1)`` for each scalar ``c_k``."""
    n = X.shape[0]
    return np.linalg.inv(X[None] + np.asarray(c)[:, None, None] * np.eye(n)[None])


def _stacked_scaled_inv(X, u):
    """``t (X + t)^(-1) = (1 + u X)^(-1)`` with ``u = 1/t``."""
    n = X.shape[0]
    return np.linalg.inv(np.eye(n)[None] + np.asarray(u)[:, None, None] * X[None])


def _pd_part(A, B, lam):
    X = np.asarray(A) + lam * np.asarray(B)
    X = (X + X.conj().T) / 2
    ev = np.linalg.eigvalsh(X)
    if ev[0] <= 0:
        raise DomainError("A + lam B must be positive definite")
    return X, (float(ev[0]), float(ev[-1]))


def integral_rep_power(A, B, lam: float, p: float, rtol: float = 1e-10) -> tuple[float, float]:
    """``Tr (A + lam B)^p`` for non-integer ``p > 0`` by quadrature.

    ``X^p = sin(pi s)/pi * int_0^inf X^c (X + t)^(-1) t^(-s) dt`` with
    ``c = ceil(p)`` and ``s = c - p``.  The integrand is evaluated with
    linear solves only, independently of any eigendecomposition.
    """
    if p <= 0 or _is_int(p):
        raise DomainError("integral representation needs a positive non-integer p")
    X, span = _pd_part(A, B, lam)
    c = ceil_p(p)
    s = c - p
    Xc = np.linalg.matrix_power(X, c)

    def small(t):
        return np.einsum("ij,kji->k", Xc, _stacked_inv(X, t)).real

    def large(u):
        return np.einsum("ij,kji->k", Xc, _stacked_scaled_inv(X, u)).real

    val, err = loglinear_integral(small, large, -s, 1.0, span, rtol=rtol)
    k = math.sin(math.pi * s) / math.pi
    return k * val, k * err


def integral_rep_derivative(
    A, B, lam: float, p: float, r: int, rtol: float = 1e-10
) -> tuple[float, float]:
    """``F_p^(r)(lam)`` for non-integer ``p > 0`` and ``r >= ceil(p)``.

    Only the top binomial term of the integrand survives ``r`` derivatives, so
    ``F_p^(r) = (-1)^c sin(pi s)/pi * int Tr d^r/dlam^r (X + t)^(-1) t^p dt``
    with the resolvent derivative ``(-1)^r r! R (B R)^r`` in closed form.
    """
    if p <= 0 or _is_int(p):
        raise DomainError("integral representation needs a positive non-integer p")
    c = ceil_p(p)
    if r < c:
        raise DomainError(f"integral path needs r >= ceil(p) = {c}")
    B = np.asarray(B)
    X, span = _pd_part(A, B, lam)
    s = c - p
    coef = (-1) ** r * math.factorial(r)

    def chain(R):
        M = R
        for _ in range(r):
            M = M @ B[None] @ R
        return coef * np.trace(M, axis1=1, axis2=2).real

    def small(t):
        return chain(_stacked_inv(X, t))

    def large(u):
        return chain(_stacked_scaled_inv(X, u))

    val, err = loglinear_integral(small, large, p, r + 1.0, span, rtol=rtol)
    k = (-1) ** c * math.sin(math.pi * s) / math.pi
    return k * val, abs(k) * err


def binomial_split_check(A, B, lam: float, p: float, r: int, t: float) -> dict:
    """Compare ``d^r`` of ``Tr X^c (X + t)^(-1)`` and of ``(-t)^c Tr (X + t)^(-1)``.

    Both are taken by finite differences; for ``r >= c`` the polynomial part
    of the binomial split has degree below ``r`` and drops out.
    """
    A, B = np.asarray(A), np.asarray(B)
    n = A.shape[0]
    c = ceil_p(p)

    def full(x):
        X = A + x * B
        return float(np.trace(np.linalg.matrix_power(X, c) @ np.linalg.inv(X + t * np.eye(n))).real)

    def top(x):
        X = A + x * B
        return float(((-t) ** c * np.trace(np.linalg.inv(X + t * np.eye(n)))).real)

    h = 0.5 * (float(np.linalg.eigvalsh(A + lam * B)[0]) + t) / np.linalg.norm(B, 2) / max(1, (r + 1) // 2)
    d_full = derivative_fd(full, lam, r, h=h)
    d_top = derivative_fd(top, lam, r, h=h)
    closed = (-t) ** c * float(np.trace(resolvent_derivative(A, B, t, lam, r)).real)
    gap = abs(d_full.value - d_top.value) / max(abs(d_full.value), abs(d_top.value), 1e-300)
    return {"full": d_full.value, "top": d_top.value, "closed": closed, "gap": gap,
            "err": d_full.error + d_top.error}


# ---------------------------------------------------------------------------
# exact sums I1 and I2 (integer p)
# ---------------------------------------------------------------------------


def compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


class _PowerCache:
    def __init__(self, M):
        self.M = M
        self.cache = {0: _identity_like(M), 1: M}

    def __call__(self, k: int):
        if k not in self.cache:
            self.cache[k] = self(k - 1) @ self.M
        return self.cache[k]


def _identity_like(M):
    n = M.shape[0]
    if M.dtype == object:
        return matcore.identity_object(n)
    return np.eye(n, dtype=M.dtype)


def _tr(M):
    if M.dtype == object:
        return sum(M[i, i] for i in range(M.shape[0]))
    t = np.trace(M)
    return float(t.real)


def _to_operand(M):
    if isinstance(M, RationalSymmetricMatrix):
        return M.array
    return np.asarray(M)


class _DirectTraces:
    """Traces of ``A^i1 B A^i2 ... B A^i(r+1)`` for given ``A``, ``B``."""

    def __init__(self, A, B):
        self.Apow = _PowerCache(A)
        self.B = B

    def __call__(self, exps):
        M = self.Apow(exps[0])
        for e in exps[1:]:
            M = M @ self.B @ self.Apow(e)
        return _tr(M)


class _LemmaTraces:
    """Same traces for ``A = a^-1`` and ``B = a^-1/2 b a^-1/2`` without square roots.

    Cyclically, each ``B`` brings ``a^-1/2`` to both sides, so the trace equals
    ``Tr b a^-(i2+1) b a^-(i3+1) ... b a^-(i(r+1)+i1+1)``, which is rational for
    rational ``a``, ``b``.
    """

    def __init__(self, a, b):
        ainv = matcore.exact_inverse(a) if a.dtype == object else np.linalg.inv(a)
        self.Ainv = _PowerCache(ainv)
        self.b = b

    def __call__(self, exps):
        if len(exps) == 1:
            return _tr(self.Ainv(exps[0]))
        gaps = list(exps[1:-1]) + [exps[-1] + exps[0]]
        M = None
        for g in gaps:
            step = self.b @ self.Ainv(g + 1)
            M = step if M is None else M @ step
        return _tr(M)


def _i1_sum(traces, p: int, r: int):
    total = 0
    for exps in compositions(p, r + 1):
        total = total + traces(exps)
    return math.factorial(r) * total


def _i2_sum(traces, p: int, r: int):
    total = 0
    for exps in compositions(p - 1, r + 1):
        total = total + traces((exps[0] + 1,) + exps[1:])
    return (-1) ** r * math.factorial(r) * total


def exact_derivative_I1(A, B, p: int, r: int):
    """``d^r/dlam^r Tr (A + lam B)^(p+r)`` at ``lam = 0`` as
    ``r! sum_{i1+..+i(r+1)=p} Tr A^i1 B ... B A^i(r+1)``; exact on rational input."""
    if p < 0 or r < 0:
        raise DomainError("p and r must be non-negative integers")
    return _i1_sum(_DirectTraces(_to_operand(A), _to_operand(B)), int(p), int(r))


def exact_derivative_I2(a, b, p: int, r: int):
    """``d^r/dlam^r Tr (a + lam b)^(-p)`` at ``lam = 0`` through ``A = a^-1``,
    ``B = a^-1/2 b a^-1/2`` and the sum over compositions of ``p - 1``."""
    if p < 1 or r < 0:
        raise DomainError("I2 needs p >= 1 and r >= 0")
    a, b = _to_operand(a), _to_operand(b)
    if a.dtype != object and np.linalg.eigvalsh(a)[0] <= 0:
        raise DomainError("a must be positive definite")
    try:
        traces = _LemmaTraces(a, b)
    except (DomainError, np.linalg.LinAlgError) as exc:
        raise DomainError("a is singular") from exc
    return _i2_sum(traces, int(p), int(r))


def resolvent_power_derivative(a, b, p: int, r: int):
    """Direct form ``(-1)^r r! sum_{i_j >= 1, sum = p + r} Tr a^-i1 b ... b a^-i(r+1)``."""
    a, b = _to_operand(a), _to_operand(b)
    ainv = matcore.exact_inverse(a) if a.dtype == object else np.linalg.inv(a)
    tr = _DirectTraces(ainv, b)
    total = 0
    for exps in compositions(p - 1, r + 1):
        total = total + tr(tuple(e + 1 for e in exps))
    return (-1) ** r * math.factorial(r) * total


# ---------------------------------------------------------------------------
# lemma1: negative powers against positive powers of the transformed pair
# ---------------------------------------------------------------------------


@dataclass
class Lemma1Report:
    p: float
    r: int
    lhs: object
    rhs: object
    gap: float
    method: str
    I1: object = None
    I2: object = None
    exact_equal: bool | None = None
    degenerate: bool = False
    lhs_err: float = 0.0
    rhs_err: float = 0.0


def lemma_pair(a, b):
    """``A = a^-1`` and ``B = a^-1/2 b a^-1/2`` (float)."""
    a = matcore.positive(a, definite=True)
    b = matcore.hermitian(b)
    s = matcore.matrix_power(a, -0.5)
    return matcore.matrix_power(a, -1), matcore.hermitian(s @ b @ s)


def lemma1_check(a, b, p: float, r: int, method: str | None = None, floor: float = 1e-300) -> Lemma1Report:
    """Check ``(p+r) D^r Tr(a+lam b)^-p = p (-1)^r D^r Tr(A+lam B)^(p+r)`` at 0.

    Positive integer ``p`` on rational input runs the exact path and also
    verifies ``I2 = p/(p+r) (-1)^r I1``.  Otherwise both derivatives come
    from ``derivative_fd`` (``method="fd"``, the default) or from the block
    Taylor construction (``method="taylor"``).
    """
    if r < 1:
        raise DomainError("r must be >= 1")
    exact = isinstance(a, RationalSymmetricMatrix) or np.asarray(a).dtype == object
    if exact and _is_int(p) and p >= 1:
        p = int(p)
        A_, b_ = _to_operand(a), _to_operand(b)
        lt = _LemmaTraces(A_, b_)
        I1 = _i1_sum(lt, p, r)
        I2 = _i2_sum(lt, p, r)
        direct = resolvent_power_derivative(A_, b_, p, r)
        if direct != I2:
            raise ConsistencyError(f"I2 from the A/B form and from a/b differ (p={p}, r={r})")
        lhs = (p + r) * I2
        rhs = p * (-1) ** r * I1
        ok = I2 == Fraction(p, p + r) * (-1) ** r * I1
        return Lemma1Report(p, r, lhs, rhs, 0.0 if ok else 1.0, "exact-integer", I1, I2, ok)

    af, bf = matcore.as_float(a), matcore.as_float(b)
    af = matcore.positive(af, definite=True)
    bf = matcore.hermitian(bf)
    A, B = lemma_pair(af, bf)
    degenerate = abs(p + r) < 1e-14
    method = method or "fd"
    if method == "fd":
        left = derivative_fd(lambda x: f_p_value(af, bf, x, -p), 0.0, r, **_ridders(af, bf, r))
        right = derivative_fd(lambda x: f_p_value(A, B, x, p + r), 0.0, r, **_ridders(A, B, r))
        dl, el, dr, er = left.value, left.error, right.value, right.error
    elif method == "taylor":
        dl = block_taylor_derivatives(af, bf, 0.0, -p, r)[r]
        dr = block_taylor_derivatives(A, B, 0.0, p + r, r)[r]
        el = er = 0.0
    else:
        raise DomainError(f"unknown method {method!r}")
    lhs = (p + r) * dl
    rhs = p * (-1) ** r * dr
    if degenerate:
        # both sides vanish through their prefactors; compare the raw factors' consistency
        gap = abs(lhs - rhs)
    else:
        gap = abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)
    rep = Lemma1Report(p, r, lhs, rhs, gap, f"spectral-{method}", degenerate=degenerate,
                       lhs_err=abs(p + r) * el, rhs_err=abs(p) * er)
    if _is_int(p) and p >= 1:
        rep.I1 = exact_derivative_I1(A, B, int(p), r)
        rep.I2 = exact_derivative_I2(af, bf, int(p), r)
    return rep


# ---------------------------------------------------------------------------
# derivative sign suite (t2a, t2b, t2c)
# ---------------------------------------------------------------------------


def expected_sign(p: float, r: int) -> int:
    """Sign of ``F_p^(r)`` on ``lambda >= 0`` for positive ``A``, ``B`` (``r >= 1``)."""
    if r < 1:
        raise DomainError("sign classification starts at r = 1")
    if p <= 0:
        return (-1) ** r
    c = ceil_p(p)
    if r <= c:
        return 1
    return (-1) ** (r - c)


def sign_item(p: float, r: int) -> str:
    if p <= 0:
        return "c"
    return "a" if r <= ceil_p(p) else "b"


@dataclass
class DerivativeCell:
    lam: float
    r: int
    method: str
    value: float
    err: float
    expected_sign: int
    margin: float
    scale: float
    item: str
    passed: bool
    cross: dict = field(default_factory=dict)


@dataclass
class DerivativeTable:
    p: float
    cells: list[DerivativeCell]
    tol_rel: float = TOL_REL

    @property
    def worst(self) -> DerivativeCell | None:
        if not self.cells:
            return None
        return min(self.cells, key=lambda c: c.margin / c.scale if c.scale > 0 else c.margin)

    @property
    def findings(self) -> list[DerivativeCell]:
        return [c for c in self.cells if not c.passed]

    def records(self) -> list[dict]:
        return [
            {"lambda": c.lam, "r": c.r, "method": c.method, "value": c.value, "err": c.err,
             "expected_sign": c.expected_sign, "margin": c.margin, "pass": c.passed}
            for c in self.cells
        ]


def _integer_path(A, B, p: int):
    from bmv.words import coefficient_table

    return coefficient_table(A, B, p) if p >= 1 else None


def theorem2_suite(
    A,
    B,
    p: float,
    r_max: int,
    grid,
    tol_rel: float = TOL_REL,
    cross_check: bool = True,
    fd_orders: int = 3,
) -> DerivativeTable:
    """Signed derivative margins of ``F_p`` on a ``lambda`` grid.

    Values come from the exact-integer path for integer ``p >= 0``, from the
    integral representation for non-integer ``p > 0`` and ``r >= ceil(p)``,
    and from the block Taylor path otherwise.  Cross-checks, raising
    ConsistencyError on disagreement: block Taylor against the integral
    representation (within its a priori rounding bound), and spectral FD for
    ``r <= fd_orders`` at the first grid point.  Margins below
    ``-tol_rel * scale`` are reported as failed cells, never clamped.
    """
    grid = [float(x) for x in grid]
    if any(x < 0 for x in grid):
        raise DomainError("the sign checks are defined for lambda >= 0")
    if r_max < 1:
        raise DomainError("r_max must be >= 1")
    rational = isinstance(A, RationalSymmetricMatrix)
    Af, Bf = matcore.as_float(A), matcore.as_float(B)
    integer = _is_int(p) and p >= 0
    table = _integer_path(A if rational else Af, B if rational else Bf, int(p)) if integer else None
    cells = []
    for i, lam in enumerate(grid):
        if integer:
            vals = []
            for r in range(r_max + 1):
                if table is None:
                    vals.append((0.0, 0.0))
                else:
                    v, sc = table.derivative(Fraction(lam) if rational else lam, r) if r <= table.p else (0, 0)
                    vals.append((v, sc))
            method = "exact-integer"
        else:
            D = block_taylor_derivatives(Af, Bf, lam, p, r_max)
            vals = [(D[r], derivative_bound(Af, Bf, lam, p, r)) for r in range(r_max + 1)]
            method = "block-taylor"
        for r in range(1, r_max + 1):
            value, scale = vals[r]
            scale = float(scale)
            cell_method, err = method, 0.0
            cross = {}
            if not integer and p > 0 and r >= ceil_p(p):
                # the block operator loses relative accuracy here, see block_taylor_error
                iv, err = integral_rep_derivative(Af, Bf, lam, p, r)
                cell_method = "integral-rep"
                if cross_check:
                    cross["block-taylor"] = value
                    bte = block_taylor_error(Af, Bf, lam, p, r)
                    if abs(iv - value) > 1e-7 * scale + 10 * err + bte:
                        raise ConsistencyError(
                            f"integral-rep {iv} vs block-taylor {value} (p={p}, r={r}, lam={lam})"
                        )
                value = iv
            if cross_check and not integer and i == 0 and r <= fd_orders:
                fd = f_p_derivative_fd(Af, Bf, lam, p, r)
                cross["spectral-FD"] = fd.value
                if abs(fd.value - value) > 100 * fd.error + 1e-6 * scale:
                    raise ConsistencyError(
                        f"{cell_method} {value} vs spectral-FD {fd.value} (p={p}, r={r}, lam={lam})"
                    )
            sgn = expected_sign(p, r)
            margin = sgn * value
            passed = bool(margin >= -tol_rel * scale)
            cells.append(DerivativeCell(lam, r, cell_method, float(value), float(err), sgn, float(margin),
                                        scale, sign_item(p, r), passed, cross))
    return DerivativeTable(p, cells, tol_rel)
