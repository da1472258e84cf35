"""Complete monotonicity tests and the exponential-word checks.

Complete monotonicity is probed on equispaced grids through forward
differences: a CM function has ``(-1)^k Delta_h^k f >= 0`` for every order
and step.  This is a falsification tool, not a certificate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import logsumexp

from bmv import matcore
from bmv.errors import ConsistencyError, DomainError
from bmv.exterior import compound, elem_sym_from_eigs, wedge_basis, wedge_dim, wedge_sum_lift
from bmv.report import CheckReport

DEFAULT_GRIDS = ((0.0, 0.05, 64), (0.0, 0.2, 64))
CM_ORDER = 8
TOL_REL = 1e-8
WEDGE_BLOCK_CAP = 256
MC_SAMPLES = 20_000
SUBSET_CAP = 5000


@dataclass
class CMGrid:
    lambda_0: float
    h: float
    count: int
    values: np.ndarray
    scales: np.ndarray | None = None

    @property
    def nodes(self) -> np.ndarray:
        return self.lambda_0 + self.h * np.arange(self.count)


def cm_grid(fn, lambda_0: float = 0.0, h: float = 0.05, count: int = 64) -> CMGrid:
    if h <= 0 or count < 1:
        raise DomainError("grid needs h > 0 and count >= 1")
    nodes = lambda_0 + h * np.arange(count)
    return CMGrid(lambda_0, h, count, np.array([fn(x) for x in nodes], dtype=float))


@dataclass
class CMOrder:
    order: int
    margin: float
    scale: float
    index: int

    @property
    def ratio(self) -> float:
        return self.margin / self.scale if self.scale > 0 else self.margin


def cm_margins(grid: CMGrid, max_order: int) -> list[CMOrder]:
    """Worst ``(-1)^k Delta^k f(lambda_i)`` for ``k = 0..max_order``.

    The scale of each difference is ``sum_i C(k, i) |f_i|`` over its stencil
    (or over ``grid.scales`` when the values come with their own magnitude);
    the worst index is the one with the most negative margin/scale ratio.
    """
    if max_order > grid.count - 1:
        raise DomainError(f"order {max_order} needs at least {max_order + 1} nodes")
    f = np.asarray(grid.values, dtype=float)
    if not np.all(np.isfinite(f)):
        raise DomainError("grid values must be finite")
    mag = np.abs(f) if grid.scales is None else np.asarray(grid.scales, dtype=float)
    out = []
    for k in range(max_order + 1):
        d = (-1) ** k * np.diff(f, k)
        w = np.array([math.comb(k, i) for i in range(k + 1)], dtype=float)
        sc = np.convolve(mag, w[::-1], mode="valid")
        ratio = np.where(sc > 0, d / np.where(sc > 0, sc, 1.0), d)
        i = int(np.argmin(ratio))
        out.append(CMOrder(k, float(d[i]), float(sc[i]), i))
    return out


def worst_cm(orders: list[CMOrder]) -> CMOrder:
    return min(orders, key=lambda o: o.ratio)


def _exp_eigs(A, B, lam):
    return np.linalg.eigvalsh(np.asarray(A) - lam * np.asarray(B))


def ej_exp(A, B, lam: float, j: int) -> float:
    """``e_j(exp(A - lam B))`` from the eigenvalues of the hermitian exponent.

    Every term ``exp(w_i1 + ... + w_ij)`` is positive, so the sum runs in
    log space; forming ``exp(w_i)`` first can underflow single factors into
    subnormals (or overflow partial products) while the terms themselves are
    representable.
    """
    w = _exp_eigs(A, B, lam)
    if math.comb(len(w), j) > SUBSET_CAP:
        c = float(np.mean(np.sort(w)[-j:]))
        return float(elem_sym_from_eigs(np.exp(w - c), j)) * math.exp(j * c)
    sums = np.array([sum(w[list(S)]) for S in wedge_basis(len(w), j)])
    return float(np.exp(logsumexp(sums)))


def wedge_trace_exp(alpha, gamma, lam: float) -> float:
    """``Tr exp(alpha - lam gamma)`` on the wedge space."""
    M = alpha - lam * gamma
    return float(np.sum(np.exp(np.linalg.eigvalsh((M + M.conj().T) / 2))))


def _run_grids(fn, grids, max_order, scale_fn=None):
    results = []
    for lambda_0, h, count in grids:
        g = cm_grid(fn, lambda_0, h, count)
        if scale_fn is not None:
            g.scales = np.array([scale_fn(x) for x in g.nodes])
        results.append(((lambda_0, h, count), cm_margins(g, max_order)))
    return results


def _summarize(check, results, tol, **kw) -> CheckReport:
    worst = None
    per_grid = []
    for spec, orders in results:
        w = worst_cm(orders)
        per_grid.append({"grid": list(spec), "orders": [(o.order, o.margin, o.scale) for o in orders]})
        if worst is None or w.ratio < worst.ratio:
            worst = w
    details = kw.pop("details", {})
    details["grids"] = per_grid
    details["worst_order"] = worst.order
    return CheckReport(check, worst.margin, worst.scale, tol, details=details, **kw)


def theorem4b_check(A, B, j: int, grids=DEFAULT_GRIDS, max_order: int = CM_ORDER,
                    tol: float = TOL_REL, wedge_rtol: float = 1e-9, seed=None) -> CheckReport:
    """CM margins of ``lambda -> e_j(exp(A - lambda B))``.

    Every grid value is recomputed on the wedge space as
    ``Tr exp(alpha - lambda gamma)`` with ``alpha``, ``gamma`` the derivation
    lifts of ``A``, ``B``; disagreement beyond ``wedge_rtol`` raises
    ConsistencyError.
    """
    t0 = time.perf_counter()
    A = matcore.hermitian(A)
    B = matcore.positive(B)
    n = A.shape[0]
    if not 1 <= j <= n:
        raise DomainError(f"order j={j} outside 1..{n}")
    alpha, gamma = wedge_sum_lift(A, j), wedge_sum_lift(B, j)
    worst_gap = 0.0

    def f(lam):
        nonlocal worst_gap
        v = ej_exp(A, B, lam, j)
        w = wedge_trace_exp(alpha, gamma, lam)
        gap = abs(v - w) / max(abs(v), abs(w), 1e-300)
        worst_gap = max(worst_gap, gap)
        if gap > wedge_rtol:
            raise ConsistencyError(f"e_j(exp) = {v} but wedge trace = {w} at lambda={lam}")
        return v

    results = _run_grids(f, grids, max_order)
    return _summarize("t4b", results, tol, method="eig+wedge", n=n, j=j, seed=seed,
                      seconds=time.perf_counter() - t0,
                      details={"wedge_gap": worst_gap, "wedge_dim": wedge_dim(n, j)})


def e2_difference_check(A, B, grids=DEFAULT_GRIDS, max_order: int = CM_ORDER,
                        tol: float = TOL_REL, identity_rtol: float = 1e-10, seed=None) -> CheckReport:
    """CM margins of ``(Tr M)^2 / 2 - Tr M^2 / 2`` with ``M = exp(A - lambda B)``.

    At each node the difference is compared with ``e_2(M)``; the gap is
    measured against the summands ``((Tr M)^2 + Tr M^2) / 2``.  The CM
    tolerance uses the same summands as its scale.
    """
    t0 = time.perf_counter()
    A = matcore.hermitian(A)
    B = matcore.positive(B)
    n = A.shape[0]
    if n < 2:
        raise DomainError("e_2 needs n >= 2")
    worst_gap = 0.0

    def parts(lam):
        M = matcore.matrix_exp(A - lam * B)
        M2 = matcore.matrix_exp(2 * (A - lam * B))
        tr, tr2 = float(np.trace(M).real), float(np.trace(M2).real)
        return tr, tr2, M

    def f(lam):
        nonlocal worst_gap
        tr, tr2, M = parts(lam)
        diff = 0.5 * (tr * tr - tr2)
        e2 = float(elem_sym_from_eigs(np.linalg.eigvalsh(M), 2))
        gap = abs(diff - e2) / (0.5 * (tr * tr + tr2))
        worst_gap = max(worst_gap, gap)
        if gap > identity_rtol:
            raise ConsistencyError(f"e_2 identity off by {gap:.2e} at lambda={lam}")
        return diff

    def scale(lam):
        tr, tr2, _ = parts(lam)
        return 0.5 * (tr * tr + tr2)

    results = _run_grids(f, grids, max_order, scale_fn=scale)
    return _summarize("e2_diff", results, tol, method="trace-formula", n=n, j=2, seed=seed,
                      seconds=time.perf_counter() - t0, details={"identity_gap": worst_gap})


def det_identity_check(A, B, lam: float, tol: float = 1e-12, seed=None) -> CheckReport:
    """``det exp(A - lam B) = exp(Tr A - lam Tr B)`` for any hermitian pair.

    The left side is the product of the eigenvalues of the exponential,
    accumulated in log space from the spectrum of ``A - lam B``.  An LU
    determinant of a Pade exponential is the independent cross-check; its
    accuracy degrades with the spread of the spectrum, so its tolerance is
    ``n u cond(exp(A - lam B))``.  Margin is ``tol - gap``.
    """
    A = matcore.hermitian(A)
    B = matcore.hermitian(B)
    M = A - lam * B
    n = M.shape[0]
    w = np.linalg.eigvalsh(M)
    log_rhs = float(np.trace(A).real) - lam * float(np.trace(B).real)
    gap = abs(math.expm1(float(np.sum(w)) - log_rhs))
    lu = np.linalg.det(expm(M)).real
    rhs = math.exp(log_rhs) if abs(log_rhs) < matcore.EXP_OVERFLOW else math.nan
    lu_gap = abs(lu - rhs) / abs(rhs) if math.isfinite(rhs) and rhs != 0 else 0.0
    spread = float(w[-1] - w[0])
    lu_tol = 100 * n * np.finfo(float).eps * math.exp(min(spread, matcore.EXP_OVERFLOW))
    if lu_gap > max(lu_tol, tol):
        raise ConsistencyError(f"LU determinant of expm off by {lu_gap:.2e} (lambda={lam})")
    return CheckReport("det_identity", tol - gap, 1.0, 0.0, method="spectral+lu(expm)", n=n,
                       seed=seed, details={"log_rhs": log_rhs, "gap": gap, "lu_gap": lu_gap,
                                           "lambda": lam})


# ---------------------------------------------------------------------------
# simplex integrals
# ---------------------------------------------------------------------------


@dataclass
class SimplexIntegralResult:
    k: int
    j: int
    value_blockexp: float
    value_mc: float
    mc_stderr: float
    samples: int
    abs_mean: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        # the floor covers words whose e_j does not depend on the sample point
        floor = 1e-12 * max(self.abs_mean, abs(self.value_blockexp))
        return abs(self.value_blockexp - self.value_mc) <= 4 * self.mc_stderr + floor


def ordered_exp_integral(alpha, beta, k: int) -> np.ndarray:
    """``int_simplex e^(s1 alpha) beta e^(s2 alpha) ... beta e^(s(k+1) alpha) ds``.

    Top-right block of ``expm`` of the ``(k+1) x (k+1)`` block upper
    bidiagonal matrix with ``alpha`` on the diagonal and ``beta`` above it.
    """
    m = alpha.shape[0]
    K = np.kron(np.eye(k + 1), alpha) + np.kron(np.eye(k + 1, k=1), beta)
    E = expm(K)
    return E[:m, k * m :]


def _ej_batched(W: np.ndarray, j: int) -> np.ndarray:
    """``e_j`` of a stack of square matrices by the Faddeev-LeVerrier recurrence."""
    n = W.shape[-1]
    I = np.eye(n)[None]
    N = np.broadcast_to(I, W.shape).astype(W.dtype)
    a = None
    for k in range(1, j + 1):
        MN = W @ N
        a = -np.trace(MN, axis1=1, axis2=2) / k
        N = MN + a[:, None, None] * I
    return a if j % 2 == 0 else -a


def simplex_integral_ej(A, B, k: int, j: int, samples: int = MC_SAMPLES, seed: int = 0,
                        check: bool = True) -> SimplexIntegralResult:
    """Deterministic and Monte Carlo values of the simplex integral of ``e_j``
    over the exponential word ``e^(s1 A) B ... B e^(s(k+1) A)``.

    The deterministic path lifts to the wedge space (``alpha`` the derivation
    lift of ``A``, ``beta`` the compound of ``B``), where ``e_j`` becomes a
    trace.  The Monte Carlo path averages ``e_j`` of the ``n x n`` words over
    uniform simplex points and multiplies by the simplex volume ``1/k!``.
    """
    A = matcore.hermitian(A)
    B = matcore.positive(B)
    n = A.shape[0]
    if k < 1:
        raise DomainError("k must be >= 1")
    if not 1 <= j <= n:
        raise DomainError(f"order j={j} outside 1..{n}")
    if wedge_dim(n, j) * (k + 1) > WEDGE_BLOCK_CAP:
        raise DomainError(f"block exponential of size {wedge_dim(n, j) * (k + 1)} exceeds the cap")
    alpha, beta = wedge_sum_lift(A, j), compound(B, j)
    block = float(np.trace(ordered_exp_integral(alpha, beta, k)).real)

    rng = np.random.default_rng(seed)
    S = rng.dirichlet(np.ones(k + 1), size=samples)
    w, U = np.linalg.eigh(A)
    Uh = U.conj().T
    W = None
    for i in range(k + 1):
        E = (U[None] * np.exp(S[:, i, None] * w[None])[:, None, :]) @ Uh[None]
        W = E if W is None else W @ B[None] @ E
    vals = _ej_batched(W, j).real
    vol = 1.0 / math.factorial(k)
    mean = float(vals.mean()) * vol
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) * vol
    res = SimplexIntegralResult(k, j, block, mean, stderr, samples,
                                abs_mean=float(np.abs(vals).mean()) * vol)
    if check and not res.consistent:
        raise ConsistencyError(
            f"block exponential {block} vs Monte Carlo {mean} +- {stderr} (k={k}, j={j})"
        )
    return res


def theorem4a_check(A, B, k: int, j: int, samples: int = MC_SAMPLES, seed: int = 0,
                    tol: float = TOL_REL) -> CheckReport:
    t0 = time.perf_counter()
    res = simplex_integral_ej(A, B, k, j, samples=samples, seed=seed)
    scale = max(res.abs_mean, abs(res.value_blockexp))
    return CheckReport("t4a", res.value_blockexp, scale, tol, method="blockexp+mc",
                       n=np.asarray(A).shape[0], k=k, j=j, seed=seed,
                       seconds=time.perf_counter() - t0,
                       details={"value_mc": res.value_mc, "mc_stderr": res.mc_stderr,
                                "samples": res.samples})


def wedge_exp_derivative(A, B, j: int, k: int) -> tuple[float, float]:
    """``d^k/dlam^k Tr exp(alpha - lam beta)`` at 0, by FD and as ``(-1)^k k!`` times
    the traced simplex integral."""
    from bmv.derivs import derivative_fd

    alpha, beta = wedge_sum_lift(matcore.hermitian(A), j), compound(np.asarray(B), j)

    def fn(lam):
        return float(np.trace(expm(alpha - lam * beta)).real)

    h = 0.2 / max(1.0, float(np.linalg.norm(beta, 2)))
    fd = derivative_fd(fn, 0.0, k, h=h, levels=10, ratio=1.4)
    closed = (-1) ** k * math.factorial(k) * float(np.trace(ordered_exp_integral(alpha, beta, k)).real)
    return fd.value, closed
