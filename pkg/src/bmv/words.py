"""Two-letter matrix words and the coefficients of ``Tr (A + lambda B)^p``.

Letters are ``0`` for ``A`` and ``1`` for ``B``.  Since ``XY`` and ``YX``
share their characteristic polynomial, every word in a rotation class has
the same trace and the same ``e_j``; sums over all words are evaluated on one
representative per class, weighted by the class size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from itertools import combinations
from pathlib import Path

import numpy as np

from bmv import matcore
from bmv.errors import ConsistencyError, DomainError
from bmv.exterior import e_j_of_matrix
from bmv.matcore import RationalSymmetricMatrix

FLOAT_P_CAP = 12
EXACT_P_CAP = 8
FLOAT_RTOL = 1e-9


@dataclass(frozen=True, order=True)
class Word:
    letters: tuple[int, ...]

    def __post_init__(self):
        if not self.letters or any(c not in (0, 1) for c in self.letters):
            raise DomainError(f"invalid word letters {self.letters}")

    @classmethod
    def parse(cls, text: str) -> "Word":
        return cls(tuple("AB".index(c) for c in text.upper()))

    @property
    def length(self) -> int:
        return len(self.letters)

    @property
    def k(self) -> int:
        return sum(self.letters)

    def rotations(self) -> set["Word"]:
        L = self.letters
        return {Word(L[i:] + L[:i]) for i in range(len(L))}

    def canonical(self) -> "Word":
        return min(self.rotations())

    def __str__(self) -> str:
        return "".join("AB"[c] for c in self.letters)


@dataclass(frozen=True)
class CyclicClass:
    representative: Word
    multiplicity: int


def _check_pk(p: int, k: int) -> None:
    if p < 1:
        raise DomainError(f"word length p={p} must be >= 1")
    if not 0 <= k <= p:
        raise DomainError(f"B-count k={k} outside 0..{p}")


def enumerate_words(p: int, k: int) -> list[Word]:
    """All ``C(p, k)`` words, ordered by the positions of their ``B`` letters."""
    _check_pk(p, k)
    out = []
    for pos in combinations(range(p), k):
        letters = [0] * p
        for i in pos:
            letters[i] = 1
        out.append(Word(tuple(letters)))
    return out


@lru_cache(maxsize=None)
def _classes(p: int, k: int) -> tuple[CyclicClass, ...]:
    counts: dict[Word, int] = {}
    for w in enumerate_words(p, k):
        c = w.canonical()
        counts[c] = counts.get(c, 0) + 1
    return tuple(CyclicClass(w, m) for w, m in sorted(counts.items()))


def cyclic_classes(p: int, k: int) -> list[CyclicClass]:
    """Rotation classes (necklaces) of the ``(p, k)`` words.

    The representative is the lexicographically least rotation (``A < B``).
    """
    _check_pk(p, k)
    return list(_classes(p, k))


def word_eval(w: Word, A, B) -> np.ndarray:
    """Left-to-right product of the word with ``A``, ``B`` substituted."""
    A, B = np.asarray(A), np.asarray(B)
    if A.shape != B.shape or A.ndim != 2:
        raise DomainError(f"dimension mismatch: {A.shape} vs {B.shape}")
    mats = (A, B)
    return reduce(np.dot, (mats[c] for c in w.letters))


# ---------------------------------------------------------------------------
# exact / float operand handling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Operands:
    """Operands ready for word products.

    Exact mode holds integer numerator matrices ``NA``, ``NB`` and the
    denominators ``dA``, ``dB``; float mode holds the arrays with unit
    denominators.
    """

    A: np.ndarray
    B: np.ndarray
    dA: int = 1
    dB: int = 1
    exact: bool = False

    def word_denominator(self, p: int, k: int) -> int:
        return self.dA ** (p - k) * self.dB**k


def _operands(A, B, exact: bool | None) -> _Operands:
    rational = isinstance(A, RationalSymmetricMatrix) and isinstance(B, RationalSymmetricMatrix)
    if exact is None:
        exact = rational
    if exact:
        if not rational:
            A = _rational_or_fail(A)
            B = _rational_or_fail(B)
        NA, dA = A.integer_form()
        NB, dB = B.integer_form()
        if NA.shape != NB.shape:
            raise DomainError(f"dimension mismatch: {NA.shape} vs {NB.shape}")
        return _Operands(NA, NB, dA, dB, exact=True)
    A, B = matcore.as_float(A), matcore.as_float(B)
    if A.shape != B.shape:
        raise DomainError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return _Operands(np.asarray(A), np.asarray(B))


def _rational_or_fail(M) -> RationalSymmetricMatrix:
    if isinstance(M, RationalSymmetricMatrix):
        return M
    arr = np.asarray(M)
    if arr.dtype == object:
        return RationalSymmetricMatrix.from_array(arr)
    raise DomainError("exact mode requires rational inputs")


def _trace(M):
    if M.dtype == object:
        return sum(M[i, i] for i in range(M.shape[0]))
    t = np.trace(M)
    return t.real if np.iscomplexobj(t) else t


@lru_cache(maxsize=None)
def _vandermonde_inverse(p: int) -> tuple[tuple[Fraction, ...], ...]:
    """Exact inverse of the Vandermonde matrix on nodes ``0, 1, ..., p``."""
    V = np.array([[Fraction(m) ** k for k in range(p + 1)] for m in range(p + 1)], dtype=object)
    return tuple(tuple(row) for row in matcore.exact_inverse(V))


# ---------------------------------------------------------------------------
# coefficient table
# ---------------------------------------------------------------------------


@dataclass
class CoefficientTable:
    """Coefficients ``c_0..c_p`` of ``lambda -> Tr (A + lambda B)^p``."""

    p: int
    coefficients: list
    arithmetic_mode: str
    interpolated: list = field(default_factory=list)
    scale: list = field(default_factory=list)

    def __getitem__(self, k):
        return self.coefficients[k]

    def derivative(self, lam: float, r: int):
        """``d^r/dlambda^r`` of the polynomial at ``lam`` and the sum of |terms|."""
        value = 0
        scale = 0
        for k in range(r, self.p + 1):
            term = self.coefficients[k] * math.perm(k, r) * lam ** (k - r)
            value = value + term
            scale = scale + abs(term)
        return value, scale


def word_sum_traces(ops: _Operands, p: int, k: int, full: bool = False):
    """``sum_W Tr W`` over the ``(p, k)`` words, numerators only in exact mode."""
    mats = (ops.A, ops.B)
    total = 0
    if full:
        for w in enumerate_words(p, k):
            total = total + _trace(reduce(np.dot, (mats[c] for c in w.letters)))
    else:
        for cls in _classes(p, k):
            W = reduce(np.dot, (mats[c] for c in cls.representative.letters))
            total = total + cls.multiplicity * _trace(W)
    return total


def coefficient_table(A, B, p: int, exact: bool | None = None) -> CoefficientTable:
    """Coefficients of ``Tr (A + lambda B)^p`` from class-reduced word sums.

    Cross-validated against Lagrange interpolation at ``lambda = 0..p``:
    exactly in exact mode (the default for rational inputs), and to
    ``1e-9`` relative to the interpolation's sum of absolute terms in float
    mode.  Disagreement raises ConsistencyError.
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    ops = _operands(A, B, exact)
    cap = EXACT_P_CAP if ops.exact else FLOAT_P_CAP
    if p > cap:
        raise DomainError(f"p={p} exceeds the cap {cap} for this arithmetic mode")
    coeffs = []
    for k in range(p + 1):
        s = word_sum_traces(ops, p, k)
        coeffs.append(Fraction(s, ops.word_denominator(p, k)) if ops.exact else float(s))

    Vinv = _vandermonde_inverse(p)
    if ops.exact:
        d = ops.dA * ops.dB
        values = []
        for m in range(p + 1):
            X = ops.A * ops.dB + m * ops.dA * ops.B
            values.append(Fraction(_trace(np.linalg.matrix_power(X, p)), d**p))
        interp = [sum(Vinv[k][m] * values[m] for m in range(p + 1)) for k in range(p + 1)]
        if interp != coeffs:
            raise ConsistencyError(f"word sums and interpolation disagree for p={p}")
        return CoefficientTable(p, coeffs, "exact", interpolated=interp)

    values = [float(_trace(np.linalg.matrix_power(ops.A + m * ops.B, p))) for m in range(p + 1)]
    W = np.array([[float(v) for v in row] for row in Vinv])
    interp = W @ np.array(values)
    scale = np.abs(W) @ np.abs(values)
    gap = np.abs(interp - np.array(coeffs))
    bad = gap > FLOAT_RTOL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ConsistencyError(
            f"word sums and interpolation disagree at k={k}: {coeffs[k]} vs {interp[k]}"
        )
    return CoefficientTable(p, coeffs, "float", interpolated=interp.tolist(), scale=scale.tolist())


def theorem3_margin(A, B, p: int, k: int, j: int, exact: bool | None = None, full: bool = False):
    """``sum_i e_j(W_i)`` over all words with ``k`` letters ``B`` out of ``p``.

    Class-reduced by default; ``full=True`` enumerates every word.  Exact on
    rational inputs.  Returns ``(value, scale)`` where ``scale`` is the sum of
    ``|e_j(W_i)|`` (exact mode) or of ``C(n, j) ||W_i||^j`` (float mode, the
    size of the terms the characteristic polynomial is built from).
    """
    if not 1 <= k <= p:
        raise DomainError(f"k={k} outside 1..{p}")
    ops = _operands(A, B, exact)
    n = ops.A.shape[0]
    if not 1 <= j <= n:
        raise DomainError(f"order j={j} outside 1..{n}")
    mats = (ops.A, ops.B)
    if full:
        items = [(w, 1) for w in enumerate_words(p, k)]
    else:
        items = [(c.representative, c.multiplicity) for c in _classes(p, k)]
    total = 0
    scale = 0
    for w, mult in items:
        W = reduce(np.dot, (mats[c] for c in w.letters))
        e = e_j_of_matrix(W, j)
        if ops.exact:
            scale = scale + mult * abs(e)
        else:
            e = complex(e).real
            # Faddeev-LeVerrier rounds at the size of its power-sum products
            scale = scale + mult * max(abs(e), math.comb(n, j) * np.linalg.norm(W, 2) ** j)
        total = total + mult * e
    if ops.exact:
        d = Fraction(ops.word_denominator(p, k)) ** j
        return total / d, scale / d
    return float(total), float(scale)


# ---------------------------------------------------------------------------
# det(AB + BA) search and single-word traces
# ---------------------------------------------------------------------------


@dataclass
class DetSearchResult:
    n: int
    seed: int
    trial: int
    det: float
    A: np.ndarray
    B: np.ndarray
    trials_run: int
    exact_det: Fraction | None = None
    A_exact: RationalSymmetricMatrix | None = None
    B_exact: RationalSymmetricMatrix | None = None

    @property
    def negative(self) -> bool:
        if self.exact_det is not None:
            return self.exact_det < 0
        return self.det < 0


def anticommutator_det(A, B) -> float:
    A, B = np.asarray(A), np.asarray(B)
    return float(np.linalg.det(A @ B + B @ A).real)


def _normalized_det(GA: np.ndarray, GB: np.ndarray) -> float:
    A, B = GA @ GA.T, GB @ GB.T
    n = A.shape[0]
    s = (np.linalg.norm(A, 2) * np.linalg.norm(B, 2)) ** n
    return anticommutator_det(A, B) / s


def _rationalize(G: np.ndarray, denom: int = 64) -> RationalSymmetricMatrix:
    Gq = np.array([[Fraction(round(v * denom), denom) for v in row] for row in G], dtype=object)
    return RationalSymmetricMatrix.from_array(Gq @ Gq.T, psd=True)


def det_anticommutator_search(
    n: int, trials: int, seed: int, refine_steps: int = 200, stop_on_negative: bool = True
) -> DetSearchResult:
    """Search for positive ``A``, ``B`` with ``det(AB + BA) < 0``.

    Random factors ``G`` with heavy-tailed column scales give ``A = G G^T``;
    the best pair then goes through coordinate-wise perturbation descent on
    the scale-free determinant.  A negative pair is rounded to rational
    factors and re-checked exactly, which yields an exact certificate.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    trials_run = 0
    for t in range(trials):
        trials_run = t + 1
        GA = rng.standard_normal((n, n)) * np.exp(rng.standard_cauchy(n).clip(-8, 8))
        GB = rng.standard_normal((n, n)) * np.exp(rng.standard_cauchy(n).clip(-8, 8))
        val = _normalized_det(GA, GB)
        if best is None or val < best[0]:
            best = (val, t, GA, GB)
        if stop_on_negative and val < 0:
            break
    val, t, GA, GB = best
    step = 0.1
    for _ in range(refine_steps):
        improved = False
        for G in (GA, GB):
            for idx in np.ndindex(G.shape):
                for sgn in (1, -1):
                    old = G[idx]
                    G[idx] = old + sgn * step * max(abs(old), 1e-3)
                    cand = _normalized_det(GA, GB)
                    if cand < val:
                        val, improved = cand, True
                        break
                    G[idx] = old
        if not improved:
            step /= 2
            if step < 1e-6:
                break
        elif stop_on_negative and val < -1e-3:
            break
    # rescale factors to unit norm so rounding keeps resolution
    GA = GA / np.linalg.norm(GA, 2)
    GB = GB / np.linalg.norm(GB, 2)
    A, B = GA @ GA.T, GB @ GB.T
    res = DetSearchResult(n, seed, t, anticommutator_det(A, B), A, B, trials_run)
    if res.det < 0:
        for denom in (64, 1024, 2**16):
            Aq, Bq = _rationalize(GA, denom), _rationalize(GB, denom)
            dq = exact_anticommutator_det(Aq, Bq)
            if dq < 0:
                res.A_exact, res.B_exact, res.exact_det = Aq, Bq, dq
                break
    return res


def exact_anticommutator_det(A: RationalSymmetricMatrix, B: RationalSymmetricMatrix) -> Fraction:
    X, Y = A.array, B.array
    return matcore.exact_det(np.dot(X, Y) + np.dot(Y, X))


def write_certificate(res: DetSearchResult, out_dir) -> dict:
    """Persist a search result as matrix JSON files plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    A = res.A_exact if res.A_exact is not None else res.A
    B = res.B_exact if res.B_exact is not None else res.B
    pa, pb = out / "A.json", out / "B.json"
    matcore.save_matrix(pa, A)
    matcore.save_matrix(pb, B)
    manifest = {
        "check": "det_word_search",
        "n": res.n,
        "seed": res.seed,
        "trial": res.trial,
        "trials_run": res.trials_run,
        "det": res.det,
        "exact_det": None if res.exact_det is None else str(res.exact_det),
        "negative": res.negative,
        "A": pa.name,
        "B": pb.name,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def validate_certificate(out_dir) -> tuple[bool, object]:
    """Reload a certificate and recompute ``det(AB + BA)`` from the files."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    A = matcore.load_matrix(out / manifest["A"])
    B = matcore.load_matrix(out / manifest["B"])
    if isinstance(A, RationalSymmetricMatrix) and isinstance(B, RationalSymmetricMatrix):
        if not (A.psd and B.psd):
            A = RationalSymmetricMatrix(A.entries, psd=True)
            B = RationalSymmetricMatrix(B.entries, psd=True)
        d = exact_anticommutator_det(A, B)
        return d < 0, d
    A, B = matcore.positive(A), matcore.positive(B)
    d = anticommutator_det(A, B)
    return d < 0, d


def negative_word_trace(n: int, p: int, k: int, seed: int, trials: int = 1000):
    """Find a word with negative trace for hermitian (indefinite) ``A`` and positive ``B``.

    Returns ``(word, A, B, trace)`` or ``None``.
    """
    rng = np.random.default_rng(seed)
    words = enumerate_words(p, k)
    for _ in range(trials):
        A = matcore.sample_hermitian(n, rng)
        B = matcore.sample_psd(n, rng, cond=10.0)
        for w in words:
            t = float(np.trace(word_eval(w, A, B)).real)
            if t < 0:
                return w, A, B, t
    return None
