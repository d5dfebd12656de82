"""Greedy sparse recovery: OMP, gOMP, CoSaMP and subspace pursuit.

All decoders share two kernels: :func:`correlate_select`, which picks the
columns most correlated with the current residual, and a least-squares
projection onto the selected columns. OMP and gOMP only ever add columns,
so they keep a growing QR factorisation instead of refactoring each
iteration. CoSaMP and SP re-solve on the merged candidate set and prune to
the ``k`` largest amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .model import InfeasibleError, ParameterError, SensingMatrix

__all__ = [
    "ALGORITHMS",
    "RecoveryParams",
    "RecoveryOutput",
    "LeastSquaresResult",
    "correlate_select",
    "least_squares",
    "omp",
    "gomp",
    "cosamp",
    "sp",
    "recover",
    "recover_thresholded",
    "noise_floor_epsilon",
    "required_rows",
]

ALGORITHMS = ("omp", "gomp", "cosamp", "sp")

# relative size below which a new column counts as linearly dependent
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class RecoveryParams:
    """Decoder settings.

    ``k`` is the sparsity handed to the decoder (possibly inflated above
    the true number of users). ``L`` only matters for gOMP. ``epsilon`` is
    the residual-norm stopping threshold; ``None`` selects the mode default
    (``1e-6 * ||y||`` for known sparsity, the noise floor for thresholded
    runs).
    """

    algorithm: str = "omp"
    k: int = 1
    L: int = 2
    epsilon: float | None = None
    max_iterations: int | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.L < 1:
            raise ParameterError(f"L must be >= 1, got {self.L}")
        if self.epsilon is not None and self.epsilon < 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ParameterError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True, eq=False)
class RecoveryOutput:
    """Result of one decoder run.

    ``candidates`` and ``amplitudes`` are aligned: they hold the final
    least-squares coefficients for every column the decoder still carries
    (all accumulated columns for OMP/gOMP, the pruned set for CoSaMP/SP).
    ``support`` is the sorted estimate of the active set.
    """

    support: np.ndarray
    candidates: np.ndarray
    amplitudes: np.ndarray
    residual_norm: float
    iterations: int
    residual_history: tuple[float, ...] = ()
    selections: tuple[tuple[int, ...], ...] = ()
    rank_deficient: bool = False

    @property
    def support_estimate(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.support)

    @property
    def amplitude_map(self) -> dict[int, float]:
        return {int(i): float(a) for i, a in zip(self.candidates, self.amplitudes)}

    @property
    def ranked_candidates(self) -> np.ndarray:
        """Candidates by decreasing ``|amplitude|``, ties to the smaller index."""
        order = np.lexsort((self.candidates, -np.abs(self.amplitudes)))
        return self.candidates[order]

    def declared(self, threshold: float) -> np.ndarray:
        """Candidates whose ``|amplitude|`` reaches ``threshold``."""
        return np.sort(self.candidates[np.abs(self.amplitudes) >= threshold])


class LeastSquaresResult(NamedTuple):
    coef: np.ndarray
    residual: np.ndarray
    rank_deficient: bool


def _top_indices(scores: np.ndarray, count: int) -> np.ndarray:
    """Indices of the ``count`` largest scores, by decreasing score then index."""
    n = scores.size
    if count == 1:
        # argmax already returns the first (smallest) index among ties
        return np.array([np.argmax(scores)], dtype=np.int64)
    if count >= n:
        top = np.arange(n)
    else:
        kth = np.partition(scores, n - count)[n - count]
        above = np.flatnonzero(scores > kth)
        ties = np.flatnonzero(scores == kth)[: count - above.size]
        top = np.concatenate([above, ties])
    return top[np.lexsort((top, -scores[top]))]


def correlate_select(
    residual: np.ndarray,
    matrix: SensingMatrix,
    excluded: Iterable[int] = (),
    count: int = 1,
) -> np.ndarray:
    """Columns outside ``excluded`` with the largest ``|<residual, a_j>|``.

    Returned in decreasing order of correlation magnitude; exact ties go to
    the smaller column index.
    """
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    scores = np.abs(matrix.rmatvec(residual))
    excluded = np.fromiter(excluded, dtype=np.int64)
    available = matrix.n_columns - np.unique(excluded).size
    if count > available:
        raise InfeasibleError(f"cannot select {count} columns, only {available} not excluded")
    if excluded.size:
        scores[excluded] = -np.inf
    return _top_indices(scores, count)


def least_squares(y: np.ndarray, columns: np.ndarray) -> LeastSquaresResult:
    """Minimise ``||y - columns @ z||`` through a QR factorisation.

    A rank-deficient block falls back to the minimum-norm solution and sets
    ``rank_deficient``; it never raises, so Monte Carlo loops keep going.
    """
    columns = np.asarray(columns, dtype=float)
    if columns.ndim != 2 or columns.shape[1] == 0:
        raise ParameterError("least_squares needs at least one selected column")
    q, r = np.linalg.qr(columns)
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(columns, axis=0).max()
    deficient = columns.shape[1] > columns.shape[0] or diag.min() <= _RANK_TOL * scale
    if deficient:
        coef = np.linalg.lstsq(columns, y, rcond=None)[0]
    else:
        coef = solve_triangular(r, q.T @ y)
    return LeastSquaresResult(coef, y - columns @ coef, bool(deficient))


class _GrowingQR:
    """Thin QR of a column block that only grows.

    Classical Gram-Schmidt with one re-orthogonalisation pass, which keeps
    ``Q`` orthonormal to working precision. ``Q`` is stored transposed so
    the active rows stay contiguous.
    """

    def __init__(self, y: np.ndarray, capacity: int):
        m = y.size
        capacity = max(1, min(capacity, m))
        self.y = y
        self.qt = np.empty((capacity, m))
        self.r = np.zeros((capacity, capacity))
        self.qty = np.zeros(capacity)
        self.rank = 0
        self.cols: list[np.ndarray] = []
        self.rank_deficient = False
        self.residual = y.copy()

    def _grow(self):
        cap, m = self.qt.shape
        new_cap = min(m, 2 * cap)
        qt = np.empty((new_cap, m))
        qt[:cap] = self.qt
        r = np.zeros((new_cap, new_cap))
        r[:cap, :cap] = self.r
        qty = np.zeros(new_cap)
        qty[:cap] = self.qty
        self.qt, self.r, self.qty = qt, r, qty

    def append(self, block: np.ndarray):
        for a in block.T:
            self.cols.append(a)
            m = self.qt.shape[1]
            if self.rank == m:
                self.rank_deficient = True
                continue
            if self.rank == self.qt.shape[0]:
                self._grow()
            k = self.rank
            qk = self.qt[:k]
            v = a.copy()
            h1 = qk @ v
            v -= h1 @ qk
            h2 = qk @ v
            v -= h2 @ qk
            norm = np.linalg.norm(v)
            if norm <= _RANK_TOL * np.linalg.norm(a):
                self.rank_deficient = True
                continue
            q = v / norm
            self.qt[k] = q
            self.r[:k, k] = h1 + h2
            self.r[k, k] = norm
            self.qty[k] = q @ self.y
            self.residual -= self.qty[k] * q
            self.rank += 1

    def coefficients(self) -> np.ndarray:
        if self.rank_deficient:
            return np.linalg.lstsq(np.column_stack(self.cols), self.y, rcond=None)[0]
        k = self.rank
        return solve_triangular(self.r[:k, :k], self.qty[:k])


def _prune(indices: np.ndarray, coef: np.ndarray, k: int) -> np.ndarray:
    """Positions of the ``k`` largest ``|coef|`` (ties to the smaller index)."""
    order = np.lexsort((indices, -np.abs(coef)))
    return order[:k]


def _accumulate(y, matrix, per_iteration, max_iterations, epsilon):
    """Shared OMP/gOMP loop: add columns until the budget or ``epsilon`` is hit.

    The residual test is made after each pass, so the first pass always
    runs. ``epsilon=None`` disables it.
    """
    if per_iteration * max_iterations > matrix.n_columns:
        raise InfeasibleError(
            f"{max_iterations} iterations of {per_iteration} picks exceed {matrix.n_columns} columns"
        )
    qr = _GrowingQR(y, per_iteration * max_iterations)
    chosen: list[int] = []
    history = []
    selections = []
    iterations = 0
    while iterations < max_iterations:
        picks = correlate_select(qr.residual, matrix, chosen, per_iteration)
        chosen.extend(int(t) for t in picks)
        selections.append(tuple(int(t) for t in picks))
        qr.append(matrix.columns(picks))
        iterations += 1
        history.append(float(np.linalg.norm(qr.residual)))
        if epsilon is not None and history[-1] <= epsilon:
            break
    return np.asarray(chosen, dtype=np.int64), qr, history, selections, iterations


def omp(y: np.ndarray, matrix: SensingMatrix, k: int) -> RecoveryOutput:
    """Orthogonal matching pursuit with exactly ``k`` iterations."""
    if not 1 <= k <= matrix.n_rows:
        raise InfeasibleError(f"OMP needs 1 <= k <= Np={matrix.n_rows}, got k={k}")
    y = np.asarray(y, dtype=float)
    chosen, qr, history, selections, iterations = _accumulate(y, matrix, 1, k, None)
    coef = qr.coefficients()
    return RecoveryOutput(
        support=np.sort(chosen),
        candidates=chosen,
        amplitudes=coef,
        residual_norm=history[-1],
        iterations=iterations,
        residual_history=tuple(history),
        selections=tuple(selections),
        rank_deficient=qr.rank_deficient,
    )


def gomp(
    y: np.ndarray,
    matrix: SensingMatrix,
    k: int,
    L: int = 2,
    epsilon: float | None = None,
) -> RecoveryOutput:
    """Generalised OMP: ``L`` picks per iteration, then keep the ``k`` largest.

    Runs at most ``k`` iterations and stops early once the residual norm
    drops to ``epsilon`` (default ``1e-6 * ||y||``).
    """
    if k < 1 or L < 1:
        raise ParameterError(f"need k >= 1 and L >= 1, got k={k}, L={L}")
    y = np.asarray(y, dtype=float)
    if epsilon is None:
        epsilon = 1e-6 * np.linalg.norm(y)
    chosen, qr, history, selections, iterations = _accumulate(y, matrix, L, k, epsilon)
    coef = qr.coefficients()
    keep = _prune(chosen, coef, k)
    return RecoveryOutput(
        support=np.sort(chosen[keep]),
        candidates=chosen,
        amplitudes=coef,
        residual_norm=history[-1],
        iterations=iterations,
        residual_history=tuple(history),
        selections=tuple(selections),
        rank_deficient=qr.rank_deficient,
    )


def _gram_least_squares(y, aty, matrix, indices) -> LeastSquaresResult:
    """Least squares on ``A[:, indices]`` from the Gram matrix.

    Subsampled DCT columns are nearly orthogonal, so the Gram matrix is
    well conditioned and a Cholesky solve is as accurate as QR at a tiny
    fraction of the cost. Poor conditioning falls back to :func:`least_squares`.
    """
    gram = matrix.gram(indices)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        chol = None
    if chol is not None:
        d = np.diag(chol)
        # d.min()/d.max() bounds 1/cond(A_S) from above; keep a wide margin
        if d.min() > 1e-4 * d.max():
            z = solve_triangular(chol, aty[indices], lower=True)
            coef = solve_triangular(chol.T, z)
            return LeastSquaresResult(coef, None, False)
    return least_squares(y, matrix.columns(indices))


def _pursuit(y, matrix, k, fresh, epsilon):
    """CoSaMP / SP iteration with ``fresh`` new picks merged per pass.

    The update depends only on the merged candidate set, so once a merged
    set repeats the run is periodic and the state after ``k`` iterations
    can be read off the recorded cycle without iterating further.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if fresh + k > matrix.n_rows:
        raise InfeasibleError(
            f"merged set of up to {fresh + k} columns exceeds Np={matrix.n_rows}"
        )
    y = np.asarray(y, dtype=float)
    if epsilon is None:
        epsilon = 1e-6 * np.linalg.norm(y)
    aty = matrix.rmatvec(y)
    support = np.empty(0, dtype=np.int64)
    residual = y
    states = []  # states[i]: (support, amplitudes, residual norm) after iteration i + 1
    seen: dict[bytes, int] = {}
    selections = []
    deficient_any = False
    c = 0
    final = None
    while c < k:
        if c > 0 and states[-1][2] <= epsilon:
            break
        picks = correlate_select(residual, matrix, (), fresh)
        merged = np.union1d(support, picks)
        key = merged.tobytes()
        if key in seen:
            start = seen[key]
            final = states[start + (k - 1 - start) % (c - start)]
            c = k
            break
        seen[key] = c
        selections.append(tuple(int(t) for t in picks))
        ls = _gram_least_squares(y, aty, matrix, merged)
        deficient_any |= ls.rank_deficient
        keep = _prune(merged, ls.coef, k)
        support = merged[keep]
        amps = ls.coef[keep]
        x = np.zeros(matrix.n_columns)
        x[support] = amps
        residual = y - matrix.matvec(x)
        states.append((support, amps, float(np.linalg.norm(residual))))
        c += 1
    sup, amps, rnorm = final if final is not None else states[-1]
    order = np.argsort(sup)
    return RecoveryOutput(
        support=sup[order],
        candidates=sup[order],
        amplitudes=amps[order],
        residual_norm=rnorm,
        iterations=c,
        residual_history=tuple(s[2] for s in states),
        selections=tuple(selections),
        rank_deficient=deficient_any,
    )


def cosamp(y, matrix: SensingMatrix, k: int, epsilon: float | None = None) -> RecoveryOutput:
    """CoSaMP: merge ``2k`` fresh picks with the current support, prune to ``k``."""
    return _pursuit(y, matrix, k, 2 * k, epsilon)


def sp(y, matrix: SensingMatrix, k: int, epsilon: float | None = None) -> RecoveryOutput:
    """Subspace pursuit: like CoSaMP with ``k`` fresh picks per iteration."""
    return _pursuit(y, matrix, k, k, epsilon)


def recover(y, matrix: SensingMatrix, params: RecoveryParams) -> RecoveryOutput:
    """Dispatch to the decoder named in ``params`` (known-sparsity mode)."""
    if params.algorithm == "omp":
        return omp(y, matrix, params.k)
    if params.algorithm == "gomp":
        return gomp(y, matrix, params.k, params.L, params.epsilon)
    if params.algorithm == "cosamp":
        return cosamp(y, matrix, params.k, params.epsilon)
    return sp(y, matrix, params.k, params.epsilon)


def required_rows(params: RecoveryParams) -> int:
    """Smallest ``Np`` for which every least-squares step is overdetermined."""
    k = params.k
    if params.algorithm == "omp":
        return k
    if params.algorithm == "gomp":
        return params.L * k
    if params.algorithm == "cosamp":
        return 3 * k
    return 2 * k


def noise_floor_epsilon(n_rows: int, noise_power: float = 1.0, margin: float = -3.0) -> float:
    """Noise-vector norm ``margin`` standard deviations away from its mean.

    The default sits three deviations below the mean, so accumulation only
    stops once the residual is indistinguishable from pure noise; a single
    undetected user adds ``Np * P1`` to the squared residual, which near the
    operating point is smaller than three deviations of the noise energy.
    """
    return math.sqrt(noise_power * n_rows) * (1.0 + margin / math.sqrt(2.0 * n_rows))


def recover_thresholded(
    y: np.ndarray,
    matrix: SensingMatrix,
    params: RecoveryParams,
    threshold: float,
) -> RecoveryOutput:
    """Decode without knowing the number of users.

    Accumulates OMP (one pick per pass) or gOMP (``L`` picks) candidates
    until the residual reaches the noise floor or ``max_iterations`` passes
    are done, then declares every candidate with ``|amplitude| >= threshold``.
    """
    if params.algorithm not in ("omp", "gomp"):
        raise ParameterError("thresholded recovery supports omp and gomp only")
    if params.max_iterations is None:
        raise ParameterError("thresholded recovery needs max_iterations")
    if threshold < 0:
        raise ParameterError(f"threshold must be >= 0, got {threshold}")
    y = np.asarray(y, dtype=float)
    per_iteration = 1 if params.algorithm == "omp" else params.L
    epsilon = params.epsilon if params.epsilon is not None else noise_floor_epsilon(matrix.n_rows)
    chosen, qr, history, selections, iterations = _accumulate(
        y, matrix, per_iteration, params.max_iterations, epsilon
    )
    coef = qr.coefficients()
    return RecoveryOutput(
        support=np.sort(chosen[np.abs(coef) >= threshold]),
        candidates=chosen,
        amplitudes=coef,
        residual_norm=history[-1],
        iterations=iterations,
        residual_history=tuple(history),
        selections=tuple(selections),
        rank_deficient=qr.rank_deficient,
    )
