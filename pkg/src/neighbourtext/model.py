"""Elastic-net regression and stratified Monte Carlo cross-validation.

The fitted objective is::

    (1/N) * sum_i (y_i - b - x_i . theta)^2 + lambda1 * |theta|_1 + lambda2 * |theta|_2^2

with an unpenalised intercept ``b``.  When ``standardize`` is set the
penalty applies to coefficients of the standardised features; coefficients
are reported back in original feature units.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from . import kernels
from .errors import InputError, UndefinedCorrelationError
from .features import DocTermMatrix
from .geo import UnitAttributeTable
from .stats import pearson


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RegressionProblem:
    X: np.ndarray
    y: np.ndarray
    unit_ids: tuple[str, ...] = ()
    attribute: str = ""
    terms: tuple[str, ...] = ()

    def __post_init__(self):
        X = self.X.toarray() if sparse.issparse(self.X) else np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise InputError("X must be two-dimensional")
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if y.shape[0] != X.shape[0]:
            raise InputError("X and y have different numbers of rows")
        if not np.all(np.isfinite(y)):
            raise InputError("y contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if not self.terms:
            object.__setattr__(self, "terms", tuple(f"x{j}" for j in range(X.shape[1])))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_matrix(cls, matrix: DocTermMatrix, attrs: UnitAttributeTable, attribute: str) -> "RegressionProblem":
        """Rows of ``matrix`` that have a value for ``attribute``."""
        column = attrs.column(attribute)
        keep = [i for i, u in enumerate(matrix.row_units) if u in column]
        X = matrix.cells[keep].toarray() if keep else np.zeros((0, matrix.shape[1]))
        y = np.array([column[matrix.row_units[i]] for i in keep], dtype=np.float64)
        return cls(X, y, tuple(matrix.row_units[i] for i in keep), attribute, tuple(matrix.terms()))

    def subset(self, rows) -> "RegressionProblem":
        rows = np.asarray(rows, dtype=np.int64)
        ids = tuple(self.unit_ids[i] for i in rows) if self.unit_ids else ()
        return RegressionProblem(self.X[rows], self.y[rows], ids, self.attribute, self.terms)


@dataclass(frozen=True)
class ElasticNetConfig:
    lambda1: float = 0.1
    lambda2: float = 0.1
    tol: float = 1e-7
    max_iter: int = 10000
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InputError("lambda1 and lambda2 must be >= 0")
        if not self.tol > 0:
            raise InputError("tol must be > 0")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")


@dataclass(frozen=True)
class ElasticNetModel:
    theta: np.ndarray
    intercept: float
    feature_means: np.ndarray
    feature_scales: np.ndarray
    theta_std: np.ndarray
    y_mean: float
    converged: bool
    sweeps: int
    objective_trace: np.ndarray

    def predict_standardized(self, X) -> np.ndarray:
        """Predict through the working (standardised) coordinates."""
        X = _as_dense(X, len(self.theta))
        return self.y_mean + ((X - self.feature_means) / self.feature_scales) @ self.theta_std


def _as_dense(X, p: int) -> np.ndarray:
    X = X.toarray() if sparse.issparse(X) else np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p:
        raise InputError(f"expected {p} feature columns, got shape {X.shape}")
    return X


def eval_objective(problem: RegressionProblem, theta, intercept: float, cfg: ElasticNetConfig) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    r = problem.y - intercept - problem.X @ theta
    return float(r @ r) / problem.n + cfg.lambda1 * float(np.abs(theta).sum()) + cfg.lambda2 * float(theta @ theta)


def working_problem(problem: RegressionProblem, standardize: bool = True) -> tuple[RegressionProblem, np.ndarray, np.ndarray]:
    """The centred/standardised design the solver actually optimises over.

    Returns the transformed problem together with the column means and
    scales used.  Constant columns become all-zero columns.
    """
    X = problem.X
    means = X.mean(axis=0) if X.shape[0] else np.zeros(X.shape[1])
    constant = np.ptp(X, axis=0) == 0.0 if X.shape[0] else np.ones(X.shape[1], dtype=bool)
    if standardize:
        scales = X.std(axis=0)
        scales[constant] = 1.0
    else:
        scales = np.ones(X.shape[1])
    Z = np.asfortranarray((X - means) / scales)
    Z[:, constant] = 0.0
    return RegressionProblem(Z, problem.y, problem.unit_ids, problem.attribute, problem.terms), means, scales


def fit_elastic_net(problem: RegressionProblem, cfg: ElasticNetConfig = ElasticNetConfig(), backend=None) -> ElasticNetModel:
    """Fit by cyclic coordinate descent with soft-thresholding.

    Each coordinate is set to ``S(c_j, lambda1) / (a_j + 2*lambda2)``;
    iteration stops once a full sweep moves no coefficient by ``tol`` or more.
    """
    if problem.n < 2:
        raise InputError("need at least two observations to fit")
    work, means, scales = working_problem(problem, cfg.standardize)
    y_mean = float(problem.y.mean())
    yc = np.ascontiguousarray(problem.y - y_mean)
    beta = np.zeros(problem.X.shape[1])
    trace = np.empty(cfg.max_iter)
    solve = kernels.cd_solve if backend is None else backend.cd_solve
    sweeps, converged = solve(work.X, yc, float(cfg.lambda1), float(cfg.lambda2), float(cfg.tol), int(cfg.max_iter), beta, trace)
    if not converged:
        warnings.warn(f"coordinate descent did not converge in {cfg.max_iter} sweeps", ConvergenceWarning, stacklevel=2)
    theta = beta / scales
    intercept = y_mean - float(means @ theta)
    return ElasticNetModel(theta, intercept, means, scales, beta, y_mean, bool(converged), int(sweeps), trace[:sweeps].copy())


def predict(model: ElasticNetModel, X) -> np.ndarray:
    X = _as_dense(X, len(model.theta))
    return model.intercept + X @ model.theta


def stratified_split(y, train_frac: float = 0.75, bins: int = 10, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Stratified random train/test split for a continuous target.

    ``y`` is cut into equal-frequency bins by rank (equal values share a bin).
    Bin count drops to ``N // 4`` for small samples so bins keep at least
    four members.  Train sizes per bin are the floors of ``train_frac * |bin|``
    with the leftover ``round(train_frac * N) - sum(floors)`` places going to
    the bins with the largest fractional parts (random among equals).
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n < 8:
        raise InputError("need at least 8 observations to stratify")
    if not 0.0 < train_frac < 1.0:
        raise InputError("train_frac must lie in (0, 1)")
    if bins < 1:
        raise InputError("bins must be >= 1")
    rng = np.random.default_rng(rng)
    n_bins = max(1, min(bins, n // 4))
    order = np.argsort(y, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    # ties take the rank of their first occurrence so they stay together
    sorted_y = y[order]
    first = np.searchsorted(sorted_y, sorted_y, side="left")
    ranks[order] = first
    labels = ranks * n_bins // n
    groups = [np.flatnonzero(labels == b) for b in np.unique(labels)]

    sizes = np.array([g.size for g in groups])
    exact = train_frac * sizes
    take = np.floor(exact).astype(np.int64)
    leftover = int(math.floor(train_frac * n + 0.5)) - int(take.sum())
    if leftover > 0:
        frac = exact - take
        tiebreak = rng.permutation(len(groups))
        pick = np.lexsort((tiebreak, -frac))[:leftover]
        take[pick] += 1
    train, test = [], []
    for g, t in zip(groups, take):
        perm = rng.permutation(g)
        train.append(perm[:t])
        test.append(perm[t:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class CVResult:
    attribute: str
    per_fold_rho: tuple[float, ...]
    mean_rho: float
    std_rho: float
    per_fold_models: tuple[np.ndarray, ...]
    terms: tuple[str, ...]
    degenerate_folds: tuple[int, ...] = ()
    top_terms: tuple[str, ...] = ()
    converged: tuple[bool, ...] = field(default=())


def _fold(problem, cfg, seed, fold, train_frac, bins, backend):
    rng = np.random.default_rng([seed, fold])
    train, test = stratified_split(problem.y, train_frac, bins, rng)
    model = fit_elastic_net(problem.subset(train), cfg, backend)
    y_hat = predict(model, problem.X[test])
    try:
        rho = pearson(y_hat, problem.y[test])
        degenerate = False
    except UndefinedCorrelationError:
        rho, degenerate = 0.0, True
    return rho, degenerate, model


def monte_carlo_cv(
    problem: RegressionProblem,
    cfg: ElasticNetConfig = ElasticNetConfig(),
    folds: int = 10,
    seed: int | None = None,
    train_frac: float = 0.75,
    bins: int = 10,
    top_k: int = 2,
    n_jobs: int = 1,
    backend=None,
) -> CVResult:
    """Repeated stratified 75/25 splits scored by Pearson rho on the held-out part.

    Fold ``i`` draws from an RNG seeded with ``(seed, i)``, so serial and
    parallel runs agree.  A fold with constant predictions scores 0 and is
    listed in ``degenerate_folds``.
    """
    if folds < 2:
        raise InputError("folds must be >= 2")
    seed = cfg.seed if seed is None else seed

    def run(i):
        return _fold(problem, cfg, seed, i, train_frac, bins, backend)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outs = list(pool.map(run, range(folds)))
    else:
        outs = [run(i) for i in range(folds)]
    rhos = tuple(float(o[0]) for o in outs)
    arr = np.array(rhos)
    result = CVResult(
        attribute=problem.attribute,
        per_fold_rho=rhos,
        mean_rho=float(arr.mean()),
        std_rho=float(arr.std(ddof=1)),
        per_fold_models=tuple(o[2].theta for o in outs),
        terms=tuple(problem.terms),
        degenerate_folds=tuple(i for i, o in enumerate(outs) if o[1]),
        converged=tuple(o[2].converged for o in outs),
    )
    return replace(result, top_terms=tuple(top_coefficients(result, top_k)))


def top_coefficients(result: CVResult, k: int = 2) -> list[str]:
    """Terms with the highest coefficients across a majority of folds.

    In each fold terms with positive coefficients are ranked (largest
    first, ties by term).  A term qualifies when it sits in the top
    ``max(k, 10)`` of more than half the folds; qualifiers are ordered by
    their mean rank over all folds.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    cutoff = max(k, 10)
    terms = result.terms
    n_folds = len(result.per_fold_models)
    hits: dict[str, int] = {}
    rank_sum = np.zeros(len(terms))
    for theta in result.per_fold_models:
        order = sorted(range(len(terms)), key=lambda j: (-theta[j], terms[j]))
        ranks = np.empty(len(terms))
        ranks[order] = np.arange(1, len(terms) + 1)
        rank_sum += ranks
        positive = [j for j in order if theta[j] > 0.0][:cutoff]
        for j in positive:
            hits[terms[j]] = hits.get(terms[j], 0) + 1
    index = {t: j for j, t in enumerate(terms)}
    qualified = [t for t, c in hits.items() if c > n_folds / 2]
    qualified.sort(key=lambda t: (rank_sum[index[t]] / n_folds, t))
    return qualified[:k]


def write_cv_csv(results: Sequence[CVResult], path, folds: int = 10, top_k: int = 2) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["attribute", "mean_rho", "std_rho"]
            + [f"fold_{i}" for i in range(1, folds + 1)]
            + [f"top_term_{i}" for i in range(1, top_k + 1)]
        )
        for r in results:
            tops = list(r.top_terms[:top_k]) + [""] * (top_k - len(r.top_terms[:top_k]))
            w.writerow([r.attribute, repr(r.mean_rho), repr(r.std_rho), *map(repr, r.per_fold_rho), *tops])
