"""Hyperparameter grids, leave-one-out cross-validation, effective degrees of
freedom, and AIC-based selection."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .concordance import (
    ConcordanceSpec,
    PairWeights,
    build_marginal_sampler,
    marginalized_weights,
    pair_weights,
)
from .data_model import ExternalRanks, StandardizedDesign, external_ranks
from .errors import FoldFailure, InvalidBounds, RasperError, SingularSystem
from .solver import FitResult, PenalizedProblem, fit_rasper, jj_coefficient


@dataclass(frozen=True)
class HyperGrid:
    """Log-spaced (lambda, alpha) grid with zero prepended to each axis."""

    lam_values: np.ndarray       # (J + 2,), first entry 0
    alpha_values: np.ndarray     # (K + 2,), first entry 0
    lam_bounds: tuple[float, float]
    alpha_bounds: tuple[float, float]
    j: int
    k: int

    @property
    def size(self):
        return len(self.lam_values) * len(self.alpha_values)


def _log_spaced(vmin, vmax, count):
    j = np.arange(1, count + 2)
    return vmin * np.exp((j - 1) * math.log(vmax / vmin) / count)


def build_grid(lam_min, lam_max, j, alpha_min, alpha_max, k) -> HyperGrid:
    """Grid per the log-spacing rule: value_i = min * exp((i-1) log(max/min)/J)
    for i >= 1, with a zero entry prepended. Endpoints land exactly on the
    stated bounds."""
    if not (0 < lam_min < lam_max) or not (0 < alpha_min < alpha_max):
        raise InvalidBounds("require 0 < min < max for both lambda and alpha")
    if j < 1 or k < 1:
        raise InvalidBounds("grid sizes J and K must be >= 1")
    lam = np.concatenate([[0.0], _log_spaced(lam_min, lam_max, j)])
    alpha = np.concatenate([[0.0], _log_spaced(alpha_min, alpha_max, k)])
    return HyperGrid(
        lam_values=lam,
        alpha_values=alpha,
        lam_bounds=(float(lam_min), float(lam_max)),
        alpha_bounds=(float(alpha_min), float(alpha_max)),
        j=int(j),
        k=int(k),
    )


def default_grid(n) -> HyperGrid:
    """Default bounds scale with n to keep penalty-to-loss ratios comparable
    across sample sizes."""
    return build_grid(1e-2 * n, 1e3 * n, 10, 1e-4 * n, 1e2 * n, 10)


def _fold_weights(ranks, scores, keep, spec, design_sub):
    """Weights for a leave-one-out fold: ranks are recomputed over the
    retained rows, from raw scores when available, else by monotone
    recompression of the full-data ranks."""
    if scores is not None:
        sub_ranks = external_ranks(np.asarray(scores)[keep])
    else:
        sub_ranks = external_ranks(ranks.r[keep])
    w = pair_weights(sub_ranks, spec.measure)
    if spec.marginalized and design_sub.p > design_sub.q:
        sampler = build_marginal_sampler(design_sub.z, design_sub.b,
                                         spec.samples, spec.seed)
        w = marginalized_weights(w, sampler)
    return w


class FoldCache:
    """Per-fold weight matrices for leave-one-out, computed once.

    The fold weights depend only on the data, not on (lambda, alpha), so a
    grid search can reuse them across all grid points. ``stacked`` holds the
    (n, n-1, n-1) array consumed by the compiled fold loop when every fold
    uses a single observed table.
    """

    def __init__(self, weights):
        self.weights = list(weights)
        self.stacked = None
        if all(w.tables is None for w in self.weights):
            self.stacked = np.stack([w.w for w in self.weights])

    def __getitem__(self, i):
        return self.weights[i]

    def __iter__(self):
        return iter(self.weights)

    def __len__(self):
        return len(self.weights)


def fold_weight_cache(design: StandardizedDesign, ranks: ExternalRanks,
                      spec: ConcordanceSpec, scores=None) -> FoldCache:
    n = design.n
    cache = []
    for i in range(n):
        keep = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        sub = design.subset(keep)
        cache.append(_fold_weights(ranks, scores, keep, spec, sub))
    return FoldCache(cache)


def loocv_score(design: StandardizedDesign, y, ranks: ExternalRanks,
                spec: ConcordanceSpec, lam, alpha, *, scores=None,
                warm: FitResult | None = None, fold_cache=None,
                warm_matrix=None) -> float:
    """Mean held-out half squared error over the n leave-one-out refits.

    The held-out loss ignores the ridge term. Row subsets keep the full-data
    standardization so the hat-matrix identity holds exactly at lam=alpha=0.
    """
    y = np.asarray(y, dtype=float)
    n = design.n
    if n < 3:
        raise FoldFailure("leave-one-out needs at least 3 rows")
    if (_kernels.HAVE_NUMBA and warm is not None and fold_cache is not None
            and not spec.marginalized
            and all(w.tables is None for w in fold_cache)):
        stacked = fold_cache.stacked if fold_cache.stacked is not None else \
            np.stack([w.w for w in fold_cache])
        if warm_matrix is None:
            warm_matrix = np.tile(np.asarray(warm.beta, dtype=float), (n, 1))
        value, ok = _kernels._loocv(design.x, y, stacked, float(spec.nu),
                                    float(lam), float(alpha), warm_matrix,
                                    1e-8, 500)
        if ok:
            return float(value)
    total = 0.0
    failed = []
    for i in range(n):
        keep = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        sub = design.subset(keep)
        try:
            w = fold_cache[i] if fold_cache is not None else \
                _fold_weights(ranks, scores, keep, spec, sub)
            problem = PenalizedProblem(design=sub, y=y[keep], weights=w,
                                       spec=spec, lam=float(lam), alpha=float(alpha))
            init = warm.beta if warm is not None else None
            fit = fit_rasper(problem, init=init)
        except RasperError as exc:
            failed.append((i, str(exc)))
            continue
        pred = fit.beta0 + design.x[i] @ fit.beta
        total += 0.5 * (y[i] - pred) ** 2
    if failed:
        raise FoldFailure(f"{len(failed)} of {n} folds failed: {failed[:3]}")
    return total / n


def degrees_of_freedom(design: StandardizedDesign, weights: PairWeights,
                       nu, lam, alpha) -> float:
    """Effective degrees of freedom of the one-step smoother at beta = 0.

    Trace of (X'X + alpha I + lam * M0)^{-1} X'X, where M0 is the surrogate
    curvature at beta = 0: quasi-probabilities w_k / sum(w) times the
    logistic-bound curvature 1/8 on each scaled pair difference.
    """
    x = design.x
    p = design.p
    xtx = x.T @ x
    system = xtx + alpha * np.eye(p)
    if lam > 0 and weights.total > 0:
        w = weights.w / weights.total
        diag = w.sum(axis=1) + w.sum(axis=0)
        xw = x.T @ w @ x
        m0 = (x.T @ (diag[:, None] * x) - xw - xw.T) / (nu * nu)
        system = system + lam * 0.125 * m0
    try:
        sol = scipy.linalg.solve(system, xtx, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem("degrees-of-freedom system is singular") from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("degrees-of-freedom system is singular")
    return float(np.trace(sol))


def aic(problem: PenalizedProblem, fit: FitResult, df) -> float:
    """AIC = 2 * L_I(beta0, beta; alpha) + 2 * df, ridge term included."""
    resid = problem.y - fit.beta0 - problem.design.x @ fit.beta
    local = 0.5 * float(resid @ resid) + 0.5 * problem.alpha * float(fit.beta @ fit.beta)
    return 2.0 * local + 2.0 * float(df)


@dataclass
class GridRecord:
    lam: float
    alpha: float
    loo: float
    df: float
    aic: float
    df_flagged: bool
    fit: FitResult


@dataclass
class SelectionReport:
    records: list[GridRecord]
    criterion: str
    chosen: GridRecord

    def to_rows(self):
        rows = []
        for rec in self.records:
            rows.append({
                "lambda": rec.lam,
                "alpha": rec.alpha,
                "loo": rec.loo,
                "df": rec.df,
                "aic": rec.aic,
                "df_flagged": rec.df_flagged,
                "objective": float(rec.fit.objective_trace[-1]),
                "iterations": rec.fit.iterations,
                "converged": rec.fit.converged,
                "chosen": rec is self.chosen,
            })
        return rows

    def write_csv(self, path):
        rows = self.to_rows()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                                 for k, v in row.items()})

    def to_json(self):
        return json.dumps({"criterion": self.criterion,
                           "chosen": {"lambda": self.chosen.lam,
                                      "alpha": self.chosen.alpha},
                           "grid": self.to_rows()}, indent=2)


def select(design: StandardizedDesign, y, ranks: ExternalRanks,
           spec: ConcordanceSpec, grid: HyperGrid, criterion="loocv",
           scores=None) -> SelectionReport:
    """Evaluate the criterion at every grid point and return the argmin.

    Fits are warm-started along increasing lambda within each alpha. Ties
    break toward smaller lambda, then smaller alpha. Points with a flagged
    (singular) degrees-of-freedom system are excluded from AIC selection.
    """
    if criterion not in ("loocv", "aic"):
        raise ValueError(f"unknown criterion {criterion!r}")
    y = np.asarray(y, dtype=float)
    base_w = pair_weights(ranks, spec.measure)
    if spec.marginalized and design.p > design.q:
        sampler = build_marginal_sampler(design.z, design.b, spec.samples, spec.seed)
        base_w = marginalized_weights(base_w, sampler)
    fold_cache = None
    if criterion == "loocv":
        fold_cache = fold_weight_cache(design, ranks, spec, scores=scores)

    records = []
    for alpha in grid.alpha_values:
        warm = None
        warm_matrix = None
        for lam in grid.lam_values:
            problem = PenalizedProblem(design=design, y=y, weights=base_w,
                                       spec=spec, lam=float(lam), alpha=float(alpha))
            fit = fit_rasper(problem, init=warm.beta if warm is not None else None)
            warm = fit
            flagged = False
            try:
                df = degrees_of_freedom(design, base_w, spec.nu, lam, alpha)
            except SingularSystem:
                df, flagged = float(design.p), True
            aic_val = aic(problem, fit, df)
            if criterion == "loocv":
                if warm_matrix is None:
                    warm_matrix = np.tile(np.asarray(fit.beta, dtype=float),
                                          (design.n, 1))
                loo = loocv_score(design, y, ranks, spec, lam, alpha,
                                  scores=scores, warm=fit, fold_cache=fold_cache,
                                  warm_matrix=warm_matrix)
            else:
                loo = float("nan")
            records.append(GridRecord(lam=float(lam), alpha=float(alpha),
                                      loo=loo, df=df, aic=aic_val,
                                      df_flagged=flagged, fit=fit))

    def key(rec):
        return rec.loo if criterion == "loocv" else rec.aic

    eligible = [r for r in records
                if not (criterion == "aic" and r.df_flagged)
                and math.isfinite(key(r))]
    if not eligible:
        raise FoldFailure("no eligible grid points for selection")
    chosen = min(eligible, key=lambda r: (key(r), r.lam, r.alpha))
    return SelectionReport(records=records, criterion=criterion, chosen=chosen)
