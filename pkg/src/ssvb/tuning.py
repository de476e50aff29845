"""Cross-validated choice of the slab variance scale v1."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

from .exceptions import SsvbError, TooFewSamplesError
from .inference import predict_sparse, predict_two_stage
from .model import Hyperparameters, RawDataset, standardize

SCORING = ("sparse", "two_stage")


def default_v1_grid() -> tuple[float, ...]:
    """Nine points log-spaced over [1e-2, 1e2].

    Consistency pushes v1 upward with n, so the grid is generous at the
    top end.
    """
    return tuple(float(v) for v in np.logspace(-2.0, 2.0, 9))


@dataclass(frozen=True)
class CvConfig:
    folds: int = 5
    v1_grid: tuple[float, ...] = field(default_factory=default_v1_grid)
    scoring: str = "sparse"
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        grid = tuple(float(v) for v in self.v1_grid)
        if not grid or any(v <= 0 for v in grid):
            raise ValueError("v1_grid must be nonempty and positive")
        object.__setattr__(self, "v1_grid", grid)
        if self.scoring not in SCORING:
            raise ValueError(f"scoring must be one of {SCORING}")


@dataclass(frozen=True)
class CvRow:
    """One grid point of the cross-validation table."""

    v1: float
    mean_mspe: float
    stderr: float
    n_folds_ok: int


def kfold_splits(n: int, folds: int, seed: int):
    """Deterministic shuffled k-fold partition of range(n).

    Validation sets are disjoint, cover all indices, and differ in size
    by at most one.
    """
    if folds > n:
        raise TooFewSamplesError(f"{folds} folds but only {n} samples")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    chunks = np.array_split(order, folds)
    out = []
    for k in range(folds):
        valid = np.sort(chunks[k])
        train = np.sort(np.concatenate([chunks[i] for i in range(folds)
                                        if i != k]))
        out.append((train, valid))
    return out


def _fit_for(algorithm: str, data, hp, solver_cfg):
    if algorithm == "componentwise":
        from .cavi import ComponentwiseConfig, fit_componentwise
        cfg = solver_cfg if solver_cfg is not None else ComponentwiseConfig(
            track_elbo=False)
        return fit_componentwise(data, hp, cfg)
    if algorithm == "batch":
        from .batch import BatchConfig, fit_batch
        cfg = solver_cfg if solver_cfg is not None else BatchConfig(
            track_elbo=False)
        return fit_batch(data, hp, cfg)
    raise ValueError("algorithm must be 'componentwise' or 'batch'")


def cv_select_v1(raw: RawDataset, hp_base: Hyperparameters, cfg: CvConfig,
                 algorithm: str = "batch", solver_cfg=None):
    """Pick v1 from the grid by k-fold mean squared prediction error.

    Each fold is standardized from its own training rows only, so no
    validation information leaks into the preprocessing. A grid point
    is valid only if every fold fit succeeds; among valid points the
    smallest mean MSPE wins, with ties broken toward the larger v1
    (weaker shrinkage bias). Returns (best_v1, list of CvRow).
    """
    splits = kfold_splits(raw.n, cfg.folds, cfg.seed)
    fold_data = []
    for train_idx, valid_idx in splits:
        train_raw = RawDataset(y=raw.y[train_idx], X=raw.X[train_idx, :],
                               feature_names=raw.feature_names)
        fold_data.append((train_raw, valid_idx))

    table = []
    for v1 in cfg.v1_grid:
        hp = replace(hp_base, v1=float(v1))
        scores = []
        for (train_raw, valid_idx) in fold_data:
            try:
                train = standardize(train_raw)
                fit = _fit_for(algorithm, train, hp, solver_cfg)
                X_valid = raw.X[valid_idx, :]
                if cfg.scoring == "sparse":
                    pred = predict_sparse(fit, train, X_valid)
                else:
                    pred = predict_two_stage(fit, train, X_valid)
                scores.append(float(np.mean((raw.y[valid_idx] - pred) ** 2)))
            except SsvbError:
                continue
        ok = len(scores)
        if ok:
            mean = float(np.mean(scores))
            stderr = (float(np.std(scores, ddof=1)) / sqrt(ok)
                      if ok > 1 else 0.0)
        else:
            mean, stderr = float("nan"), float("nan")
        table.append(CvRow(v1=float(v1), mean_mspe=mean, stderr=stderr,
                           n_folds_ok=ok))

    valid_rows = [r for r in table if r.n_folds_ok == cfg.folds]
    if not valid_rows:
        raise SsvbError("every grid point had at least one failing fold")
    best_score = min(r.mean_mspe for r in valid_rows)
    best_v1 = max(r.v1 for r in valid_rows if r.mean_mspe == best_score)
    return best_v1, table


def cv_table_to_csv(table) -> str:
    """CSV rendering of the cross-validation table."""
    lines = ["v1,mean_mspe,stderr,n_folds_ok"]
    for row in table:
        lines.append(f"{row.v1!r},{row.mean_mspe!r},{row.stderr!r},"
                     f"{row.n_folds_ok}")
    return "\n".join(lines) + "\n"
