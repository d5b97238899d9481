"""Ordinary least squares with t-test inference, backward elimination and k-fold CV."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .domain import FRAMEWORK_PHASES, GroundTruthCoefficients, LinearCost, Phase, ShuffleCost
from .tracelog import PHASE_FEATURES

log = logging.getLogger(__name__)

UNITS = "MB, ms"


class RegressionError(ValueError):
    pass


class SingularDesignError(RegressionError):
    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient; collinear column(s): {', '.join(columns)}")


class InsufficientDataError(RegressionError):
    pass


class UnderSampledPhaseError(RegressionError):
    def __init__(self, phase: Phase, count: int, needed: int):
        self.phase = phase
        super().__init__(f"phase {phase.value} has {count} samples, needs at least {needed}")


# --- Student t --------------------------------------------------------------

def t_sf2(t: np.ndarray | float, df: float) -> np.ndarray:
    """Two-sided tail probability P(|T| >= |t|)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = df / (df + t * t)
    return betainc(df / 2.0, 0.5, x)


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t with ``df`` degrees of freedom."""
    tail = 0.5 * float(t_sf2(t, df))
    return 1.0 - tail if t > 0 else tail


# --- OLS --------------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    feature_names: tuple[str, ...]
    coefficients: tuple[float, ...]
    intercept: float
    stderrs: tuple[float, ...]
    p_values: tuple[float, ...]
    rmse_ms: float
    r_squared: float
    adj_r_squared: float
    n_samples: int
    intercept_stderr: float = math.nan
    removed: tuple[str, ...] = ()

    def coefficient(self, name: str) -> float:
        """Slope for ``name``; 0.0 if the feature is not in the model."""
        if name in self.feature_names:
            return self.coefficients[self.feature_names.index(name)]
        return 0.0

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            x = x.reshape(-1, len(self.feature_names)) if self.feature_names else x.reshape(-1, 0)
        return self.intercept + x @ np.asarray(self.coefficients, dtype=float)


def _default_names(p: int) -> list[str]:
    return [f"x{i + 1}" for i in range(p)]


def _collinear_columns(design: np.ndarray, names: Sequence[str]) -> list[str]:
    """Columns that add nothing to the rank of the columns before them."""
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0] = 1.0
    z = design / scale
    bad, kept = [], []
    for j, name in enumerate(names):
        trial = z[:, kept + [j]]
        if np.linalg.matrix_rank(trial) < len(kept) + 1:
            bad.append(name)
        else:
            kept.append(j)
    return bad


def ols_fit(features: np.ndarray, targets: np.ndarray, feature_names: Sequence[str] | None = None) -> LinearFit:
    """Least-squares fit of ``targets ~ 1 + features``."""
    y = np.asarray(targets, dtype=float).ravel()
    n = y.size
    x = np.asarray(features, dtype=float).reshape(n, -1)
    p = x.shape[1]
    names = list(feature_names) if feature_names is not None else _default_names(p)
    if len(names) != p:
        raise ValueError(f"{len(names)} feature names for {p} columns")
    if n <= p + 1:
        raise InsufficientDataError(f"need more than {p + 1} samples for {p} feature(s), got {n}")

    design = np.column_stack([np.ones(n), x])
    bad = _collinear_columns(design, ["(intercept)", *names])
    if bad:
        raise SingularDesignError(bad)

    q, r = np.linalg.qr(design)
    beta = np.linalg.solve(r, q.T @ y)
    fitted = design @ beta
    resid = y - fitted
    dof = n - p - 1
    sse = float(resid @ resid)
    sigma2 = sse / dof
    r_inv = np.linalg.inv(r)
    xtx_inv_diag = np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(sigma2 * xtx_inv_diag)

    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = beta / se
    pvals = t_sf2(tstat, dof)
    pvals = np.where(np.isnan(pvals), 1.0, pvals)

    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / dof
    return LinearFit(
        feature_names=tuple(names),
        coefficients=tuple(float(b) for b in beta[1:]),
        intercept=float(beta[0]),
        stderrs=tuple(float(s) for s in se[1:]),
        p_values=tuple(float(v) for v in pvals[1:]),
        rmse_ms=math.sqrt(sse / n),
        r_squared=r2,
        adj_r_squared=adj,
        n_samples=n,
        intercept_stderr=float(se[0]),
    )


def backward_eliminate(features: np.ndarray, targets: np.ndarray, alpha: float = 0.05,
                       feature_names: Sequence[str] | None = None) -> LinearFit:
    """Drop the least significant feature until every p-value is <= ``alpha``.

    Zero-variance columns are removed up front. Ties on p-value remove the
    earliest declared feature. ``LinearFit.removed`` lists removals in order.
    """
    y = np.asarray(targets, dtype=float).ravel()
    x = np.asarray(features, dtype=float).reshape(y.size, -1)
    names = list(feature_names) if feature_names is not None else _default_names(x.shape[1])
    keep = list(range(x.shape[1]))
    removed: list[str] = []

    for j in list(keep):
        if np.ptp(x[:, j]) == 0:
            log.info("dropping zero-variance feature %s", names[j])
            keep.remove(j)
            removed.append(names[j])

    while True:
        fit = ols_fit(x[:, keep], y, [names[j] for j in keep])
        if not keep:
            break
        worst = int(np.argmax(fit.p_values))
        if fit.p_values[worst] <= alpha:
            break
        removed.append(names[keep[worst]])
        del keep[worst]

    return replace(fit, removed=tuple(removed))


# --- cross-validation -------------------------------------------------------

@dataclass(frozen=True)
class CvReport:
    k: int
    fold_rmses: tuple[float, ...]
    mean_rmse: float
    predictions: tuple[tuple[float, float], ...]
    seed: int


def kfold_partition(n: int, k: int, seed: int) -> list[np.ndarray]:
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise InsufficientDataError(f"{n} samples cannot be split into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    return np.array_split(order, k)


def _fit_predict(x_tr: np.ndarray, y_tr: np.ndarray, x_te: np.ndarray) -> np.ndarray:
    varying = [j for j in range(x_tr.shape[1]) if np.ptp(x_tr[:, j]) > 0]
    fit = ols_fit(x_tr[:, varying], y_tr)
    return fit.predict(x_te[:, varying])


def kfold_cv(features: np.ndarray, targets: np.ndarray, k: int = 10, seed: int = 0) -> CvReport:
    y = np.asarray(targets, dtype=float).ravel()
    x = np.asarray(features, dtype=float).reshape(y.size, -1)
    folds = kfold_partition(y.size, k, seed)
    rmses, pairs = [], []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        pred = _fit_predict(x[train], y[train], x[test])
        rmses.append(math.sqrt(float(np.mean((y[test] - pred) ** 2))))
        pairs.extend(zip(y[test].tolist(), pred.tolist()))
    return CvReport(k, tuple(rmses), float(np.mean(rmses)), tuple(pairs), seed)


# --- per-phase models -------------------------------------------------------

PHASE_RECIPES: dict[Phase, tuple[str, ...]] = {
    Phase.READ: ("input_mb",),
    Phase.COLLECT: ("map_output_mb",),
    Phase.SPILL: ("map_output_mb",),
    Phase.MERGE: ("merge_nlogn",),
    Phase.SHUFFLE: ("shuffle_mb", "total_mappers"),
    Phase.WRITE: ("write_mb",),
}
MIN_SAMPLES = 30


@dataclass(frozen=True)
class PhaseModel:
    phase: Phase
    recipe: tuple[str, ...]
    fit: LinearFit
    cv: CvReport | None = None

    @property
    def recipe_name(self) -> str:
        return " + ".join(self.recipe)

    def predict(self, features: Mapping[str, float]) -> float:
        missing = [f for f in self.recipe if f not in features]
        if missing:
            raise KeyError(f"{self.phase.value} model needs feature(s) {', '.join(missing)}")
        value = self.fit.intercept + math.fsum(self.fit.coefficient(f) * features[f] for f in self.recipe)
        if value < 0:
            log.info("%s prediction %.3f ms clamped to 0", self.phase.value, value)
            return 0.0
        return value

    def to_dict(self) -> dict[str, Any]:
        f = self.fit
        doc = {
            "recipe": self.recipe_name,
            "features": list(self.recipe),
            "coefficients": {name: f.coefficient(name) for name in self.recipe},
            "intercept": f.intercept,
            "p_values": dict(zip(f.feature_names, f.p_values)),
            "stderrs": dict(zip(f.feature_names, f.stderrs)),
            "removed": list(f.removed),
            "rmse_ms": f.rmse_ms,
            "r_squared": f.r_squared,
            "adj_r_squared": f.adj_r_squared,
            "n_samples": f.n_samples,
        }
        if self.cv is not None:
            doc["cv"] = {"k": self.cv.k, "seed": self.cv.seed, "mean_rmse": self.cv.mean_rmse,
                         "fold_rmses": list(self.cv.fold_rmses)}
        return doc

    @classmethod
    def from_dict(cls, phase: Phase, doc: Mapping[str, Any]) -> PhaseModel:
        recipe = tuple(doc["features"])
        kept = [n for n in recipe if n not in doc.get("removed", [])]
        nan = lambda v: math.nan if v is None else float(v)  # noqa: E731
        fit = LinearFit(
            feature_names=tuple(kept),
            coefficients=tuple(float(doc["coefficients"][n]) for n in kept),
            intercept=float(doc["intercept"]),
            stderrs=tuple(nan(doc.get("stderrs", {}).get(n)) for n in kept),
            p_values=tuple(nan(doc.get("p_values", {}).get(n)) for n in kept),
            rmse_ms=nan(doc.get("rmse_ms")),
            r_squared=nan(doc.get("r_squared")),
            adj_r_squared=nan(doc.get("adj_r_squared")),
            n_samples=int(doc.get("n_samples") or 0),
            removed=tuple(doc.get("removed", [])),
        )
        cv = None
        if doc.get("cv"):
            c = doc["cv"]
            cv = CvReport(int(c["k"]), tuple(c["fold_rmses"]), float(c["mean_rmse"]), (), int(c["seed"]))
        return cls(phase, recipe, fit, cv)


@dataclass(frozen=True)
class PhaseModelSet:
    models: Mapping[Phase, PhaseModel]
    units: str = UNITS

    def __post_init__(self) -> None:
        missing = [p.value for p in FRAMEWORK_PHASES if p not in self.models]
        if missing:
            raise ValueError(f"model set lacks phase(s) {', '.join(missing)}")

    def __getitem__(self, phase: Phase) -> PhaseModel:
        return self.models[Phase(phase)]

    @classmethod
    def from_ground_truth(cls, coeffs: GroundTruthCoefficients = GroundTruthCoefficients()) -> PhaseModelSet:
        def exact(phase: Phase, slopes: Sequence[float], intercept: float) -> PhaseModel:
            recipe = PHASE_RECIPES[phase]
            nan = (math.nan,) * len(recipe)
            fit = LinearFit(recipe, tuple(slopes), intercept, nan, nan,
                            math.nan, math.nan, math.nan, 0)
            return PhaseModel(phase, recipe, fit)

        return cls({
            Phase.READ: exact(Phase.READ, [coeffs.read.slope], coeffs.read.intercept),
            Phase.COLLECT: exact(Phase.COLLECT, [coeffs.collect.slope], coeffs.collect.intercept),
            Phase.SPILL: exact(Phase.SPILL, [coeffs.spill.slope], coeffs.spill.intercept),
            Phase.MERGE: exact(Phase.MERGE, [coeffs.merge.slope], coeffs.merge.intercept),
            Phase.SHUFFLE: exact(Phase.SHUFFLE, [coeffs.shuffle.data_slope, coeffs.shuffle.mapper_slope],
                                 coeffs.shuffle.intercept),
            Phase.WRITE: exact(Phase.WRITE, [coeffs.write.slope], coeffs.write.intercept),
        })

    def as_coefficients(self) -> GroundTruthCoefficients:
        """Fitted coefficients in ground-truth shape (negative values clipped to 0)."""
        def lin(phase: Phase) -> LinearCost:
            m = self[phase]
            return LinearCost(max(m.fit.coefficient(m.recipe[0]), 0.0), max(m.fit.intercept, 0.0))

        sh = self[Phase.SHUFFLE].fit
        return GroundTruthCoefficients(
            read=lin(Phase.READ), collect=lin(Phase.COLLECT), spill=lin(Phase.SPILL),
            merge=lin(Phase.MERGE), write=lin(Phase.WRITE),
            shuffle=ShuffleCost(max(sh.coefficient("shuffle_mb"), 0.0),
                                max(sh.coefficient("total_mappers"), 0.0), max(sh.intercept, 0.0)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {"units": self.units, "phases": {p.value: self.models[p].to_dict() for p in FRAMEWORK_PHASES}}

    def to_json(self) -> str:
        def clean(obj: Any) -> Any:
            if isinstance(obj, float) and not math.isfinite(obj):
                return None
            if isinstance(obj, dict):
                return {k: clean(v) for k, v in obj.items()}
            if isinstance(obj, list):
                return [clean(v) for v in obj]
            return obj
        return json.dumps(clean(self.to_dict()), indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> PhaseModelSet:
        phases = doc["phases"]
        return cls({Phase(name): PhaseModel.from_dict(Phase(name), body) for name, body in phases.items()},
                   doc.get("units", UNITS))

    @classmethod
    def load(cls, path: str | Path) -> PhaseModelSet:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def phase_design(samples: Sequence, phase: Phase) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix for ``phase``'s recipe from samples carrying named features."""
    cols = [PHASE_FEATURES[phase].index(f) for f in PHASE_RECIPES[phase]]
    rows = [[s.features[c] for c in cols] for s in samples]
    x = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    y = np.array([s.target_ms for s in samples], dtype=float)
    return x, y


def fit_phase_models(samples, alpha: float = 0.05, k: int = 10, seed: int = 0) -> PhaseModelSet:
    """Fit one backward-eliminated linear model per framework phase, with k-fold CV."""
    models = {}
    for phase in FRAMEWORK_PHASES:
        rows = samples.samples.get(phase, [])
        if len(rows) < MIN_SAMPLES:
            raise UnderSampledPhaseError(phase, len(rows), MIN_SAMPLES)
        x, y = phase_design(rows, phase)
        recipe = PHASE_RECIPES[phase]
        fit = backward_eliminate(x, y, alpha, recipe)
        kept = [recipe.index(n) for n in fit.feature_names]
        cv = kfold_cv(x[:, kept], y, k, seed)
        models[phase] = PhaseModel(phase, recipe, fit, cv)
    return PhaseModelSet(models)


def fit_summary(models: PhaseModelSet) -> str:
    lines = []
    for phase in FRAMEWORK_PHASES:
        m = models[phase]
        f = m.fit
        terms = " + ".join(f"{f.coefficient(n):.4f} x {n}" for n in f.feature_names)
        lines.append(f"{phase.value}: T = {terms + ' + ' if terms else ''}{f.intercept:.4f}")
        for n, c, s, p in zip(f.feature_names, f.coefficients, f.stderrs, f.p_values):
            lines.append(f"    {n:<16} coef={c:.6g}  se={s:.3g}  p={p:.3g}")
        if f.removed:
            lines.append(f"    eliminated: {', '.join(f.removed)}")
        lines.append(f"    RMSE={f.rmse_ms:.4g} ms  R2={f.r_squared:.4f}  adj-R2={f.adj_r_squared:.4f}  n={f.n_samples}")
        if m.cv is not None:
            lines.append(f"    {m.cv.k}-fold CV: mean RMSE={m.cv.mean_rmse:.4g} ms")
    return "\n".join(lines)
