"""Inverse-probability-of-treatment baseline: logistic propensity model via
Newton-Raphson, per-subject inverse weights, and the weighted log-rank test
with its own variance estimator computed over the pooled event grid.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import RankDeficiencyError, SeparationError, WeightOverflowError
from .logrank import Direction, TestResult, WeightFunction, _decide
from .survival import Cohort, SubjectId
from .util import KahanSum, pinv

SCORE_TOL = 1e-10
STEP_TOL = 1e-12
MAX_ITER = 100
MAX_HALVINGS = 30
DIVERGENCE_NORM = 1e4
# a fitted probability this close to 0 or 1 means the odds left double
# precision: the MLE is drifting to infinity along a separating direction
SATURATION_TOL = 1e-8


@dataclass(frozen=True)
class LogisticModel:
    """Fitted logistic regression of arm on an intercept plus selected covariates."""

    feature_selector: tuple[int, ...]
    coefficients: tuple[float, ...]
    converged: bool
    iterations: int
    log_likelihood: float

    def to_dict(self) -> dict:
        return {
            "feature_columns": [f"x{j + 1}" for j in self.feature_selector],
            "coefficients": list(self.coefficients),
            "converged": self.converged,
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
        }


@dataclass(frozen=True)
class IptwWeights:
    """Per-subject constant weights: 1/p-hat for treated, 1/(1 - p-hat) for
    controls.  Always at least 1 because fitted propensities lie in (0, 1)."""

    ids: tuple[SubjectId, ...]
    values: tuple[float, ...]

    def by_id(self) -> dict[SubjectId, float]:
        return dict(zip(self.ids, self.values))


def _design(cohort: Cohort, feature_selector: tuple[int, ...]) -> np.ndarray:
    xs = cohort.covariate_matrix
    bad = [j for j in feature_selector if not 0 <= j < xs.shape[1]]
    if bad:
        raise ValueError(f"feature indices out of range: {bad}")
    return np.column_stack([np.ones(len(cohort.subjects))] + [xs[:, j] for j in feature_selector])


def _log_likelihood(eta: np.ndarray, z: np.ndarray) -> float:
    # sum(z * eta - log(1 + exp(eta))), stable for large |eta|
    return float(np.sum(z * eta - np.logaddexp(0.0, eta)))


def fit_logistic(
    cohort: Cohort, feature_selector: tuple[int, ...] = (0, 1)
) -> LogisticModel:
    """Maximum-likelihood logistic fit of arm on (1, covariates[selector]).

    Newton-Raphson with step halving (up to 30 halvings when a step lowers the
    log-likelihood).  Converged when the score max-norm falls to 1e-10 or the
    step norm to 1e-12, within 100 iterations.  Separation raises
    SeparationError, whether caught as an empty arm, a diverging coefficient
    norm, or fitted probabilities saturating at 0/1; a singular Hessian raises
    RankDeficiencyError.
    """
    selector = tuple(int(j) for j in feature_selector)
    z = np.array([s.arm for s in cohort.subjects], dtype=float)
    if z.min() == z.max():
        raise SeparationError("all subjects in one arm: logistic MLE diverges")
    X = _design(cohort, selector)

    beta = np.zeros(X.shape[1])
    eta = X @ beta
    ll = _log_likelihood(eta, z)
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        p = expit(eta)
        score = X.T @ (z - p)
        if np.max(np.abs(score)) <= SCORE_TOL:
            converged = True
            iterations -= 1
            break
        w = p * (1.0 - p)
        hessian = X.T @ (X * w[:, None])
        try:
            newton_step = np.linalg.solve(hessian, score)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError(f"singular Hessian in logistic fit: {exc}") from exc
        if float(np.linalg.norm(newton_step)) <= STEP_TOL:
            converged = True
            break
        # halve only on genuine decreases; the slack keeps float noise in a
        # near-converged log-likelihood from strangling the step
        floor = ll - 1e-10 * (1.0 + abs(ll))
        step = newton_step
        for _ in range(MAX_HALVINGS):
            if _log_likelihood(X @ (beta + step), z) >= floor:
                break
            step = 0.5 * step
        beta = beta + step
        eta = X @ beta
        ll = _log_likelihood(eta, z)
        if np.max(np.abs(beta)) > DIVERGENCE_NORM:
            raise SeparationError(
                "logistic coefficients diverged: complete or quasi-complete separation"
            )

    p = expit(eta)
    if np.any(p <= SATURATION_TOL) or np.any(p >= 1.0 - SATURATION_TOL):
        raise SeparationError(
            "fitted probabilities saturated at 0 or 1: complete or quasi-complete separation"
        )
    return LogisticModel(
        feature_selector=selector,
        coefficients=tuple(float(b) for b in beta),
        converged=converged,
        iterations=iterations,
        log_likelihood=ll,
    )


def predict_propensity(model: LogisticModel, cohort: Cohort) -> np.ndarray:
    """Fitted treatment probabilities, in cohort subject order."""
    X = _design(cohort, model.feature_selector)
    return expit(X @ np.asarray(model.coefficients))


def iptw_weights(model: LogisticModel, cohort: Cohort) -> IptwWeights:
    """Inverse-propensity weight per subject; no truncation is applied."""
    if not model.converged:
        raise ValueError("refusing to weight with an unconverged propensity model")
    p = predict_propensity(model, cohort)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise WeightOverflowError("fitted propensity reached 0 or 1")
    z = np.array([s.arm for s in cohort.subjects], dtype=float)
    w = z / p + (1.0 - z) / (1.0 - p)
    return IptwWeights(
        ids=tuple(s.id for s in cohort.subjects),
        values=tuple(float(v) for v in w),
    )


def iptw_logrank(
    cohort: Cohort,
    weights: IptwWeights,
    weight_fn: WeightFunction | None = None,
    alpha: float = 0.05,
    direction: Direction = "two_sided",
    include_path: bool = False,
) -> TestResult:
    """Weighted log-rank test with constant per-subject weights and no matching.

    The statistic uses the same kernel-times-increment construction as the
    matched test, with every subject participating at its own inverse weight.
    The variance integrates, over pooled events s up to the horizon,

        U_s * pinv(Ybar_s * (Ybar_s - 1)) * (Ybar_s - dNbar_s) * dNbar_s

    where U_s mixes the squared at-risk weight sums of the two arms and Ybar /
    dNbar are the unweighted pooled at-risk and event counts, scaled by
    (Y1_0 + Y0_0) * pinv(Y1_0 * Y0_0), the squared front factor of the kernel,
    so degenerate all-ones weights reduce exactly to the classical log-rank.
    """
    wf = weight_fn or WeightFunction.constant()
    tau = cohort.horizon
    by_id = weights.by_id()
    missing = [s.id for s in cohort.subjects if s.id not in by_id]
    if missing:
        raise ValueError(f"weights missing for {len(missing)} subjects (e.g. {missing[0]!r})")

    w = np.array([by_id[s.id] for s in cohort.subjects], dtype=float)
    t = np.array([s.observed_time for s in cohort.subjects], dtype=float)
    z = np.array([s.arm for s in cohort.subjects], dtype=np.int64)
    ev = np.array([s.event for s in cohort.subjects], dtype=bool)

    order = np.argsort(t, kind="stable")
    t, z, ev, w = t[order], z[order], ev[order], w[order]
    times, first = np.unique(t, return_index=True)
    m = len(times)

    def suffix(vals: np.ndarray) -> np.ndarray:
        # sum of vals over subjects with observed time >= times[k]
        total = float(vals.sum())
        prefix = np.concatenate([[0.0], np.cumsum(vals)])
        return total - prefix[first]

    y1w = suffix(w * (z == 1))
    y0w = suffix(w * (z == 0))
    ybar = suffix(np.ones_like(w))
    q1 = suffix(w * w * (z == 1))
    q0 = suffix(w * w * (z == 0))

    inverse = np.searchsorted(times, t)
    dn1w = np.bincount(inverse, weights=w * (ev & (z == 1)), minlength=m)
    dn0w = np.bincount(inverse, weights=w * (ev & (z == 0)), minlength=m)
    dnbar = np.bincount(inverse, weights=ev.astype(float), minlength=m)

    y1_0 = float(w[z == 1].sum())
    y0_0 = float(w[z == 0].sum())
    front_sq = (y1_0 + y0_0) * pinv(y1_0 * y0_0)
    front = math.sqrt(front_sq)

    stat_acc = KahanSum()
    var_acc = KahanSum()
    path: list[tuple[float, float]] = []
    for k in range(m):
        s = float(times[k])
        if dnbar[k] == 0.0 or s > tau or s <= 0.0:
            continue
        a1, a0 = float(y1w[k]), float(y0w[k])
        kern = front * pinv(a1 + a0) * a1 * a0 * wf.value_at(s)
        stat_acc.add(kern * (pinv(a1) * float(dn1w[k]) - pinv(a0) * float(dn0w[k])))
        path.append((s, stat_acc.value))
        u = (a0 * pinv(a1 + a0)) ** 2 * float(q1[k]) + (a1 * pinv(a1 + a0)) ** 2 * float(q0[k])
        yb = float(ybar[k])
        d = float(dnbar[k])
        var_acc.add(u * pinv(yb * (yb - 1.0)) * (yb - d) * d * wf.value_at(s) ** 2)

    w_tau = stat_acc.value
    v_tau = front_sq * var_acc.value
    standardized, p_lo, p_up, p_two, reject, degenerate = _decide(
        w_tau, v_tau, alpha, direction
    )
    n1 = int((z == 1).sum())
    return TestResult(
        statistic=w_tau,
        variance_estimate=v_tau,
        standardized=standardized,
        p_lower=p_lo,
        p_upper=p_up,
        p_two_sided=p_two,
        alpha=alpha,
        direction=direction,
        reject=reject,
        omega_n=None,
        n1=n1,
        n0=len(cohort.subjects) - n1,
        unmatched_count=0,
        degenerate_variance=degenerate,
        method="iptw",
        path=tuple(path) if include_path else None,
    )
