"""Matched weighted log-rank statistic, its variance estimator, and the test.

All processes are evaluated left-continuously: at an event time s, weights and
at-risk totals include every subject failing at s.  Tied events at one time
are processed in a single grid step by summing their contributions.  Event
sums accumulate in ascending time order with compensated summation, so the
result does not depend on thread count or platform reduction order.
"""

import bisect
import math
from dataclasses import dataclass
from typing import Literal, Optional

from .matching import MatchedCohort, omega_n_holds, pooled_at_risk
from .survival import build_event_grid
from .util import KahanSum, norm_cdf, norm_sf, pinv

Direction = Literal["upper", "lower", "two_sided"]
_DIRECTIONS = ("upper", "lower", "two_sided")


@dataclass(frozen=True)
class WeightFunction:
    """Deterministic step function on the time axis, evaluated left-continuously.

    ``values`` has one more entry than ``breakpoints``; value ``values[k]``
    applies on the interval (breakpoints[k-1], breakpoints[k]] (with open ends
    at the extremes).  The constant-1 function recovers the plain statistic.
    """

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(map(float, self.breakpoints)))
        object.__setattr__(self, "values", tuple(map(float, self.values)))
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("weight values must be finite")

    @classmethod
    def constant(cls, value: float = 1.0) -> "WeightFunction":
        return cls(breakpoints=(), values=(float(value),))

    def value_at(self, s: float) -> float:
        return self.values[bisect.bisect_left(self.breakpoints, s)]

    def scaled(self, c: float) -> "WeightFunction":
        return WeightFunction(self.breakpoints, tuple(c * v for v in self.values))

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightFunction":
        return cls(tuple(data.get("breakpoints", ())), tuple(data["values"]))


@dataclass(frozen=True)
class TestResult:
    """Outcome of one weighted log-rank test."""

    statistic: float
    variance_estimate: float
    standardized: float
    p_lower: float
    p_upper: float
    p_two_sided: float
    alpha: float
    direction: Direction
    reject: bool
    omega_n: Optional[bool]
    n1: int
    n0: int
    unmatched_count: int
    degenerate_variance: bool
    method: str
    path: Optional[tuple[tuple[float, float], ...]] = None

    def to_dict(self) -> dict:
        d = {
            "statistic": self.statistic,
            "variance_estimate": self.variance_estimate,
            "standardized": self.standardized,
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "p_two_sided": self.p_two_sided,
            "alpha": self.alpha,
            "direction": self.direction,
            "reject": self.reject,
            "omega_n": self.omega_n,
            "n1": self.n1,
            "n0": self.n0,
            "unmatched_count": self.unmatched_count,
            "degenerate_variance": self.degenerate_variance,
            "method": self.method,
        }
        if self.path is not None:
            d["path"] = [[t, v] for t, v in self.path]
        return d


def kernel(mc: MatchedCohort, weight_fn: WeightFunction | None, s: float) -> float:
    """Predictable factor multiplying the arm-wise increment difference at s:

        sqrt((Y1_0 + Y0_0) * pinv(Y1_0 * Y0_0)) * pinv(Y1_s + Y0_s) * Y1_s * Y0_s * W(s)

    where Y1/Y0 are the pooled weighted at-risk totals of the two arms.
    """
    wf = weight_fn or WeightFunction.constant()
    y1_0 = pooled_at_risk(mc, 1, 0.0)
    y0_0 = pooled_at_risk(mc, 0, 0.0)
    y1 = pooled_at_risk(mc, 1, s)
    y0 = pooled_at_risk(mc, 0, s)
    front = math.sqrt((y1_0 + y0_0) * pinv(y1_0 * y0_0))
    return front * pinv(y1 + y0) * y1 * y0 * wf.value_at(s)


class _RiskSweep:
    """Incremental per-cell at-risk state over the matched subjects.

    Maintains, exactly in integers, the treated count r1[c] and control count
    r0[c] of each matched cell, the pooled treated total, and the pooled
    control total sum_c r1[c] * 1{r0[c] > 0} (each at-risk control carries the
    cell ratio r1/r0, so a cell with surviving controls contributes r1).
    """

    def __init__(self, mc: MatchedCohort):
        cells = mc._cells
        self.cell_index = {key: i for i, key in enumerate(cells)}
        self.r1 = [len(tr) for tr, _ in cells.values()]
        self.r0 = [len(co) for _, co in cells.values()]
        self.s1 = sum(self.r1)
        self.s0 = sum(r1 for r1, r0 in zip(self.r1, self.r0) if r0 > 0)
        # exits grouped by observed time, each entry (cell index, arm)
        exits: dict[float, list[tuple[int, int]]] = {}
        subjects = mc.cohort.subjects
        for key, (tr, co) in cells.items():
            c = self.cell_index[key]
            for i in tr:
                exits.setdefault(subjects[i].observed_time, []).append((c, 1))
            for i in co:
                exits.setdefault(subjects[i].observed_time, []).append((c, 0))
        self.exit_times = sorted(exits)
        self.exits = exits

    def control_ratio(self, c: int) -> float:
        return pinv(float(self.r0[c])) * float(self.r1[c])

    def remove_at(self, t: float) -> None:
        for c, arm in self.exits.get(t, ()):
            before = self.r1[c] if self.r0[c] > 0 else 0
            if arm == 1:
                self.r1[c] -= 1
                self.s1 -= 1
            else:
                self.r0[c] -= 1
            after = self.r1[c] if self.r0[c] > 0 else 0
            self.s0 += after - before


def statistic_path(
    mc: MatchedCohort, weight_fn: WeightFunction | None = None
) -> list[tuple[float, float]]:
    """Cumulative statistic at every event-grid time of the cohort.

    Each grid step adds  K(s) * [pinv(Y1_s) * dN1_s - pinv(Y0_s) * dN0_s]
    with dNz_s the weighted event mass of arm z at s; all weights and at-risk
    totals are evaluated at s itself.  Events of unmatched subjects contribute
    zero but their times still appear in the path.  An empty grid yields an
    empty path (statistic 0).
    """
    wf = weight_fn or WeightFunction.constant()
    grid = build_event_grid(mc.cohort)
    if len(grid) == 0:
        return []

    sweep = _RiskSweep(mc)
    y1_0 = float(sweep.s1)
    y0_0 = float(sweep.s0)
    front = math.sqrt((y1_0 + y0_0) * pinv(y1_0 * y0_0))
    cell_of_id = {
        sid: sweep.cell_index[stratum]
        for sid, stratum in mc.stratum_of.items()
        if isinstance(stratum, tuple)
    }

    # merge exit times into the grid sweep; exits after the last grid time
    # can no longer affect any evaluation
    last = grid.times[-1]
    timeline = sorted(set(grid.times) | {t for t in sweep.exit_times if t <= last})
    grid_at = dict(zip(grid.times, grid.events))

    acc = KahanSum()
    path: list[tuple[float, float]] = []
    for t in timeline:
        events = grid_at.get(t)
        if events is not None:
            d1 = 0.0
            d0 = 0.0
            for sid, _arm in events:
                if sid in mc.g1:
                    d1 += 1.0
                elif sid in mc.g0:
                    d0 += sweep.control_ratio(cell_of_id[sid])
            s1 = float(sweep.s1)
            s0 = float(sweep.s0)
            k = front * pinv(s1 + s0) * s1 * s0 * wf.value_at(t)
            acc.add(k * (pinv(s1) * d1 - pinv(s0) * d0))
            path.append((t, acc.value))
        sweep.remove_at(t)
    return path


def variance_estimate(mc: MatchedCohort, weight_fn: WeightFunction | None = None) -> float:
    """Variance estimator: pinv(2 * n1) times the sum of squared weight-function
    values over the matched treated events in (0, horizon]."""
    wf = weight_fn or WeightFunction.constant()
    tau = mc.cohort.horizon
    acc = KahanSum()
    times = sorted(
        s.observed_time
        for s in mc.cohort.subjects
        if s.id in mc.g1 and s.event and 0.0 < s.observed_time <= tau
    )
    for t in times:
        acc.add(wf.value_at(t) ** 2)
    return pinv(2.0 * mc.n1) * acc.value


def _decide(
    statistic: float,
    variance: float,
    alpha: float,
    direction: Direction,
) -> tuple[float, float, float, float, bool, bool]:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
    degenerate = variance == 0.0
    standardized = statistic * pinv(math.sqrt(variance))
    p_lower = norm_cdf(standardized)
    p_upper = norm_sf(standardized)
    p_two = min(1.0, 2.0 * min(p_lower, p_upper))
    if direction == "upper":
        reject = p_upper <= alpha
    elif direction == "lower":
        reject = p_lower <= alpha
    else:
        reject = p_two <= alpha
    return standardized, p_lower, p_upper, p_two, reject, degenerate


def run_test(
    mc: MatchedCohort,
    weight_fn: WeightFunction | None = None,
    alpha: float = 0.05,
    direction: Direction = "two_sided",
    include_path: bool = False,
) -> TestResult:
    """Full matched weighted log-rank test at the cohort horizon.

    A zero variance estimate (for example an empty matched treated set) gives
    a standardized statistic of 0 and sets the degenerate flag; it is never an
    error.
    """
    path = statistic_path(mc, weight_fn)
    w_tau = path[-1][1] if path else 0.0
    v_tau = variance_estimate(mc, weight_fn)
    standardized, p_lo, p_up, p_two, reject, degenerate = _decide(
        w_tau, v_tau, alpha, direction
    )
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
        omega_n=omega_n_holds(mc),
        n1=mc.n1,
        n0=mc.n0,
        unmatched_count=mc.unmatched_count,
        degenerate_variance=degenerate,
        method="cem",
        path=tuple(path) if include_path else None,
    )
