"""Coarsened exact matching: covariate partition, stratum assignment, matched
sets, and the stratum-local weight and pooled at-risk processes.

A subject is matched when its covariate cell contains at least one subject of
each arm.  Matched treated subjects carry weight 1; a matched control at time
t carries the ratio of treated to control at-risk counts within its own cell,
with an exhausted control risk set giving weight 0 via the total reciprocal.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .survival import Cohort, SubjectId
from .util import pinv

# Bin index per continuous dimension followed by the literal value of each
# binary dimension; identifies exactly one cell of the partition.
StratumId = tuple[int, ...]


class MatchReason(enum.Enum):
    """Why a subject is outside the matched sets."""

    OUTSIDE_REGION = "outside_region"
    NO_CROSS_ARM_PARTNER = "no_cross_arm_partner"


@dataclass(frozen=True)
class CoarseningScheme:
    """Finite partition of a covariate region into half-open product cells.

    Each continuous dimension carries a strictly increasing edge sequence;
    cell k of that dimension is the interval (edges[k], edges[k+1]].  Binary
    dimensions contribute their literal 0/1 value.  A point on or below the
    lowest edge of any continuous dimension, above the highest edge, or with
    a non-0/1 binary coordinate lies outside the covered region.
    """

    continuous_edges: tuple[tuple[float, ...], ...]
    binary_dims: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "continuous_edges", tuple(tuple(map(float, e)) for e in self.continuous_edges)
        )
        for edges in self.continuous_edges:
            if len(edges) < 2:
                raise ValueError("each continuous dimension needs at least 2 edges")
            if any(not math.isfinite(e) for e in edges):
                raise ValueError("bin edges must be finite")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError("bin edges must be strictly increasing")
        if self.binary_dims < 0:
            raise ValueError("binary_dims must be nonnegative")
        if self.dimension == 0:
            raise ValueError("scheme must cover at least one dimension")

    @property
    def continuous_dims(self) -> int:
        return len(self.continuous_edges)

    @property
    def dimension(self) -> int:
        return self.continuous_dims + self.binary_dims

    def bins(self, dim: int) -> int:
        return len(self.continuous_edges[dim]) - 1

    def max_cell_diameter(self) -> float:
        """Largest cell diameter; binary dimensions contribute zero width."""
        sq = 0.0
        for edges in self.continuous_edges:
            sq += max(b - a for a, b in zip(edges, edges[1:])) ** 2
        return math.sqrt(sq)

    def to_dict(self) -> dict:
        return {
            "continuous_edges": [list(e) for e in self.continuous_edges],
            "binary_dims": self.binary_dims,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoarseningScheme":
        if "continuous_edges" in data:
            return cls(
                continuous_edges=tuple(tuple(e) for e in data["continuous_edges"]),
                binary_dims=int(data.get("binary_dims", 0)),
            )
        return grid_scheme(
            data["box_lo"],
            data["box_hi"],
            int(data["bins_per_dim"]),
            int(data.get("binary_dims", 0)),
        )


def grid_scheme(
    box_lo: Sequence[float],
    box_hi: Sequence[float],
    bins_per_dim: int,
    binary_dims: int = 0,
) -> CoarseningScheme:
    """Uniform partition: ``bins_per_dim`` half-open bins per continuous
    dimension across the box, crossed with all binary values."""
    if bins_per_dim < 1:
        raise ValueError("bins_per_dim must be at least 1")
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("box_lo and box_hi must be equal-length vectors")
    if not np.all(lo < hi):
        raise ValueError("box_lo must be strictly below box_hi componentwise")
    edges = tuple(
        tuple(np.linspace(lo[j], hi[j], bins_per_dim + 1).tolist()) for j in range(len(lo))
    )
    return CoarseningScheme(continuous_edges=edges, binary_dims=binary_dims)


def assign_stratum(scheme: CoarseningScheme, x: Sequence[float]) -> StratumId | None:
    """Cell containing ``x`` under the (lo, hi] convention, or None when any
    coordinate falls outside the covered region (including exactly on the
    global lower edge) or a binary coordinate is not exactly 0 or 1."""
    if len(x) != scheme.dimension:
        raise ValueError(f"expected {scheme.dimension} coordinates, got {len(x)}")
    key: list[int] = []
    for j, edges in enumerate(scheme.continuous_edges):
        v = x[j]
        if not (edges[0] < v <= edges[-1]):
            return None
        # first edge >= v, minus one: exact for values sitting on an edge
        k = int(np.searchsorted(edges, v, side="left")) - 1
        key.append(k)
    for j in range(scheme.binary_dims):
        v = x[scheme.continuous_dims + j]
        if v == 0.0:
            key.append(0)
        elif v == 1.0:
            key.append(1)
        else:
            return None
    return tuple(key)


def _assign_codes(scheme: CoarseningScheme, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized stratum assignment: integer codes plus an in-region mask."""
    n = xs.shape[0]
    codes = np.zeros((n, scheme.dimension), dtype=np.int64)
    valid = np.ones(n, dtype=bool)
    for j, edges in enumerate(scheme.continuous_edges):
        col = xs[:, j]
        e = np.asarray(edges)
        k = np.searchsorted(e, col, side="left") - 1
        with np.errstate(invalid="ignore"):
            valid &= (col > e[0]) & (col <= e[-1])
        codes[:, j] = np.clip(k, 0, len(edges) - 2)
    for j in range(scheme.binary_dims):
        col = xs[:, scheme.continuous_dims + j]
        is01 = (col == 0.0) | (col == 1.0)
        valid &= is01
        codes[:, scheme.continuous_dims + j] = np.where(col == 1.0, 1, 0)
    return codes, valid


@dataclass
class MatchedCohort:
    """Result of coarsened exact matching; immutable after construction.

    ``stratum_of`` maps every subject id either to its StratumId (matched
    subjects) or to the reason it was left out.  ``g1``/``g0`` are the matched
    treated/control id sets.
    """

    cohort: Cohort
    scheme: CoarseningScheme
    stratum_of: dict[SubjectId, "StratumId | MatchReason"]
    g1: frozenset
    g0: frozenset
    n1: int
    n0: int
    # per matched cell: (treated subject indices, control subject indices)
    _cells: dict[StratumId, tuple[tuple[int, ...], tuple[int, ...]]] = field(repr=False)

    @property
    def unmatched_count(self) -> int:
        return len(self.cohort.subjects) - self.n1 - self.n0

    def cell_of(self, subject_id: SubjectId) -> StratumId | None:
        s = self.stratum_of[subject_id]
        return s if isinstance(s, tuple) else None


def match(cohort: Cohort, scheme: CoarseningScheme) -> MatchedCohort:
    """Partition the cohort by stratum and keep subjects whose cell contains
    at least one subject of each arm.  An empty matched treated set is a
    legal, flagged outcome, not an error."""
    xs = cohort.covariate_matrix
    if xs.shape[1] != scheme.dimension:
        raise ValueError(
            f"scheme covers {scheme.dimension} dimensions but subjects have {xs.shape[1]}"
        )
    codes, valid = _assign_codes(scheme, xs)
    keys = [tuple(row) for row in codes.tolist()]

    cells_all: dict[StratumId, tuple[list[int], list[int]]] = {}
    for i, subj in enumerate(cohort.subjects):
        if not valid[i]:
            continue
        slot = cells_all.setdefault(keys[i], ([], []))
        slot[0 if subj.arm == 1 else 1].append(i)

    matched_cells = {
        k: (tuple(tr), tuple(co)) for k, (tr, co) in sorted(cells_all.items()) if tr and co
    }

    stratum_of: dict[SubjectId, StratumId | MatchReason] = {}
    g1: list[SubjectId] = []
    g0: list[SubjectId] = []
    for i, subj in enumerate(cohort.subjects):
        if not valid[i]:
            stratum_of[subj.id] = MatchReason.OUTSIDE_REGION
        elif keys[i] in matched_cells:
            stratum_of[subj.id] = keys[i]
            (g1 if subj.arm == 1 else g0).append(subj.id)
        else:
            stratum_of[subj.id] = MatchReason.NO_CROSS_ARM_PARTNER

    return MatchedCohort(
        cohort=cohort,
        scheme=scheme,
        stratum_of=stratum_of,
        g1=frozenset(g1),
        g0=frozenset(g0),
        n1=len(g1),
        n0=len(g0),
        _cells=matched_cells,
    )


def cem_weight(mc: MatchedCohort, subject_id: SubjectId, t: float) -> float:
    """Weight of one subject at time t.

    Matched treated: 1.  Matched control: treated at-risk count over control
    at-risk count within its own cell, both evaluated at t, with an empty
    control denominator giving 0 via the total reciprocal.  Unmatched: 0.
    """
    subjects = mc.cohort.subjects
    if subject_id not in mc.cohort.by_id:
        raise ValueError(f"unknown subject id {subject_id!r}")
    if subject_id in mc.g1:
        return 1.0
    if subject_id in mc.g0:
        cell = mc.stratum_of[subject_id]
        treated_idx, control_idx = mc._cells[cell]
        num = sum(1 for i in treated_idx if subjects[i].observed_time >= t)
        den = sum(1 for i in control_idx if subjects[i].observed_time >= t)
        return pinv(float(den)) * float(num)
    return 0.0


def pooled_at_risk(mc: MatchedCohort, arm: int, t: float) -> float:
    """Weighted at-risk total over the matched subjects of one arm at time t."""
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0 or 1, got {arm!r}")
    subjects = mc.cohort.subjects
    total = 0.0
    for treated_idx, control_idx in mc._cells.values():
        r1 = sum(1 for i in treated_idx if subjects[i].observed_time >= t)
        if arm == 1:
            total += float(r1)
        else:
            r0 = sum(1 for i in control_idx if subjects[i].observed_time >= t)
            # each at-risk control carries the same cell-local ratio
            total += (pinv(float(r0)) * float(r1)) * float(r0)
    return total


def omega_n_holds(mc: MatchedCohort) -> bool:
    """Coverage event: every matched treated subject's cell still has at
    least one control at risk at the horizon.  Vacuously true when the
    matched treated set is empty."""
    tau = mc.cohort.horizon
    subjects = mc.cohort.subjects
    for _, control_idx in mc._cells.values():
        if not any(subjects[i].observed_time >= tau for i in control_idx):
            return False
    return True
