"""Domain types, dataset validation, and equality helpers.

Conventions: eligible treatment units carry dense ids 1..N and are exactly
the rows (in id order) of the treatment/outcome panels. Ineligible treatment
units and connected units live in their own id spaces and appear only in the
bipartite graph. Outcomes span periods 0..T (period 0 is the pre-experiment
baseline); treatments span periods 1..T.

All types are immutable after construction (frozen dataclasses over
read-only arrays) and safe to share across concurrent readers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DESIGN_TAGS = ("staggered", "fixed", "free")
METHODS = ("basic", "network_aware", "cmp")


def _locate(ids: np.ndarray, universe: np.ndarray):
    """Positions of `ids` inside `universe`, plus a found mask."""
    if universe.size == 0:
        return np.zeros(len(ids), dtype=int), np.zeros(len(ids), dtype=bool)
    order = np.argsort(universe, kind="stable")
    sorted_u = universe[order]
    pos = np.searchsorted(sorted_u, ids)
    pos = np.minimum(pos, universe.size - 1)
    found = sorted_u[pos] == ids
    return order[pos], found


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Two-sided interaction structure with eligibility flags and edge weights.

    Edges run from treatment units to connected units; `edge_weight` holds the
    nonnegative interaction weight used when aggregating edge-level outcomes
    to the treatment side.
    """

    treatment_ids: np.ndarray
    eligible: np.ndarray
    connected_ids: np.ndarray
    edge_treatment: np.ndarray
    edge_connected: np.ndarray
    edge_weight: np.ndarray

    def __post_init__(self):
        # Canonical order: units sorted by id, edges by (treatment, connected).
        tid = np.array(self.treatment_ids, dtype=np.int64)
        elig = np.array(self.eligible, dtype=bool)
        if elig.shape != tid.shape:
            raise ValueError("eligible flags must align with treatment_ids")
        unit_order = np.argsort(tid, kind="stable")
        et = np.array(self.edge_treatment, dtype=np.int64)
        ec = np.array(self.edge_connected, dtype=np.int64)
        ew = np.array(self.edge_weight, dtype=float)
        if not (et.shape == ec.shape == ew.shape):
            raise ValueError("edge arrays must have equal length")
        edge_order = np.lexsort((ec, et))
        pairs = [
            ("treatment_ids", tid[unit_order]),
            ("eligible", elig[unit_order]),
            ("connected_ids", np.sort(np.array(self.connected_ids, dtype=np.int64))),
            ("edge_treatment", et[edge_order]),
            ("edge_connected", ec[edge_order]),
            ("edge_weight", ew[edge_order]),
        ]
        for name, arr in pairs:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_treatment_units(self) -> int:
        return self.treatment_ids.size

    @property
    def n_connected_units(self) -> int:
        return self.connected_ids.size

    @property
    def n_edges(self) -> int:
        return self.edge_treatment.size

    @property
    def eligible_ids(self) -> np.ndarray:
        return self.treatment_ids[self.eligible]

    def degrees(self, weighted: bool = False) -> np.ndarray:
        """Edge count (or total edge weight) per treatment unit, in treatment_ids order."""
        pos, found = _locate(self.edge_treatment, self.treatment_ids)
        w = self.edge_weight if weighted else np.ones(self.n_edges)
        return np.bincount(pos[found], weights=w[found], minlength=self.n_treatment_units)


@dataclass(frozen=True, eq=False)
class TreatmentPanel:
    """N x T binary assignment matrix; column t-1 holds period t."""

    assignments: np.ndarray
    design_tag: str = "staggered"

    def __post_init__(self):
        a = np.array(self.assignments, dtype=np.int8)
        if a.ndim != 2:
            raise ValueError("assignments must be a 2-d matrix")
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)
        if self.design_tag not in DESIGN_TAGS:
            raise ValueError(f"unknown design tag {self.design_tag!r}")

    @property
    def n_units(self) -> int:
        return self.assignments.shape[0]

    @property
    def n_periods(self) -> int:
        return self.assignments.shape[1]

    def treated_fraction(self) -> np.ndarray:
        """Treated fraction per period t = 0..T (zero at the baseline period)."""
        frac = self.assignments.mean(axis=0) if self.n_units else np.zeros(self.n_periods)
        return np.concatenate([[0.0], frac])


@dataclass(frozen=True, eq=False)
class OutcomePanel:
    """N x (T+1) real outcome matrix; column t holds period t, starting at the baseline t=0."""

    outcomes: np.ndarray

    def __post_init__(self):
        y = np.array(self.outcomes, dtype=float)
        if y.ndim != 2 or y.shape[1] < 1:
            raise ValueError("outcomes must be a 2-d matrix with at least one period")
        y.setflags(write=False)
        object.__setattr__(self, "outcomes", y)

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_periods(self) -> int:
        return self.outcomes.shape[1]

    @property
    def t_max(self) -> int:
        return self.outcomes.shape[1] - 1


@dataclass(frozen=True, eq=False)
class UnitCovariates:
    """Fixed-length covariate vector per eligible treatment unit (row i = unit i+1)."""

    values: np.ndarray

    def __post_init__(self):
        x = np.array(self.values, dtype=float)
        if x.ndim != 2:
            raise ValueError("covariates must be a 2-d matrix (units x features)")
        x.setflags(write=False)
        object.__setattr__(self, "values", x)

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class ExperimentDataset:
    """The bundle an estimator consumes: panels, optional graph and covariates.

    `pre_period_end` is the last pre-treatment period; deltas compare
    mean outcomes over t > pre_period_end against t <= pre_period_end.
    """

    outcomes: OutcomePanel
    treatments: TreatmentPanel
    pre_period_end: int
    graph: BipartiteGraph | None = None
    covariates: UnitCovariates | None = None

    @property
    def n_units(self) -> int:
        return self.outcomes.n_units

    @property
    def n_periods(self) -> int:
        """Number of experiment periods T (outcomes additionally carry t=0)."""
        return self.treatments.n_periods


class AllocationScenario(enum.Enum):
    """The two counterfactual allocations compared by the total-effect estimand."""

    ALL_TREATED = "all_treated"
    ALL_CONTROL = "all_control"

    def expand(self, n_units: int, n_periods: int) -> TreatmentPanel:
        """Constant 0/1 assignment panel over the eligible units."""
        fill = 1 if self is AllocationScenario.ALL_TREATED else 0
        return TreatmentPanel(np.full((n_units, n_periods), fill, dtype=np.int8), design_tag="fixed")


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimate with percentile bootstrap interval and 5%-level flag."""

    method: str
    point: float
    ci_low: float
    ci_high: float
    significant_5pct: bool
    n_bootstrap: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.ci_low <= self.point <= self.ci_high):
            raise ValueError("confidence interval must contain the point estimate")
        excludes_zero = not (self.ci_low <= 0.0 <= self.ci_high)
        if self.significant_5pct != excludes_zero:
            raise ValueError("significance flag must equal the CI-excludes-zero rule")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "point": self.point,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "significant_5pct": self.significant_5pct,
            "n_bootstrap": self.n_bootstrap,
        }


@dataclass(frozen=True)
class BootstrapConfig:
    """Unit-level nonparametric bootstrap settings shared by the estimators."""

    n_replicates: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")


def _graph_violations(g: BipartiteGraph) -> list[str]:
    out = []
    if len(np.unique(g.treatment_ids)) != g.n_treatment_units:
        out.append("graph.unit_ids: duplicate treatment unit ids")
    if len(np.unique(g.connected_ids)) != g.n_connected_units:
        out.append("graph.unit_ids: duplicate connected unit ids")
    pairs = np.stack([g.edge_treatment, g.edge_connected], axis=1)
    if g.n_edges:
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        for (tid, cid), cnt in zip(uniq[counts > 1], counts[counts > 1]):
            out.append(f"graph.duplicate_edge: ({tid}, {cid}) appears {cnt} times")
    _, found_t = _locate(g.edge_treatment, g.treatment_ids)
    for e in np.flatnonzero(~found_t):
        out.append(f"graph.unknown_treatment_unit: edge {e} references id {g.edge_treatment[e]}")
    _, found_c = _locate(g.edge_connected, g.connected_ids)
    for e in np.flatnonzero(~found_c):
        out.append(f"graph.unknown_connected_unit: edge {e} references id {g.edge_connected[e]}")
    if not g.eligible.any():
        out.append("graph.no_eligible_units: at least one eligible treatment unit required")
    for e in np.flatnonzero(g.edge_weight < 0):
        out.append(f"graph.negative_weight: edge {e} has weight {g.edge_weight[e]}")
    return out


def _panel_violations(w: TreatmentPanel) -> list[str]:
    out = []
    a = w.assignments
    bad = (a != 0) & (a != 1)
    for i, t in zip(*np.nonzero(bad)):
        out.append(f"treatments.binary: entry (unit {i + 1}, t={t + 1}) = {a[i, t]}")
    if w.design_tag == "staggered":
        drops = (np.diff(a.astype(np.int8), axis=1) < 0) & (a[:, :-1] == 1)
        for i, t in zip(*np.nonzero(drops)):
            out.append(f"treatments.monotone: unit {i + 1} reverts to control at t={t + 2}")
    elif w.design_tag == "fixed":
        changed = np.any(a != a[:, :1], axis=1)
        for i in np.flatnonzero(changed):
            out.append(f"treatments.constant: unit {i + 1} changes assignment over time")
    return out


def validate_dataset(d: ExperimentDataset) -> list[str]:
    """Check every type invariant; return one message per violation (empty = valid).

    Violations are data, not failures: callers decide whether to raise.
    """
    out = []
    out.extend(_panel_violations(d.treatments))

    y = d.outcomes.outcomes
    for i, t in zip(*np.nonzero(~np.isfinite(y))):
        out.append(f"outcomes.finite: entry (unit {i + 1}, t={t}) is not finite")
    if d.outcomes.n_units != d.treatments.n_units:
        out.append(
            f"outcomes.shape: {d.outcomes.n_units} outcome rows vs "
            f"{d.treatments.n_units} treatment rows"
        )
    if d.outcomes.n_periods != d.treatments.n_periods + 1:
        out.append(
            f"outcomes.periods: {d.outcomes.n_periods} outcome periods vs "
            f"{d.treatments.n_periods} treatment periods (expected one extra baseline)"
        )

    if not (0 <= d.pre_period_end < d.treatments.n_periods):
        out.append(
            f"dataset.pre_period_end: {d.pre_period_end} outside "
            f"[0, {d.treatments.n_periods - 1}]"
        )

    if d.covariates is not None:
        if d.covariates.n_units != d.outcomes.n_units:
            out.append(
                f"covariates.shape: {d.covariates.n_units} rows for {d.outcomes.n_units} units"
            )
        for i, j in zip(*np.nonzero(~np.isfinite(d.covariates.values))):
            out.append(f"covariates.finite: entry (unit {i + 1}, x_{j + 1}) is not finite")

    if d.graph is not None:
        out.extend(_graph_violations(d.graph))
        expected = np.arange(1, d.outcomes.n_units + 1)
        if not np.array_equal(np.sort(d.graph.eligible_ids), expected):
            out.append(
                "dataset.eligible_ids: graph eligible ids must be exactly 1..N "
                "matching the panel rows"
            )
    return out


def graphs_equal(a: BipartiteGraph | None, b: BipartiteGraph | None) -> bool:
    if a is None or b is None:
        return a is b
    return (
        np.array_equal(a.treatment_ids, b.treatment_ids)
        and np.array_equal(a.eligible, b.eligible)
        and np.array_equal(a.connected_ids, b.connected_ids)
        and np.array_equal(a.edge_treatment, b.edge_treatment)
        and np.array_equal(a.edge_connected, b.edge_connected)
        and np.array_equal(a.edge_weight, b.edge_weight)
    )


def datasets_equal(a: ExperimentDataset, b: ExperimentDataset) -> bool:
    """Field-for-field equality, used by the save/load round-trip contract."""
    if (a.covariates is None) != (b.covariates is None):
        return False
    cov_ok = a.covariates is None or np.array_equal(a.covariates.values, b.covariates.values)
    return (
        np.array_equal(a.outcomes.outcomes, b.outcomes.outcomes)
        and np.array_equal(a.treatments.assignments, b.treatments.assignments)
        and a.treatments.design_tag == b.treatments.design_tag
        and a.pre_period_end == b.pre_period_end
        and cov_ok
        and graphs_equal(a.graph, b.graph)
    )
