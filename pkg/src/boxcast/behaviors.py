"""Boxes over declared input/output alphabets: construction, marginals, wirings.

A behavior stores the conditional table P(outputs|inputs) densely, with axes
ordered inputs-major in grouping order: first the inputs of the sites of wing
A, then wing B's inputs, then all outputs in the same site order.  For the
four-agent broadcast layout (sites A0, A1, B0, B1 grouped as A0A1|B0B1) the
table is indexed ``[x0, x1, y0, y1, a0, a1, b0, b1]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    ConditioningError,
    DimensionError,
    SignallingError,
    ValidationError,
)
from .tensor import ProbVector

NORMALIZATION_TOL = 1e-10
MARGINAL_TOL = 1e-9
CONDITION_GUARD = 1e-12


@dataclass(frozen=True)
class Scenario:
    """Sites with finite alphabets, partitioned into two spatial wings.

    ``wings`` lists one ``(num_inputs, num_outputs)`` pair per site;
    ``grouping`` assigns every site index to exactly one of the two wings.
    """

    wings: tuple[tuple[int, int], ...]
    grouping: tuple[tuple[int, ...], tuple[int, ...]]

    def __post_init__(self):
        wings = tuple((int(m), int(o)) for m, o in self.wings)
        grouping = tuple(tuple(int(s) for s in cell) for cell in self.grouping)
        object.__setattr__(self, "wings", wings)
        object.__setattr__(self, "grouping", grouping)
        if any(m < 1 or o < 1 for m, o in wings):
            raise ValidationError("alphabet cardinalities must be at least 1")
        if len(grouping) != 2:
            raise ValidationError("grouping must have exactly two wings")
        seen = sorted(s for cell in grouping for s in cell)
        if seen != list(range(len(wings))):
            raise ValidationError("grouping must cover every site exactly once")

    @property
    def num_sites(self) -> int:
        return len(self.wings)

    @cached_property
    def site_order(self) -> tuple[int, ...]:
        return self.grouping[0] + self.grouping[1]

    @cached_property
    def input_shape(self) -> tuple[int, ...]:
        return tuple(self.wings[s][0] for s in self.site_order)

    @cached_property
    def output_shape(self) -> tuple[int, ...]:
        return tuple(self.wings[s][1] for s in self.site_order)

    @property
    def table_shape(self) -> tuple[int, ...]:
        return self.input_shape + self.output_shape

    def input_axis(self, site: int) -> int:
        return self.site_order.index(site)

    def output_axis(self, site: int) -> int:
        return self.num_sites + self.site_order.index(site)


def bipartite_scenario(ma: int = 2, oa: int = 2, mb: int = 2, ob: int = 2) -> Scenario:
    """Two single-site wings: Alice with (ma, oa), Bob with (mb, ob)."""
    return Scenario(((ma, oa), (mb, ob)), ((0,), (1,)))


def broadcast_scenario(m: int = 2, o: int = 2) -> Scenario:
    """Four sites A0, A1, B0, B1 grouped A0A1|B0B1, all with (m, o) alphabets."""
    return Scenario(((m, o),) * 4, ((0, 1), (2, 3)))


@dataclass(frozen=True, eq=False)
class Behavior:
    """Conditional probability table P(outputs|inputs) over a scenario."""

    scenario: Scenario
    table: np.ndarray

    def __post_init__(self):
        arr = np.array(self.table, dtype=float)
        expected = self.scenario.table_shape
        if arr.shape != expected:
            raise DimensionError(f"table shape {arr.shape} does not match scenario {expected}")
        if np.any(arr < -1e-12):
            raise ValidationError(f"negative probabilities (min {arr.min():.3e})")
        np.clip(arr, 0.0, None, out=arr)
        n_in = self.scenario.num_sites
        sums = arr.sum(axis=tuple(range(n_in, arr.ndim)))
        drift = float(np.max(np.abs(sums - 1.0)))
        if drift > NORMALIZATION_TOL:
            raise ValidationError(f"outputs must sum to 1 for every input (drift {drift:.3e})")
        arr.flags.writeable = False
        object.__setattr__(self, "table", arr)

    def setting_distribution(self, inputs: tuple[int, ...]) -> ProbVector:
        """Joint output distribution at one fixed input tuple."""
        if len(inputs) != self.scenario.num_sites:
            raise DimensionError("one input per site required")
        return ProbVector(self.table[tuple(inputs)].ravel())

    def flat(self) -> np.ndarray:
        return self.table.ravel()


def max_norm_diff(p: Behavior, q: Behavior) -> float:
    if p.table.shape != q.table.shape:
        raise DimensionError("behaviors live on different scenarios")
    return float(np.max(np.abs(p.table - q.table)))


def uniform_box(scenario: Scenario) -> Behavior:
    out_size = int(np.prod(scenario.output_shape))
    table = np.full(scenario.table_shape, 1.0 / out_size)
    return Behavior(scenario, table)


def pr_box() -> Behavior:
    """The extremal no-signalling box with a XOR b = x AND y, uniform otherwise."""
    t = np.zeros((2, 2, 2, 2))
    for x, y, a, b in itertools.product(range(2), repeat=4):
        if (a ^ b) == (x & y):
            t[x, y, a, b] = 0.5
    return Behavior(bipartite_scenario(), t)


def deterministic_box(scenario: Scenario, assignment) -> Behavior:
    """Box that maps each joint input to a fixed joint output.

    ``assignment`` is a callable taking the joint input tuple (site order) and
    returning the joint output tuple.
    """
    t = np.zeros(scenario.table_shape)
    for joint_in in itertools.product(*(range(m) for m in scenario.input_shape)):
        joint_out = tuple(assignment(joint_in))
        t[joint_in + joint_out] = 1.0
    return Behavior(scenario, t)


def product(p: Behavior, q: Behavior) -> Behavior:
    """Pair two bipartite boxes into one broadcast-shaped box.

    Pair 0 plays ``p`` and pair 1 plays ``q``; wings are grouped A0A1|B0B1 and
    the resulting table is indexed ``[x0, x1, y0, y1, a0, a1, b0, b1]``.
    """
    for b in (p, q):
        if b.scenario.num_sites != 2:
            raise DimensionError("product expects two bipartite behaviors")
    (ma, oa), (mb, ob) = (p.scenario.wings[s] for s in p.scenario.site_order)
    (mc, oc), (md, od) = (q.scenario.wings[s] for s in q.scenario.site_order)
    sc = Scenario(((ma, oa), (mc, oc), (mb, ob), (md, od)), ((0, 1), (2, 3)))
    table = np.einsum("xyab,uvcd->xuyvacbd", p.table, q.table)
    return Behavior(sc, table)


def is_nonsignalling(b: Behavior, partition=None, tol: float = MARGINAL_TOL):
    """Check that each cell's output marginal ignores the other cell's inputs.

    Returns ``(ok, worst_violation)``.  ``partition`` defaults to the
    scenario's wing bipartition; any bipartition of the sites may be given.
    """
    sc = b.scenario
    if partition is None:
        partition = sc.grouping
    cells = (tuple(partition[0]), tuple(partition[1]))
    if sorted(cells[0] + cells[1]) != list(range(sc.num_sites)):
        raise ValidationError("partition must be a bipartition of the sites")
    worst = 0.0
    for cell, other in (cells, cells[::-1]):
        if not other:
            continue
        out_axes = tuple(sc.output_axis(s) for s in other)
        marg = b.table.sum(axis=out_axes)
        in_axes = tuple(sc.input_axis(s) for s in other)
        hi = marg.max(axis=in_axes)
        lo = marg.min(axis=in_axes)
        worst = max(worst, float(np.max(hi - lo)))
    return worst <= tol, worst


def _require_broadcast_shape(b4: Behavior):
    sc = b4.scenario
    if sc.num_sites != 4 or len(sc.grouping[0]) != 2 or len(sc.grouping[1]) != 2:
        raise DimensionError("expected a four-site behavior with two sites per wing")
    return sc


def marginal_pair(b4: Behavior, pair: int, tol: float = MARGINAL_TOL) -> Behavior:
    """Marginal bipartite box of one pair of a broadcast-shaped behavior.

    Sums out the other pair's outputs and checks that the result does not
    depend on the other pair's inputs; a dependence beyond ``tol`` raises
    :class:`SignallingError` because the marginal would be ill-defined.
    """
    sc = _require_broadcast_shape(b4)
    if pair not in (0, 1):
        raise DimensionError("pair must be 0 or 1")
    keep_a, keep_b = sc.grouping[0][pair], sc.grouping[1][pair]
    drop_a, drop_b = sc.grouping[0][1 - pair], sc.grouping[1][1 - pair]
    marg = b4.table.sum(axis=(sc.output_axis(drop_a), sc.output_axis(drop_b)))
    in_axes = (sc.input_axis(drop_a), sc.input_axis(drop_b))
    dev = float(np.max(marg.max(axis=in_axes) - marg.min(axis=in_axes)))
    if dev > tol:
        raise SignallingError(f"pair marginal depends on remote inputs (drift {dev:.3e})")
    # Evaluate at reference input 0 of the dropped pair.
    marg = np.take(np.take(marg, 0, axis=max(in_axes)), 0, axis=min(in_axes))
    out_sc = Scenario((sc.wings[keep_a], sc.wings[keep_b]), ((0,), (1,)))
    return Behavior(out_sc, marg)


def is_broadcast_of(b4: Behavior, b2: Behavior, tol: float = MARGINAL_TOL) -> bool:
    """True iff both pair marginals of b4 coincide with b2 entrywise."""
    if b2.scenario.num_sites != 2:
        raise DimensionError("reference behavior must be bipartite")
    for pair in (0, 1):
        m = marginal_pair(b4, pair, tol=tol)
        if m.table.shape != b2.table.shape:
            raise DimensionError("pair marginal and reference have different alphabets")
        if np.max(np.abs(m.table - b2.table)) > tol:
            return False
    return True


def condition_on_pair0(
    b4: Behavior, a0: int, b0: int, x0: int, y0: int, x1: int, y1: int
) -> ProbVector:
    """Distribution of pair 1's outputs given pair 0's outputs at fixed inputs.

    Returns P(a1, b1 | x, y, a0, b0) flattened a1-major.  Raises
    :class:`ConditioningError` when the conditioning event has numerically
    zero probability.
    """
    _require_broadcast_shape(b4)
    block = b4.table[x0, x1, y0, y1][a0, :, b0, :]
    mass = float(block.sum())
    if mass <= CONDITION_GUARD:
        raise ConditioningError(
            f"P(a0={a0}, b0={b0} | x0={x0}, y0={y0}) = {mass:.3e} is too small"
        )
    return ProbVector((block / mass).ravel())
