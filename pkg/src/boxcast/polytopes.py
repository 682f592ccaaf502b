"""Vertex catalogues and LP membership tests for free sets of boxes.

Three catalogue kinds are supported: local deterministic vertices of a
bipartitioned scenario, the 24 extreme points of the two-input/two-output
no-signalling polytope, and the products of two no-signalling wing catalogues
(the free set for the broadcast scenario).  Membership is decided by a linear
program that either returns convex weights over the vertices or a separating
linear functional extracted from a second LP.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .behaviors import Behavior, Scenario, bipartite_scenario, broadcast_scenario
from .errors import CapacityError, DimensionError, SolverError, ValidationError

DEFAULT_CAP = 10**6
#: Max-norm reconstruction tolerance that decides membership.
MEMBERSHIP_TOL = 1e-7
#: Sparse constraint matrices are used above this many LP coefficients.
_SPARSE_THRESHOLD = 2_000_000


@dataclass(frozen=True, eq=False)
class VertexCatalogue:
    """Finite list of extremal behaviors of a convex set, stored stacked."""

    scenario: Scenario
    tables: np.ndarray  # (n_vertices, *table_shape)
    kind: str

    def __post_init__(self):
        arr = np.asarray(self.tables, dtype=float)
        if arr.shape[1:] != self.scenario.table_shape:
            raise DimensionError("vertex tables do not match the scenario shape")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "tables", arr)

    def __len__(self) -> int:
        return self.tables.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        """Vertices flattened to a (n_vertices, dim) matrix."""
        return self.tables.reshape(len(self), -1)

    def behavior(self, i: int) -> Behavior:
        return Behavior(self.scenario, self.tables[i])

    @property
    def vertices(self) -> tuple[Behavior, ...]:
        return tuple(self.behavior(i) for i in range(len(self)))

    def mixture(self, weights) -> Behavior:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(self),):
            raise DimensionError("one weight per vertex required")
        table = np.tensordot(w, self.tables, axes=1)
        return Behavior(self.scenario, table)


@dataclass(frozen=True, eq=False)
class MembershipResult:
    """Outcome of a convex-hull membership query.

    When ``inside``, ``weights`` reproduces the query from the catalogue
    within ``residual`` in max norm.  Otherwise ``functional`` and
    ``threshold`` give a separating hyperplane: every vertex scores at most
    ``threshold`` while the query scores ``threshold + margin``.
    """

    inside: bool
    weights: np.ndarray | None
    residual: float
    functional: np.ndarray | None
    threshold: float | None
    margin: float


def _deterministic_wing_tables(input_dims, output_dims, cap: int) -> np.ndarray:
    """All deterministic joint-input -> joint-output response tables of a wing."""
    m = int(np.prod(input_dims))
    o = int(np.prod(output_dims))
    n = o**m
    if n > cap:
        raise CapacityError(f"{n} wing strategies exceed the cap of {cap}")
    idx = np.arange(n)
    # Digit k of the strategy index (base o) is the response to joint input k.
    responses = (idx[:, None] // (o ** np.arange(m))[None, :]) % o
    tables = np.zeros((n, m, o))
    tables[np.arange(n)[:, None], np.arange(m)[None, :], responses] = 1.0
    return tables.reshape((n,) + tuple(input_dims) + tuple(output_dims))


def local_deterministic_vertices(scenario: Scenario, cap: int = DEFAULT_CAP) -> VertexCatalogue:
    """Extreme points of the set of boxes local across the wing bipartition.

    Each vertex is a product of one deterministic response per wing, where a
    wing responds with a joint output as an arbitrary function of its joint
    input.
    """
    wing_tables = []
    total = 1
    for cell in scenario.grouping:
        in_dims = tuple(scenario.wings[s][0] for s in cell)
        out_dims = tuple(scenario.wings[s][1] for s in cell)
        t = _deterministic_wing_tables(in_dims, out_dims, cap)
        total *= t.shape[0]
        if total > cap:
            raise CapacityError(f"{total} local vertices exceed the cap of {cap}")
        wing_tables.append(t.reshape(t.shape[0], np.prod(in_dims, dtype=int), -1))
    ta, tb = wing_tables
    na, ma, oa = ta.shape
    nb, mb, ob = tb.shape
    full = np.einsum("nxa,myb->nmxyab", ta, tb)
    full = full.reshape((na * nb,) + scenario.table_shape)
    return VertexCatalogue(scenario, full, "local-deterministic")


@lru_cache(maxsize=None)
def ns_vertices_222() -> VertexCatalogue:
    """The 24 extreme points of the two-input/two-output no-signalling polytope.

    Sixteen local deterministic boxes (a = alpha*x XOR beta, b = gamma*y XOR
    delta) followed by the eight extremal nonlocal boxes with
    P(ab|xy) = 1/2 iff a XOR b = xy XOR alpha*x XOR beta*y XOR gamma.
    """
    tables = np.zeros((24, 2, 2, 2, 2))
    i = 0
    for alpha, beta, gamma, delta in itertools.product(range(2), repeat=4):
        for x, y in itertools.product(range(2), repeat=2):
            a = (alpha * x) ^ beta
            b = (gamma * y) ^ delta
            tables[i, x, y, a, b] = 1.0
        i += 1
    for alpha, beta, gamma in itertools.product(range(2), repeat=3):
        for x, y, a in itertools.product(range(2), repeat=3):
            b = a ^ (x * y) ^ (alpha * x) ^ (beta * y) ^ gamma
            tables[i, x, y, a, b] = 0.5
        i += 1
    return VertexCatalogue(bipartite_scenario(), tables, "ns-222")


def lrns_vertices(
    wing_a: VertexCatalogue, wing_b: VertexCatalogue, cap: int = DEFAULT_CAP
) -> VertexCatalogue:
    """All pairwise products of two wing catalogues, as broadcast-shaped boxes.

    A wing vertex Q(a0, a1 | x0, x1) plays the two sub-agents of one wing; the
    product table is indexed ``[x0, x1, y0, y1, a0, a1, b0, b1]``.
    """
    for cat in (wing_a, wing_b):
        if cat.scenario.num_sites != 2:
            raise DimensionError("wing catalogues must hold two-site behaviors")
    n = len(wing_a) * len(wing_b)
    if n > cap:
        raise CapacityError(f"{n} product vertices exceed the cap of {cap}")
    sa = wing_a.scenario
    sb = wing_b.scenario
    wings = (
        sa.wings[sa.site_order[0]],
        sa.wings[sa.site_order[1]],
        sb.wings[sb.site_order[0]],
        sb.wings[sb.site_order[1]],
    )
    scenario = Scenario(wings, ((0, 1), (2, 3)))
    full = np.einsum("nxXaA,myYbB->nmxXyYaAbB", wing_a.tables, wing_b.tables)
    full = full.reshape((n,) + scenario.table_shape)
    return VertexCatalogue(scenario, full, "lrns-product")


@lru_cache(maxsize=None)
def local_vertices_222() -> VertexCatalogue:
    """The 16 local deterministic vertices of the two-input/two-output scenario."""
    return local_deterministic_vertices(bipartite_scenario())


@lru_cache(maxsize=None)
def lrns_vertices_222() -> VertexCatalogue:
    """The 576 products of no-signalling wing vertices for the broadcast scenario."""
    return lrns_vertices(ns_vertices_222(), ns_vertices_222())


def _normalized_flat(b: Behavior) -> np.ndarray:
    """Flattened table with each per-input block renormalized exactly."""
    n_in = b.scenario.num_sites
    t = np.array(b.table)
    sums = t.sum(axis=tuple(range(n_in, t.ndim)), keepdims=True)
    return (t / sums).ravel()


def membership(
    b: Behavior, catalogue: VertexCatalogue, tol: float = MEMBERSHIP_TOL
) -> MembershipResult:
    """Decide whether a behavior lies in the convex hull of a catalogue.

    Solves the max-norm distance LP ``min t : |V^T w - p| <= t, w in simplex``;
    if the optimum exceeds ``tol`` a second LP produces a separating
    functional with box-bounded coefficients.
    """
    if b.scenario.table_shape != catalogue.scenario.table_shape:
        raise DimensionError("behavior and catalogue live on different scenarios")
    p = _normalized_flat(b)
    vm = catalogue.matrix
    n, dim = vm.shape

    c = np.zeros(n + 1)
    c[-1] = 1.0
    if n * dim > _SPARSE_THRESHOLD:
        vt = sp.csr_matrix(vm.T)
        ones_col = np.ones((dim, 1))
        a_ub = sp.vstack([sp.hstack([vt, -ones_col]), sp.hstack([-vt, -ones_col])]).tocsr()
    else:
        ones_col = np.ones((dim, 1))
        a_ub = np.block([[vm.T, -ones_col], [-vm.T, -ones_col]])
    b_ub = np.concatenate([p, -p])
    a_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * n + [(0, None)],
        method="highs",
    )
    if res.status != 0:
        raise SolverError(f"distance LP failed with status {res.status}: {res.message}")
    w = np.maximum(res.x[:n], 0.0)
    w /= w.sum()
    residual = float(np.max(np.abs(vm.T @ w - p)))
    if residual <= tol:
        return MembershipResult(True, w, residual, None, None, 0.0)

    c2 = np.concatenate([-p, [1.0]])
    a2 = np.hstack([vm, -np.ones((n, 1))])
    res2 = linprog(
        c2,
        A_ub=sp.csr_matrix(a2) if a2.size > _SPARSE_THRESHOLD else a2,
        b_ub=np.zeros(n),
        bounds=[(-1, 1)] * dim + [(None, None)],
        method="highs",
    )
    if res2.status != 0:
        raise SolverError(f"separation LP failed with status {res2.status}: {res2.message}")
    s = res2.x[:dim]
    threshold = float(res2.x[-1])
    margin = float(p @ s - threshold)
    return MembershipResult(False, None, residual, s, threshold, margin)


def is_local_across_wings(b: Behavior, tol: float = MEMBERSHIP_TOL, cap: int = DEFAULT_CAP):
    """Locality test across the wing bipartition without the full vertex product.

    Decomposes the box as a mixture over wing-A deterministic responses with
    arbitrary wing-B conditional blocks whose mass must not depend on wing-B
    inputs.  Equivalent to membership in the local polytope but with
    O(strategies_A * dim_B) unknowns instead of the product count.
    Returns ``(is_local, residual)``.
    """
    sc = b.scenario
    in_a = tuple(sc.wings[s][0] for s in sc.grouping[0])
    out_a = tuple(sc.wings[s][1] for s in sc.grouping[0])
    in_b = tuple(sc.wings[s][0] for s in sc.grouping[1])
    out_b = tuple(sc.wings[s][1] for s in sc.grouping[1])
    ma, oa = int(np.prod(in_a)), int(np.prod(out_a))
    mb, ob = int(np.prod(in_b)), int(np.prod(out_b))
    strat = _deterministic_wing_tables(in_a, out_a, cap).reshape(-1, ma, oa)
    na = strat.shape[0]

    p = _normalized_flat(b).reshape(ma, mb, oa, ob)
    # Unknowns: mu[f, y, b] >= 0 stacked C-order, then the distance t.
    nvar = na * mb * ob + 1

    rows, cols, vals = [], [], []
    # Reconstruction: sum_f strat[f, x, a] * mu[f, y, b] = p[x, y, a, b].
    row = 0
    rhs = []
    for x in range(ma):
        for y in range(mb):
            for a in range(oa):
                for bb in range(ob):
                    for f in range(na):
                        if strat[f, x, a] != 0.0:
                            rows.append(row)
                            cols.append((f * mb + y) * ob + bb)
                            vals.append(1.0)
                    rhs.append(p[x, y, a, bb])
                    row += 1
    n_rec = row
    recon = sp.csr_matrix((vals, (rows, cols)), shape=(n_rec, nvar - 1))
    rhs = np.asarray(rhs)

    a_ub = sp.vstack(
        [
            sp.hstack([recon, -np.ones((n_rec, 1))]),
            sp.hstack([-recon, -np.ones((n_rec, 1))]),
        ]
    ).tocsr()
    b_ub = np.concatenate([rhs, -rhs])

    # Per-strategy mass independent of wing-B input, total mass 1.
    rows2, cols2, vals2 = [], [], []
    row = 0
    for f in range(na):
        for y in range(1, mb):
            for bb in range(ob):
                rows2.append(row)
                cols2.append((f * mb + y) * ob + bb)
                vals2.append(1.0)
                rows2.append(row)
                cols2.append((f * mb + 0) * ob + bb)
                vals2.append(-1.0)
            row += 1
    for f in range(na):
        for bb in range(ob):
            rows2.append(row)
            cols2.append((f * mb + 0) * ob + bb)
            vals2.append(1.0)
    row += 1
    eq = sp.csr_matrix((vals2, (rows2, cols2)), shape=(row, nvar - 1))
    a_eq = sp.hstack([eq, np.zeros((row, 1))]).tocsr()
    b_eq = np.concatenate([np.zeros(row - 1), [1.0]])

    res = linprog(
        np.concatenate([np.zeros(nvar - 1), [1.0]]),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0, None)] * (nvar - 1) + [(0, None)],
        method="highs",
    )
    if res.status != 0:
        raise SolverError(f"locality LP failed with status {res.status}: {res.message}")
    t = float(res.x[-1])
    return t <= tol, t


def random_mixture(catalogue: VertexCatalogue, rng: np.random.Generator, k: int | None = None):
    """Random convex combination of catalogue vertices; returns (behavior, weights)."""
    n = len(catalogue)
    if k is None or k >= n:
        w = rng.dirichlet(np.ones(n))
    else:
        support = rng.choice(n, size=k, replace=False)
        w = np.zeros(n)
        w[support] = rng.dirichlet(np.ones(k))
    return catalogue.mixture(w), w


def random_ns_box(rng: np.random.Generator) -> Behavior:
    """Random no-signalling two-input/two-output box with full support."""
    return random_mixture(ns_vertices_222(), rng)[0]


def random_nonlocal_leaning_ns_box(rng: np.random.Generator, min_weight: float = 0.5) -> Behavior:
    """Random NS box biased toward one extremal nonlocal vertex.

    Plain Dirichlet mixtures of all 24 vertices average the nonlocal corners
    away and are almost always local; mixing one nonlocal vertex at weight at
    least ``min_weight`` with a random local box keeps most draws nonlocal.
    """
    cat = ns_vertices_222()
    v = float(rng.uniform(min_weight, 1.0))
    corner = cat.tables[int(rng.integers(16, 24))]
    local, _ = random_mixture(local_vertices_222(), rng)
    return Behavior(cat.scenario, v * corner + (1.0 - v) * local.table)
