"""Local wirings with shared randomness that expand one box pair into two.

A map is stored in a canonical shared-variable form: a distribution over a
finite hidden variable, plus per-wing pre-processing (choose the inner box's
input from the wing's two inputs) and post-processing (produce the wing's two
outputs from everything the wing saw locally).  Both wings may correlate only
through the hidden variable; there is no cross-wing table by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behaviors import Behavior, Scenario
from .divergence import box_kl
from .errors import DimensionError, ValidationError
from .polytopes import VertexCatalogue, local_deterministic_vertices, membership

STOCHASTIC_TOL = 1e-10
LAMBDA_CAP = 64


def _check_stochastic(table: np.ndarray, out_axes: int, name: str) -> np.ndarray:
    arr = np.array(table, dtype=float)
    if np.any(arr < -1e-12):
        raise ValidationError(f"{name} has negative entries")
    np.clip(arr, 0.0, None, out=arr)
    sums = arr.sum(axis=tuple(range(arr.ndim - out_axes, arr.ndim)))
    if np.max(np.abs(sums - 1.0)) > STOCHASTIC_TOL:
        raise ValidationError(f"{name} columns must sum to 1 (drift {np.max(np.abs(sums-1)):.3e})")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LosrMap:
    """Shared-randomness wiring from one box pair to a broadcast-shaped box.

    Tables (with L the hidden-variable size and binary-by-default alphabets):

    - ``lambda_weights``: (L,) distribution over the hidden variable
    - ``alice_pre``: (L, X0, X1, X) choice of the inner input x
    - ``alice_post``: (L, X0, X1, X, A, A0, A1) production of (a0, a1)
    - ``bob_pre`` / ``bob_post``: same layout with Bob's alphabets
    """

    lambda_weights: np.ndarray
    alice_pre: np.ndarray
    alice_post: np.ndarray
    bob_pre: np.ndarray
    bob_post: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambda_weights, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValidationError("lambda_weights must be a non-empty vector")
        if lam.size > LAMBDA_CAP:
            raise ValidationError(f"hidden-variable size {lam.size} exceeds the cap {LAMBDA_CAP}")
        if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
            raise ValidationError("lambda_weights must be a probability vector")
        lam = lam / lam.sum()
        lam.flags.writeable = False
        object.__setattr__(self, "lambda_weights", lam)
        ap = _check_stochastic(self.alice_pre, 1, "alice_pre")
        bp = _check_stochastic(self.bob_pre, 1, "bob_pre")
        ao = _check_stochastic(self.alice_post, 2, "alice_post")
        bo = _check_stochastic(self.bob_post, 2, "bob_post")
        n = lam.size
        if ap.shape[0] != n or bp.shape[0] != n or ao.shape[0] != n or bo.shape[0] != n:
            raise DimensionError("all tables must share the hidden-variable size")
        if ao.shape[1:4] != (ap.shape[1], ap.shape[2], ap.shape[3]):
            raise DimensionError("alice_post input axes must match alice_pre")
        if bo.shape[1:4] != (bp.shape[1], bp.shape[2], bp.shape[3]):
            raise DimensionError("bob_post input axes must match bob_pre")
        object.__setattr__(self, "alice_pre", ap)
        object.__setattr__(self, "alice_post", ao)
        object.__setattr__(self, "bob_pre", bp)
        object.__setattr__(self, "bob_post", bo)

    @property
    def input_scenario(self) -> Scenario:
        mx, my = self.alice_pre.shape[3], self.bob_pre.shape[3]
        oa, ob = self.alice_post.shape[4], self.bob_post.shape[4]
        return Scenario(((mx, oa), (my, ob)), ((0,), (1,)))

    @property
    def output_scenario(self) -> Scenario:
        wings = (
            (self.alice_pre.shape[1], self.alice_post.shape[5]),
            (self.alice_pre.shape[2], self.alice_post.shape[6]),
            (self.bob_pre.shape[1], self.bob_post.shape[5]),
            (self.bob_pre.shape[2], self.bob_post.shape[6]),
        )
        return Scenario(wings, ((0, 1), (2, 3)))


def apply(m: LosrMap, p: Behavior) -> Behavior:
    """Wire a bipartite box through the map; linear in the box."""
    expected = m.input_scenario.table_shape
    if p.table.shape != expected:
        raise DimensionError(f"box shape {p.table.shape} does not match the map input {expected}")
    table = np.einsum(
        "l,lijx,lpqy,xyab,lijxamn,lpqybst->ijpqmnst",
        m.lambda_weights,
        m.alice_pre,
        m.bob_pre,
        p.table,
        m.alice_post,
        m.bob_post,
        optimize=True,
    )
    return Behavior(m.output_scenario, table)


def _dirichlet_table(rng: np.random.Generator, shape: tuple[int, ...], out_axes: int) -> np.ndarray:
    lead = shape[: len(shape) - out_axes]
    tail = shape[len(shape) - out_axes :]
    flat = rng.dirichlet(np.ones(int(np.prod(tail))), size=int(np.prod(lead)))
    return flat.reshape(lead + tail)


def random_losr(seed, lam: int = 4, kind: str = "generic", sizes=None) -> LosrMap:
    """Dirichlet-sampled map, deterministic per seed.

    ``kind='generic'`` fills every table freely.  ``kind='pairwise'`` wires
    pair 0 from the inner box and pair 1 from the hidden variable alone, so
    each wing image of a product box is a product of per-site boxes; such maps
    keep the free product set inside itself.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if sizes is None:
        sizes = {}
    mx = sizes.get("mx", 2)
    my = sizes.get("my", 2)
    oa = sizes.get("oa", 2)
    ob = sizes.get("ob", 2)
    m0 = sizes.get("m0", 2)
    o0 = sizes.get("o0", 2)
    if kind == "generic":
        alice_pre = _dirichlet_table(rng, (lam, m0, m0, mx), 1)
        bob_pre = _dirichlet_table(rng, (lam, m0, m0, my), 1)
        alice_post = _dirichlet_table(rng, (lam, m0, m0, mx, oa, o0, o0), 2)
        bob_post = _dirichlet_table(rng, (lam, m0, m0, my, ob, o0, o0), 2)
    elif kind == "pairwise":
        pre_a0 = _dirichlet_table(rng, (lam, m0, mx), 1)
        pre_b0 = _dirichlet_table(rng, (lam, m0, my), 1)
        post_a0 = _dirichlet_table(rng, (lam, m0, mx, oa, o0), 1)
        post_a1 = _dirichlet_table(rng, (lam, m0, o0), 1)
        post_b0 = _dirichlet_table(rng, (lam, m0, my, ob, o0), 1)
        post_b1 = _dirichlet_table(rng, (lam, m0, o0), 1)
        alice_pre = np.repeat(pre_a0[:, :, None, :], m0, axis=2)
        bob_pre = np.repeat(pre_b0[:, :, None, :], m0, axis=2)
        alice_post = np.einsum("lixam,ljn->lijxamn", post_a0, post_a1)
        bob_post = np.einsum("lixam,ljn->lijxamn", post_b0, post_b1)
    else:
        raise ValidationError(f"unknown map kind {kind!r}")
    weights = rng.dirichlet(np.ones(lam))
    return LosrMap(weights, alice_pre, alice_post, bob_pre, bob_post)


def identity_broadcast_losr() -> LosrMap:
    """Copy x0/y0 into the inner box and echo its outputs to both sub-agents."""
    lam = np.array([1.0])
    pre = np.zeros((1, 2, 2, 2))
    post = np.zeros((1, 2, 2, 2, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            pre[0, i, j, i] = 1.0
            for x in range(2):
                for a in range(2):
                    post[0, i, j, x, a, a, a] = 1.0
    return LosrMap(lam, pre, post, pre.copy(), post.copy())


def constant_losr(
    wing_a_table: np.ndarray,
    wing_b_table: np.ndarray,
    inner_sizes: tuple[int, int, int, int] = (2, 2, 2, 2),
) -> LosrMap:
    """Discard the inner box and emit a fixed product of two wing boxes.

    Each wing table is a (X0, X1, A0, A1)-shaped no-signalling wing box; the
    map's output is their product for every input behavior with the
    ``inner_sizes = (mx, oa, my, ob)`` alphabets.
    """
    qa = np.asarray(wing_a_table, dtype=float)
    qb = np.asarray(wing_b_table, dtype=float)
    mx, oa, my, ob = inner_sizes
    m0, m1, o0, o1 = qa.shape
    n0, n1, p0, p1 = qb.shape
    lam = np.array([1.0])
    pre_a = np.zeros((1, m0, m1, mx))
    pre_a[0, :, :, 0] = 1.0
    pre_b = np.zeros((1, n0, n1, my))
    pre_b[0, :, :, 0] = 1.0
    post_a = np.zeros((1, m0, m1, mx, oa, o0, o1))
    post_a[0] = np.broadcast_to(qa[:, :, None, None, :, :], (m0, m1, mx, oa, o0, o1))
    post_b = np.zeros((1, n0, n1, my, ob, p0, p1))
    post_b[0] = np.broadcast_to(qb[:, :, None, None, :, :], (n0, n1, my, ob, p0, p1))
    return LosrMap(lam, pre_a, post_a, pre_b, post_b)


def preserves_lrns(
    m: LosrMap,
    lrns_catalogue: VertexCatalogue,
    input_catalogue: VertexCatalogue | None = None,
    tol: float = 1e-7,
):
    """Decide whether the map sends the free input set into the free output set.

    Applies the map to every extreme point of the input set (the bipartite
    local polytope for a single-pair input) and runs membership on each image;
    linearity of :func:`apply` extends the verdict to the whole set.  Returns
    ``(preserves, worst_residual, offending_index)``.
    """
    if input_catalogue is None:
        input_catalogue = local_deterministic_vertices(m.input_scenario)
    worst = 0.0
    for i in range(len(input_catalogue)):
        image = apply(m, input_catalogue.behavior(i))
        res = membership(image, lrns_catalogue, tol=tol)
        if not res.inside:
            return False, res.residual, i
        worst = max(worst, res.residual)
    return True, worst, None


def contractivity_check(m: LosrMap, p: Behavior, q: Behavior, tol: float = 1e-9):
    """Wiring both boxes through the map must not increase their divergence."""
    lhs = box_kl(apply(m, p), apply(m, q)).value
    rhs = box_kl(p, q).value
    if np.isinf(rhs):
        return True, lhs, rhs
    return lhs <= rhs + tol, lhs, rhs
