"""Divergence between boxes and the distance to the local-realistic sets.

The divergence of one box from another is the worst-case (over joint input
settings) classical divergence of the output distributions; the relative
entropy of nonlocality is its infimum over a free set given by a vertex
catalogue.  The minimizer uses entropic mirror descent on the vertex-weight
simplex with a log-sum-exp temperature ladder (the raw objective is a max) and
an epsilon-mixing ladder toward the uniform box (the raw objective can be
infinite at the boundary), plus a coarse grid/projected-gradient optimizer
kept as an independent cross-check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from .behaviors import (
    Behavior,
    condition_on_pair0,
    is_broadcast_of,
    is_nonsignalling,
    marginal_pair,
)
from .errors import ConditioningError, DimensionError, OptimizationError, ValidationError
from .polytopes import MembershipResult, VertexCatalogue, membership
from .tensor import ProbVector, kl_divergence

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class BoxDivergenceReport:
    """Per-setting divergences and their maximum (the box divergence)."""

    value: float
    argmax_setting: tuple[int, ...]
    per_setting: np.ndarray


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL in bits for stacked distributions; +inf rows on support gaps."""
    sup = p > 0.0
    ok = sup & (q > 0.0)
    contrib = np.zeros_like(p)
    contrib[ok] = p[ok] * np.log2(p[ok] / q[ok])
    rows = contrib.sum(axis=1)
    rows[np.any(sup & (q == 0.0), axis=1)] = np.inf
    return rows


def box_kl(p: Behavior, q: Behavior) -> BoxDivergenceReport:
    """Worst-case-over-settings divergence of box p from box q, in bits."""
    if p.scenario.table_shape != q.scenario.table_shape:
        raise DimensionError("boxes live on different scenarios")
    in_shape = p.scenario.input_shape
    n_set = int(np.prod(in_shape))
    pp = p.table.reshape(n_set, -1)
    qq = q.table.reshape(n_set, -1)
    rows = _kl_rows(pp, qq)
    idx = int(np.argmax(rows))
    return BoxDivergenceReport(
        value=float(rows[idx]),
        argmax_setting=tuple(int(i) for i in np.unravel_index(idx, in_shape)),
        per_setting=rows.reshape(in_shape),
    )


def box_kl_sup_oracle(p: Behavior, q: Behavior, samples: int = 10_000, seed: int = 0) -> float:
    """Direct evaluation of the sup over input distributions, on a sampled grid.

    Evaluates the divergence of the input-weighted joints for each sampled
    input distribution (corners of the simplex included) and returns the
    largest value.  Cross-checks the max-over-settings reduction.
    """
    in_shape = p.scenario.input_shape
    n_set = int(np.prod(in_shape))
    rng = np.random.default_rng(seed)
    pis = np.vstack([np.eye(n_set), rng.dirichlet(np.ones(n_set), size=max(0, samples - n_set))])
    pp = p.table.reshape(n_set, -1)
    qq = q.table.reshape(n_set, -1)
    best = 0.0
    for pi in pis:
        joint_p = ProbVector((pi[:, None] * pp).ravel())
        joint_q = ProbVector((pi[:, None] * qq).ravel())
        best = max(best, kl_divergence(joint_p, joint_q))
        if best == np.inf:
            break
    return float(best)


@dataclass(frozen=True)
class ElrConfig:
    """Knobs for the relative-entropy-of-nonlocality minimizer."""

    temps: tuple[float, ...] = (1.0, 0.3, 0.1, 0.03)
    epsilons: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    iters: int = 20_000
    step_scale: float = 0.5
    gap_tol: float = 1e-7
    seed: int = 0
    random_init: bool = False


@dataclass(frozen=True, eq=False)
class ElrResult:
    """Certified-from-above distance to the free set.

    ``value`` equals the box divergence from the returned witness, which
    reconstructs exactly from ``weights`` over the catalogue.
    ``gap_certificate`` is a lower-bound estimate from the smoothed dual, so
    ``value - gap_certificate`` bounds the optimizer's own slack.
    """

    value: float
    witness: Behavior
    weights: np.ndarray
    gap_certificate: float
    ladder: tuple[dict, ...]
    extrapolated: float


def _lower_bound(fval, grad, w, slack):
    """Linearization bound for a convex objective over the simplex."""
    return fval + float(grad.min() - grad @ w) - slack


def _mirror_descent_run(pflat, vmat, uflat, eps, cfg, w0):
    """One epsilon-mixing run across the temperature ladder.

    ``pflat``: (settings, outcomes); ``vmat``: (n_vertices, settings*outcomes).
    Returns (weights, value, lower_bound, iterations_used).
    """
    n_set, n_out = pflat.shape
    nz = np.flatnonzero(pflat.ravel() > 0.0)
    pnz = pflat.ravel()[nz]
    rows = nz // n_out
    vnz = vmat[:, nz]
    unz = uflat.ravel()[nz]

    def kl_by_setting(qnz_flat):
        terms = pnz * np.log2(pnz / qnz_flat)
        return np.bincount(rows, weights=terms, minlength=n_set)

    w = np.array(w0)
    n = w.shape[0]
    used = 0
    per_temp = max(1, cfg.iters // len(cfg.temps))
    scale = 1.0 - eps
    for tau in cfg.temps:
        last = tau == cfg.temps[-1]
        for t in range(1, per_temp + 1):
            used += 1
            qnz = scale * (w @ vnz) + eps * unz
            kl = kl_by_setting(qnz)
            m = kl.max()
            soft = np.exp((kl - m) * (LN2 / tau))
            soft /= soft.sum()
            r = soft[rows] * pnz / qnz
            g = -(scale / LN2) * (vnz @ r)
            gap = float(g @ w - g.min())
            if last and gap < cfg.gap_tol:
                break
            eta = cfg.step_scale / np.sqrt(used)
            shifted = -eta * (g - g.min())
            w = w * np.exp(shifted)
            total = w.sum()
            if not np.isfinite(total) or total <= 0.0:
                raise OptimizationError("mirror descent step left the simplex")
            w /= total

    # Exact objective and certificate at the mixed iterate.
    w_mixed = scale * w + eps / n
    qnz = w_mixed @ vnz
    kl = kl_by_setting(qnz)
    value = float(kl.max())
    # Subgradient bound: restrict softmax weights to near-argmax settings.
    active = kl >= kl.max() - 1e-7
    theta = np.where(active, np.exp((kl - kl.max()) * (LN2 / 1e-3)), 0.0)
    theta /= theta.sum()
    slack = float(kl.max() - kl[active].min())
    r = theta[rows] * pnz / qnz
    g = -(1.0 / LN2) * (vnz @ r)
    lower_mixed = _lower_bound(value, g, w_mixed, slack)
    return w_mixed, value, lower_mixed, used


def relative_entropy_nl(
    p: Behavior, catalogue: VertexCatalogue, cfg: ElrConfig | None = None
) -> ElrResult:
    """Distance (in box divergence) from p to the convex hull of a catalogue.

    Requires p to be non-signalling across the wing bipartition.  The witness
    is always a valid element of the hull, so ``value`` is a certified upper
    bound; ``gap_certificate`` estimates the optimum from below.
    """
    cfg = cfg or ElrConfig()
    ok, worst = is_nonsignalling(p)
    if not ok:
        raise ValidationError(f"input box is signalling across the wings ({worst:.3e})")
    if p.scenario.table_shape != catalogue.scenario.table_shape:
        raise DimensionError("behavior and catalogue live on different scenarios")

    in_shape = p.scenario.input_shape
    n_set = int(np.prod(in_shape))
    pflat = p.table.reshape(n_set, -1)
    n_out = pflat.shape[1]
    vmat = catalogue.matrix
    n = vmat.shape[0]
    uflat = np.full(n_set * n_out, 1.0 / n_out)

    # Members of the hull sit at distance zero; a feasibility LP both detects
    # them and hands back the witness directly, avoiding the mixing floor.
    inside = membership(p, catalogue)
    if inside.inside:
        witness = catalogue.mixture(inside.weights)
        shortcut = box_kl(p, witness).value
        if shortcut < 1e-6:
            run = {
                "epsilon": 0.0,
                "value": float(shortcut),
                "lower_bound": 0.0,
                "iterations": 0,
            }
            return ElrResult(
                value=float(shortcut),
                witness=witness,
                weights=inside.weights,
                gap_certificate=0.0,
                ladder=(run,),
                extrapolated=float(shortcut),
            )

    # The uniform box is the barycenter of each supported catalogue kind, so
    # epsilon-mixing is the same weight-space operation for every kind.
    if cfg.random_init:
        w0 = np.random.default_rng(cfg.seed).dirichlet(np.ones(n))
    else:
        w0 = np.full(n, 1.0 / n)

    k_uniform = None
    ladder = []
    for eps in cfg.epsilons:
        w, value, lower_mixed, used = _mirror_descent_run(pflat, vmat, uflat, eps, cfg, w0)
        if k_uniform is None:
            k_uniform = float(_kl_rows(pflat, uflat.reshape(n_set, n_out)).max())
        lower = max(0.0, (lower_mixed - eps * k_uniform) / (1.0 - eps))
        ladder.append(
            {
                "epsilon": eps,
                "value": value,
                "lower_bound": lower,
                "iterations": used,
                "weights": w,
            }
        )
        w0 = w  # warm start the next, smaller mixing level

    values = [run["value"] for run in ladder]
    if len(values) >= 2:
        e1, e0 = cfg.epsilons[-2], cfg.epsilons[-1]
        extrapolated = values[-1] - (values[-2] - values[-1]) * (e0 / (e1 - e0))
    else:
        extrapolated = values[-1]
    best = min(range(len(ladder)), key=lambda i: ladder[i]["value"])
    weights = ladder[best]["weights"]
    witness = catalogue.mixture(weights)
    certificate = max(run["lower_bound"] for run in ladder)
    ladder_out = tuple(
        {k: v for k, v in run.items() if k != "weights"} for run in ladder
    )
    return ElrResult(
        value=float(ladder[best]["value"]),
        witness=witness,
        weights=weights,
        gap_certificate=float(min(certificate, ladder[best]["value"])),
        ladder=ladder_out,
        extrapolated=float(extrapolated),
    )


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def elr_grid_oracle(
    p: Behavior,
    catalogue: VertexCatalogue,
    samples: int = 100_000,
    seed: int = 0,
    starts: int = 6,
    phases: int = 9,
    phase_iters: int = 700,
) -> float:
    """Independent coarse optimizer: weight-grid sampling plus projected gradient.

    Samples random vertex-weight vectors, keeps the best few as starts, and
    refines each with normalized projected subgradient steps run in phases of
    geometrically shrinking step length, restarting every phase from the
    incumbent.  Gradients average the settings within a shrinking window of
    the maximum, which avoids bouncing between kinks of the max objective.
    Returns the best value found; used as an independent cross-check of
    :func:`relative_entropy_nl` (its objective goes through scipy's rel_entr).
    """
    rng = np.random.default_rng(seed)
    in_shape = p.scenario.input_shape
    n_set = int(np.prod(in_shape))
    pflat = p.table.reshape(n_set, -1)
    n_out = pflat.shape[1]
    vmat = catalogue.matrix
    n = vmat.shape[0]
    v3 = vmat.reshape(n, n_set, n_out)
    sup = pflat > 0

    def rows_at(w):
        # A vanishing uniform admixture keeps the evaluation finite on faces.
        q = ((1.0 - 1e-9) * w @ vmat + 1e-9 / n_out).reshape(n_set, n_out)
        return rel_entr(pflat, q).sum(axis=1) / LN2, q

    half = samples // 2
    batch = np.vstack(
        [
            rng.dirichlet(np.ones(n), size=half),
            rng.dirichlet(np.full(n, 0.05), size=samples - half),
        ]
    )
    vals = []
    for i in range(0, batch.shape[0], 4096):
        q = (batch[i : i + 4096] @ vmat).reshape(-1, n_set, n_out)
        vals.append(rel_entr(pflat[None, :, :], q).sum(axis=2).max(axis=1) / LN2)
    vals = np.concatenate(vals)
    order = np.argsort(vals)[:starts]
    best = float(vals[order[0]])
    best_w = batch[order[0]].copy()

    ratios = np.zeros_like(pflat)
    for si in order:
        w = batch[si].copy()
        for phase in range(phases):
            step = 0.02 * 0.4**phase
            window = max(1e-7, 0.02 * 0.4**phase)
            for _ in range(phase_iters):
                rows, q = rows_at(w)
                fw = float(rows.max())
                if fw < best:
                    best, best_w = fw, w.copy()
                active = rows >= fw - window
                theta = np.where(active, rows - (fw - window), 0.0)
                theta /= theta.sum()
                ratios[:] = 0.0
                ratios[sup] = pflat[sup] / np.maximum(q[sup], 1e-300)
                g = -np.einsum("nso,so->n", v3, theta[:, None] * ratios) / LN2
                gn = float(np.sqrt(g @ g))
                if gn <= 0.0:
                    break
                w = _project_simplex(w - (step / gn) * g)
            w = best_w.copy()
    rows, _ = rows_at(best_w)
    return float(rows.max())


def chain_rule_box_sides(
    p4: Behavior, q4: Behavior, inputs: tuple[int, int, int, int]
) -> tuple[float, float]:
    """Both sides of the divergence chain rule at one joint input.

    Returns ``(joint, split)``: the joint divergence at the fixed inputs, and
    the pair-0 marginal divergence plus the average divergence of the pair-1
    conditionals.  Both boxes must be non-signalling across the pair split so
    the marginal and the conditionals are well-defined.
    """
    x0, x1, y0, y1 = inputs
    lhs = kl_divergence(
        p4.setting_distribution((x0, x1, y0, y1)), q4.setting_distribution((x0, x1, y0, y1))
    )
    pm = marginal_pair(p4, 0)
    qm = marginal_pair(q4, 0)
    term1 = kl_divergence(pm.setting_distribution((x0, y0)), qm.setting_distribution((x0, y0)))
    term2 = 0.0
    oa, ob = pm.scenario.output_shape
    for a0, b0 in itertools.product(range(oa), range(ob)):
        weight = float(pm.table[x0, y0, a0, b0])
        if weight <= 1e-300:
            continue
        pc = condition_on_pair0(p4, a0, b0, x0, y0, x1, y1)
        try:
            qc = condition_on_pair0(q4, a0, b0, x0, y0, x1, y1)
        except Exception:
            term2 = float("inf")
            break
        term2 += weight * kl_divergence(pc, qc)
    return lhs, term1 + term2


def verify_chain_rule_box(p4: Behavior, q4: Behavior, inputs: tuple[int, int, int, int]) -> float:
    """Residual of the divergence chain rule; 0.0 when both sides are infinite."""
    lhs, rhs = chain_rule_box_sides(p4, q4, inputs)
    if np.isinf(lhs) and np.isinf(rhs):
        return 0.0
    return float(abs(lhs - rhs))


def _conditional_behavior(b4: Behavior, a0: int, b0: int, x0: int, y0: int) -> Behavior:
    """Pair-1 box conditioned on pair-0 data, as a bipartite behavior over (x1, y1)."""
    sc = b4.scenario
    m1 = sc.wings[sc.grouping[0][1]][0]
    n1 = sc.wings[sc.grouping[1][1]][0]
    o1 = sc.wings[sc.grouping[0][1]][1]
    p1 = sc.wings[sc.grouping[1][1]][1]
    table = np.zeros((m1, n1, o1, p1))
    for x1, y1 in itertools.product(range(m1), range(n1)):
        cond = condition_on_pair0(b4, a0, b0, x0, y0, x1, y1)
        table[x1, y1] = cond.weights.reshape(o1, p1)
    from .behaviors import bipartite_scenario

    return Behavior(bipartite_scenario(m1, o1, n1, p1), table)


@dataclass(frozen=True, eq=False)
class ConditionalBoxReport:
    """Joint report of the three conditional-structure checks.

    For a non-signalling box with a nonlocal pair-1 marginal: every pair-0
    input admits a positively-weighted conditioning event whose pair-1
    conditional is nonlocal.  For a free-set member: every conditional is
    local.  Combining both: the conditional divergence term of the chain rule
    is strictly positive for every pair-0 input.
    """

    marginal_nonlocal: bool
    nonlocal_conditional_found: dict
    nonlocal_conditional_ok: bool
    all_conditionals_local: bool
    conditionals_checked: int
    conditional_worst_residual: float
    conditional_divergence_min: float
    conditional_divergence_ok: bool


def conditional_box_checks(
    p4: Behavior,
    q4: Behavior,
    local_catalogue: VertexCatalogue,
    lrns_catalogue: VertexCatalogue,
    weight_floor: float = 1e-12,
) -> ConditionalBoxReport:
    """Run the conditional-structure checks behind the broadcast dilation bound."""
    q_mem = membership(q4, lrns_catalogue)
    if not q_mem.inside:
        raise ValidationError("reference box is not in the free product set")
    ok, worst = is_nonsignalling(p4)
    if not ok:
        raise ValidationError(f"first box is signalling across the wings ({worst:.3e})")

    p_marg1 = marginal_pair(p4, 1)
    marg_mem = membership(p_marg1, local_catalogue)
    marginal_nonlocal = not marg_mem.inside

    sc = p4.scenario
    m0 = sc.wings[sc.grouping[0][0]][0]
    n0 = sc.wings[sc.grouping[1][0]][0]
    o0 = sc.wings[sc.grouping[0][0]][1]
    p0 = sc.wings[sc.grouping[1][0]][1]
    pm = marginal_pair(p4, 0)

    found: dict = {}
    if marginal_nonlocal:
        for x0, y0 in itertools.product(range(m0), range(n0)):
            hit = None
            for a0, b0 in itertools.product(range(o0), range(p0)):
                if pm.table[x0, y0, a0, b0] <= weight_floor:
                    continue
                cond = _conditional_behavior(p4, a0, b0, x0, y0)
                if not membership(cond, local_catalogue).inside:
                    hit = (a0, b0)
                    break
            found[(x0, y0)] = hit
        b1_ok = all(v is not None for v in found.values())
    else:
        b1_ok = True  # vacuous: hypothesis not met

    checked = 0
    worst_res = 0.0
    all_local = True
    qm = marginal_pair(q4, 0)
    for x0, y0 in itertools.product(range(m0), range(n0)):
        for a0, b0 in itertools.product(range(o0), range(p0)):
            if qm.table[x0, y0, a0, b0] <= weight_floor:
                continue
            cond = _conditional_behavior(q4, a0, b0, x0, y0)
            res = membership(cond, local_catalogue)
            checked += 1
            worst_res = max(worst_res, res.residual)
            if not res.inside:
                all_local = False

    div_min = float("inf")
    if marginal_nonlocal:
        m1 = sc.wings[sc.grouping[0][1]][0]
        n1 = sc.wings[sc.grouping[1][1]][0]
        for x0, y0 in itertools.product(range(m0), range(n0)):
            best = 0.0
            for x1, y1 in itertools.product(range(m1), range(n1)):
                total = 0.0
                for a0, b0 in itertools.product(range(o0), range(p0)):
                    weight = float(pm.table[x0, y0, a0, b0])
                    if weight <= weight_floor:
                        continue
                    pc = condition_on_pair0(p4, a0, b0, x0, y0, x1, y1)
                    try:
                        qc = condition_on_pair0(q4, a0, b0, x0, y0, x1, y1)
                    except ConditioningError:
                        # The reference assigns no mass to this event while the
                        # first box does: the term is infinite, hence positive.
                        total = float("inf")
                        break
                    total += weight * kl_divergence(pc, qc)
                best = max(best, total)
            div_min = min(div_min, best)
        b3_ok = div_min > 0.0
    else:
        b3_ok = True

    return ConditionalBoxReport(
        marginal_nonlocal=marginal_nonlocal,
        nonlocal_conditional_found=found,
        nonlocal_conditional_ok=b1_ok,
        all_conditionals_local=all_local,
        conditionals_checked=checked,
        conditional_worst_residual=worst_res,
        conditional_divergence_min=float(div_min) if marginal_nonlocal else 0.0,
        conditional_divergence_ok=b3_ok,
    )


@dataclass(frozen=True, eq=False)
class BroadcastGapReport:
    """Two free-set distances and their difference, with slack bookkeeping."""

    elr_broadcast: ElrResult
    elr_marginal: ElrResult
    gap: float
    combined_slack: float
    gap_certified: bool


def broadcast_gap(
    p4: Behavior,
    p2: Behavior,
    lrns_catalogue: VertexCatalogue,
    local_catalogue: VertexCatalogue,
    cfg: ElrConfig | None = None,
) -> BroadcastGapReport:
    """Distance growth from a bipartite box to one of its broadcasts.

    Preconditions: ``p4`` must actually broadcast ``p2`` and ``p2`` must be
    nonlocal.  The gap is certified only when it exceeds the sum of both
    optimizer slack estimates.
    """
    if not is_broadcast_of(p4, p2):
        raise ValidationError("first box is not a broadcasting of the second")
    if membership(p2, local_catalogue).inside:
        raise ValidationError("marginal box is local; the dilation bound needs a nonlocal box")
    elr4 = relative_entropy_nl(p4, lrns_catalogue, cfg)
    elr2 = relative_entropy_nl(p2, local_catalogue, cfg)
    gap = elr4.value - elr2.value
    slack = (elr4.value - elr4.gap_certificate) + (elr2.value - elr2.gap_certificate)
    return BroadcastGapReport(
        elr_broadcast=elr4,
        elr_marginal=elr2,
        gap=float(gap),
        combined_slack=float(slack),
        gap_certified=bool(gap > slack),
    )
