"""Named property checks over every module, runnable as one suite.

Each check returns a dict with at least ``name``, ``ok``, and some numeric
details.  The runner seeds each check deterministically from the master seed,
scales instance counts by a factor (minimum one instance), and aggregates
pass/fail counts.  A ``tamper`` hook deliberately corrupts one named check so
the suite's failure reporting can be exercised end to end.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import assemblages as am
from . import behaviors as bh
from . import divergence as dv
from . import losr as lo
from . import polytopes as pt
from .quantum import (
    apply_channel,
    measurement_map,
    quantum_relative_entropy,
    random_cptp,
    random_density,
    random_povm,
    sic_povm_qubit,
)
from .tensor import JointTable, ProbVector, chain_rule_split, kl_divergence


def _count(n: int, scale: float) -> int:
    return max(1, int(round(n * scale)))


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(tag,)))


def _random_joint(rng, shape=(3, 4)) -> JointTable:
    w = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    return JointTable(w)


def check_chain_rule_identity(seed, scale, tamper=None):
    rng = _rng(seed, 1)
    n = _count(200, scale)
    worst = 0.0
    for _ in range(n):
        p = _random_joint(rng)
        q = _random_joint(rng)
        marginal, conditional = chain_rule_split(p, q)
        total = kl_divergence(p.flatten(), q.flatten())
        worst = max(worst, abs(marginal + conditional - total))
    return {"name": "tensor-chain-rule-identity", "ok": worst <= 1e-10, "instances": n, "worst": worst}


def check_kl_properties(seed, scale, tamper=None):
    rng = _rng(seed, 2)
    n = _count(200, scale)
    ok = True
    for _ in range(n):
        p = ProbVector(rng.dirichlet(np.ones(5)))
        q = ProbVector(rng.dirichlet(np.ones(5)))
        ok &= kl_divergence(p, q) >= 0.0
    same = ProbVector([0.3, 0.7])
    ok &= kl_divergence(same, same) == 0.0
    a = ProbVector([0.9, 0.1])
    b = ProbVector([0.5, 0.5])
    asym = abs(kl_divergence(a, b) - kl_divergence(b, a))
    ok &= asym > 1e-3
    return {"name": "tensor-kl-properties", "ok": bool(ok), "instances": n, "asymmetry": asym}


def check_product_marginals(seed, scale, tamper=None):
    rng = _rng(seed, 3)
    n = _count(50, scale)
    worst = 0.0
    recon_worst = 0.0
    for _ in range(n):
        p = pt.random_ns_box(rng)
        q = pt.random_ns_box(rng)
        b4 = bh.product(p, q)
        worst = max(worst, bh.max_norm_diff(bh.marginal_pair(b4, 0), p))
        worst = max(worst, bh.max_norm_diff(bh.marginal_pair(b4, 1), q))
        # conditional reconstruction at one random input
        x0, x1, y0, y1 = (int(rng.integers(2)) for _ in range(4))
        pm = bh.marginal_pair(b4, 0)
        recon = np.zeros((2, 2, 2, 2))
        for a0, b0 in itertools.product(range(2), range(2)):
            w = pm.table[x0, y0, a0, b0]
            if w <= 1e-12:
                continue
            cond = bh.condition_on_pair0(b4, a0, b0, x0, y0, x1, y1)
            recon[a0, :, b0, :] = w * cond.weights.reshape(2, 2)
        recon_worst = max(recon_worst, float(np.max(np.abs(recon - b4.table[x0, x1, y0, y1]))))
    return {
        "name": "behavior-product-marginals",
        "ok": worst <= 1e-12 and recon_worst <= 1e-10,
        "instances": n,
        "marginal_worst": worst,
        "reconstruction_worst": recon_worst,
    }


def check_polytope_catalogues(seed, scale, tamper=None):
    c16 = pt.local_vertices_222()
    c24 = pt.ns_vertices_222()
    c576 = pt.lrns_vertices_222()
    ok = len(c16) == 16 and len(c24) == 24 and len(c576) == 576
    ns_worst = 0.0
    for i in range(len(c24)):
        passed, dev = bh.is_nonsignalling(c24.behavior(i))
        ok &= passed
        ns_worst = max(ns_worst, dev)
    for i in range(16, 24):
        ok &= not pt.membership(c24.behavior(i), c16).inside
    pr = bh.pr_box()
    ok &= bh.max_norm_diff(pr, c24.behavior(16)) <= 1e-12
    return {"name": "polytope-catalogues", "ok": bool(ok), "ns_worst": ns_worst}


def check_membership_soundness(seed, scale, tamper=None):
    rng = _rng(seed, 4)
    n = _count(500, scale)
    c576 = pt.lrns_vertices_222()
    c16 = pt.local_vertices_222()
    worst = 0.0
    inside_all = True
    for i in range(n):
        cat = c576 if i % 2 == 0 else c16
        b, _ = pt.random_mixture(cat, rng, k=int(rng.integers(2, 12)))
        res = pt.membership(b, cat)
        inside_all &= res.inside
        worst = max(worst, res.residual)
    pr = bh.pr_box()
    sep = pt.membership(pr, c16)
    sep_ok = (not sep.inside) and sep.margin >= pt.MEMBERSHIP_TOL / 2
    return {
        "name": "membership-soundness-completeness",
        "ok": bool(inside_all and worst <= 1e-7 and sep_ok),
        "instances": n,
        "worst_residual": worst,
        "separation_margin": sep.margin,
    }


def check_box_kl_basics(seed, scale, tamper=None):
    rng = _rng(seed, 5)
    pr = bh.pr_box()
    uni = bh.uniform_box(pr.scenario)
    rep = dv.box_kl(pr, uni)
    ok = abs(rep.value - 1.0) <= 1e-12
    ok &= bool(np.all(np.abs(rep.per_setting - 1.0) <= 1e-12))
    p = pt.random_ns_box(rng)
    q = pt.random_ns_box(rng)
    direct = dv.box_kl(p, q).value
    oracle = dv.box_kl_sup_oracle(p, q, samples=_count(10_000, scale), seed=seed)
    ok &= abs(direct - oracle) <= 1e-9
    ok &= dv.box_kl(p, p).value <= 1e-12
    return {
        "name": "box-kl-basics",
        "ok": bool(ok),
        "pr_vs_uniform": rep.value,
        "grid_gap": abs(direct - oracle),
    }


def check_box_kl_contractivity(seed, scale, tamper=None):
    rng = _rng(seed, 6)
    n = _count(200, scale)
    worst = -np.inf
    ok = True
    for i in range(n):
        kind = "generic" if i % 2 == 0 else "pairwise"
        m = lo.random_losr(_rng(seed, 600 + i), kind=kind)
        p = pt.random_ns_box(rng)
        q = pt.random_ns_box(rng)
        passed, lhs, rhs = lo.contractivity_check(m, p, q)
        ok &= passed
        if np.isfinite(rhs):
            worst = max(worst, lhs - rhs)
    return {"name": "box-kl-contractivity", "ok": bool(ok), "instances": n, "worst_excess": worst}


def check_chain_rule_box(seed, scale, tamper=None):
    rng = _rng(seed, 7)
    n = _count(500, scale)
    worst = 0.0
    for i in range(n):
        k = int(rng.integers(1, 4))
        ws = rng.dirichlet(np.ones(k))
        p4 = np.zeros((2,) * 8)
        q4 = np.zeros((2,) * 8)
        for w in ws:
            p4 += w * bh.product(pt.random_ns_box(rng), pt.random_ns_box(rng)).table
        for w in rng.dirichlet(np.ones(k)):
            q4 += w * bh.product(pt.random_ns_box(rng), pt.random_ns_box(rng)).table
        bp = bh.Behavior(bh.broadcast_scenario(), p4)
        bq = bh.Behavior(bh.broadcast_scenario(), q4)
        inputs = tuple(int(rng.integers(2)) for _ in range(4))
        if tamper == "chain-rule-box" and i == 0:
            # Negative control: evaluate the two sides against inconsistent
            # references so the identity visibly breaks.
            qt = bh.Behavior(bh.broadcast_scenario(), 0.999 * q4 + 0.001 / 16.0)
            lhs, _ = dv.chain_rule_box_sides(bp, bq, inputs)
            _, rhs = dv.chain_rule_box_sides(bp, qt, inputs)
            res = abs(lhs - rhs)
        else:
            res = dv.verify_chain_rule_box(bp, bq, inputs)
        if np.isfinite(res):
            worst = max(worst, res)
    return {"name": "chain-rule-box", "ok": worst <= 1e-10, "instances": n, "worst": worst}


def check_elr_zero_on_members(seed, scale, tamper=None):
    rng = _rng(seed, 8)
    n = _count(10, scale)
    c576 = pt.lrns_vertices_222()
    c16 = pt.local_vertices_222()
    worst = 0.0
    for i in range(n):
        cat = c576 if i % 2 == 0 else c16
        b, _ = pt.random_mixture(cat, rng, k=int(rng.integers(2, 8)))
        worst = max(worst, dv.relative_entropy_nl(b, cat).value)
    worst = max(worst, dv.relative_entropy_nl(bh.uniform_box(bh.bipartite_scenario()), c16).value)
    worst = max(worst, dv.relative_entropy_nl(c16.behavior(3), c16).value)
    return {"name": "elr-zero-on-members", "ok": worst <= 1e-6, "instances": n, "worst": worst}


def check_elr_pr_two_optimizers(seed, scale, tamper=None):
    c16 = pt.local_vertices_222()
    pr = bh.pr_box()
    res = dv.relative_entropy_nl(pr, c16)
    oracle = dv.elr_grid_oracle(pr, c16, samples=_count(100_000, scale), seed=seed)
    gap = abs(res.value - oracle)
    analytic = float(np.log2(4.0 / 3.0))
    return {
        "name": "elr-pr-two-optimizers",
        "ok": bool(res.value > 0.1 and gap <= 1e-3 and abs(res.value - analytic) <= 5e-4),
        "value": res.value,
        "oracle": oracle,
        "analytic": analytic,
        "optimizer_gap": gap,
    }


def check_elr_monotone_losr(seed, scale, tamper=None):
    rng = _rng(seed, 9)
    n = _count(50, scale)
    c576 = pt.lrns_vertices_222()
    c16 = pt.local_vertices_222()
    worst = -np.inf
    verified = 0
    for i in range(n):
        m = lo.random_losr(_rng(seed, 900 + i), kind="pairwise")
        preserves, _, _ = lo.preserves_lrns(m, c576)
        if not preserves:
            continue
        verified += 1
        p = pt.random_nonlocal_leaning_ns_box(rng)
        pre = dv.relative_entropy_nl(p, c16).value
        img = dv.relative_entropy_nl(lo.apply(m, p), c576).value
        worst = max(worst, img - pre)
    return {
        "name": "elr-monotone-losr",
        "ok": bool(verified == n and worst <= 2e-3),
        "instances": n,
        "verified_maps": verified,
        "worst_increase": worst,
    }


def check_elr_restart_stability(seed, scale, tamper=None):
    c16 = pt.local_vertices_222()
    pr = bh.pr_box()
    n = max(2, _count(10, scale))
    vals = []
    for i in range(n):
        cfg = dv.ElrConfig(random_init=True, seed=seed + i)
        vals.append(dv.relative_entropy_nl(pr, c16, cfg).value)
    spread = max(vals) - min(vals)
    return {
        "name": "elr-restart-stability",
        "ok": spread <= 1e-4,
        "restarts": n,
        "spread": spread,
    }


def check_conditional_structure(seed, scale, tamper=None):
    rng = _rng(seed, 10)
    n = _count(20, scale)
    c16 = pt.local_vertices_222()
    c576 = pt.lrns_vertices_222()
    pr = bh.pr_box()
    p4 = bh.product(pr, pr)
    checked = 0
    all_local = True
    worst = 0.0
    report = None
    for _ in range(n):
        q4, _ = pt.random_mixture(c576, rng, k=int(rng.integers(3, 20)))
        report = dv.conditional_box_checks(p4, q4, c16, c576)
        checked += report.conditionals_checked
        all_local &= report.all_conditionals_local
        worst = max(worst, report.conditional_worst_residual)
    ok = (
        all_local
        and report is not None
        and report.marginal_nonlocal
        and report.nonlocal_conditional_ok
        and report.conditional_divergence_ok
    )
    return {
        "name": "conditional-structure",
        "ok": bool(ok),
        "mixtures": n,
        "conditionals_checked": checked,
        "worst_residual": worst,
        "divergence_min": report.conditional_divergence_min if report else None,
    }


def check_broadcast_gap(seed, scale, tamper=None):
    c16 = pt.local_vertices_222()
    c576 = pt.lrns_vertices_222()
    pr = bh.pr_box()
    p4 = bh.product(pr, pr)
    rep = dv.broadcast_gap(p4, pr, c576, c16)
    oracle4 = dv.elr_grid_oracle(p4, c576, samples=_count(100_000, scale), seed=seed)
    oracle2 = dv.elr_grid_oracle(pr, c16, samples=_count(100_000, scale), seed=seed)
    agree = max(abs(rep.elr_broadcast.value - oracle4), abs(rep.elr_marginal.value - oracle2))
    ok = rep.gap > 2e-3 and rep.gap_certified and agree <= 1e-3
    return {
        "name": "broadcast-gap-demo",
        "ok": bool(ok),
        "elr_broadcast": rep.elr_broadcast.value,
        "elr_marginal": rep.elr_marginal.value,
        "gap": rep.gap,
        "combined_slack": rep.combined_slack,
        "oracle_agreement": agree,
    }


def check_losr_linearity(seed, scale, tamper=None):
    rng = _rng(seed, 11)
    n = _count(20, scale)
    worst = 0.0
    for i in range(n):
        m = lo.random_losr(_rng(seed, 1100 + i), kind="generic" if i % 2 else "pairwise")
        p = pt.random_ns_box(rng)
        q = pt.random_ns_box(rng)
        alpha = float(rng.uniform())
        mix = bh.Behavior(p.scenario, alpha * p.table + (1 - alpha) * q.table)
        lhs = lo.apply(m, mix).table
        rhs = alpha * lo.apply(m, p).table + (1 - alpha) * lo.apply(m, q).table
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return {"name": "losr-linearity", "ok": worst <= 1e-12, "instances": n, "worst": worst}


def check_losr_locality_preservation(seed, scale, tamper=None):
    n = _count(3, scale)
    c16 = pt.local_vertices_222()
    ok = True
    worst = 0.0
    for i in range(n):
        m = lo.random_losr(_rng(seed, 1200 + i), kind="generic" if i % 2 else "pairwise")
        for v in range(len(c16)):
            img = lo.apply(m, c16.behavior(v))
            is_loc, res = pt.is_local_across_wings(img)
            ok &= is_loc
            worst = max(worst, res)
    return {"name": "losr-locality-preservation", "ok": bool(ok), "maps": n, "worst_residual": worst}


def check_losr_pair_ns_preservation(seed, scale, tamper=None):
    rng = _rng(seed, 12)
    n = _count(20, scale)
    ok = True
    worst = 0.0
    for i in range(n):
        m = lo.random_losr(_rng(seed, 1300 + i), kind="pairwise")
        img = lo.apply(m, pt.random_ns_box(rng))
        passed, dev = bh.is_nonsignalling(img, partition=((0, 2), (1, 3)))
        ok &= passed
        worst = max(worst, dev)
    return {"name": "losr-pair-ns-preservation", "ok": bool(ok), "instances": n, "worst": worst}


def check_quantum_divergence(seed, scale, tamper=None):
    rng = _rng(seed, 13)
    n = _count(200, scale)
    worst = -np.inf
    ok = True
    for i in range(n):
        d = 2 + (i % 3)
        rho = random_density(rng, d)
        sigma = random_density(rng, d)
        base = quantum_relative_entropy(rho, sigma)
        ok &= base >= 0.0
        if i % 2 == 0:
            ch = random_cptp(rng, d, d)
            lhs = quantum_relative_entropy(apply_channel(ch, rho), apply_channel(ch, sigma))
        else:
            fmap = measurement_map(random_povm(rng, d, d + 1))
            lhs = quantum_relative_entropy(fmap(rho), fmap(sigma))
        worst = max(worst, lhs - base)
        ok &= lhs <= base + 1e-8
    same = random_density(rng, 3)
    ok &= quantum_relative_entropy(same, same) <= 1e-11
    return {"name": "quantum-divergence-monotonicity", "ok": bool(ok), "instances": n, "worst_excess": worst}


def check_piani_inequality(seed, scale, tamper=None):
    rng = _rng(seed, 14)
    n = _count(100, scale)
    sic = sic_povm_qubit()
    ok = True
    worst = -np.inf
    for _ in range(n):
        rho = random_density(rng, 4)
        sigma = random_density(rng, 4)
        lhs, t1, t2, holds = am.piani_inequality_check(rho, sigma, sic, (2, 2))
        ok &= holds
        if np.isfinite(lhs) and np.isfinite(t1 + t2):
            worst = max(worst, (t1 + t2) - lhs)
    return {"name": "piani-inequality", "ok": bool(ok), "instances": n, "worst_excess": worst}


def check_assemblage_kl(seed, scale, tamper=None):
    rng = _rng(seed, 15)
    n = _count(20, scale)
    ok = True
    worst_gap = 0.0
    for _ in range(n):
        a1 = am.random_assemblage(rng)
        a2 = am.random_assemblage(rng)
        val, _, _ = am.assemblage_kl(a1, a2)
        oracle = am.assemblage_kl_grid_oracle(a1, a2, samples=_count(1000, scale), seed=seed)
        worst_gap = max(worst_gap, abs(val - oracle))
        ok &= abs(val - oracle) <= 1e-9
        same, _, _ = am.assemblage_kl(a1, a1)
        ok &= same <= 1e-10
    return {"name": "assemblage-kl-grid", "ok": bool(ok), "instances": n, "worst_gap": worst_gap}


def check_steering_classification(seed, scale, tamper=None):
    low = am.is_unsteerable(am.werner_assemblage(0.3))
    high = am.is_unsteerable(am.werner_assemblage(0.9))
    ok = low.found and low.residual <= 1e-6
    ok &= (not high.found) and high.functional is not None and high.functional.violated
    threshold = 1.0 / np.sqrt(2.0)
    scan_ok = True
    flips = []
    for v in np.arange(0.05, 0.96, 0.05):
        res = am.is_unsteerable(am.werner_assemblage(float(v)))
        if v < threshold - 0.05:
            scan_ok &= res.found
        elif v > threshold + 0.05:
            scan_ok &= not res.found
        flips.append((round(float(v), 2), res.found))
    return {
        "name": "steering-classification",
        "ok": bool(ok and scan_ok),
        "low_residual": low.residual,
        "high_residual": high.residual,
        "scan": flips,
    }


def check_unsteerable_closure(seed, scale, tamper=None):
    rng = _rng(seed, 16)
    n = _count(50, scale)
    ok = True
    worst = 0.0
    for i in range(n):
        v = float(rng.uniform(0.0, 0.6))
        asm = am.werner_assemblage(v) if i % 2 else am.random_lhs_assemblage(rng)
        kind = "pairwise" if i % 2 else "generic"
        m = am.random_losr_assemblage_map(_rng(seed, 1600 + i), kind=kind)
        img = am.apply_losr_assemblage(m, asm)
        res = am.is_urns(img) if kind == "pairwise" else am.is_unsteerable_joint(img)
        ok &= res.found
        worst = max(worst, res.residual)
    return {"name": "unsteerable-closure", "ok": bool(ok), "instances": n, "worst_residual": worst}


def check_ea_unsteerable_zero(seed, scale, tamper=None):
    rng = _rng(seed, 17)
    n = _count(10, scale)
    worst = 0.0
    for i in range(n):
        asm = am.random_lhs_assemblage(rng) if i % 2 else am.werner_assemblage(float(rng.uniform(0, 0.6)))
        ub = am.relative_entropy_steering_ub(asm)
        worst = max(worst, ub.upper_bound)
    return {"name": "ea-unsteerable-zero", "ok": worst <= 1e-4, "instances": n, "worst": worst}


def check_ea_monotone(seed, scale, tamper=None):
    rng = _rng(seed, 18)
    n = _count(30, scale)
    worst = -np.inf
    for i in range(n):
        v = float(rng.uniform(0.75, 0.95))
        asm = am.werner_assemblage(v)
        m = am.random_losr_assemblage_map(_rng(seed, 1800 + i), kind="pairwise")
        pre = am.relative_entropy_steering_ub(asm).upper_bound
        img = am.relative_entropy_steering_ub(am.apply_losr_assemblage(m, asm)).upper_bound
        worst = max(worst, img - pre)
    return {"name": "ea-monotone-losr", "ok": worst <= 2e-3, "instances": n, "worst_increase": worst}


def check_flag_structure(seed, scale, tamper=None):
    rep = am.flagged_state_structure_checks(n_instances=_count(100, scale), seed=seed)
    ok = rep.reduction_ok and rep.conditionals_ok and rep.convex_ok and rep.injectivity_ok
    ok &= rep.identical_pair_diff <= 1e-15
    return {
        "name": "flagged-state-structure",
        "ok": bool(ok),
        "reduction_residual": rep.reduction_residual,
        "conditional_count": rep.conditional_count,
        "conditional_worst": rep.conditional_worst_residual,
        "convex_worst": rep.convex_residual,
        "injectivity_min_diff": rep.injectivity_min_diff,
    }


def check_cq_block_additivity(seed, scale, tamper=None):
    rng = _rng(seed, 19)
    n = _count(20, scale)
    worst = 0.0
    for _ in range(n):
        a1 = am.random_assemblage(rng)
        a2 = am.random_assemblage(rng)
        pi = rng.dirichlet(np.ones(2)) * 0.8 + 0.1
        full = quantum_relative_entropy(am.cq_state(a1, pi).matrix, am.cq_state(a2, pi).matrix)
        _, _, per_input = am.assemblage_kl(a1, a2)
        split = float(np.dot(pi, per_input))
        worst = max(worst, abs(full - split))
    return {"name": "cq-block-additivity", "ok": worst <= 1e-9, "instances": n, "worst": worst}


def check_steering_broadcast_demo(seed, scale, tamper=None):
    rep = am.steering_no_broadcast_demo(am.werner_assemblage(0.9))
    wit_ok = rep.broadcast_ub >= 0.0
    ok = rep.measured_term_positive and rep.broadcast_not_below_original and wit_ok
    return {
        "name": "steering-broadcast-demo",
        "ok": bool(ok),
        "original_ub": rep.original_ub,
        "broadcast_ub": rep.broadcast_ub,
        "measured_term": rep.measured_term,
        "conditional_term": rep.conditional_term,
    }


BOX_CHECKS = [
    check_chain_rule_identity,
    check_kl_properties,
    check_product_marginals,
    check_polytope_catalogues,
    check_membership_soundness,
    check_box_kl_basics,
    check_box_kl_contractivity,
    check_chain_rule_box,
    check_elr_zero_on_members,
    check_elr_pr_two_optimizers,
    check_elr_monotone_losr,
    check_elr_restart_stability,
    check_conditional_structure,
    check_broadcast_gap,
    check_losr_linearity,
    check_losr_locality_preservation,
    check_losr_pair_ns_preservation,
]

ASSEMBLAGE_CHECKS = [
    check_quantum_divergence,
    check_piani_inequality,
    check_assemblage_kl,
    check_cq_block_additivity,
    check_steering_classification,
    check_unsteerable_closure,
    check_ea_unsteerable_zero,
    check_ea_monotone,
    check_flag_structure,
    check_steering_broadcast_demo,
]


def run_suite(seed: int = 0, scope: str = "all", scale: float = 1.0, tamper: str | None = None):
    """Run the named checks for a scope; returns the aggregated report dict."""
    if scope == "boxes":
        checks = BOX_CHECKS
    elif scope == "assemblages":
        checks = ASSEMBLAGE_CHECKS
    elif scope == "all":
        checks = BOX_CHECKS + ASSEMBLAGE_CHECKS
    else:
        raise ValueError(f"unknown scope {scope!r}")
    results = []
    for fn in checks:
        results.append(fn(seed, scale, tamper))
    passed = sum(1 for r in results if r["ok"])
    return {
        "scope": scope,
        "seed": seed,
        "scale": scale,
        "tamper": tamper,
        "checks": results,
        "passed": passed,
        "failed": len(results) - passed,
    }
