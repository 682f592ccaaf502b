"""Steering assemblages: feasibility models, divergences, wirings, and demos.

An assemblage is a family of subnormalized positive matrices indexed by one
remote input and output.  The broadcast layout uses composite indices
``x = (x0, x1)`` and ``a = (a0, a1)`` (row-major) with the state space
``B0 (x) B1`` in Kronecker order; helpers that need the pair structure take
the per-pair sizes explicitly and default to the binary-qubit desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, OptimizationError, ValidationError
from .polytopes import ns_vertices_222
from .quantum import (
    KrausChannel,
    Povm,
    apply_channel,
    check_density,
    dagger,
    kron,
    measurement_map,
    partial_trace,
    pauli_povm,
    quantum_relative_entropy,
    random_cptp,
    random_density,
    random_povm,
    sic_povm_qubit,
    werner_state,
)

LN2 = np.log(2.0)
PSD_TOL = 1e-10
NORM_TOL = 1e-9
NS_TOL = 1e-9
FEASIBILITY_TOL = 1e-6
FEASIBILITY_ITERS = 50_000
BROADCAST_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Assemblage:
    """Subnormalized positive matrices rho_{a|x} with input-independent total.

    ``elements`` has shape (r, s, d, d): r inputs, s outputs, dimension d.
    """

    elements: np.ndarray

    def __post_init__(self):
        arr = np.array(self.elements, dtype=complex)
        if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
            raise DimensionError(f"elements must be (r, s, d, d), got {arr.shape}")
        herm = np.max(np.abs(arr - np.conj(np.swapaxes(arr, 2, 3))))
        if herm > 1e-10:
            raise ValidationError(f"elements are not Hermitian (drift {herm:.3e})")
        eigs = np.linalg.eigvalsh(arr.reshape(-1, arr.shape[2], arr.shape[3]))
        if eigs.min() < -PSD_TOL:
            raise ValidationError(f"element eigenvalue {eigs.min():.3e} below -{PSD_TOL}")
        traces = np.real(np.trace(arr, axis1=2, axis2=3))
        per_input = traces.sum(axis=1)
        if np.max(np.abs(per_input - 1.0)) > NORM_TOL:
            raise ValidationError("element traces must sum to 1 for every input")
        reduced = arr.sum(axis=1)
        dev = np.max(np.abs(reduced - reduced[0]))
        if dev > NS_TOL:
            raise ValidationError(f"reduced state depends on the input (drift {dev:.3e})")
        arr.flags.writeable = False
        object.__setattr__(self, "elements", arr)

    @property
    def num_inputs(self) -> int:
        return self.elements.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.elements.shape[1]

    @property
    def dim(self) -> int:
        return self.elements.shape[2]

    def reduced_state(self) -> np.ndarray:
        return self.elements.sum(axis=1)[0]

    def outcome_probabilities(self) -> np.ndarray:
        return np.real(np.trace(self.elements, axis1=2, axis2=3))


def max_norm_diff_assemblage(a: Assemblage, b: Assemblage) -> float:
    if a.elements.shape != b.elements.shape:
        raise DimensionError("assemblages have different shapes")
    return float(np.max(np.abs(a.elements - b.elements)))


def steering_from_state(rho_ab, alice_povms) -> Assemblage:
    """Assemblage steered on the second factor by measuring the first."""
    povms = [p if isinstance(p, Povm) else Povm(tuple(p)) for p in alice_povms]
    da = povms[0].dim
    rho_ab = np.asarray(rho_ab, dtype=complex)
    db = rho_ab.shape[0] // da
    if rho_ab.shape != (da * db, da * db):
        raise DimensionError("state dimension does not match the measurements")
    s = len(povms[0])
    if any(len(p) != s for p in povms):
        raise DimensionError("all inputs must share the outcome count")
    elements = np.zeros((len(povms), s, db, db), dtype=complex)
    for x, povm in enumerate(povms):
        for a, effect in enumerate(povm.effects):
            op = kron(effect, np.eye(db))
            elements[x, a] = partial_trace(op @ rho_ab, [da, db], 0)
            elements[x, a] = 0.5 * (elements[x, a] + dagger(elements[x, a]))
    return Assemblage(elements)


def werner_assemblage(v: float) -> Assemblage:
    """Fixture: Werner state at visibility v steered by the z and x Pauli settings."""
    return steering_from_state(werner_state(v), [pauli_povm((0, 0, 1)), pauli_povm((1, 0, 0))])


def product_assemblage(a: Assemblage, b: Assemblage) -> Assemblage:
    """Independent pair of assemblages in the broadcast index convention."""
    r0, s0, d0 = a.num_inputs, a.num_outputs, a.dim
    r1, s1, d1 = b.num_inputs, b.num_outputs, b.dim
    elements = np.zeros((r0 * r1, s0 * s1, d0 * d1, d0 * d1), dtype=complex)
    for x0, x1, a0, a1 in itertools.product(range(r0), range(r1), range(s0), range(s1)):
        elements[x0 * r1 + x1, a0 * s1 + a1] = kron(a.elements[x0, a0], b.elements[x1, a1])
    return Assemblage(elements)


def broadcast_marginals(
    asm4: Assemblage, pair_sizes=(2, 2, 2, 2, 2, 2), tol: float = BROADCAST_TOL
):
    """Both pair reductions of a broadcast-layout assemblage.

    ``pair_sizes`` is (r0, s0, d0, r1, s1, d1).  Each reduction sums out the
    other pair's output and traces out its state factor; input-independence of
    the result is checked against ``tol``.
    """
    r0, s0, d0, r1, s1, d1 = pair_sizes
    el = asm4.elements
    if el.shape != (r0 * r1, s0 * s1, d0 * d1, d0 * d1):
        raise DimensionError("assemblage does not match the declared pair sizes")
    red0 = np.zeros((r1, r0, s0, d0, d0), dtype=complex)
    red1 = np.zeros((r0, r1, s1, d1, d1), dtype=complex)
    for x0, x1 in itertools.product(range(r0), range(r1)):
        for a0 in range(s0):
            acc = np.zeros((d0, d0), dtype=complex)
            for a1 in range(s1):
                acc += partial_trace(el[x0 * r1 + x1, a0 * s1 + a1], [d0, d1], 1)
            red0[x1, x0, a0] = acc
        for a1 in range(s1):
            acc = np.zeros((d1, d1), dtype=complex)
            for a0 in range(s0):
                acc += partial_trace(el[x0 * r1 + x1, a0 * s1 + a1], [d0, d1], 0)
            red1[x0, x1, a1] = acc
    dev0 = float(np.max(np.abs(red0 - red0[0])))
    dev1 = float(np.max(np.abs(red1 - red1[0])))
    return Assemblage(red0[0]), Assemblage(red1[0]), max(dev0, dev1)


def is_broadcast_assemblage(
    asm4: Assemblage,
    asm2: Assemblage,
    pair_sizes=(2, 2, 2, 2, 2, 2),
    tol: float = BROADCAST_TOL,
) -> bool:
    """True iff both pair reductions of asm4 equal asm2 entrywise within tol."""
    m0, m1, dev = broadcast_marginals(asm4, pair_sizes, tol)
    if dev > tol:
        return False
    return (
        max_norm_diff_assemblage(m0, asm2) <= tol
        and max_norm_diff_assemblage(m1, asm2) <= tol
    )


@dataclass(frozen=True, eq=False)
class CqState:
    """Block-diagonal state encoding inputs and outputs as classical flags."""

    matrix: np.ndarray
    input_dist: np.ndarray
    num_inputs: int
    num_outputs: int
    dim: int

    def block(self, x: int, a: int) -> np.ndarray:
        d = self.dim
        i = (x * self.num_outputs + a) * d
        return self.matrix[i : i + d, i : i + d]


def cq_state(asm: Assemblage, pi) -> CqState:
    """Flagged state sum_x pi(x) |x><x| (x) sum_a |a><a| (x) rho_{a|x}."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (asm.num_inputs,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise ValidationError("input distribution must be a probability vector over inputs")
    r, s, d = asm.num_inputs, asm.num_outputs, asm.dim
    out = np.zeros((r * s * d, r * s * d), dtype=complex)
    for x, a in itertools.product(range(r), range(s)):
        i = (x * s + a) * d
        out[i : i + d, i : i + d] = pi[x] * asm.elements[x, a]
    return CqState(out, pi, r, s, d)


def assemblage_kl(asm1: Assemblage, asm2: Assemblage):
    """Worst-case-over-inputs divergence between two assemblages, in bits.

    The flagged-state divergence is linear in the input distribution, so its
    supremum is attained at a point mass; the returned value is the max over
    inputs of the divergence of the per-input flagged blocks.
    Returns ``(value, argmax_input, per_input)``.
    """
    if asm1.elements.shape != asm2.elements.shape:
        raise DimensionError("assemblages have different shapes")
    r, s, d = asm1.num_inputs, asm1.num_outputs, asm1.dim
    per_input = np.zeros(r)
    for x in range(r):
        rho = np.zeros((s * d, s * d), dtype=complex)
        sig = np.zeros((s * d, s * d), dtype=complex)
        for a in range(s):
            rho[a * d : (a + 1) * d, a * d : (a + 1) * d] = asm1.elements[x, a]
            sig[a * d : (a + 1) * d, a * d : (a + 1) * d] = asm2.elements[x, a]
        per_input[x] = quantum_relative_entropy(rho, sig)
    idx = int(np.argmax(per_input))
    return float(per_input[idx]), idx, per_input


def assemblage_kl_grid_oracle(
    asm1: Assemblage, asm2: Assemblage, samples: int = 1000, seed: int = 0
) -> float:
    """Direct sup over sampled input distributions of the flagged-state divergence."""
    rng = np.random.default_rng(seed)
    r = asm1.num_inputs
    pis = np.vstack([np.eye(r), rng.dirichlet(np.ones(r), size=max(0, samples - r))])
    best = 0.0
    for pi in pis:
        rho = cq_state(asm1, pi).matrix
        sig = cq_state(asm2, pi).matrix
        best = max(best, quantum_relative_entropy(rho, sig))
        if best == np.inf:
            break
    return float(best)


# ---------------------------------------------------------------------------
# Hidden-model feasibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SteeringFunctional:
    """Linear witness with its model bound: violation certifies steerability."""

    operators: np.ndarray  # (r, s, d, d)
    value: float
    bound: float

    @property
    def violated(self) -> bool:
        return self.value > self.bound + 1e-9


@dataclass(frozen=True, eq=False)
class HiddenModel:
    """Response tables and positive states reproducing an assemblage."""

    responses: np.ndarray  # (L, r, s)
    states: np.ndarray  # (L, d, d), subnormalized
    residual: float

    def reconstruct(self) -> np.ndarray:
        return np.einsum("lxa,lij->xaij", self.responses, self.states)


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    status: str  # "model-found" | "no-model-within-budget"
    model: HiddenModel | None
    residual: float
    functional: SteeringFunctional | None
    iterations: int

    @property
    def found(self) -> bool:
        return self.status == "model-found"


def deterministic_strategies(r: int, s: int) -> np.ndarray:
    """All s**r deterministic response tables D(a|x), shaped (s**r, r, s)."""
    n = s**r
    idx = np.arange(n)
    digits = (idx[:, None] // (s ** np.arange(r))[None, :]) % s
    out = np.zeros((n, r, s))
    out[np.arange(n)[:, None], np.arange(r)[None, :], digits] = 1.0
    return out


@lru_cache(maxsize=None)
def ns_wing_strategies_222() -> tuple:
    """The 24 no-signalling response tables q(a0 a1 | x0 x1), shaped (24, 4, 4)."""
    tables = ns_vertices_222().tables.reshape(24, 4, 4)
    tables = tables.copy()
    tables.flags.writeable = False
    return (tables,)


def _steering_functional_from_residual(elements, responses, sigmas) -> SteeringFunctional:
    """Witness from the residual direction of a stalled feasibility run."""
    deficit = elements - np.einsum("lxa,lij->xaij", responses, sigmas)
    deficit = 0.5 * (deficit + np.conj(np.swapaxes(deficit, 2, 3)))
    scale = np.max(np.abs(deficit))
    if scale <= 0.0:
        deficit = np.zeros_like(deficit)
        scale = 1.0
    ops = deficit / scale
    value = float(np.real(np.einsum("xaij,xaji->", ops, elements)))
    grouped = np.einsum("lxa,xaij->lij", responses, ops)
    bound = float(np.max(np.linalg.eigvalsh(grouped)))
    return SteeringFunctional(ops, value, bound)


def hidden_model_feasibility(
    elements: np.ndarray,
    responses: np.ndarray,
    iters: int = FEASIBILITY_ITERS,
    tol: float = FEASIBILITY_TOL,
) -> FeasibilityResult:
    """Search for positive states sigma_l with sum_l D_l(a|x) sigma_l = elements.

    Alternating projections with Dykstra corrections between the affine
    reconstruction constraint (closed-form least-squares step, entrywise over
    matrix positions) and the positive cone (batched eigenvalue clipping).
    A stalled run reports the witness extracted from the final residual
    direction, whose violation rigorously certifies that no model exists.
    """
    el = np.asarray(elements, dtype=complex)
    nl, r, s = responses.shape
    d = el.shape[2]
    m = responses.reshape(nl, r * s).T  # (r*s, L)
    m_pinv = np.linalg.pinv(m)
    b = el.reshape(r * s, d * d)

    x = np.repeat((el.sum(axis=(0, 1)) / (r * nl))[None, :, :], nl, axis=0)
    p_corr = np.zeros_like(x)
    q_corr = np.zeros_like(x)
    residual = np.inf
    used = 0
    functional = None
    for it in range(1, iters + 1):
        used = it
        # Affine step on x + p.
        y = x + p_corr
        flat = y.reshape(nl, d * d)
        correction = m_pinv @ (m @ flat - b)
        y = (flat - correction).reshape(nl, d, d)
        p_corr = x + p_corr - y
        # Positive-cone step on y + q.
        z = y + q_corr
        z = 0.5 * (z + np.conj(np.swapaxes(z, 1, 2)))
        vals, vecs = np.linalg.eigh(z)
        vals = np.clip(vals, 0.0, None)
        x = np.einsum("lik,lk,ljk->lij", vecs, vals, np.conj(vecs))
        q_corr = z - x
        residual = float(np.max(np.abs(m @ x.reshape(nl, d * d) - b)))
        if residual <= tol:
            break
        if it % 1000 == 0:
            # The residual direction may already witness infeasibility; its
            # violation is a rigorous certificate, so the search can stop.
            cand = _steering_functional_from_residual(el, responses, x)
            if cand.value > cand.bound + 1e-6:
                functional = cand
                break
    if residual <= tol:
        model = HiddenModel(responses, x, residual)
        return FeasibilityResult("model-found", model, residual, None, used)
    if functional is None:
        functional = _steering_functional_from_residual(el, responses, x)
    return FeasibilityResult("no-model-within-budget", None, residual, functional, used)


def is_unsteerable(
    asm: Assemblage, iters: int = FEASIBILITY_ITERS, tol: float = FEASIBILITY_TOL
) -> FeasibilityResult:
    """Hidden-state model search over deterministic responses."""
    responses = deterministic_strategies(asm.num_inputs, asm.num_outputs)
    return hidden_model_feasibility(asm.elements, responses, iters, tol)


def is_urns(
    asm4: Assemblage, iters: int = FEASIBILITY_ITERS, tol: float = FEASIBILITY_TOL
) -> FeasibilityResult:
    """Hidden-model search with no-signalling wing responses (broadcast layout)."""
    if asm4.num_inputs != 4 or asm4.num_outputs != 4:
        raise DimensionError("expected the composite 4-input/4-output broadcast layout")
    responses = ns_wing_strategies_222()[0]
    return hidden_model_feasibility(asm4.elements, responses, iters, tol)


def is_unsteerable_joint(
    asm4: Assemblage, iters: int = FEASIBILITY_ITERS, tol: float = FEASIBILITY_TOL
) -> FeasibilityResult:
    """Hidden-model search over all joint deterministic responses of the wing."""
    responses = deterministic_strategies(asm4.num_inputs, asm4.num_outputs)
    return hidden_model_feasibility(asm4.elements, responses, iters, tol)


def random_assemblage(rng: np.random.Generator, r: int = 2, s: int = 2, d: int = 2) -> Assemblage:
    """No-signalling assemblage from a random state and random measurements."""
    rho = random_density(rng, d * d)
    povms = [random_povm(rng, d, s) for _ in range(r)]
    return steering_from_state(rho, povms)


def random_lhs_assemblage(
    rng: np.random.Generator, r: int = 2, s: int = 2, d: int = 2, n_terms: int = 6
) -> Assemblage:
    """Hidden-model assemblage by construction: mixture of deterministic responses."""
    responses = deterministic_strategies(r, s)
    weights = rng.dirichlet(np.ones(n_terms))
    picks = rng.integers(0, responses.shape[0], size=n_terms)
    elements = np.zeros((r, s, d, d), dtype=complex)
    for w, k in zip(weights, picks):
        elements += w * np.einsum("xa,ij->xaij", responses[k], random_density(rng, d))
    return Assemblage(elements)


def random_urns_assemblage(
    rng: np.random.Generator, n_terms: int = 6, d: int = 4
) -> tuple[Assemblage, np.ndarray, list]:
    """Mixture of no-signalling wing responses with random states; in-set by construction.

    Returns ``(assemblage, weights, [(response_index, state), ...])``.
    """
    responses = ns_wing_strategies_222()[0]
    weights = rng.dirichlet(np.ones(n_terms))
    picks = rng.integers(0, responses.shape[0], size=n_terms)
    elements = np.zeros((4, 4, d, d), dtype=complex)
    atoms = []
    for w, k in zip(weights, picks):
        state = random_density(rng, d)
        atoms.append((int(k), state))
        elements += w * np.einsum("xa,ij->xaij", responses[k], state)
    return Assemblage(elements), weights, atoms


# ---------------------------------------------------------------------------
# Upper bound on the distance to the unsteerable-realistic set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteeringUbConfig:
    iters: int = 2000
    smoothing: float = 0.02
    feas_iters: int = FEASIBILITY_ITERS
    feas_tol: float = FEASIBILITY_TOL
    support_floor: float = 1e-9
    seed: int = 0


@dataclass(frozen=True, eq=False)
class SteeringUbResult:
    """Certified upper bound: value of the divergence at an in-set witness."""

    upper_bound: float
    witness: Assemblage
    weights: np.ndarray
    atoms: tuple
    iterations: int
    shortcut: bool


def _log_gradient(sigma: np.ndarray, weight_matrix: np.ndarray) -> np.ndarray:
    """Derivative of -tr[R log2 sigma] in sigma, evaluated against R."""
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.clip(vals, 1e-300, None)
    lv = np.log(vals)
    diff = vals[:, None] - vals[None, :]
    logdiff = lv[:, None] - lv[None, :]
    phi = np.where(np.abs(diff) > 1e-14, logdiff / np.where(diff == 0, 1.0, diff), 1.0 / vals[:, None])
    r_in_eig = dagger(vecs) @ weight_matrix @ vecs
    g = vecs @ (phi * r_in_eig) @ dagger(vecs)
    return -0.5 * (g + dagger(g)) / LN2


def _assemblage_objective(target: np.ndarray, cand: np.ndarray) -> np.ndarray:
    """Per-input divergences sum_a tr[t_{a|x}(log2 t_{a|x} - log2 c_{a|x})]."""
    r, s, d = target.shape[0], target.shape[1], target.shape[2]
    out = np.zeros(r)
    for x in range(r):
        total = 0.0
        for a in range(s):
            t = target[x, a]
            c = cand[x, a]
            tv, tw = np.linalg.eigh(t)
            tv = np.clip(tv, 0.0, None)
            keep = tv > 1e-15
            total += float(np.sum(tv[keep] * np.log2(tv[keep])))
            cv, cw = np.linalg.eigh(c)
            overl = np.real(np.einsum("ij,jk,ki->i", dagger(cw), t, cw))
            if np.any((cv <= 1e-14) & (overl > 1e-12)):
                return np.full(r, np.inf)
            good = cv > 1e-14
            total -= float(np.sum(overl[good] * np.log2(cv[good])))
        out[x] = total
    return out


def relative_entropy_steering_ub(
    asm: Assemblage,
    cfg: SteeringUbConfig | None = None,
    responses: np.ndarray | None = None,
) -> SteeringUbResult:
    """Upper bound on the divergence from the hidden-model set.

    A feasibility pre-check returns the input itself (distance zero) when a
    hidden model exists.  Otherwise a projection-free convex descent runs over
    mixtures of (response table, pure state) atoms: each step linearizes the
    smoothed objective, scans every response table for the most improving pure
    state via an extremal eigenvector, and mixes it in with the step 2/(t+2).
    The returned value is the exact objective at the witness, so it is always
    a valid upper bound.
    """
    cfg = cfg or SteeringUbConfig()
    if responses is None:
        if asm.num_inputs == 4 and asm.num_outputs == 4 and asm.dim == 4:
            responses = ns_wing_strategies_222()[0]
        else:
            responses = deterministic_strategies(asm.num_inputs, asm.num_outputs)
    feas = hidden_model_feasibility(asm.elements, responses, cfg.feas_iters, cfg.feas_tol)
    r, s, d = asm.num_inputs, asm.num_outputs, asm.dim
    if feas.found:
        # The reconstruction is in-set by construction and its reduced state is
        # exactly input-independent; rescaling the hidden states restores exact
        # normalization, and a sliver of the fully mixed point keeps the
        # witness support full.
        total = float(np.real(np.trace(feas.model.states.sum(axis=0))))
        recon = feas.model.reconstruct() / total
        uniform_resp = responses.mean(axis=0)
        base = np.einsum("xa,ij->xaij", uniform_resp, np.eye(d, dtype=complex) / d)
        eta = 1e-8
        blended = (1 - eta) * recon + eta * base
        witness = Assemblage(blended)
        value = float(np.max(_assemblage_objective(asm.elements, witness.elements)))
        return SteeringUbResult(
            upper_bound=value,
            witness=witness,
            weights=np.array([1.0]),
            atoms=((None, None),),
            iterations=0,
            shortcut=True,
        )

    # Start from the fully mixed in-set point (full support).
    uniform_resp = responses.mean(axis=0)
    cand = np.einsum("xa,ij->xaij", uniform_resp, np.eye(d, dtype=complex) / d)
    atom_list = [("uniform", None)]
    weights = [1.0]
    used = 0
    for t in range(1, cfg.iters + 1):
        used = t
        per_input = _assemblage_objective(asm.elements, cand)
        fmax = per_input.max()
        theta = np.exp((per_input - fmax) / max(cfg.smoothing, 1e-9))
        theta /= theta.sum()
        # Gradient of the smoothed objective w.r.t. each candidate block.
        grads = np.zeros((r, s, d, d), dtype=complex)
        for x in range(r):
            if theta[x] <= 1e-14:
                continue
            for a in range(s):
                grads[x, a] = theta[x] * _log_gradient(cand[x, a], asm.elements[x, a])
        # Linear minimization over atoms: response table (x) pure state.
        h = np.einsum("lxa,xaij->lij", responses, grads)
        h = 0.5 * (h + np.conj(np.swapaxes(h, 1, 2)))
        vals, vecs = np.linalg.eigh(h)
        best_l = int(np.argmin(vals[:, 0]))
        psi = vecs[best_l, :, 0]
        atom = np.einsum("xa,i,j->xaij", responses[best_l], psi, np.conj(psi))
        gamma = 2.0 / (t + 2.0)
        cand = (1.0 - gamma) * cand + gamma * atom
        weights = [w * (1.0 - gamma) for w in weights]
        weights.append(gamma)
        atom_list.append((best_l, psi))
    value = float(np.max(_assemblage_objective(asm.elements, cand)))
    witness = Assemblage(cand)
    return SteeringUbResult(
        upper_bound=value,
        witness=witness,
        weights=np.asarray(weights),
        atoms=tuple(atom_list),
        iterations=used,
        shortcut=False,
    )


# ---------------------------------------------------------------------------
# Local wirings for assemblages
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AssemblageLosrMap:
    """Shared-randomness wiring from one steering pair to the broadcast layout.

    Tables: ``lambda_weights`` (L,); ``pre`` (L, R0, R1, C, RIN) giving
    I(c, x | x0, x1, lam); ``post`` (SIN, C, S0, S1) giving O(a0, a1 | a, c);
    ``channels``: one trace-preserving map per hidden value, sending the
    original state space into the two output factors.
    """

    lambda_weights: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    channels: tuple

    def __post_init__(self):
        lam = np.array(self.lambda_weights, dtype=float)
        if lam.ndim != 1 or np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
            raise ValidationError("lambda_weights must be a probability vector")
        lam = lam / lam.sum()
        pre = np.array(self.pre, dtype=float)
        post = np.array(self.post, dtype=float)
        if pre.ndim != 5 or post.ndim != 4:
            raise DimensionError("pre must be (L,R0,R1,C,RIN); post must be (SIN,C,S0,S1)")
        if pre.shape[0] != lam.size or len(self.channels) != lam.size:
            raise DimensionError("hidden-variable size mismatch")
        if pre.shape[3] != post.shape[1]:
            raise DimensionError("message alphabet mismatch between pre and post")
        if np.any(pre < -1e-12) or np.any(post < -1e-12):
            raise ValidationError("tables must be nonnegative")
        psums = pre.sum(axis=(3, 4))
        if np.max(np.abs(psums - 1.0)) > 1e-9:
            raise ValidationError("pre table must be stochastic over (c, x)")
        osums = post.sum(axis=(2, 3))
        if np.max(np.abs(osums - 1.0)) > 1e-9:
            raise ValidationError("post table must be stochastic over (a0, a1)")
        for ch in self.channels:
            if not isinstance(ch, KrausChannel):
                raise ValidationError("channels must be KrausChannel instances")
        lam.flags.writeable = False
        pre.flags.writeable = False
        post.flags.writeable = False
        object.__setattr__(self, "lambda_weights", lam)
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)
        object.__setattr__(self, "channels", tuple(self.channels))


def apply_losr_assemblage(m: AssemblageLosrMap, asm: Assemblage) -> Assemblage:
    """Wire an assemblage through the map; linear in the assemblage."""
    nl, r0, r1, nc, rin = m.pre.shape
    sin, _, s0, s1 = m.post.shape
    if rin != asm.num_inputs or sin != asm.num_outputs:
        raise DimensionError("map alphabets do not match the assemblage")
    d_out = m.channels[0].dims[1]
    if m.channels[0].dims[0] != asm.dim:
        raise DimensionError("channel input dimension does not match the assemblage")
    pushed = np.zeros((nl, rin, sin, d_out, d_out), dtype=complex)
    for il, ch in enumerate(m.channels):
        for x in range(rin):
            for a in range(sin):
                pushed[il, x, a] = apply_channel(ch, asm.elements[x, a])
    # coeff[l, x0, x1, a0, a1, x, a] = sum_c pre[l,x0,x1,c,x] post[a,c,a0,a1]
    coeff = np.einsum("lijcx,acmn->lijmnxa", m.pre, m.post)
    out = np.einsum("l,lijmnxa,lxauv->ijmnuv", m.lambda_weights, coeff, pushed, optimize=True)
    elements = out.reshape(r0 * r1, s0 * s1, d_out, d_out)
    elements = 0.5 * (elements + np.conj(np.swapaxes(elements, 2, 3)))
    return Assemblage(elements)


def random_losr_assemblage_map(
    seed,
    lam: int = 4,
    kind: str = "pairwise",
    rin: int = 2,
    sin: int = 2,
    d_in: int = 2,
    d_out: int = 4,
    n_msg: int = 2,
) -> AssemblageLosrMap:
    """Dirichlet-sampled assemblage wiring, deterministic per seed.

    ``kind='pairwise'`` factorizes the classical tables (the inner input from
    x0 only, the message from x1 only, a0 from a only, a1 from the message
    only), which keeps hidden-model assemblages with no-signalling responses
    inside their set.  ``kind='generic'`` fills the tables freely.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r0 = r1 = 2
    s0 = s1 = 2
    if kind == "pairwise":
        i0 = rng.dirichlet(np.ones(rin), size=(lam, r0))  # x | x0, lam
        i1 = rng.dirichlet(np.ones(n_msg), size=(lam, r1))  # c | x1, lam
        pre = np.einsum("lix,ljc->lijcx", i0, i1)
        o0 = rng.dirichlet(np.ones(s0), size=sin)  # a0 | a
        o1 = rng.dirichlet(np.ones(s1), size=n_msg)  # a1 | c
        post = np.einsum("am,cn->acmn", o0, o1)
    elif kind == "generic":
        pre = rng.dirichlet(np.ones(n_msg * rin), size=(lam, r0, r1)).reshape(
            lam, r0, r1, n_msg, rin
        )
        post = rng.dirichlet(np.ones(s0 * s1), size=(sin, n_msg)).reshape(sin, n_msg, s0, s1)
    else:
        raise ValidationError(f"unknown map kind {kind!r}")
    channels = tuple(random_cptp(rng, d_in, d_out) for _ in range(lam))
    weights = rng.dirichlet(np.ones(lam))
    return AssemblageLosrMap(weights, pre, post, channels)


# ---------------------------------------------------------------------------
# Flagged two-part states and the measured-divergence inequality
# ---------------------------------------------------------------------------


def cq_state_zw(asm4: Assemblage, pi0, pi1, pair_sizes=(2, 2, 2, 2, 2, 2)) -> np.ndarray:
    """Flagged state of a broadcast assemblage, ordered (X0, A0, B0, X1, A1, B1).

    Uses a product input distribution pi0(x0) pi1(x1).  The two flag-and-state
    triples are contiguous so that the first pair can be handled as one factor.
    """
    r0, s0, d0, r1, s1, d1 = pair_sizes
    pi0 = np.asarray(pi0, dtype=float)
    pi1 = np.asarray(pi1, dtype=float)
    if pi0.shape != (r0,) or pi1.shape != (r1,):
        raise DimensionError("input distributions do not match the pair sizes")
    dz = r0 * s0 * d0
    dw = r1 * s1 * d1
    out = np.zeros((dz * dw, dz * dw), dtype=complex)
    el = asm4.elements.reshape(r0, r1, s0, s1, d0, d1, d0, d1)
    for x0, x1, a0, a1 in itertools.product(range(r0), range(r1), range(s0), range(s1)):
        block = el[x0, x1, a0, a1]  # (d0, d1, d0, d1)
        zi = (x0 * s0 + a0) * d0
        wi = (x1 * s1 + a1) * d1
        for i0 in range(d0):
            for j0 in range(d0):
                rows = (zi + i0) * dw + wi
                cols = (zi + j0) * dw + wi
                out[rows : rows + d1, cols : cols + d1] += (
                    pi0[x0] * pi1[x1] * block[i0, :, j0, :]
                )
    return out


def flag_povm(r: int, s: int, base: Povm) -> Povm:
    """POVM reading both classical flags and measuring the state factor."""
    effects = []
    for x in range(r):
        ex = np.zeros((r, r), dtype=complex)
        ex[x, x] = 1.0
        for a in range(s):
            ea = np.zeros((s, s), dtype=complex)
            ea[a, a] = 1.0
            for e in base.effects:
                effects.append(kron(ex, ea, e))
    return Povm(tuple(effects))


def piani_inequality_check(rho_zw, sigma_zw, povm_on_z: Povm, dims: tuple[int, int]):
    """Measured-versus-global divergence split on a two-part state.

    Evaluates the inequality
    ``S(rho_ZW || sigma_ZW) >= S(F(rho_Z) || F(sigma_Z)) + S(rho_W || mix)``
    where F is the measurement map of the POVM on Z and ``mix`` averages the
    conditional W-states of sigma with rho's outcome weights.  Returns
    ``(lhs, term1, term2, holds)`` with extended-real comparisons.
    """
    dz, dw = dims
    rho_zw = check_density(rho_zw)
    sigma_zw = check_density(sigma_zw)
    if rho_zw.shape != (dz * dw, dz * dw):
        raise DimensionError("state does not match the declared factor dimensions")
    lhs = quantum_relative_entropy(rho_zw, sigma_zw)

    rho_z = partial_trace(rho_zw, [dz, dw], 1)
    sigma_z = partial_trace(sigma_zw, [dz, dw], 1)
    fmap = measurement_map(povm_on_z)
    term1 = quantum_relative_entropy(fmap(rho_z), fmap(sigma_z))

    rho_w = partial_trace(rho_zw, [dz, dw], 0)
    mix = np.zeros((dw, dw), dtype=complex)
    defect = 0.0
    for effect in povm_on_z.effects:
        alpha = float(np.real(np.trace(effect @ rho_z)))
        if alpha <= 1e-14:
            continue
        cond = partial_trace(kron(effect, np.eye(dw)) @ sigma_zw, [dz, dw], 0)
        cond = 0.5 * (cond + dagger(cond))
        norm = float(np.real(np.trace(cond)))
        if norm <= 1e-14:
            defect += alpha
            continue
        mix += alpha * cond / norm
    if defect > 1e-12:
        term2 = float("inf")
    else:
        term2 = quantum_relative_entropy(rho_w, mix)
    rhs = term1 + term2
    holds = bool(lhs >= rhs - 1e-8) if np.isfinite(rhs) else bool(np.isinf(lhs))
    return lhs, term1, term2, holds


# ---------------------------------------------------------------------------
# Structural checks for flagged states and the no-broadcast demo
# ---------------------------------------------------------------------------


def _assemblage_from_w_state(sigma_w, pi1, s1: int = 2, d1: int = 2):
    """Extract the (x1, a1)-blocked assemblage from a flagged W state.

    Returns ``(assemblage, off_block_mass)``; the second entry measures how
    far the state is from exact block-diagonal form.
    """
    r1 = len(pi1)
    dw = r1 * s1 * d1
    sigma_w = np.asarray(sigma_w, dtype=complex)
    if sigma_w.shape != (dw, dw):
        raise DimensionError("W state does not match the declared flag sizes")
    elements = np.zeros((r1, s1, d1, d1), dtype=complex)
    mask = np.zeros((dw, dw), dtype=bool)
    for x1, a1 in itertools.product(range(r1), range(s1)):
        i = (x1 * s1 + a1) * d1
        blk = sigma_w[i : i + d1, i : i + d1]
        elements[x1, a1] = 0.5 * (blk + dagger(blk)) / pi1[x1]
        mask[i : i + d1, i : i + d1] = True
    off = float(np.max(np.abs(sigma_w[~mask]))) if (~mask).any() else 0.0
    return Assemblage(elements), off


def random_broadcast_ns_assemblage(
    rng: np.random.Generator, components: int = 3
) -> Assemblage:
    """Mixture of independent pairs of random assemblages (broadcast layout)."""
    weights = rng.dirichlet(np.ones(components))
    total = None
    for w in weights:
        prod = product_assemblage(random_assemblage(rng), random_assemblage(rng))
        total = w * prod.elements if total is None else total + w * prod.elements
    return Assemblage(total)


def reduced_flag_state_check(asm4: Assemblage, pi0, pi1) -> float:
    """Tracing the W factor of the flagged state must reproduce the pair-0 flag state.

    Returns the max-norm residual between the reduction and the flagged state
    of the pair-0 marginal assemblage.
    """
    full = cq_state_zw(asm4, pi0, pi1)
    dz = len(pi0) * 2 * 2
    dw = len(pi1) * 2 * 2
    reduced = partial_trace(full, [dz, dw], 1)
    marg0, _, _ = broadcast_marginals(asm4)
    direct = cq_state(marg0, pi0).matrix
    return float(np.max(np.abs(reduced - direct)))


def conditional_w_states(sigma_zw, povm_on_b0: Povm, pi0, pi1, s0: int = 2, d0: int = 2):
    """Conditional W states of a flagged state after reading pair-0 flags and B0.

    Returns a list of ``(k, alpha_weight_placeholder, norm, sigma_w_k)`` where
    ``k = (x0, a0, i)`` runs over the flag-and-effect POVM on Z and only
    outcomes with positive probability under sigma are produced.
    """
    r0 = len(pi0)
    dz = r0 * s0 * d0
    dw = len(pi1) * 2 * 2
    fz = flag_povm(r0, s0, povm_on_b0)
    out = []
    for k, effect in enumerate(fz.effects):
        op = kron(effect, np.eye(dw))
        sub = partial_trace(op @ sigma_zw, [dz, dw], 0)
        sub = 0.5 * (sub + dagger(sub))
        norm = float(np.real(np.trace(sub)))
        if norm <= 1e-12:
            continue
        out.append((k, norm, sub / norm))
    return out


@dataclass(frozen=True, eq=False)
class FlagStructureReport:
    """Results of the four flagged-state structure checks."""

    reduction_residual: float
    reduction_ok: bool
    conditional_count: int
    conditional_worst_residual: float
    conditionals_ok: bool
    convex_residual: float
    convex_ok: bool
    injectivity_min_diff: float
    injectivity_ok: bool
    identical_pair_diff: float


def flagged_state_structure_checks(
    n_instances: int = 100,
    seed: int = 0,
    feas_iters: int = FEASIBILITY_ITERS,
    feas_tol: float = FEASIBILITY_TOL,
) -> FlagStructureReport:
    """Verify the four structural facts behind the steering dilation bound.

    (1) Tracing out one pair of a flagged broadcast state gives the flagged
    state of the marginal assemblage.  (2) Conditioning an in-set flagged
    state on pair-0 flags plus an informationally complete measurement leaves
    hidden-model W states.  (3) Convex sums of those conditionals stay in the
    hidden-model set.  (4) The flagged measurement map separates distinct
    assemblages (tested contrapositively).
    """
    rng = np.random.default_rng(seed)
    sic = sic_povm_qubit()

    worst_red = 0.0
    for _ in range(n_instances):
        asm4 = random_broadcast_ns_assemblage(rng)
        pi0 = rng.dirichlet(np.ones(2)) * 0.8 + 0.1
        pi1 = rng.dirichlet(np.ones(2)) * 0.8 + 0.1
        worst_red = max(worst_red, reduced_flag_state_check(asm4, pi0, pi1))

    cond_count = 0
    worst_cond = np.inf
    worst_cond = 0.0
    convex_worst = 0.0
    for _ in range(n_instances):
        asm4, _, _ = random_urns_assemblage(rng)
        pi0 = np.full(2, 0.5)
        pi1 = rng.dirichlet(np.ones(2)) * 0.8 + 0.1
        sigma_zw = cq_state_zw(asm4, pi0, pi1)
        conds = conditional_w_states(sigma_zw, sic, pi0, pi1)
        mixes = []
        for _, norm, sw in conds:
            asm_w, off = _assemblage_from_w_state(sw, pi1)
            if off > 1e-9:
                raise ValidationError("conditional W state is not flag-diagonal")
            feas = is_unsteerable(asm_w, iters=feas_iters, tol=feas_tol)
            cond_count += 1
            worst_cond = max(worst_cond, feas.residual)
            mixes.append((norm, sw))
        total = sum(n for n, _ in mixes)
        mixture = sum((n / total) * sw for n, sw in mixes)
        asm_mix, off = _assemblage_from_w_state(mixture, pi1)
        if off > 1e-9:
            raise ValidationError("mixed conditional W state is not flag-diagonal")
        feas_mix = is_unsteerable(asm_mix, iters=feas_iters, tol=feas_tol)
        convex_worst = max(convex_worst, feas_mix.residual)

    min_diff = np.inf
    identical_diff = 0.0
    fz = flag_povm(2, 2, sic)
    fmap = measurement_map(fz)
    for _ in range(n_instances):
        pi = rng.dirichlet(np.ones(2)) * 0.8 + 0.1
        a1 = random_assemblage(rng)
        a2 = random_assemblage(rng)
        img1 = np.real(np.diag(fmap(cq_state(a1, pi).matrix)))
        img2 = np.real(np.diag(fmap(cq_state(a2, pi).matrix)))
        min_diff = min(min_diff, float(np.max(np.abs(img1 - img2))))
        same = np.real(np.diag(fmap(cq_state(a1, pi).matrix)))
        identical_diff = max(identical_diff, float(np.max(np.abs(img1 - same))))

    return FlagStructureReport(
        reduction_residual=worst_red,
        reduction_ok=worst_red <= 1e-9,
        conditional_count=cond_count,
        conditional_worst_residual=worst_cond,
        conditionals_ok=worst_cond <= feas_tol,
        convex_residual=convex_worst,
        convex_ok=convex_worst <= feas_tol,
        injectivity_min_diff=float(min_diff),
        injectivity_ok=bool(min_diff >= 1e-9),
        identical_pair_diff=identical_diff,
    )


@dataclass(frozen=True, eq=False)
class SteeringBroadcastReport:
    """Quantities of the steering no-broadcast demonstration."""

    original_ub: float
    broadcast_ub: float
    measured_term: float
    conditional_term: float
    lower_expression: float
    measured_term_positive: bool
    broadcast_not_below_original: bool
    original_functional: SteeringFunctional


def steering_no_broadcast_demo(
    asm2: Assemblage, cfg: SteeringUbConfig | None = None
) -> SteeringBroadcastReport:
    """Run the full steering broadcast pipeline on one steerable assemblage.

    Requires the input to be certified steerable (no hidden model and a
    violated witness).  Builds the product broadcast, bounds both distances
    from above, and evaluates the measured-divergence split at the broadcast
    optimizer's witness: its first term must stay strictly positive and the
    broadcast bound must not drop below the original's.
    """
    cfg = cfg or SteeringUbConfig()
    feas = is_unsteerable(asm2, iters=cfg.feas_iters, tol=cfg.feas_tol)
    if feas.found:
        raise ValidationError("input admits a hidden-state model; the demo needs a steerable one")
    if feas.functional is None or not feas.functional.violated:
        raise ValidationError("steerability was not corroborated by a violated witness")

    asm4 = product_assemblage(asm2, asm2)
    if not is_broadcast_assemblage(asm4, asm2):
        raise ValidationError("constructed product is not a broadcasting of the input")

    ub2 = relative_entropy_steering_ub(asm2, cfg)
    ub4 = relative_entropy_steering_ub(asm4, cfg)

    pi0 = np.full(2, 0.5)
    pi1 = np.full(2, 0.5)
    rho_zw = cq_state_zw(asm4, pi0, pi1)
    sigma_zw = cq_state_zw(ub4.witness, pi0, pi1)
    sic = sic_povm_qubit()
    fz = flag_povm(2, 2, sic)
    dz = 2 * 2 * 2
    dw = 2 * 2 * 2
    lhs, term1, term2, _holds = piani_inequality_check(rho_zw, sigma_zw, fz, (dz, dw))

    return SteeringBroadcastReport(
        original_ub=ub2.upper_bound,
        broadcast_ub=ub4.upper_bound,
        measured_term=term1,
        conditional_term=term2,
        lower_expression=term1 + term2,
        measured_term_positive=bool(term1 > 1e-3),
        broadcast_not_below_original=bool(ub4.upper_bound >= ub2.upper_bound - 1e-3),
        original_functional=feas.functional,
    )
