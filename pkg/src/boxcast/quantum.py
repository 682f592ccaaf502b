"""Complex Hermitian linear algebra, quantum divergence, channels, and POVMs.

The quantum relative entropy is in bits, mirroring the classical module, and
is ``float('inf')`` exactly when the support of the first state is not
contained in the support of the second (eigenvalue cutoff 1e-10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behaviors import Behavior, Scenario
from .errors import DimensionError, ValidationError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
COMPLETENESS_TOL = 1e-9
SUPPORT_CUTOFF = 1e-10

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def check_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if np.max(np.abs(arr - dagger(arr))) > tol:
        raise ValidationError("matrix is not Hermitian within tolerance")
    return arr


def check_density(m, psd_tol: float = PSD_TOL, trace_tol: float = TRACE_TOL) -> np.ndarray:
    arr = check_hermitian(m, tol=1e-10)
    vals = np.linalg.eigvalsh(arr)
    if vals.min() < -psd_tol:
        raise ValidationError(f"matrix has eigenvalue {vals.min():.3e} below -{psd_tol}")
    tr = float(np.real(np.trace(arr)))
    if abs(tr - 1.0) > trace_tol:
        raise ValidationError(f"trace {tr!r} differs from 1 beyond {trace_tol}")
    return arr


def eig_hermitian(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    arr = check_hermitian(h)
    vals, vecs = np.linalg.eigh(arr)
    return vals, vecs


@dataclass(frozen=True, eq=False)
class Povm:
    """Positive operator-valued measure: effects summing to the identity."""

    effects: tuple

    def __post_init__(self):
        effects = tuple(check_hermitian(e, tol=1e-10) for e in self.effects)
        if not effects:
            raise ValidationError("a POVM needs at least one effect")
        d = effects[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for e in effects:
            if e.shape != (d, d):
                raise DimensionError("all effects must share one dimension")
            if np.linalg.eigvalsh(e).min() < -PSD_TOL:
                raise ValidationError("POVM effect is not positive semidefinite")
            total += e
        if np.max(np.abs(total - np.eye(d))) > COMPLETENESS_TOL:
            raise ValidationError("POVM effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)

    def probabilities(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return np.array([float(np.real(np.trace(e @ rho))) for e in self.effects])


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValidationError("a channel needs at least one Kraus operator")
        d_out, d_in = ops[0].shape
        total = np.zeros((d_in, d_in), dtype=complex)
        for k in ops:
            if k.shape != (d_out, d_in):
                raise DimensionError("all Kraus operators must share one shape")
            total += dagger(k) @ k
        if np.max(np.abs(total - np.eye(d_in))) > COMPLETENESS_TOL:
            raise ValidationError("Kraus operators do not resolve the identity")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dims(self) -> tuple[int, int]:
        return self.kraus_ops[0].shape[1], self.kraus_ops[0].shape[0]


def apply_channel(ch: KrausChannel, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    d_in = ch.dims[0]
    if rho.shape != (d_in, d_in):
        raise DimensionError(f"state dimension {rho.shape} does not match channel input {d_in}")
    out = np.zeros((ch.dims[1], ch.dims[1]), dtype=complex)
    for k in ch.kraus_ops:
        out += k @ rho @ dagger(k)
    return out


def random_cptp(seed, d_in: int, d_out: int, n_kraus: int | None = None) -> KrausChannel:
    """Random channel from a Haar-ish isometry (QR of a complex Gaussian)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_env = n_kraus if n_kraus is not None else d_in
    g = rng.normal(size=(d_out * n_env, d_in)) + 1j * rng.normal(size=(d_out * n_env, d_in))
    q, _ = np.linalg.qr(g)
    v = q[:, :d_in].reshape(d_out, n_env, d_in)
    return KrausChannel(tuple(v[:, e, :] for e in range(n_env)))


def random_density(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ dagger(g)
    return rho / np.real(np.trace(rho))


def random_povm(rng: np.random.Generator, d: int, n: int) -> Povm:
    """Random n-effect POVM from normalized Wishart blocks."""
    blocks = []
    for _ in range(n):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        blocks.append(g @ dagger(g))
    total = sum(blocks)
    vals, vecs = np.linalg.eigh(total)
    inv_sqrt = vecs @ np.diag(vals**-0.5) @ dagger(vecs)
    return Povm(tuple(inv_sqrt @ b @ inv_sqrt for b in blocks))


def quantum_relative_entropy(rho, sigma, support_cutoff: float = SUPPORT_CUTOFF) -> float:
    """Umegaki divergence tr[rho (log2 rho - log2 sigma)] with support handling."""
    rho = check_density(rho)
    sigma = check_density(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError("states have different dimensions")
    svals, svecs = np.linalg.eigh(sigma)
    overlaps = np.real(np.einsum("ij,jk,ki->i", dagger(svecs), rho, svecs))
    kernel = svals <= support_cutoff
    if np.any(kernel) and float(overlaps[kernel].sum()) > support_cutoff:
        return float("inf")
    rvals = np.linalg.eigvalsh(rho)
    rvals = rvals[rvals > 1e-15]
    term1 = float(np.sum(rvals * np.log2(rvals)))
    keep = ~kernel
    term2 = float(np.sum(overlaps[keep] * np.log2(svals[keep])))
    return term1 - term2


def kron(*matrices) -> np.ndarray:
    out = np.asarray(matrices[0], dtype=complex)
    for m in matrices[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def partial_trace(m, dims, which) -> np.ndarray:
    """Trace out the subsystems listed in ``which`` (indices into ``dims``)."""
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionError(f"matrix shape {m.shape} does not match dims {dims}")
    if isinstance(which, (int, np.integer)):
        which = (int(which),)
    which = set(int(w) for w in which)
    if not which <= set(range(len(dims))):
        raise DimensionError("subsystem index out of range")
    k = len(dims)
    t = m.reshape(dims + dims)
    keep = [i for i in range(k) if i not in which]
    row = list(range(k))
    col = [i if i in which else i + k for i in range(k)]
    out_idx = keep + [i + k for i in keep]
    out = np.einsum(t, row + col, out_idx)
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return out.reshape(d_keep, d_keep)


def permute_subsystems(m, dims, perm) -> np.ndarray:
    """Reorder tensor factors of an operator: new factor i is old factor perm[i]."""
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in dims]
    k = len(dims)
    if sorted(perm) != list(range(k)):
        raise DimensionError("perm must be a permutation of the subsystems")
    t = m.reshape(dims + dims)
    t = np.transpose(t, list(perm) + [p + k for p in perm])
    total = int(np.prod(dims))
    return t.reshape(total, total)


def measurement_map(povm: Povm):
    """Channel sending X to the diagonal matrix of its POVM outcome weights."""
    effects = povm.effects

    def apply(x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        probs = [np.real(np.trace(e @ x)) for e in effects]
        return np.diag(np.asarray(probs, dtype=complex))

    return apply


def sic_povm_qubit() -> Povm:
    """Tetrahedral qubit POVM: four subnormalized rank-1 effects.

    The four Bloch vectors point at the corners of a regular tetrahedron, so
    the effects span the full operator space (informational completeness).
    """
    s = 1.0 / np.sqrt(3.0)
    bloch = [(s, s, s), (s, -s, -s), (-s, s, -s), (-s, -s, s)]
    effects = []
    for bx, by, bz in bloch:
        effects.append(0.25 * (I2 + bx * PAULI_X + by * PAULI_Y + bz * PAULI_Z))
    return Povm(tuple(effects))


def pauli_povm(direction) -> Povm:
    """Two-outcome projective measurement along a Bloch direction (outcome 0 = +1)."""
    nx, ny, nz = direction
    obs = nx * PAULI_X + ny * PAULI_Y + nz * PAULI_Z
    return Povm(((I2 + obs) / 2.0, (I2 - obs) / 2.0))


def singlet() -> np.ndarray:
    psi = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2.0)
    return np.outer(psi, psi.conj())


def werner_state(v: float) -> np.ndarray:
    """Singlet mixed with white noise at visibility v."""
    if not 0.0 <= v <= 1.0:
        raise ValidationError("visibility must be in [0, 1]")
    return v * singlet() + (1.0 - v) * np.eye(4, dtype=complex) / 4.0


def quantum_behavior(state, alice_povms, bob_povms) -> Behavior:
    """Born-rule box P(ab|xy) = tr[(A_a^x x B_b^y) rho] for product measurements."""
    rho = check_density(state)
    alice = [p if isinstance(p, Povm) else Povm(tuple(p)) for p in alice_povms]
    bob = [p if isinstance(p, Povm) else Povm(tuple(p)) for p in bob_povms]
    oa = len(alice[0])
    ob = len(bob[0])
    if any(len(p) != oa for p in alice) or any(len(p) != ob for p in bob):
        raise DimensionError("all settings of one party must share the outcome count")
    da = alice[0].dim
    db = bob[0].dim
    if rho.shape != (da * db, da * db):
        raise DimensionError("state dimension does not match the measurements")
    table = np.zeros((len(alice), len(bob), oa, ob))
    for x, ax in enumerate(alice):
        for y, by in enumerate(bob):
            for a, ea in enumerate(ax.effects):
                for b, eb in enumerate(by.effects):
                    table[x, y, a, b] = float(np.real(np.trace(kron(ea, eb) @ rho)))
    sc = Scenario(((len(alice), oa), (len(bob), ob)), ((0,), (1,)))
    return Behavior(sc, table)
