"""State containers and the dense linear-algebra kernels used everywhere else.

Conventions, fixed once and shared by all modules:

* Sites are numbered 1..L in the public API.
* Site 1 is the most significant bit of the computational-basis index, so
  basis state ``|b_1 b_2 ... b_L>`` has index ``sum(b_l << (L - l))``.
* Bit value 0 means spin up (sigma_z eigenvalue +1), bit value 1 spin down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerances
from .tolerances import DEFAULT as TOL

LN2 = float(np.log(2.0))


class TrajectoryAnnihilatedError(RuntimeError):
    """A measurement branch with (numerically) zero weight was selected.

    Only reachable at eta = 1, where the Kraus operators are projectors.
    """


@dataclass
class PureState:
    """Normalized amplitude vector of an L-qubit chain.

    ``log_norm`` accumulates the natural log of every norm factor divided
    out during non-unitary evolution, so the unnormalized trajectory weight
    is always recoverable as ``exp(log_norm)``.
    """

    num_qubits: int
    amplitudes: np.ndarray
    log_norm: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.num_qubits < 1:
            raise ValueError("need at least one qubit")
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise ValueError(
                f"amplitude length {self.amplitudes.shape} does not match "
                f"2^{self.num_qubits}"
            )
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > TOL.unit_norm:
            raise ValueError(f"state not normalized: ||psi|| = {nrm!r}")

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def copy(self) -> "PureState":
        return PureState(self.num_qubits, self.amplitudes.copy(), self.log_norm)

    @classmethod
    def computational_basis(cls, num_qubits: int, bits: str | int = 0) -> "PureState":
        """Basis state from a bit string like ``"01"`` (site 1 first) or an index."""
        n = 2**num_qubits
        if isinstance(bits, str):
            if len(bits) != num_qubits:
                raise ValueError("bit string length must equal num_qubits")
            index = int(bits, 2)
        else:
            index = int(bits)
        amp = np.zeros(n, dtype=np.complex128)
        amp[index] = 1.0
        return cls(num_qubits, amp)

    @classmethod
    def all_up(cls, num_qubits: int) -> "PureState":
        return cls.computational_basis(num_qubits, 0)

    @classmethod
    def random(cls, num_qubits: int, rng: np.random.Generator) -> "PureState":
        """Haar-random state (normalized complex Gaussian vector)."""
        n = 2**num_qubits
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        return cls(num_qubits, v / np.linalg.norm(v))


@dataclass
class MixedState:
    """Trace-normalized density matrix of the full chain."""

    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        n = 2**self.num_qubits
        if self.matrix.shape != (n, n):
            raise ValueError("density matrix shape does not match qubit count")
        _check_density_matrix(self.matrix)

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "MixedState":
        n = 2**num_qubits
        return cls(num_qubits, np.eye(n, dtype=np.complex128) / n)

    @classmethod
    def from_pure(cls, state: PureState) -> "MixedState":
        a = state.amplitudes
        return cls(state.num_qubits, np.outer(a, a.conj()))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


@dataclass
class ReducedDensityMatrix:
    """Reduced density matrix on an ordered subset of sites."""

    subsystem_sites: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.subsystem_sites = tuple(self.subsystem_sites)
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        n = 2 ** len(self.subsystem_sites)
        if self.matrix.shape != (n, n):
            raise ValueError("matrix size does not match subsystem")
        _check_density_matrix(self.matrix)

    @property
    def num_sites(self) -> int:
        return len(self.subsystem_sites)


def _check_density_matrix(m: np.ndarray) -> None:
    if np.max(np.abs(m - m.conj().T)) > TOL.hermiticity:
        raise ValueError("matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TOL.trace_unit:
        raise ValueError(f"trace is {tr!r}, expected 1")
    if np.min(np.linalg.eigvalsh(m)) < TOL.psd_floor:
        raise ValueError("matrix has a significantly negative eigenvalue")


# ---------------------------------------------------------------------------
# raw-array kernels (shared with the multi-vector Lyapunov frame evolution)
# ---------------------------------------------------------------------------

def apply_gate_to_columns(frame: np.ndarray, gate: np.ndarray,
                          left_site: int, num_qubits: int) -> np.ndarray:
    """Apply a 4x4 gate on (left_site, left_site+1) to every column of frame.

    ``frame`` has shape (2^L, n); sites are 1-based. Works on a single state
    as a (2^L, 1) column. O(N) per column, no full-matrix construction.
    """
    L = num_qubits
    pre = 2 ** (left_site - 1)
    post = 2 ** (L - left_site - 1)
    ncols = frame.shape[1]
    work = frame.reshape(pre, 4, post, ncols)
    out = np.einsum("gh,phqn->pgqn", gate, work)
    return np.ascontiguousarray(out).reshape(frame.shape)


def sigma_z_bits(num_qubits: int, site: int) -> np.ndarray:
    """Bit of ``site`` for each basis index (0 = up, 1 = down)."""
    idx = np.arange(2**num_qubits)
    return (idx >> (num_qubits - site)) & 1


def single_site_diagonal(num_qubits: int, site: int,
                         up_value: complex, down_value: complex) -> np.ndarray:
    """Dense diagonal of a single-site diagonal operator embedded in the chain."""
    bits = sigma_z_bits(num_qubits, site)
    return np.where(bits == 0, up_value, down_value)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def apply_two_qubit_gate(state: PureState, gate: np.ndarray,
                         left_site: int) -> PureState:
    """Apply a two-qubit unitary on sites (left_site, left_site + 1)."""
    L = state.num_qubits
    if not 1 <= left_site <= L - 1:
        raise ValueError(f"left_site {left_site} out of range for L={L}")
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (4, 4):
        raise ValueError("gate must be 4x4")
    if tolerances.DEBUG_CHECKS:
        err = np.max(np.abs(gate.conj().T @ gate - np.eye(4)))
        if err > TOL.unitarity:
            raise ValueError(f"gate is not unitary (deviation {err:.3e})")
    out = apply_gate_to_columns(state.amplitudes[:, None], gate, left_site, L)
    return PureState(L, out[:, 0], state.log_norm)


def apply_single_site_operator(state: PureState, op: np.ndarray,
                               site: int) -> tuple[PureState, float]:
    """Apply an arbitrary 2x2 operator at ``site``, renormalizing.

    Returns the renormalized state and log_weight = ln ||op |psi>||; the
    state's log_norm is advanced by the same amount.
    """
    L = state.num_qubits
    if not 1 <= site <= L:
        raise ValueError(f"site {site} out of range for L={L}")
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (2, 2):
        raise ValueError("single-site operator must be 2x2")
    pre = 2 ** (site - 1)
    post = 2 ** (L - site)
    work = state.amplitudes.reshape(pre, 2, post)
    out = np.einsum("gh,phq->pgq", op, work).reshape(-1)
    nrm = np.linalg.norm(out)
    if nrm < TOL.annihilation_norm:
        raise TrajectoryAnnihilatedError(
            f"operator at site {site} annihilated the state"
        )
    log_weight = float(np.log(nrm))
    return PureState(L, out / nrm, state.log_norm + log_weight), log_weight


def partial_trace(state: PureState, keep_sites) -> ReducedDensityMatrix:
    """Reduced density matrix on ``keep_sites`` (strictly increasing, 1-based)."""
    keep = list(keep_sites)
    L = state.num_qubits
    if not keep:
        raise ValueError("keep_sites must be non-empty")
    if any(not 1 <= s <= L for s in keep):
        raise ValueError("site out of range")
    if any(b <= a for a, b in zip(keep, keep[1:])):
        raise ValueError("keep_sites must be strictly increasing")
    axes_keep = [s - 1 for s in keep]
    axes_rest = [a for a in range(L) if a not in axes_keep]
    tensor = state.amplitudes.reshape((2,) * L)
    tensor = np.transpose(tensor, axes_keep + axes_rest)
    a = tensor.reshape(2 ** len(keep), 2 ** len(axes_rest))
    rho = a @ a.conj().T
    rho = (rho + rho.conj().T) / 2.0
    return ReducedDensityMatrix(tuple(keep), rho)


def von_neumann_entropy(rho: ReducedDensityMatrix) -> float:
    """Entanglement entropy -tr(rho ln rho) in natural-log units."""
    return entropy_from_eigenvalues(np.linalg.eigvalsh(rho.matrix))


def entropy_from_eigenvalues(evals: np.ndarray) -> float:
    lam = np.clip(np.real(evals), 0.0, 1.0)
    nz = lam[lam > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def half_chain_entropy_svd(state: PureState) -> float:
    """Half-chain entropy via SVD of the reshaped amplitude matrix.

    Requires even L. Agrees with the reduced-matrix eigenvalue route
    within 1e-10; kept because it avoids forming rho for wide cuts.
    """
    L = state.num_qubits
    if L % 2 != 0:
        raise ValueError("half-chain SVD entropy needs even L")
    half = 2 ** (L // 2)
    s = np.linalg.svd(state.amplitudes.reshape(half, half), compute_uv=False)
    return entropy_from_eigenvalues(s**2)


def subsystem_entropy(state: PureState, sites) -> float:
    return von_neumann_entropy(partial_trace(state, sites))


def x_magnetization(state: PureState) -> float:
    """Expectation of X = sum_l sigma_x^l, computed exactly from amplitudes."""
    L = state.num_qubits
    a = state.amplitudes
    total = 0.0
    for site in range(1, L + 1):
        pre = 2 ** (site - 1)
        post = 2 ** (L - site)
        w = a.reshape(pre, 2, post)
        total += 2.0 * float(np.real(np.sum(w[:, 0, :].conj() * w[:, 1, :])))
    return total
