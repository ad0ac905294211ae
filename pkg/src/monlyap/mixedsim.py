"""Mixed-state trajectories from the maximally mixed state and purification.

``evolve_mixed_step`` implements the density-matrix update rule directly:
rho -> U rho U+ for the brick-wall layer, then per site rho -> M rho M+ / p
with p = tr(M rho M+). That dense route is exact for the evolution but its
eigenvalue ratios hit the double-precision floor once lambda_2 / lambda_1
drops below ~1e-15, i.e. after t ~ 18 / gap steps.

The purification-gap estimator therefore evolves rho_t = A_t A_t+ / tr in a
factored form instead: A_t is kept as (orthonormal frame) x (row-scaled
triangular product), truncated to the directions that still influence the
leading eigenvalues. Outcome statistics are identical (the Born rule is
evaluated from the same rho), but lambda_1 / lambda_2 stays exact at any
time. Tests cross-check both routes in the regime where the dense one is
reliable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import CircuitSchedule, KrausPair, TrajectoryStreams, gate_from_seed, mix64
from .lyapunov import scaled_top_log_singular_values
from .states import MixedState
from .tolerances import DEFAULT as TOL


def _apply_gate_dense(rho: np.ndarray, gate: np.ndarray, bond: int,
                      num_qubits: int) -> np.ndarray:
    n = rho.shape[0]
    pre = 2 ** (bond - 1)
    post = 2 ** (num_qubits - bond - 1)
    work = rho.reshape(pre, 4, post * n)
    rho = np.einsum("gh,phX->pgX", gate, work).reshape(n, n)
    work = rho.reshape(n, pre, 4, post)
    rho = np.einsum("gh,Xphq->Xpgq", gate.conj(), work).reshape(n, n)
    return rho


def evolve_mixed_step(rho: MixedState, t: int, eta: float,
                      streams: TrajectoryStreams,
                      schedule: CircuitSchedule | None = None) -> MixedState:
    """One circuit step on a dense density matrix (unitary layer + sweep)."""
    L = rho.num_qubits
    if schedule is None:
        schedule = CircuitSchedule(L)
    kraus = KrausPair.for_strength(eta)
    up, dn = kraus.diag_up, kraus.diag_down
    bonds = schedule.bonds_for_step(t)
    seeds = streams.gate_seeds(t, len(bonds))
    m = rho.matrix.copy()
    for bond, seed in zip(bonds, seeds):
        m = _apply_gate_dense(m, gate_from_seed(seed), bond, L)
    uniforms = streams.outcome_uniforms(t, L)
    diag = np.real(np.diagonal(m)).copy()
    dtot = np.ones(m.shape[0])
    for site in range(1, L + 1):
        pre = 2 ** (site - 1)
        post = 2 ** (L - site)
        dview = diag.reshape(pre, 2, post)
        total = float(diag.sum())
        s_up = float(dview[:, 0, :].sum())
        p_plus = (s_up * up * up + (total - s_up) * dn * dn) / total
        d_up, d_dn = (up, dn) if uniforms[site - 1] < p_plus else (dn, up)
        dview[:, 0, :] *= d_up * d_up
        dview[:, 1, :] *= d_dn * d_dn
        tview = dtot.reshape(pre, 2, post)
        tview[:, 0, :] *= d_up
        tview[:, 1, :] *= d_dn
    m = m * dtot[:, None] * dtot[None, :]
    tr = float(np.trace(m).real)
    if tr < TOL.annihilation_norm:
        raise RuntimeError("mixed trajectory annihilated (eta = 1 only)")
    m = (m + m.conj().T) / (2.0 * tr)
    return MixedState(L, m)


# ---------------------------------------------------------------------------
# factored evolution for the purification gap
# ---------------------------------------------------------------------------

class _FactoredMixedTrajectory:
    """rho_t = A A+ / tr(A A+) with A kept as frame @ diag(exp(d)) @ core.

    ``frame`` is N x k (orthonormal right after each refactorization), the
    row-scaled ``core`` is k x N, and directions whose scale has fallen
    ``trunc_window`` e-folds below the leading one are dropped: they no
    longer influence the top of the spectrum nor the Born probabilities.
    """

    def __init__(self, eta: float, num_qubits: int, streams: TrajectoryStreams,
                 measurement_only: bool = False, qr_stride: int = 2,
                 trunc_window: float = 60.0, min_rank: int = 8):
        self.eta = eta
        self.num_qubits = num_qubits
        self.streams = streams
        self.kraus = KrausPair.for_strength(eta)
        self.schedule = CircuitSchedule(num_qubits, enabled=not measurement_only)
        self.qr_stride = qr_stride
        self.trunc_window = trunc_window
        self.min_rank = min_rank
        n = 2**num_qubits
        self.frame = np.eye(n, dtype=np.complex128)   # N x k
        self.scales = np.zeros(n)                     # k
        self.core = np.eye(n, dtype=np.complex128)    # k x N
        self.gram = np.eye(n, dtype=np.complex128)    # core @ core+
        self.t = 0
        self._steps_since_qr = 0

    def _rho_diagonal(self) -> np.ndarray:
        """Unnormalized rho_jj = ||row_j(A)||^2 up to a common factor."""
        rel = np.exp(self.scales - self.scales.max())
        mid = (rel[:, None] * self.gram) * rel[None, :]
        m = self.frame @ mid
        return np.maximum(np.real(np.sum(m * self.frame.conj(), axis=1)), 0.0)

    def step(self) -> None:
        self.t += 1
        L = self.num_qubits
        bonds = self.schedule.bonds_for_step(self.t)
        seeds = self.streams.gate_seeds(self.t, len(bonds))
        w = self.frame
        k = w.shape[1]
        for bond, seed in zip(bonds, seeds):
            pre = 2 ** (bond - 1)
            post = 2 ** (L - bond - 1)
            work = w.reshape(pre, 4, post, k)
            w = np.einsum("gh,phqn->pgqn", gate_from_seed(seed), work)
            w = w.reshape(2**L, k)
        self.frame = np.ascontiguousarray(w)
        diag = self._rho_diagonal()
        uniforms = self.streams.outcome_uniforms(self.t, L)
        up, dn = self.kraus.diag_up, self.kraus.diag_down
        dtot = np.ones(2**L)
        for site in range(1, L + 1):
            pre = 2 ** (site - 1)
            post = 2 ** (L - site)
            dview = diag.reshape(pre, 2, post)
            total = float(diag.sum())
            s_up = float(dview[:, 0, :].sum())
            p_plus = (s_up * up * up + (total - s_up) * dn * dn) / total
            d_up, d_dn = (up, dn) if uniforms[site - 1] < p_plus else (dn, up)
            dview[:, 0, :] *= d_up * d_up
            dview[:, 1, :] *= d_dn * d_dn
            tview = dtot.reshape(pre, 2, post)
            tview[:, 0, :] *= d_up
            tview[:, 1, :] *= d_dn
        self.frame = self.frame * dtot[:, None]
        self._steps_since_qr += 1
        if self._steps_since_qr >= self.qr_stride:
            self.refactor()

    def refactor(self) -> None:
        """Re-orthonormalize the frame and fold its coefficients into the core."""
        if self._steps_since_qr == 0:
            return
        q, r = np.linalg.qr(self.frame)
        diag = np.diagonal(r).copy()
        mags = np.abs(diag)
        floor = np.max(mags) * 1e-280
        mags = np.maximum(mags, floor)
        phases = np.where(np.abs(diag) > 0, diag / np.maximum(np.abs(diag), floor), 1.0)
        q = q * phases[None, :]
        r = r / phases[:, None]
        new_scales = self.scales + np.log(mags)
        exponent = self.scales[None, :] - new_scales[:, None]
        exponent[r == 0] = -np.inf
        with np.errstate(under="ignore"):
            factor = r * np.exp(np.minimum(exponent, 700.0))
        core = factor @ self.core
        row_norms = np.linalg.norm(core, axis=1)
        row_norms = np.maximum(row_norms, np.max(row_norms) * 1e-280)
        new_scales = new_scales + np.log(row_norms)
        core /= row_norms[:, None]
        gram = core @ core.conj().T
        order = np.argsort(new_scales)[::-1]
        cut = np.searchsorted(-(new_scales[order] - new_scales[order[0]]),
                              self.trunc_window, side="right")
        keep = order[: max(self.min_rank, int(cut))]
        self.frame = np.ascontiguousarray(q[:, keep])
        self.scales = new_scales[keep]
        self.core = np.ascontiguousarray(core[keep])
        g = gram[np.ix_(keep, keep)]
        self.gram = (g + g.conj().T) / 2.0
        self._steps_since_qr = 0

    def top_eigenvalues(self) -> tuple[float, float, float, float]:
        """(lambda_1, lambda_2, log sigma_1, log sigma_2) of rho_t, exact."""
        self.refactor()
        logs = scaled_top_log_singular_values(self.scales, self.core, top=2)
        z = float(np.sum(np.exp(2.0 * (self.scales - self.scales.max()))))
        lam1 = math.exp(2.0 * (logs[0] - self.scales.max())) / z
        lam2 = math.exp(2.0 * (logs[1] - self.scales.max())) / z
        return lam1, lam2, float(logs[0]), float(logs[1])


@dataclass
class TrajectoryPurification:
    trajectory_id: int
    times: np.ndarray
    lambda_1: np.ndarray
    lambda_2: np.ndarray
    gap_t: np.ndarray


@dataclass
class PurificationSeries:
    eta: float
    num_qubits: int
    window: tuple[int, int]
    trajectories: list[TrajectoryPurification] = field(default_factory=list)

    @property
    def num_trajectories(self) -> int:
        return len(self.trajectories)

    def trajectory_means(self) -> np.ndarray:
        return np.array([tr.gap_t.mean() for tr in self.trajectories])

    @property
    def mean_gap(self) -> float:
        return float(self.trajectory_means().mean())

    @property
    def stderr(self) -> float:
        means = self.trajectory_means()
        if means.size < 2:
            return 0.0
        return float(means.std(ddof=1) / math.sqrt(means.size))


def purification_gap(eta: float, num_qubits: int, seed: int,
                     t_window: tuple[int, int] = (20, 500),
                     trajectories: int = 100,
                     measurement_only: bool = False,
                     readout_stride: int = 1) -> PurificationSeries:
    """Ensemble purification-gap estimate from the maximally mixed state.

    Per trajectory and window step, gap_t = (1 / 2t) ln(lambda_1 / lambda_2)
    of rho_t; the estimate averages uniformly over window steps, then over
    trajectories.
    """
    if num_qubits > 10:
        raise ValueError("mixed-state runs are limited to L <= 10")
    t_start, t_end = int(t_window[0]), int(t_window[1])
    if t_start < 1:
        raise ValueError("window must start at t >= 1")
    if t_end < t_start:
        raise ValueError("empty time window")
    series = PurificationSeries(eta=eta, num_qubits=num_qubits,
                                window=(t_start, t_end))
    for tid in range(trajectories):
        streams = TrajectoryStreams(mix64(seed, tid))
        run = _FactoredMixedTrajectory(eta, num_qubits, streams,
                                       measurement_only=measurement_only)
        times, l1s, l2s, gaps = [], [], [], []
        for _ in range(t_end):
            run.step()
            t = run.t
            if t >= t_start and (t - t_start) % readout_stride == 0:
                lam1, lam2, ls1, ls2 = run.top_eigenvalues()
                times.append(t)
                l1s.append(lam1)
                l2s.append(lam2)
                gaps.append((ls1 - ls2) / t)
        series.trajectories.append(TrajectoryPurification(
            trajectory_id=tid,
            times=np.array(times, dtype=int),
            lambda_1=np.array(l1s), lambda_2=np.array(l2s),
            gap_t=np.array(gaps),
        ))
    return series
