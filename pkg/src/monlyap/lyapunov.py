"""Lyapunov spectrum engine for the monitored circuit.

The engine propagates n tracked vectors under one shared realization of the
non-unitary circuit (outcomes sampled from vector 1, the physical
trajectory), re-orthonormalizing every b steps by Gram-Schmidt. Two readouts
coexist:

* running exponents: eps_i(t) = -(1/t) * sum of residual log norms, the
  standard asymptotic estimator. Its finite-time value carries an O(1/t)
  transient from the initial-frame alignment, which the time-averaging
  convergence window absorbs.
* finite-time spectrum: exact log singular values of the accumulated
  evolution restricted to the tracked frame, recovered from the product of
  the per-block Gram-Schmidt coefficient matrices kept in row-scaled form.
  When n = 2^L this equals the singular value spectrum of the full operator
  to machine precision at any t, with no under/overflow for arbitrarily
  long runs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .channel import (
    CircuitSchedule,
    KrausPair,
    TrajectoryRecord,
    TrajectoryStreams,
    evolve_frame_step,
)
from .states import PureState
from .tolerances import DEFAULT as TOL


class RankCollapseError(RuntimeError):
    """A tracked vector became linearly dependent on its predecessors."""

    def __init__(self, index: int):
        super().__init__(
            f"rank collapse at tracked vector {index}: Gram-Schmidt residual "
            "underflowed (expected for large eta * b * L or eta = 1)"
        )
        self.index = index


@dataclass
class LyapunovEstimate:
    """Running state of a Gram-Schmidt Lyapunov computation."""

    num_tracked: int
    block_length: int
    blocks_done: int
    exponents: np.ndarray            # window means, ascending
    window_std: np.ndarray
    residual_log_norms: np.ndarray   # per-block history, shape (blocks, n)
    window_blocks: int
    converged: bool
    total_steps: int

    @property
    def window_mean(self) -> np.ndarray:
        return self.exponents


@dataclass
class GapEstimate:
    eta: float
    num_qubits: int
    gap: float
    std: float
    blocks_used: int
    converged: bool
    exponents: np.ndarray
    exponent_std: np.ndarray
    block_length: int
    window_blocks: int
    threshold: float
    total_steps: int
    seed: int
    measurement_only: bool = False


@dataclass
class EffectiveHamiltonian:
    """Spectrum plus Gram-Schmidt vectors at a fixed time.

    ``spectrum`` holds the exact finite-time decay exponents; the pairing
    with the Gram-Schmidt ``vectors`` is asymptotic, and the result retains
    a residual dependence on the block length, so b is reported alongside.
    """

    eta: float
    num_qubits: int
    time: int
    block_length: int
    spectrum: np.ndarray   # ascending, length 2^L
    vectors: np.ndarray    # orthonormal columns, shape (2^L, 2^L)

    def matrix(self) -> np.ndarray:
        return (self.vectors * self.spectrum[None, :]) @ self.vectors.conj().T

    def orthonormality_defect(self) -> float:
        g = self.vectors.conj().T @ self.vectors
        return float(np.max(np.abs(g - np.eye(g.shape[0]))))


# ---------------------------------------------------------------------------
# exact singular values of the row-scaled coefficient product
# ---------------------------------------------------------------------------

def _jacobi_rotate(d: np.ndarray, v: np.ndarray, i: int, k: int,
                   tol: float) -> float:
    """Orthogonalize scaled rows i and k in place; returns the coupling."""
    hi, lo = (i, k) if d[i] >= d[k] else (k, i)
    g = np.vdot(v[hi], v[lo])
    m = abs(g)
    if m < tol:
        return m
    phase = g / m
    rho = math.exp(min(d[lo] - d[hi], 0.0))
    if rho > 1e-8:
        theta = 0.5 * math.atan2(2.0 * rho * m, 1.0 - rho * rho)
        c, s = math.cos(theta), math.sin(theta)
        row_hi = c * v[hi] + (s * rho) * np.conj(phase) * v[lo]
        row_lo = -(s / rho) * phase * v[hi] + c * v[lo]
        nhi = math.sqrt(np.vdot(row_hi, row_hi).real)
        d[hi] += math.log(nhi)
        v[hi] = row_hi / nhi
    else:
        # rotation angle ~ rho * m: the large row is unchanged to first
        # order, the small row sheds its overlap exactly
        row_lo = v[lo] - (m * phase) * v[hi]
    nlo = math.sqrt(np.vdot(row_lo, row_lo).real)
    if nlo == 0.0:
        d[lo] = -np.inf
        v[lo] = row_lo
    else:
        d[lo] += math.log(nlo)
        v[lo] = row_lo / nlo
    return m


def scaled_log_singular_values(scales: np.ndarray, core: np.ndarray,
                               tol: float = 1e-14,
                               max_sweeps: int = 60) -> np.ndarray:
    """Log singular values of diag(exp(scales)) @ core, descending.

    One-sided Jacobi on rows, carried as (scale, unit vector) pairs so the
    result is exact to working precision even when the scales span
    thousands of e-folds. ``core`` must be reasonably conditioned, which
    the per-block rescaling in the engine guarantees.
    """
    d = np.asarray(scales, dtype=float).copy()
    v = np.asarray(core, dtype=complex).copy()
    n = d.size
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("core matrix has a zero row")
    d += np.log(norms)
    v /= norms[:, None]
    for _ in range(max_sweeps):
        biggest = 0.0
        for i in range(n - 1):
            for k in range(i + 1, n):
                biggest = max(biggest, _jacobi_rotate(d, v, i, k, tol))
        if biggest < tol:
            break
    return np.sort(d)[::-1]


def scaled_top_log_singular_values(scales: np.ndarray, core: np.ndarray,
                                   top: int = 2, buffer: int = 4,
                                   tol: float = 1e-13,
                                   max_sweeps: int = 30) -> np.ndarray:
    """Leading ``top`` log singular values of diag(exp(scales)) @ core.

    Only the ``top + buffer`` largest-scale rows are orthogonalized against
    everything below them, which is exact for the leading singular values
    once those rows carry the dominant scales; couplings whose influence is
    below working precision are skipped, so the cost tracks the number of
    not-yet-separated directions instead of the full dimension.
    """
    d = np.asarray(scales, dtype=float).copy()
    v = np.asarray(core, dtype=complex).copy()
    n = d.size
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("core matrix has a zero row")
    d += np.log(norms)
    v /= norms[:, None]
    m = min(n, top + buffer)
    # influence of row k on ln sigma_i is O(exp(2(d_k - d_i))): ignorable
    # couplings are skipped wholesale
    log_skip = -18.0
    for _ in range(max_sweeps):
        order = np.argsort(d)[::-1]
        biggest = 0.0
        for a in range(m):
            i = order[a]
            others = order[a + 1:]
            keep = others[d[others] - d[i] > log_skip]
            for k in keep:
                biggest = max(biggest, _jacobi_rotate(d, v, int(i), int(k), tol))
        if biggest < tol:
            break
    return np.sort(d)[::-1][:top]


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------

class GramSchmidtEngine:
    """Block Gram-Schmidt propagation of n tracked vectors.

    Measurement outcomes for the shared circuit realization are generated by
    the Born rule of tracked vector 1; the other vectors ride along under the
    identical operator sequence.
    """

    def __init__(self, eta: float, num_qubits: int, num_tracked: int,
                 block_length: int, streams: TrajectoryStreams,
                 measurement_only: bool = False,
                 track_product: bool = False,
                 record: TrajectoryRecord | None = None,
                 initial_frame: np.ndarray | None = None):
        if block_length < 1:
            raise ValueError("block_length must be >= 1")
        dim = 2**num_qubits
        if not 1 <= num_tracked <= dim:
            raise ValueError("num_tracked must lie in [1, 2^L]")
        self.eta = float(eta)
        self.num_qubits = num_qubits
        self.num_tracked = num_tracked
        self.block_length = block_length
        self.streams = streams
        self.measurement_only = measurement_only
        self.record = record
        self.kraus = KrausPair.for_strength(eta)
        self.schedule = CircuitSchedule(num_qubits, enabled=not measurement_only)
        if initial_frame is None:
            rng = streams.initial_state_rng(0)
            raw = rng.normal(size=(dim, num_tracked)) \
                + 1j * rng.normal(size=(dim, num_tracked))
            initial_frame = np.linalg.qr(raw)[0]
        self.frame = np.asarray(initial_frame, dtype=np.complex128)
        self.blocks_done = 0
        self.cum_log_norms = np.zeros(num_tracked)
        self._cum_comp = np.zeros(num_tracked)  # Kahan compensation
        self.residual_history: list[np.ndarray] = []
        self.track_product = track_product
        if track_product:
            self.prod_scales = np.zeros(num_tracked)
            self.prod_core = np.eye(num_tracked, dtype=np.complex128)

    @property
    def time(self) -> int:
        return self.blocks_done * self.block_length

    def run_block(self) -> np.ndarray:
        """Advance b steps, re-orthonormalize, return the n residual log norms."""
        frame = self.frame
        block_logw = np.zeros(self.num_tracked)
        for step in range(self.blocks_done * self.block_length + 1,
                          (self.blocks_done + 1) * self.block_length + 1):
            frame, logw = evolve_frame_step(frame, step, self.kraus,
                                            self.schedule, self.streams,
                                            self.record)
            block_logw += logw
        q, r = np.linalg.qr(frame)
        diag = np.diagonal(r).copy()
        mags = np.abs(diag)
        if np.min(mags) < TOL.rank_collapse_residual:
            raise RankCollapseError(int(np.argmin(mags)))
        phases = diag / mags
        q = q * phases[None, :]
        r = r / phases[:, None]
        residual = block_logw + np.log(mags)
        self._kahan_add(residual)
        self.residual_history.append(residual)
        if self.track_product:
            self._update_product(r, block_logw, mags)
        self.frame = q
        self.blocks_done += 1
        return residual

    def _kahan_add(self, x: np.ndarray) -> None:
        y = x - self._cum_comp
        t = self.cum_log_norms + y
        self._cum_comp = (t - self.cum_log_norms) - y
        self.cum_log_norms = t

    def _update_product(self, r: np.ndarray, block_logw: np.ndarray,
                        diag_mags: np.ndarray) -> None:
        # coefficient matrix of this block on the unnormalized vectors is
        # r @ diag(exp(block_logw)); fold into the running row-scaled product
        g = block_logw + self.prod_scales
        new_scales = g + np.log(diag_mags)
        # r is exactly zero below the diagonal; keep the exponent from
        # overflowing there (0 * inf), and let deep underflow flush to 0
        exponent = g[None, :] - new_scales[:, None]
        exponent[r == 0] = -np.inf
        with np.errstate(under="ignore"):
            factor = r * np.exp(np.minimum(exponent, 700.0))
        core = factor @ self.prod_core
        row_norms = np.linalg.norm(core, axis=1)
        self.prod_scales = new_scales + np.log(row_norms)
        self.prod_core = core / row_norms[:, None]

    def running_exponents(self) -> np.ndarray:
        """Cumulative-average exponents, sorted ascending."""
        t = self.time
        if t == 0:
            raise RuntimeError("no blocks run yet")
        return np.sort(-self.cum_log_norms / t)

    def finite_time_exponents(self) -> np.ndarray:
        """Exact exponents of the accumulated operator on the tracked frame.

        For num_tracked = 2^L these coincide with -(1/t) ln of the singular
        values of the full evolution operator V_t, at any t.
        """
        if not self.track_product:
            raise RuntimeError("engine was created with track_product=False")
        logs = scaled_log_singular_values(self.prod_scales, self.prod_core)
        return np.sort(-logs / self.time)

    def tracked_states(self) -> list[PureState]:
        return [PureState(self.num_qubits, self.frame[:, i].copy(),
                          float(self.cum_log_norms[i]))
                for i in range(self.num_tracked)]

    def estimate(self, window_blocks: int,
                 threshold: float = 3e-2) -> LyapunovEstimate:
        """Windowed snapshot of the running exponents and their scatter."""
        if self.blocks_done == 0:
            raise RuntimeError("no blocks run yet")
        history = np.asarray(self.residual_history)
        running = np.sort(-np.cumsum(history, axis=0)
                          / (np.arange(1, self.blocks_done + 1)[:, None]
                             * self.block_length), axis=1)
        window = running[-window_blocks:]
        means = window.mean(axis=0)
        stds = window.std(axis=0)
        scale = np.maximum(np.abs(means), TOL.convergence_floor)
        return LyapunovEstimate(
            num_tracked=self.num_tracked,
            block_length=self.block_length,
            blocks_done=self.blocks_done,
            exponents=means,
            window_std=stds,
            residual_log_norms=history,
            window_blocks=min(window_blocks, self.blocks_done),
            converged=bool(np.all(stds <= threshold * scale)),
            total_steps=self.time,
        )

    def orthonormality_defect(self) -> float:
        g = self.frame.conj().T @ self.frame
        return float(np.max(np.abs(g - np.eye(self.num_tracked))))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def lyapunov_block_step(vectors: list[PureState], eta: float, start_step: int,
                        block_length: int, streams: TrajectoryStreams,
                        measurement_only: bool = False):
    """Evolve orthonormal ``vectors`` through one shared b-step block.

    Outcomes are generated by the Born rule of vectors[0]. Returns the
    re-orthonormalized vectors and the residual log norms
    ln || (1 - Pi_i) V~ |phi_i> ||, including the renormalization
    bookkeeping accumulated during the block.
    """
    if not vectors:
        raise ValueError("need at least one vector")
    if (start_step - 1) % block_length != 0:
        raise ValueError("start_step must sit on a block boundary")
    L = vectors[0].num_qubits
    frame = np.stack([v.amplitudes for v in vectors], axis=1)
    gram = frame.conj().T @ frame
    if np.max(np.abs(gram - np.eye(len(vectors)))) > TOL.orthonormality:
        raise ValueError("input vectors are not orthonormal")
    engine = GramSchmidtEngine(eta, L, len(vectors), block_length, streams,
                               measurement_only=measurement_only,
                               initial_frame=frame)
    engine.blocks_done = (start_step - 1) // block_length
    residual = engine.run_block()
    return engine.tracked_states(), residual


def run_gap_estimate(eta: float, num_qubits: int, seed: int,
                     num_tracked: int = 2, block_length: int = 16,
                     window_blocks: int = 200, threshold: float = 3e-2,
                     max_blocks: int = 20000, min_blocks: int | None = None,
                     measurement_only: bool = False,
                     block_sink=None) -> GapEstimate:
    """Run blocks until the windowed exponents settle, then report the gap.

    Convergence: over the trailing ``window_blocks`` block readouts of the
    running exponents, std/|mean| < threshold for every tracked exponent
    (absolute floor: tolerances.convergence_floor, which makes the eta = 0
    all-zero spectrum count as converged). gap = mean eps_2 - mean eps_1.
    The test is not consulted before ``min_blocks`` (default: two windows),
    so the trailing window never contains the initial transient alone.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError("gap estimation requires 0 <= eta < 1")
    if num_tracked < 2:
        raise ValueError("the gap needs at least two tracked exponents")
    streams = TrajectoryStreams(seed)
    engine = GramSchmidtEngine(eta, num_qubits, num_tracked, block_length,
                               streams, measurement_only=measurement_only)
    window: deque[np.ndarray] = deque(maxlen=window_blocks)
    if min_blocks is None:
        min_blocks = 2 * window_blocks
    converged = False
    for s in range(1, max_blocks + 1):
        engine.run_block()
        eps = engine.running_exponents()
        window.append(eps)
        if block_sink is not None:
            block_sink(s, engine.time, eps,
                       _window_std(window) if len(window) > 1 else np.zeros_like(eps))
        if s >= min_blocks and len(window) == window_blocks:
            arr = np.asarray(window)
            means = arr.mean(axis=0)
            stds = arr.std(axis=0)
            scale = np.maximum(np.abs(means), TOL.convergence_floor)
            if np.all(stds <= threshold * scale):
                converged = True
                break
    arr = np.asarray(window)
    means = arr.mean(axis=0)
    stds = arr.std(axis=0)
    gaps = arr[:, 1] - arr[:, 0]
    return GapEstimate(
        eta=eta, num_qubits=num_qubits,
        gap=float(means[1] - means[0]), std=float(gaps.std()),
        blocks_used=engine.blocks_done, converged=converged,
        exponents=means, exponent_std=stds,
        block_length=block_length, window_blocks=window_blocks,
        threshold=threshold, total_steps=engine.time, seed=seed,
        measurement_only=measurement_only,
    )


def _window_std(window) -> np.ndarray:
    return np.asarray(window).std(axis=0)


def run_full_spectrum(eta: float, num_qubits: int, seed: int,
                      block_length: int, num_blocks: int,
                      measurement_only: bool = False,
                      keep_history: bool = False) -> EffectiveHamiltonian:
    """Track all 2^L vectors and return the full spectrum at the final time.

    The spectral width is checked against the majorization bound on every
    call; a violation is a bug, not a physics outcome.
    """
    if num_qubits > 10:
        raise ValueError("full-spectrum runs are limited to L <= 10")
    dim = 2**num_qubits
    streams = TrajectoryStreams(seed)
    engine = GramSchmidtEngine(eta, num_qubits, dim, block_length, streams,
                               measurement_only=measurement_only,
                               track_product=True)
    for _ in range(num_blocks):
        engine.run_block()
        if not keep_history:
            engine.residual_history.clear()
    ham = EffectiveHamiltonian(
        eta=eta, num_qubits=num_qubits, time=engine.time,
        block_length=block_length,
        spectrum=engine.finite_time_exponents(),
        vectors=engine.frame.copy(),
    )
    from .analysis import width_bound  # local import, analysis uses our types
    check = width_bound(ham.spectrum, eta, num_qubits)
    if not check.satisfied:
        raise AssertionError(
            f"spectral width {check.width} exceeds the majorization bound "
            f"{check.bound}; this indicates a simulator bug"
        )
    return ham


def spectrum_snapshots(eta: float, num_qubits: int, seed: int,
                       block_length: int, num_blocks: int, keep_last: int,
                       measurement_only: bool = False) -> list[EffectiveHamiltonian]:
    """Full-spectrum readouts at the last ``keep_last`` block boundaries.

    Feeds the Pauli-string weight average, which wants effective
    Hamiltonians at t, t - b, ..., t - (c-1) b.
    """
    dim = 2**num_qubits
    streams = TrajectoryStreams(seed)
    engine = GramSchmidtEngine(eta, num_qubits, dim, block_length, streams,
                               measurement_only=measurement_only,
                               track_product=True)
    out: list[EffectiveHamiltonian] = []
    for s in range(1, num_blocks + 1):
        engine.run_block()
        engine.residual_history.clear()
        if s > num_blocks - keep_last:
            out.append(EffectiveHamiltonian(
                eta=eta, num_qubits=num_qubits, time=engine.time,
                block_length=block_length,
                spectrum=engine.finite_time_exponents(),
                vectors=engine.frame.copy(),
            ))
    return out


def relaxation_time(gap, delta: float) -> float:
    """tau_delta = |ln delta| / gap, the time after which subdominant
    Lyapunov vectors are negligible at precision delta."""
    value = gap.gap if isinstance(gap, GapEstimate) else float(gap)
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    if value <= 0.0:
        raise ValueError("no finite relaxation time: gap is not positive")
    return abs(math.log(delta)) / value


def calibrate_block_length(eta: float, num_qubits: int, seed: int,
                           window_blocks: int = 100, threshold: float = 3e-2,
                           start: int = 2, max_length: int = 512,
                           max_blocks: int = 4000) -> int:
    """Double b until the two leading exponents stop moving within 2 * threshold.

    Mirrors the calibration protocol used for the production runs; the
    returned b is then safe for nearby (eta, L).
    """
    previous = None
    b = start
    while b <= max_length:
        est = run_gap_estimate(eta, num_qubits, seed, block_length=b,
                               window_blocks=window_blocks, threshold=threshold,
                               max_blocks=max_blocks)
        if previous is not None:
            scale = np.maximum(np.abs(previous), TOL.convergence_floor)
            if np.all(np.abs(est.exponents - previous) <= 2 * threshold * scale):
                return b // 2
        previous = est.exponents
        b *= 2
    return max_length
