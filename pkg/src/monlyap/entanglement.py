"""Entanglement-entropy and mutual-information diagnostics of a trajectory.

After a burn-in of tau >= tau_delta steps the trajectory state coincides
with the dominant Lyapunov vector up to precision delta, so its half-chain
entropy and end-to-end mutual information probe the phase directly. In the
gapless phase tau_delta is exponentially large; runs there use a configured
cap and say so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import CircuitSchedule, TrajectoryStreams, evolve_one_step
from .lyapunov import GapEstimate, relaxation_time
from .states import LN2, PureState, partial_trace, von_neumann_entropy
from .tolerances import DEFAULT as TOL


@dataclass
class EntropySeries:
    eta: float
    num_qubits: int
    cut: tuple[int, ...]
    burn_in: int
    burn_in_capped: bool
    seed: int
    samples: np.ndarray          # S_t^A for T consecutive post-burn-in steps
    complement_samples: np.ndarray
    final_state: PureState

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def stderr(self) -> float:
        if self.samples.size < 2:
            return 0.0
        return float(self.samples.std(ddof=1) / math.sqrt(self.samples.size))


@dataclass
class MutualInformationSeries:
    eta: float
    num_qubits: int
    sites_a: tuple[int, ...]
    sites_b: tuple[int, ...]
    burn_in: int
    burn_in_capped: bool
    seed: int
    s_a: np.ndarray
    s_b: np.ndarray
    s_ab: np.ndarray

    @property
    def samples(self) -> np.ndarray:
        return self.s_a + self.s_b - self.s_ab

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def stderr(self) -> float:
        if self.samples.size < 2:
            return 0.0
        return float(self.samples.std(ddof=1) / math.sqrt(self.samples.size))


def resolve_burn_in(gap: GapEstimate | float | None, delta: float,
                    tau_cap: int) -> tuple[int, bool]:
    """Burn-in tau_delta from a prior gap estimate, capped when unreachable."""
    if gap is None:
        return tau_cap, True
    value = gap.gap if isinstance(gap, GapEstimate) else float(gap)
    if value <= 0.0:
        return tau_cap, True
    tau = math.ceil(relaxation_time(value, delta))
    if tau > tau_cap:
        return tau_cap, True
    return tau, False


def half_chain_cut(num_qubits: int) -> tuple[int, ...]:
    return tuple(range(1, num_qubits // 2 + 1))


def measure_entropy_series(eta: float, num_qubits: int, cut, T: int, seed: int,
                           gap: GapEstimate | float | None = None,
                           delta: float = 1e-2, tau_cap: int = 2000,
                           initial: PureState | None = None) -> EntropySeries:
    """Evolve one Born-rule trajectory and record S_t^A for T steps after burn-in."""
    if T <= 0:
        raise ValueError("need T >= 1 recorded steps; empty series has no mean")
    cut = tuple(cut)
    complement = tuple(s for s in range(1, num_qubits + 1) if s not in cut)
    tau, capped = resolve_burn_in(gap, delta, tau_cap)
    streams = TrajectoryStreams(seed)
    state = initial if initial is not None \
        else PureState.random(num_qubits, streams.initial_state_rng(0))
    schedule = CircuitSchedule(num_qubits)
    samples = np.empty(T)
    complement_samples = np.empty(T)
    for t in range(1, tau + T + 1):
        state = evolve_one_step(state, t, eta, streams, schedule=schedule)
        if t > tau:
            samples[t - tau - 1] = von_neumann_entropy(partial_trace(state, cut))
            complement_samples[t - tau - 1] = von_neumann_entropy(
                partial_trace(state, complement))
    if np.any(samples < -TOL.entropy_slack) or \
            np.any(samples > len(cut) * LN2 + TOL.entropy_slack):
        raise AssertionError("entropy sample escaped [0, |A| ln 2]")
    return EntropySeries(eta=eta, num_qubits=num_qubits, cut=cut,
                         burn_in=tau, burn_in_capped=capped, seed=seed,
                         samples=samples, complement_samples=complement_samples,
                         final_state=state)


def mutual_information_snapshot(state: PureState, sites_a, sites_b) -> float:
    """I = S^A + S^B - S^{AB} for one state."""
    a, b = tuple(sites_a), tuple(sites_b)
    if set(a) & set(b):
        raise ValueError("subsystems A and B must be disjoint")
    s_a = von_neumann_entropy(partial_trace(state, a))
    s_b = von_neumann_entropy(partial_trace(state, b))
    s_ab = von_neumann_entropy(partial_trace(state, tuple(sorted(a + b))))
    return s_a + s_b - s_ab


def mutual_information_series(eta: float, num_qubits: int, T: int, seed: int,
                              sites_a=None, sites_b=None,
                              gap: GapEstimate | float | None = None,
                              delta: float = 1e-2,
                              tau_cap: int = 2000) -> MutualInformationSeries:
    """Time-averaged mutual information between two site groups.

    Defaults to the chain ends A = {1}, B = {L}, whose averaged mutual
    information peaks at the entanglement transition.
    """
    if T <= 0:
        raise ValueError("need T >= 1 recorded steps")
    a = tuple(sites_a) if sites_a is not None else (1,)
    b = tuple(sites_b) if sites_b is not None else (num_qubits,)
    if set(a) & set(b):
        raise ValueError("subsystems A and B must be disjoint")
    ab = tuple(sorted(a + b))
    tau, capped = resolve_burn_in(gap, delta, tau_cap)
    streams = TrajectoryStreams(seed)
    state = PureState.random(num_qubits, streams.initial_state_rng(0))
    schedule = CircuitSchedule(num_qubits)
    s_a = np.empty(T)
    s_b = np.empty(T)
    s_ab = np.empty(T)
    for t in range(1, tau + T + 1):
        state = evolve_one_step(state, t, eta, streams, schedule=schedule)
        if t > tau:
            i = t - tau - 1
            s_a[i] = von_neumann_entropy(partial_trace(state, a))
            s_b[i] = von_neumann_entropy(partial_trace(state, b))
            s_ab[i] = von_neumann_entropy(partial_trace(state, ab))
    series = MutualInformationSeries(eta=eta, num_qubits=num_qubits,
                                     sites_a=a, sites_b=b, burn_in=tau,
                                     burn_in_capped=capped, seed=seed,
                                     s_a=s_a, s_b=s_b, s_ab=s_ab)
    if np.any(series.samples < -TOL.entropy_slack):
        raise AssertionError("mutual information dipped below -1e-9")
    return series
