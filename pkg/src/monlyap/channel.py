"""Measurement channel, gate sampling, circuit schedule, trajectory records.

One step of the monitored circuit is: apply the brick-wall unitary layer for
step t, then measure every site left to right with outcome probabilities from
the Born rule of the current state. Outcomes and per-bond gate seeds are
enough to replay a trajectory exactly, so that is what TrajectoryRecord keeps.

Randomness is counter-based: every consumable (the gates of step t, the
outcome draws of step t, the i-th initial vector) comes from its own Philox
stream keyed by (trajectory_key, role, index). Distinct trajectories and
distinct steps therefore never share a stream, which makes sweeps replayable
and order-independent under parallel execution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .states import (
    PureState,
    TrajectoryAnnihilatedError,
    apply_gate_to_columns,
)
from .tolerances import DEFAULT as TOL

SCHEDULE_CONVENTION = "odd-bonds-at-odd-t"

# role salts for the per-(step, purpose) Philox substreams
_ROLE_GATES = 1
_ROLE_OUTCOMES = 2
_ROLE_INIT = 3
_GATE_SEED_KEY = 0x9E3779B97F4A7C15  # fixed salt for seed -> gate expansion


@dataclass(frozen=True)
class KrausPair:
    """The two single-site measurement operators at strength eta.

    m_plus = (I + eta sz) / sqrt(2 (1 + eta^2)), m_minus likewise with -eta.
    Both are diagonal in the z basis; the diagonals are exposed directly
    because the simulator never needs the full matrices.
    """

    eta: float
    m_plus: np.ndarray
    m_minus: np.ndarray

    @classmethod
    def for_strength(cls, eta: float) -> "KrausPair":
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
        norm = np.sqrt(2.0 * (1.0 + eta * eta))
        up, dn = (1.0 + eta) / norm, (1.0 - eta) / norm
        return cls(
            eta=float(eta),
            m_plus=np.diag([up, dn]).astype(np.complex128),
            m_minus=np.diag([dn, up]).astype(np.complex128),
        )

    @property
    def diag_up(self) -> float:
        """Diagonal entry of m_plus on the spin-up component."""
        return float(np.real(self.m_plus[0, 0]))

    @property
    def diag_down(self) -> float:
        return float(np.real(self.m_plus[1, 1]))

    def completeness_defect(self) -> float:
        s = self.m_plus.conj().T @ self.m_plus + self.m_minus.conj().T @ self.m_minus
        return float(np.max(np.abs(s - np.eye(2))))

    def born_plus_probability_up(self) -> float:
        """p(+) for a site pinned to spin up: (1 + eta)^2 / (2 (1 + eta^2))."""
        return self.diag_up**2


@dataclass(frozen=True)
class CircuitSchedule:
    """Brick-wall layer rule on an open chain.

    Odd steps act on odd bonds (1,2), (3,4), ...; even steps on even bonds.
    With odd L the unpaired end qubit of a layer receives no gate. A disabled
    schedule (measurement-only dynamics) returns no bonds at all.
    """

    num_qubits: int
    enabled: bool = True
    boundary: str = "open"

    def bonds_for_step(self, t: int) -> tuple[int, ...]:
        if t < 1:
            raise ValueError("steps are counted from 1")
        if not self.enabled:
            return ()
        start = 1 if t % 2 == 1 else 2
        return tuple(range(start, self.num_qubits, 2))

    def all_bonds(self) -> tuple[int, ...]:
        return tuple(range(1, self.num_qubits))


@dataclass
class StepRecord:
    unitary_seeds: list[int]
    outcomes: np.ndarray  # int8 array of +1 / -1, one per site


@dataclass
class TrajectoryRecord:
    """Everything needed to replay one sampled trajectory bit-for-bit."""

    seed: int
    eta: float
    num_qubits: int
    measurement_only: bool = False
    schedule_convention: str = SCHEDULE_CONVENTION
    code_version: str = ""
    steps: list[StepRecord] = field(default_factory=list)

    def append(self, unitary_seeds, outcomes) -> None:
        self.steps.append(StepRecord(list(int(s) for s in unitary_seeds),
                                     np.asarray(outcomes, dtype=np.int8)))

    def num_steps(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# counter-based randomness
# ---------------------------------------------------------------------------

def _philox(key0: int, key1: int) -> np.random.Generator:
    key = np.array([key0 & 0xFFFFFFFFFFFFFFFF, key1 & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def mix64(*parts: int) -> int:
    """Cheap splitmix-style combiner for deriving sub-keys from integers."""
    h = 0x243F6A8885A308D3
    for p in parts:
        h = (h ^ (p & 0xFFFFFFFFFFFFFFFF)) * 0xBF58476D1CE4E5B9 % 2**64
        h = (h ^ (h >> 31)) * 0x94D049BB133111EB % 2**64
        h ^= h >> 29
    return h


class TrajectoryStreams:
    """Per-trajectory source of gate seeds and outcome uniforms.

    A trajectory is identified by a 64-bit key; all draws are pure functions
    of (key, step, role), so any step can be regenerated independently.
    """

    def __init__(self, key: int):
        self.key = int(key) & 0xFFFFFFFFFFFFFFFF

    def gate_seeds(self, t: int, num_bonds: int) -> np.ndarray:
        gen = _philox(self.key, (_ROLE_GATES << 48) | t)
        return gen.integers(0, 2**63, size=num_bonds, dtype=np.int64)

    def outcome_uniforms(self, t: int, num_sites: int) -> np.ndarray:
        gen = _philox(self.key, (_ROLE_OUTCOMES << 48) | t)
        return gen.random(num_sites)

    def initial_state_rng(self, index: int = 0) -> np.random.Generator:
        return _philox(self.key, (_ROLE_INIT << 48) | index)


def sample_haar_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 4x4 unitary: QR of a complex Ginibre matrix with the
    R-diagonal phase correction."""
    z = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def gate_from_seed(seed: int) -> np.ndarray:
    """Deterministic gate expansion used both when sampling and when replaying."""
    return sample_haar_unitary(_philox(_GATE_SEED_KEY, int(seed)))


# ---------------------------------------------------------------------------
# frame evolution (shared by single trajectories and Lyapunov vector packs)
# ---------------------------------------------------------------------------

def apply_unitary_layer(frame: np.ndarray, num_qubits: int,
                        bonds, gates) -> np.ndarray:
    for bond, gate in zip(bonds, gates):
        frame = apply_gate_to_columns(frame, gate, bond, num_qubits)
    return frame


def measurement_sweep(frame: np.ndarray, num_qubits: int, kraus: KrausPair,
                      uniforms: np.ndarray, outcomes: np.ndarray | None = None):
    """Measure every site in order 1..L on all columns of ``frame``.

    Column 0 is the physical (Born) trajectory: when ``outcomes`` is None
    they are sampled from its amplitudes via ``uniforms``; otherwise the
    given outcomes are applied to every column without sampling (replay).

    Returns (frame, outcomes, log_weights) with columns renormalized and
    log_weights[i] = ln of the norm column i lost in this sweep.
    """
    L = num_qubits
    up, dn = kraus.diag_up, kraus.diag_down
    sample = outcomes is None
    if kraus.eta == 0.0:
        # no measurement: both operators are proportional to the identity,
        # outcomes are fair coins and the state (and its norm) is untouched
        if sample:
            outcomes = np.where(uniforms < 0.5, 1, -1).astype(np.int8)
        return frame, outcomes, np.zeros(frame.shape[1])
    if sample:
        outcomes = np.empty(L, dtype=np.int8)
        prob0 = np.abs(frame[:, 0]) ** 2
        total = float(prob0.sum())
    diag = np.ones(frame.shape[0])
    for site in range(1, L + 1):
        pre = 2 ** (site - 1)
        post = 2 ** (L - site)
        if sample:
            pview = prob0.reshape(pre, 2, post)
            s_up = float(pview[:, 0, :].sum())
            p_plus = (s_up * up * up + (total - s_up) * dn * dn) / total
            omega = 1 if uniforms[site - 1] < p_plus else -1
            outcomes[site - 1] = omega
            d_up, d_dn = (up, dn) if omega == 1 else (dn, up)
            pview[:, 0, :] *= d_up * d_up
            pview[:, 1, :] *= d_dn * d_dn
            total = s_up * d_up * d_up + (total - s_up) * d_dn * d_dn
        else:
            d_up, d_dn = (up, dn) if outcomes[site - 1] == 1 else (dn, up)
        dview = diag.reshape(pre, 2, post)
        dview[:, 0, :] *= d_up
        dview[:, 1, :] *= d_dn
    frame = frame * diag[:, None]
    norms = np.linalg.norm(frame, axis=0)
    if np.min(norms) < TOL.annihilation_norm:
        dead = int(np.argmin(norms))
        raise TrajectoryAnnihilatedError(
            f"trajectory annihilated (column {dead}); "
            "only possible under projective measurement (eta = 1)"
        )
    log_weights = np.log(norms)
    frame = frame / norms
    return frame, outcomes, log_weights


def evolve_frame_step(frame: np.ndarray, t: int, kraus: KrausPair,
                      schedule: CircuitSchedule, streams: TrajectoryStreams,
                      record: TrajectoryRecord | None = None):
    """One full circuit step on a (2^L, n) frame; outcomes sampled from column 0.

    Returns (frame, log_weights).
    """
    L = schedule.num_qubits
    bonds = schedule.bonds_for_step(t)
    seeds = streams.gate_seeds(t, len(bonds))
    gates = [gate_from_seed(s) for s in seeds]
    frame = apply_unitary_layer(frame, L, bonds, gates)
    uniforms = streams.outcome_uniforms(t, L)
    frame, outcomes, log_weights = measurement_sweep(frame, L, kraus, uniforms)
    if record is not None:
        record.append(seeds, outcomes)
    return frame, log_weights


def evolve_one_step(state: PureState, t: int, eta: float,
                    streams: TrajectoryStreams,
                    record: TrajectoryRecord | None = None,
                    schedule: CircuitSchedule | None = None) -> PureState:
    """Unitary layer for step t followed by the site-by-site measurement sweep."""
    if t < 1:
        raise ValueError("steps are counted from 1")
    if schedule is None:
        schedule = CircuitSchedule(state.num_qubits)
    kraus = KrausPair.for_strength(eta)
    frame, log_weights = evolve_frame_step(
        state.amplitudes[:, None].copy(), t, kraus, schedule, streams, record
    )
    return PureState(state.num_qubits, frame[:, 0],
                     state.log_norm + float(log_weights[0]))


def replay(record: TrajectoryRecord, initial: PureState) -> PureState:
    """Push ``initial`` through the recorded operator sequence (no sampling)."""
    if record.num_qubits != initial.num_qubits:
        raise ValueError("record and initial state disagree on qubit count")
    schedule = CircuitSchedule(record.num_qubits,
                               enabled=not record.measurement_only)
    kraus = KrausPair.for_strength(record.eta)
    frame = initial.amplitudes[:, None].copy()
    log_norm = initial.log_norm
    for t, step in enumerate(record.steps, start=1):
        bonds = schedule.bonds_for_step(t)
        gates = [gate_from_seed(s) for s in step.unitary_seeds]
        if len(gates) != len(bonds):
            raise ValueError(f"step {t}: recorded seeds do not match schedule")
        frame = apply_unitary_layer(frame, record.num_qubits, bonds, gates)
        frame, _, logw = measurement_sweep(
            frame, record.num_qubits, kraus, uniforms=None, outcomes=step.outcomes
        )
        log_norm += float(logw[0])
    return PureState(record.num_qubits, frame[:, 0], log_norm)


def sample_trajectory(initial: PureState, eta: float, num_steps: int,
                      streams: TrajectoryStreams, record: bool = False,
                      measurement_only: bool = False,
                      code_version: str = ""):
    """Evolve ``initial`` for ``num_steps`` circuit steps.

    Returns (final_state, record or None).
    """
    schedule = CircuitSchedule(initial.num_qubits, enabled=not measurement_only)
    rec = None
    if record:
        rec = TrajectoryRecord(seed=streams.key, eta=eta,
                               num_qubits=initial.num_qubits,
                               measurement_only=measurement_only,
                               code_version=code_version)
    state = initial
    for t in range(1, num_steps + 1):
        state = evolve_one_step(state, t, eta, streams, rec, schedule)
    return state, rec


# ---------------------------------------------------------------------------
# JSONL serialization of trajectory records
# ---------------------------------------------------------------------------

def outcomes_to_string(outcomes: np.ndarray) -> str:
    return "".join("+" if o == 1 else "-" for o in outcomes)


def outcomes_from_string(s: str) -> np.ndarray:
    return np.array([1 if ch == "+" else -1 for ch in s], dtype=np.int8)


def write_record_jsonl(record: TrajectoryRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "seed": record.seed,
            "eta": record.eta,
            "num_qubits": record.num_qubits,
            "measurement_only": record.measurement_only,
            "schedule_convention": record.schedule_convention,
            "code_version": record.code_version,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for step in record.steps:
            line = {
                "outcomes": outcomes_to_string(step.outcomes),
                "unitary_seeds": step.unitary_seeds,
            }
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def read_record_jsonl(path) -> TrajectoryRecord:
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        record = TrajectoryRecord(
            seed=int(header["seed"]),
            eta=float(header["eta"]),
            num_qubits=int(header["num_qubits"]),
            measurement_only=bool(header["measurement_only"]),
            schedule_convention=header["schedule_convention"],
            code_version=header["code_version"],
        )
        for line in fh:
            if not line.strip():
                continue
            step = json.loads(line)
            record.append(step["unitary_seeds"],
                          outcomes_from_string(step["outcomes"]))
    return record
