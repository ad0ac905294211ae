"""Closed-form oracles, gap extrapolation, width bound, Pauli-string weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .lyapunov import EffectiveHamiltonian
from .tolerances import DEFAULT as TOL


class DivergentGapError(ValueError):
    """The projective limit eta = 1 has an infinite measurement-only gap."""


def measurement_plus_probability(eta: float) -> float:
    """p_eta = (1 + eta)^2 / (2 (1 + eta^2)), the stationary p(+) of a site."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return (1.0 + eta) ** 2 / (2.0 * (1.0 + eta * eta))


def measurement_only_gap(eta: float) -> float:
    """Analytic spectral gap with unitaries disabled:
    (p_eta - 1/2) ln(p_eta / (1 - p_eta))."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if eta == 1.0:
        raise DivergentGapError("divergent gap in the projective limit eta = 1")
    p = measurement_plus_probability(eta)
    if eta == 0.0:
        return 0.0
    return (p - 0.5) * math.log(p / (1.0 - p))


@dataclass(frozen=True)
class WidthBoundCheck:
    width: float
    bound: float
    satisfied: bool
    projective_limit: bool = False


def width_bound(spectrum, eta: float, num_qubits: int) -> WidthBoundCheck:
    """Check eps_N - eps_1 <= L ln((1+eta)/(1-eta)).

    ``spectrum`` may be an EffectiveHamiltonian or a sorted exponent array.
    At eta = 1 the bound is infinite and trivially satisfied (flagged).
    """
    if isinstance(spectrum, EffectiveHamiltonian):
        values = spectrum.spectrum
    else:
        values = np.asarray(spectrum, dtype=float)
    width = float(np.max(values) - np.min(values))
    if eta >= 1.0:
        return WidthBoundCheck(width, math.inf, True, projective_limit=True)
    bound = num_qubits * math.log((1.0 + eta) / (1.0 - eta))
    return WidthBoundCheck(width, bound,
                           width <= bound + TOL.width_bound_slack)


# ---------------------------------------------------------------------------
# thermodynamic-limit extrapolation
# ---------------------------------------------------------------------------

@dataclass
class GapFitResult:
    eta: float
    gap_inf: float
    alpha: float
    beta: float
    theta_min: float
    err_lo: float
    err_hi: float
    phase: str                      # "gapless" | "gapped"
    weight_factor: float
    inputs: list[tuple[int, float]]


def _theta(params, sizes, gaps, weights2):
    d0, a, b = params
    fit = d0 + a * np.power(b, -sizes)
    return float(np.sum((gaps - fit) ** 2 / weights2))


def _profile_linear(b: float, sizes, gaps, weights2):
    """Best (D, a) for fixed decay base b by weighted linear least squares."""
    basis = np.power(b, -sizes)
    w = 1.0 / weights2
    m00, m01, m11 = np.sum(w), np.sum(w * basis), np.sum(w * basis * basis)
    v0, v1 = np.sum(w * gaps), np.sum(w * basis * gaps)
    det = m00 * m11 - m01 * m01
    if det <= 0.0 or not np.isfinite(det):
        return None
    d0 = (m11 * v0 - m01 * v1) / det
    a = (m00 * v1 - m01 * v0) / det
    return d0, a


def fit_gap_extrapolation(data, weight_factor: float,
                          sweep_resolution: int = 200) -> GapFitResult:
    """Fit gap(L) = D + a b^{-L} by weighted least squares and classify.

    The objective Theta[C] = sum_L (gap_L - fit)^2 / (weight_factor*gap_L)^2
    is minimized by a coarse scan over the decay base with (D, a) profiled
    out linearly, followed by derivative-free refinement. Asymmetric error
    bars come from sweeping C = (D, a, b) over D in [-min gap, +min gap],
    a in (0, 2 alpha], b in (0, 2 beta] and collecting min/max D among
    parameter sets whose fit stays within Theta[Gamma] of the optimum in
    the weighted metric. err_lo < 0 classifies the point as gapless.
    """
    pts = sorted((int(L), float(g)) for L, g in data)
    sizes = np.array([p[0] for p in pts], dtype=float)
    gaps = np.array([p[1] for p in pts], dtype=float)
    if len(set(sizes)) < 4:
        raise ValueError("need at least 4 distinct system sizes")
    if np.any(gaps <= 0.0):
        raise ValueError("all input gaps must be positive")
    if weight_factor <= 0.0:
        raise ValueError("weight_factor must be positive")
    weights2 = (weight_factor * gaps) ** 2

    # coarse scan over b with (D, a) profiled
    b_grid = np.exp(np.linspace(np.log(1.0 + 1e-6), np.log(64.0), 400))
    best = None
    for b in b_grid:
        prof = _profile_linear(b, sizes, gaps, weights2)
        if prof is None:
            continue
        th = _theta((prof[0], prof[1], b), sizes, gaps, weights2)
        if best is None or th < best[0]:
            best = (th, prof[0], prof[1], b)
    if best is None:
        raise ValueError("degenerate fit: could not profile any decay base")

    def theta_of_b(b):
        prof = _profile_linear(b, sizes, gaps, weights2)
        if prof is None:
            return np.inf
        return _theta((prof[0], prof[1], b), sizes, gaps, weights2)

    b0 = best[3]
    res = optimize.minimize_scalar(
        theta_of_b, bracket=None,
        bounds=(max(1.0 + 1e-9, b0 / 2.0), b0 * 2.0),
        method="bounded", options={"xatol": 1e-13},
    )
    b_opt = float(res.x) if res.fun <= best[0] else b0
    d_opt, a_opt = _profile_linear(b_opt, sizes, gaps, weights2)
    polish = optimize.minimize(
        _theta, x0=np.array([d_opt, a_opt, b_opt]),
        args=(sizes, gaps, weights2), method="Nelder-Mead",
        options={"xatol": 1e-14, "fatol": 1e-28, "maxiter": 20000,
                 "maxfev": 20000},
    )
    if polish.fun <= _theta((d_opt, a_opt, b_opt), sizes, gaps, weights2):
        d_opt, a_opt, b_opt = (float(polish.x[0]), float(polish.x[1]),
                               float(polish.x[2]))
    theta_min = _theta((d_opt, a_opt, b_opt), sizes, gaps, weights2)

    err_lo, err_hi = _error_bar_sweep(
        d_opt, a_opt, b_opt, theta_min, sizes, gaps, weights2,
        sweep_resolution,
    )
    phase = "gapless" if err_lo < 0.0 else "gapped"
    return GapFitResult(
        eta=math.nan, gap_inf=d_opt, alpha=a_opt, beta=b_opt,
        theta_min=theta_min, err_lo=err_lo, err_hi=err_hi, phase=phase,
        weight_factor=weight_factor, inputs=pts,
    )


def _error_bar_sweep(d_opt, a_opt, b_opt, theta_min, sizes, gaps, weights2,
                     resolution):
    """Min/max D over the region where the candidate curve stays within
    Theta[Gamma] of the optimal curve (weighted curve-to-curve distance)."""
    gmin = float(np.min(gaps))
    d_axis = np.linspace(-gmin, gmin, resolution)
    a_hi = 2.0 * a_opt if a_opt > 0 else 0.0
    a_axis = np.linspace(0.0, a_hi, resolution + 1)[1:] if a_hi > 0 \
        else np.array([0.0])
    b_axis = np.linspace(0.0, 2.0 * b_opt, resolution + 1)[1:]
    fit_opt = d_opt + a_opt * np.power(b_opt, -sizes)
    cutoff = theta_min * (1.0 + 1e-12) + 1e-300

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        decay = np.power(b_axis[:, None], -sizes[None, :])  # (nb, nL)
    lo, hi = None, None
    for d0 in d_axis:
        cand = d0 + a_axis[:, None, None] * decay[None, :, :]
        dev = (cand - fit_opt[None, None, :]) ** 2 / weights2[None, None, :]
        theta_t = np.where(np.isfinite(dev), dev, np.inf).sum(axis=2)
        if np.any(theta_t <= cutoff):
            if lo is None:
                lo = d0
            hi = d0
    if lo is None:
        lo = hi = d_opt
    return float(min(lo, d_opt)), float(max(hi, d_opt))


# ---------------------------------------------------------------------------
# Pauli-string weights of effective Hamiltonians
# ---------------------------------------------------------------------------

@dataclass
class PauliWeightProfile:
    eta: float
    time: int
    block_length: int
    num_averaged: int
    num_qubits: int
    weights: np.ndarray   # shape (3, L) indexed [pauli-1, r]


def _pauli_string_trace(matrix: np.ndarray, pauli: int, r: int,
                        num_qubits: int) -> complex:
    """tr(P K) for P = product of sigma_pauli over sites 1..r+1."""
    L = num_qubits
    dim = matrix.shape[0]
    idx = np.arange(dim)
    head = L - (r + 1)          # string occupies the r+1 most significant bits
    if pauli == 3:
        ones = np.zeros(dim, dtype=np.int64)
        for site in range(1, r + 2):
            ones += (idx >> (L - site)) & 1
        signs = 1.0 - 2.0 * (ones % 2)
        return complex(np.sum(signs * np.diagonal(matrix)))
    mask = ((1 << (r + 1)) - 1) << head
    flipped = idx ^ mask
    if pauli == 1:
        return complex(np.sum(matrix[idx, flipped]))
    # sigma_y: <b|sy|1-b> = i (b = 1), -i (b = 0) per flipped site
    ones = np.zeros(dim, dtype=np.int64)
    for site in range(1, r + 2):
        ones += (idx >> (L - site)) & 1
    zeros = (r + 1) - ones
    phase = (1j) ** (ones % 4) * (-1j) ** (zeros % 4)
    return complex(np.sum(phase * matrix[idx, flipped]))


def pauli_weight_profile(hams: list[EffectiveHamiltonian]) -> PauliWeightProfile:
    """Time-averaged |tr(P_i^r K)| / N over the supplied snapshots.

    P_i^r is sigma_i applied to sites 1..r+1 (identity elsewhere),
    for i in {x, y, z} and r = 0..L-1.
    """
    if not hams:
        raise ValueError("need at least one effective Hamiltonian")
    L = hams[0].num_qubits
    b = hams[0].block_length
    if any(h.num_qubits != L for h in hams):
        raise ValueError("snapshots disagree on qubit count")
    if any(h.block_length != b for h in hams):
        raise ValueError("snapshots disagree on block length")
    dim = 2**L
    weights = np.zeros((3, L))
    for ham in hams:
        k = ham.matrix()
        for pauli in (1, 2, 3):
            for r in range(L):
                tr = _pauli_string_trace(k, pauli, r, L)
                weights[pauli - 1, r] += abs(tr) / dim
    weights /= len(hams)
    return PauliWeightProfile(
        eta=hams[-1].eta, time=hams[-1].time, block_length=b,
        num_averaged=len(hams), num_qubits=L, weights=weights,
    )
