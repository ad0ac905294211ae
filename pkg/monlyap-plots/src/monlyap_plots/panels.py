"""Panel renderers: each takes parsed artifacts and draws onto an Axes.

Panels mirror the standard views of the simulation output: gap curves
against measurement strength and system size, extrapolated gaps with
asymmetric error bars, entanglement scaling, the mutual-information peak,
memory-loss traces with the relaxation-time marker, the pure-vs-mixed gap
comparison, and Pauli-string weight decay.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, read_csv, read_json

plt.rcParams.update({
    "figure.figsize": (4.2, 3.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "monlyap-plots",
})

MARKERS = "os^vDPX*"


def _group_gap_payloads(paths):
    gaps = defaultdict(list)
    for path in paths:
        payload = read_json(path, kind="gap_estimate",
                            required_keys=("eta", "num_qubits", "gap"))
        gaps[int(payload["num_qubits"])].append(
            (float(payload["eta"]), float(payload["gap"])))
    return {size: sorted(points) for size, points in sorted(gaps.items())}


def panel_gap_vs_eta(ax, inputs):
    """gap(eta, L) against eta, one labeled series per system size."""
    groups = _group_gap_payloads(inputs)
    for i, (size, points) in enumerate(groups.items()):
        etas = [p[0] for p in points]
        vals = [p[1] for p in points]
        ax.plot(etas, vals, marker=MARKERS[i % len(MARKERS)], ms=4,
                label=f"L = {size}")
    ax.set_xlabel(r"measurement strength $\eta$")
    ax.set_ylabel(r"spectral gap $\Delta(\eta, L)$")
    ax.legend(fontsize=8)


def panel_gap_vs_size(ax, inputs):
    """gap against L per eta; semi-log, since gapless data decays
    exponentially with size."""
    by_eta = defaultdict(list)
    for path in inputs:
        payload = read_json(path, kind="gap_estimate",
                            required_keys=("eta", "num_qubits", "gap"))
        by_eta[float(payload["eta"])].append(
            (int(payload["num_qubits"]), float(payload["gap"])))
    for i, (eta, points) in enumerate(sorted(by_eta.items())):
        points.sort()
        ax.semilogy([p[0] for p in points], [p[1] for p in points],
                    marker=MARKERS[i % len(MARKERS)], ms=4,
                    label=rf"$\eta$ = {eta:g}")
    ax.set_xlabel("system size L")
    ax.set_ylabel(r"spectral gap $\Delta(\eta, L)$")
    ax.legend(fontsize=8)


def panel_gap_extrapolation(ax, inputs):
    """Thermodynamic-limit gap with asymmetric error bars from fit JSONs.

    Error bars reaching below zero mark the gapless classification.
    """
    points = []
    for path in inputs:
        payload = read_json(path, kind="gap_fit",
                            required_keys=("eta", "gap_inf", "err_lo",
                                           "err_hi", "phase"))
        points.append((float(payload["eta"]), float(payload["gap_inf"]),
                       float(payload["err_lo"]), float(payload["err_hi"]),
                       payload["phase"]))
    points.sort()
    etas = np.array([p[0] for p in points])
    vals = np.array([p[1] for p in points])
    lo = vals - np.array([p[2] for p in points])
    hi = np.array([p[3] for p in points]) - vals
    ax.errorbar(etas, vals, yerr=np.vstack([lo, hi]), fmt="o", ms=4,
                capsize=3)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel(r"measurement strength $\eta$")
    ax.set_ylabel(r"extrapolated gap $\Delta(\eta)$")


def _series_csv_mean(path):
    cols, meta = read_csv(path, required_columns=("step", "S_A", "S_B",
                                                  "S_AB", "I"))
    for key in ("eta", "num_qubits"):
        if key not in meta:
            raise SchemaError(f"{path}: metadata key {key!r} missing")
    return cols, meta


def panel_entropy_vs_eta(ax, inputs):
    """Time-averaged cut entropy against eta, one series per size."""
    by_size = defaultdict(list)
    for path in inputs:
        cols, meta = _series_csv_mean(path)
        by_size[int(meta["num_qubits"])].append(
            (float(meta["eta"]), float(np.mean(cols["S_A"]))))
    for i, (size, points) in enumerate(sorted(by_size.items())):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker=MARKERS[i % len(MARKERS)], ms=4, label=f"L = {size}")
    ax.set_xlabel(r"measurement strength $\eta$")
    ax.set_ylabel(r"mean entropy $S^{A}$")
    ax.legend(fontsize=8)


def panel_entropy_vs_size(ax, inputs):
    """Time-averaged cut entropy against L, one series per eta
    (volume-law slope vs area-law plateau)."""
    by_eta = defaultdict(list)
    for path in inputs:
        cols, meta = _series_csv_mean(path)
        by_eta[float(meta["eta"])].append(
            (int(meta["num_qubits"]), float(np.mean(cols["S_A"]))))
    for i, (eta, points) in enumerate(sorted(by_eta.items())):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker=MARKERS[i % len(MARKERS)], ms=4,
                label=rf"$\eta$ = {eta:g}")
    ax.set_xlabel("system size L")
    ax.set_ylabel(r"mean entropy $S^{A}$")
    ax.legend(fontsize=8)


def panel_mutual_information(ax, inputs):
    """Averaged end-to-end mutual information against eta."""
    by_size = defaultdict(list)
    for path in inputs:
        cols, meta = _series_csv_mean(path)
        by_size[int(meta["num_qubits"])].append(
            (float(meta["eta"]), float(np.mean(cols["I"]))))
    for i, (size, points) in enumerate(sorted(by_size.items())):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker=MARKERS[i % len(MARKERS)], ms=4, label=f"L = {size}")
    ax.set_xlabel(r"measurement strength $\eta$")
    ax.set_ylabel(r"mutual information $I^{1,L}$")
    ax.legend(fontsize=8)


def panel_memory_loss(ax, inputs):
    """<X>_t per initial state from one memory CSV, with the tau_delta
    marker when the paired crossing report is supplied."""
    csv_paths = [p for p in inputs if p.endswith(".csv")]
    json_paths = [p for p in inputs if p.endswith(".json")]
    if len(csv_paths) != 1:
        raise SchemaError("memory_loss wants exactly one memory_*.csv input")
    cols, meta = read_csv(csv_paths[0], required_columns=("step",))
    state_cols = sorted(n for n in cols if n.startswith("x_state_"))
    if not state_cols:
        raise SchemaError(f"{csv_paths[0]}: no x_state_<i> trace columns")
    for i, name in enumerate(state_cols):
        ax.plot(cols["step"], cols[name], lw=0.9,
                label=f"initial state {i}")
    for path in json_paths:
        payload = read_json(path, kind="memory_loss_report",
                            required_keys=("tau_delta",))
        if payload["tau_delta"] is not None:
            ax.axvline(payload["tau_delta"], color="k", ls="--", lw=1.0,
                       label=r"$\tau_\delta$")
    ax.set_xlabel("time step t")
    ax.set_ylabel(r"$\langle X \rangle_t$")
    ax.legend(fontsize=7)


def panel_purification(ax, inputs):
    """Pure-state gap estimates vs mixed-state purification gaps per eta."""
    pure, mixed = [], []
    for path in inputs:
        if path.endswith(".json"):
            payload = read_json(path, kind="gap_estimate",
                                required_keys=("eta", "gap"))
            pure.append((float(payload["eta"]), float(payload["gap"])))
        else:
            cols, meta = read_csv(path, required_columns=(
                "trajectory_id", "t", "lambda_1", "lambda_2", "gap_t"))
            if "eta" not in meta or "mean_gap" not in meta:
                raise SchemaError(f"{path}: purification metadata needs "
                                  "'eta' and 'mean_gap'")
            mixed.append((float(meta["eta"]), float(meta["mean_gap"])))
    if not pure or not mixed:
        raise SchemaError("purification panel wants gap_*.json and "
                          "purification_*.csv inputs together")
    pure.sort()
    mixed.sort()
    ax.plot([p[0] for p in pure], [p[1] for p in pure], "s-", ms=4,
            label="pure trajectory")
    ax.plot([p[0] for p in mixed], [p[1] for p in mixed], "o--", ms=4,
            label="maximally mixed")
    ax.set_xlabel(r"measurement strength $\eta$")
    ax.set_ylabel(r"spectral gap $\Delta$")
    ax.legend(fontsize=8)


def panel_pauli_weights(ax, inputs):
    """W^r against string length r, log scale (decay spans decades)."""
    for path in inputs:
        cols, meta = read_csv(path, required_columns=("r", "W_x", "W_y",
                                                      "W_z"))
        for i, name in enumerate(("W_x", "W_y", "W_z")):
            label = name.replace("W_", "")
            ax.semilogy(cols["r"], np.maximum(cols[name], 1e-300),
                        marker=MARKERS[i], ms=4,
                        label=rf"$\sigma_{label}$ strings "
                              rf"($\eta$ = {meta.get('eta', '?')})")
    ax.set_xlabel("string length r")
    ax.set_ylabel(r"weight $W^r$")
    ax.legend(fontsize=7)


PANELS = {
    "gap_vs_eta": panel_gap_vs_eta,
    "gap_vs_size": panel_gap_vs_size,
    "gap_extrapolation": panel_gap_extrapolation,
    "entropy_vs_eta": panel_entropy_vs_eta,
    "entropy_vs_size": panel_entropy_vs_size,
    "mutual_information": panel_mutual_information,
    "memory_loss": panel_memory_loss,
    "purification": panel_purification,
    "pauli_weights": panel_pauli_weights,
}
