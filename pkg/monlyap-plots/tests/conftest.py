import json

import numpy as np
import pytest


def _csv_lines(meta, header, rows):
    lines = [f"# {k} = {v}" for k, v in meta.items()]
    lines.append(",".join(header))
    lines += [",".join(f"{x:.17g}" if isinstance(x, float) else str(x)
                       for x in row) for row in rows]
    return "\n".join(lines) + "\n"


@pytest.fixture
def sample_artifacts(tmp_path):
    """Hand-built files following the simulator's documented schemas."""
    data = tmp_path / "data"
    data.mkdir()
    gen = np.random.default_rng(0)

    for size in (6, 8):
        for eta in (0.1, 0.3, 0.5):
            gap = 0.02 + eta * 0.4 + 0.3 * 2.0 ** (-size)
            (data / f"gap_eta{eta}_L{size}_seed1.json").write_text(json.dumps({
                "kind": "gap_estimate", "eta": eta, "num_qubits": size,
                "gap": gap, "std": 0.002, "converged": True, "seed": 1,
            }))

    for eta in (0.1, 0.3):
        (data / f"fit_eta{eta}.json").write_text(json.dumps({
            "kind": "gap_fit", "eta": eta, "gap_inf": eta - 0.15,
            "alpha": 1.0, "beta": 2.0, "theta_min": 0.5,
            "err_lo": eta - 0.2, "err_hi": eta - 0.1,
            "phase": "gapless" if eta < 0.2 else "gapped",
        }))

    steps = np.arange(1, 21)
    for size in (6, 8):
        for eta in (0.1, 0.5):
            s_a = np.abs(gen.normal(0.8, 0.05, 20))
            rows = [[int(t), float(a), float(a), 0.0, float(2 * a)]
                    for t, a in zip(steps, s_a)]
            (data / f"entropy_eta{eta}_L{size}_seed1.csv").write_text(
                _csv_lines({"eta": eta, "num_qubits": size, "tau": 10,
                            "seed": 1}, ["step", "S_A", "S_B", "S_AB", "I"],
                           rows))
            rows = [[int(t), 0.5, 0.5, 0.9, 0.1] for t in steps]
            (data / f"mutual_eta{eta}_L{size}_seed1.csv").write_text(
                _csv_lines({"eta": eta, "num_qubits": size, "tau": 10,
                            "seed": 1}, ["step", "S_A", "S_B", "S_AB", "I"],
                           rows))

    rows = [[int(t), float(np.sin(t / 5)), float(np.cos(t / 5)),
             float(np.sin(t / 5 + 1))] for t in steps]
    (data / "memory_eta0.3_L6_seed1.csv").write_text(
        _csv_lines({"eta": 0.3, "num_qubits": 6, "seed": 1, "band": 0.5},
                   ["step", "x_state_0", "x_state_1", "x_state_2"], rows))
    (data / "crossing_eta0.3_L6_seed1.json").write_text(json.dumps({
        "kind": "memory_loss_report", "eta": 0.3, "num_qubits": 6,
        "band": 0.5, "crossing_time": 8, "tau_delta": 11.5, "settled": True,
    }))

    rows = []
    for tid in range(3):
        for t in range(5, 25):
            lam1 = 1 - 2.0 ** (-t)
            rows.append([tid, t, float(lam1), float(1 - lam1),
                         float(np.log(lam1 / (1 - lam1)) / (2 * t))])
    (data / "purification_eta0.3_L6_seed1.csv").write_text(
        _csv_lines({"eta": 0.3, "num_qubits": 6, "window_start": 5,
                    "window_end": 24, "mean_gap": 0.21, "stderr": 0.01,
                    "seed": 1},
                   ["trajectory_id", "t", "lambda_1", "lambda_2", "gap_t"],
                   rows))

    rows = [[r, float(0.1 * 3.0 ** (-r)), float(0.08 * 3.0 ** (-r)),
             float(0.2 * 4.0 ** (-r))] for r in range(6)]
    (data / "pauli_eta0.4_L6_seed1.csv").write_text(
        _csv_lines({"eta": 0.4, "num_qubits": 6, "time": 2000,
                    "block_length": 2, "num_averaged": 100, "seed": 1},
                   ["r", "W_x", "W_y", "W_z"], rows))

    return data
