"""Gate accounting, sequential vs joint training cost, and the fidelity sweep."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .adam import AdamState, adam_step
from .circuits import GateOp, ParamCircuit, sequence_circuit
from .quantum import StateVector, _qubit_marginals_zero, fidelity, random_state
from .vqc import INIT_SCALE, OptimizerConfig, disentangle, expectation_and_gradient, reconstruct

log = logging.getLogger(__name__)

TABLE1_COLUMNS = ("j", "gates", "parameters", "epochs", "s_gd")
SWEEP_COLUMNS = ("n", "precision", "seed", "fidelity", "converged")
SGD_COLUMNS = ("r", "scheme", "s_gd", "s_gd_normalized")


@dataclass
class BenchRow:
    sequence_index: object  # int, or "Total" for the summary row
    gates: int
    parameters: int
    epochs: Optional[int] = None
    s_gd: Optional[int] = None
    converged: bool = True

    def as_csv(self) -> list:
        return [self.sequence_index, self.gates, self.parameters,
                "" if self.epochs is None else self.epochs,
                "" if self.s_gd is None else self.s_gd]


@dataclass
class SweepPoint:
    n_qubits: int
    precision: float
    mean_fidelity: float
    seeds: int
    failures: int = 0


def _totals(rows: list[BenchRow]) -> BenchRow:
    s_gd = None
    if rows and all(r.s_gd is not None for r in rows):
        s_gd = sum(r.s_gd for r in rows)
    return BenchRow("Total", sum(r.gates for r in rows), sum(r.parameters for r in rows),
                    None, s_gd, all(r.converged for r in rows))


def gate_stats(n: int, r: int) -> list[BenchRow]:
    """Per-sequence single-qubit gate and parameter counts, with a totals row."""
    if n < 1 or r < 1:
        raise ValueError(f"invalid sizes n={n}, r={r}")
    rows = []
    for j in range(1, n + 1):
        n_s = n - j + 1
        gates = r * n_s * n_s
        rows.append(BenchRow(j, gates, 3 * gates))
    return rows + [_totals(rows)]


def run_sequential_bench(psi: StateVector, cfg: OptimizerConfig,
                         rng: np.random.Generator) -> list[BenchRow]:
    rows = gate_stats(psi.n_qubits, cfg.repetition_r)[:-1]
    record = disentangle(psi, cfg, rng)
    for row, seq in zip(rows, record.sequences):
        row.epochs = seq.epochs_used
        row.s_gd = row.parameters * seq.epochs_used
        row.converged = seq.converged
    for row in rows[len(record.sequences):]:
        row.converged = False
    return rows + [_totals(rows)]


def full_circuit(n: int, r: int) -> ParamCircuit:
    """All sequence circuits chained on one register, each on qubits 1..N_s."""
    ops: list[GateOp] = []
    offset = 0
    for n_s in range(n, 0, -1):
        circ = sequence_circuit(n_s, r)
        for op in circ.ops:
            if op.param_slot is not None:
                op = replace(op, param_slot=op.param_slot + offset)
            ops.append(op)
        offset += circ.n_param_gates
    return ParamCircuit(n, ops)


def _marginal_observable(n: int) -> np.ndarray:
    """Diagonal of (1/N) sum_q |0><0|_q."""
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return (1 - bits).mean(axis=1)


def nonsequential_loss(state: StateVector) -> float:
    """1 - mean_q P(qubit q reads 0)."""
    return 1.0 - float(np.mean(_qubit_marginals_zero(state.amplitudes, state.n_qubits)))


def run_nonsequential_bench(psi: StateVector, cfg: OptimizerConfig, rng: np.random.Generator,
                            max_epochs: Optional[int] = None) -> BenchRow:
    """Train every parameter of the chained circuit against all qubit marginals at once."""
    n = psi.n_qubits
    circuit = full_circuit(n, cfg.repetition_r)
    n_gates = circuit.single_qubit_gate_count
    max_epochs = cfg.max_epochs_per_sequence * n if max_epochs is None else max_epochs
    obs = _marginal_observable(n)
    vec = psi.amplitudes
    if cfg.converged(1.0 - float(np.vdot(vec, obs * vec).real)):
        return BenchRow("Total", n_gates, circuit.n_params, 0, 0, True)
    params = rng.uniform(-INIT_SCALE, INIT_SCALE, circuit.n_params)
    opt = AdamState.init(circuit.n_params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    epoch = 0
    while True:
        value, grad, _ = expectation_and_gradient(vec, n, circuit, params, obs)
        if cfg.converged(1.0 - value):
            converged = True
            break
        if epoch >= max_epochs:
            converged = False
            break
        opt, params = adam_step(opt, params, -grad)
        epoch += 1
    return BenchRow("Total", n_gates, circuit.n_params, epoch, circuit.n_params * epoch, converged)


def _bench_rngs(seed: int, n: int, r: int, k: int):
    return np.random.default_rng([seed, n, r, k, 0]), np.random.default_rng([seed, n, r, k, 1])


def sgd_comparison(n: int, r_list: Sequence[int], seeds: int, cfg: OptimizerConfig | None = None,
                   seed: int = 0) -> list[dict]:
    """Mean total S_GD per (r, scheme), normalized by the largest non-sequential mean."""
    cfg = cfg or OptimizerConfig()
    if seeds < 1 or not r_list:
        raise ValueError("need at least one seed and one repetition factor")
    raw = []
    for r in r_list:
        c = replace(cfg, repetition_r=r)
        seq_vals, non_vals = [], []
        for k in range(seeds):
            state_rng, opt_rng = _bench_rngs(seed, n, r, k)
            psi = random_state(n, state_rng)
            seq_rows = run_sequential_bench(psi, c, opt_rng)
            non_row = run_nonsequential_bench(psi, c, opt_rng)
            if not seq_rows[-1].converged or not non_row.converged:
                log.warning("r=%d seed %d: unconverged run included at its epoch cap", r, k)
            seq_vals.append(seq_rows[-1].s_gd)
            non_vals.append(non_row.s_gd)
        raw.append((r, "sequential", float(np.mean(seq_vals))))
        raw.append((r, "nonsequential", float(np.mean(non_vals))))
    norm = max(v for _, scheme, v in raw if scheme == "nonsequential")
    norm = norm if norm > 0 else 1.0
    return [{"r": r, "scheme": scheme, "s_gd": v, "s_gd_normalized": v / norm} for r, scheme, v in raw]


# --- fidelity sweep -------------------------------------------------------------

def sweep_cells(n_list: Iterable[int], precision_list: Iterable[float], seeds: int) -> list[tuple]:
    return [(n, p, k) for n in n_list for p in precision_list for k in range(seeds)]


def run_sweep_cell(n: int, precision: float, k: int, cfg: OptimizerConfig, seed: int = 0) -> dict:
    """One (N, precision, seed) reconstruction.

    The random state depends only on (seed, N, k), so every precision level
    reconstructs the same states.
    """
    psi = random_state(n, np.random.default_rng([seed, n, k]))
    c = replace(cfg, precision_target=precision)
    record = disentangle(psi, c, np.random.default_rng([seed, n, k, 1]))
    fid = fidelity(psi, reconstruct(record)) if record.converged else float("nan")
    return {"n": n, "precision": precision, "seed": k, "fidelity": fid, "converged": record.converged}


def aggregate_sweep(rows: Sequence[dict]) -> list[SweepPoint]:
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["n"], row["precision"]), []).append(row)
    points = []
    for (n, p), cell in sorted(groups.items()):
        good = [r["fidelity"] for r in cell if r["converged"]]
        mean = float(np.mean(good)) if good else float("nan")
        points.append(SweepPoint(n, p, mean, len(cell), len(cell) - len(good)))
    return points


def fidelity_sweep(n_list: Sequence[int], precision_list: Sequence[float], seeds: int,
                   cfg: OptimizerConfig | None = None, seed: int = 0) -> tuple[list[SweepPoint], list[dict]]:
    cfg = cfg or OptimizerConfig(repetition_r=2)
    if seeds < 1:
        raise ValueError("need at least one seed")
    rows = [run_sweep_cell(n, p, k, cfg, seed) for n, p, k in sweep_cells(n_list, precision_list, seeds)]
    return aggregate_sweep(rows), rows


def precision_trend(points: Sequence[SweepPoint], n: int) -> float:
    """Spearman correlation between precision and mean fidelity at fixed N."""
    from scipy import stats

    sel = [p for p in points if p.n_qubits == n]
    rho, _ = stats.spearmanr([p.precision for p in sel], [p.mean_fidelity for p in sel])
    return float(rho)


# --- CSV emission --------------------------------------------------------------

def _write(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def table1_csv(rows: Sequence[BenchRow]) -> str:
    return _write(TABLE1_COLUMNS, [r.as_csv() for r in rows])


def sweep_csv(rows: Sequence[dict]) -> str:
    return _write(SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows])


def sgd_csv(rows: Sequence[dict]) -> str:
    return _write(SGD_COLUMNS, [[r[c] for c in SGD_COLUMNS] for r in rows])
