"""Sequential variational disentanglement and reconstruction.

Each sequence trains a stack of building blocks so that the last active qubit
reads 0 with certainty, then drops that qubit and moves on. Gradients come
from a single forward/backward sweep over the state vector (adjoint method).
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .adam import AdamState, adam_step
from .circuits import (
    CNOT,
    PARAM_V,
    ParamCircuit,
    _check_params,
    _v_derivatives,
    _v_matrix,
    apply_circuit,
    apply_circuit_inverse,
    discrete_gate,
    sequence_circuit,
)
from .quantum import (
    StateVector,
    _apply_1q,
    _apply_cnot,
    _prob_last,
    _purity,
    _reduced_keep_rest,
    project_out_last,
    zero_state,
)

log = logging.getLogger(__name__)

INIT_SCALE = 0.1


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss_tolerance: float = 1e-4
    max_epochs_per_sequence: int = 5000
    repetition_r: int = 1
    precision_target: Optional[float] = None
    purity_every: int = 1
    log_every: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epsilon <= 0 or self.loss_tolerance < 0:
            raise ValueError("learning_rate and epsilon must be > 0, loss_tolerance >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.max_epochs_per_sequence < 0 or self.repetition_r < 1 or self.purity_every < 1:
            raise ValueError("epoch, repetition and purity cadence settings must be positive")
        if self.precision_target is not None and not (0 < self.precision_target <= 1):
            raise ValueError("precision_target must lie in (0, 1]")

    def converged(self, loss: float) -> bool:
        if self.precision_target is not None:
            return 1.0 - loss >= self.precision_target
        return loss <= self.loss_tolerance

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "OptimizerConfig":
        return cls(**data)


@dataclass
class SequenceResult:
    circuit: ParamCircuit
    params: np.ndarray
    loss_trajectory: list[float]
    purity_trajectory: list[float]
    final_m_q: float
    epochs_used: int
    converged: bool

    @property
    def n_active(self) -> int:
        return self.circuit.n_active

    def to_json(self) -> dict:
        return {
            "n_active": self.n_active,
            "loss_trajectory": list(self.loss_trajectory),
            "purity_trajectory": [None if np.isnan(p) else p for p in self.purity_trajectory],
            "final_m_q": self.final_m_q,
            "epochs_used": self.epochs_used,
            "converged": self.converged,
            "params": self.params.tolist(),
            "circuit": self.circuit.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SequenceResult":
        return cls(
            circuit=ParamCircuit.from_json(data["circuit"]),
            params=np.asarray(data["params"], dtype=float),
            loss_trajectory=[float(x) for x in data["loss_trajectory"]],
            purity_trajectory=[float("nan") if p is None else float(p) for p in data["purity_trajectory"]],
            final_m_q=float(data["final_m_q"]),
            epochs_used=int(data["epochs_used"]),
            converged=bool(data["converged"]),
        )


@dataclass
class DisentangleRecord:
    n_qubits: int
    sequences: list[SequenceResult] = field(default_factory=list)
    config: Optional[OptimizerConfig] = None

    @property
    def average_m(self) -> float:
        if not self.sequences:
            return float("nan")
        return float(np.mean([s.final_m_q for s in self.sequences]))

    @property
    def complete(self) -> bool:
        return len(self.sequences) == self.n_qubits

    @property
    def converged(self) -> bool:
        return self.complete and all(s.converged for s in self.sequences)

    def to_json(self) -> dict:
        return {
            "kind": "vqc",
            "n_qubits": self.n_qubits,
            "config": None if self.config is None else self.config.to_json(),
            "average_m": self.average_m,
            "converged": self.converged,
            "sequences": [s.to_json() for s in self.sequences],
        }

    @classmethod
    def from_json(cls, data: dict) -> "DisentangleRecord":
        cfg = data.get("config")
        return cls(
            n_qubits=int(data["n_qubits"]),
            sequences=[SequenceResult.from_json(s) for s in data["sequences"]],
            config=None if cfg is None else OptimizerConfig.from_json(cfg),
        )


# --- loss and gradient -------------------------------------------------------

def _last_zero_mask(n: int) -> np.ndarray:
    mask = np.zeros(1 << n)
    mask[0::2] = 1.0
    return mask


def expectation_and_gradient(vec: np.ndarray, n: int, circuit: ParamCircuit,
                             params: np.ndarray, observable: np.ndarray):
    """<phi|O|phi> for diagonal O and its gradient w.r.t. the circuit angles.

    ``phi`` is the circuit output on ``vec``; ``observable`` holds the diagonal
    of O. Returns ``(expectation, gradient, phi)``.
    """
    angles = params.reshape(-1, 3)
    ops = circuit.ops
    mats = []
    phi = vec
    for op in ops:
        if op.kind == CNOT:
            mats.append(None)
            phi = _apply_cnot(phi, op.wires[0], op.wires[1], n)
        else:
            u = _v_matrix(*angles[op.param_slot]) if op.kind == PARAM_V else discrete_gate(op.label)
            mats.append(u)
            phi = _apply_1q(phi, u, op.wires[0], n)
    out = phi
    lam = observable * phi
    value = float(np.vdot(phi, lam).real)
    grad = np.zeros_like(angles)
    for op, u in zip(reversed(ops), reversed(mats)):
        if u is None:
            c, t = op.wires
            phi = _apply_cnot(phi, c, t, n)
            lam = _apply_cnot(lam, c, t, n)
            continue
        q = op.wires[0]
        udag = u.conj().T
        phi = _apply_1q(phi, udag, q, n)
        if op.kind == PARAM_V:
            a, b = 1 << (q - 1), 1 << (n - q)
            # overlap[i, j] = sum_{x, y} conj(lam[x, i, y]) phi[x, j, y]
            overlap = np.einsum("xiy,xjy->ij", lam.reshape(a, 2, b).conj(), phi.reshape(a, 2, b))
            derivs = _v_derivatives(*angles[op.param_slot])
            grad[op.param_slot] = 2.0 * np.einsum("kij,ij->k", derivs, overlap).real
        lam = _apply_1q(lam, udag, q, n)
    return value, grad.reshape(-1), out


def sequence_loss(state: StateVector, circuit: ParamCircuit, params) -> float:
    """1 - P(last qubit reads 0) after the circuit."""
    out = apply_circuit(state, circuit, params)
    return 1.0 - _prob_last(out.amplitudes, 0)


def loss_gradient(state: StateVector, circuit: ParamCircuit, params) -> np.ndarray:
    params = _check_params(circuit, params)
    n = state.n_qubits
    if n < circuit.n_active:
        raise ValueError(f"circuit needs {circuit.n_active} qubits, state has {n}")
    mask = _last_zero_mask(n)
    _, grad, _ = expectation_and_gradient(state.amplitudes, n, circuit, params, mask)
    return -grad


def _subsystem_purity(vec: np.ndarray, n: int) -> float:
    if n < 2:
        return 1.0
    return _purity(_reduced_keep_rest(vec))


# --- training -----------------------------------------------------------------

def run_sequence(state: StateVector, config: OptimizerConfig, rng: np.random.Generator) -> SequenceResult:
    n = state.n_qubits
    vec = state.amplitudes
    loss0 = 1.0 - _prob_last(vec, 0)
    if config.converged(loss0):
        return SequenceResult(
            circuit=ParamCircuit(n, []),
            params=np.zeros(0),
            loss_trajectory=[loss0],
            purity_trajectory=[_subsystem_purity(vec, n)],
            final_m_q=1.0 - loss0,
            epochs_used=0,
            converged=True,
        )

    circuit = sequence_circuit(n, config.repetition_r)
    params = rng.uniform(-INIT_SCALE, INIT_SCALE, circuit.n_params)
    opt = AdamState.init(circuit.n_params, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    mask = _last_zero_mask(n)
    losses: list[float] = []
    purities: list[float] = []
    converged = False
    epoch = 0
    while True:
        m_q, grad, out = expectation_and_gradient(vec, n, circuit, params, mask)
        loss = min(max(1.0 - m_q, 0.0), 1.0)
        losses.append(loss)
        purities.append(_subsystem_purity(out, n) if epoch % config.purity_every == 0 else float("nan"))
        if config.log_every and epoch % config.log_every == 0:
            log.info("n_active=%d epoch=%d loss=%.3e purity=%.6f", n, epoch, loss, purities[-1])
        if config.converged(loss):
            converged = True
            break
        if epoch >= config.max_epochs_per_sequence:
            break
        opt, params = adam_step(opt, params, -grad)
        epoch += 1
    if np.isnan(purities[-1]):
        purities[-1] = _subsystem_purity(out, n)
    return SequenceResult(
        circuit=circuit,
        params=params,
        loss_trajectory=losses,
        purity_trajectory=purities,
        final_m_q=1.0 - losses[-1],
        epochs_used=epoch,
        converged=converged,
    )


def disentangle(psi: StateVector, config: OptimizerConfig, rng: np.random.Generator) -> DisentangleRecord:
    """Disentangle qubits N, N-1, ..., 1 one sequence at a time.

    Stops early on the first unconverged sequence; the partial record is
    returned with ``converged == False``.
    """
    record = DisentangleRecord(psi.n_qubits, [], config)
    current = psi
    while True:
        result = run_sequence(current, config, rng)
        record.sequences.append(result)
        if not result.converged:
            log.warning("sequence with %d active qubits did not converge", current.n_qubits)
            break
        if current.n_qubits == 1:
            break
        out = apply_circuit(current, result.circuit, result.params) if result.circuit.ops else current
        current, _ = project_out_last(out)
    return record


def reconstruct(record: DisentangleRecord) -> StateVector:
    """Run the identified circuits backwards from |0...0>."""
    if not record.complete:
        raise ValueError(
            f"record has {len(record.sequences)} of {record.n_qubits} sequences; cannot reconstruct"
        )
    state = zero_state(record.n_qubits)
    for seq in reversed(record.sequences):
        if seq.circuit.ops:
            state = apply_circuit_inverse(state, seq.circuit, seq.params)
    return state
