"""Gates, circuit containers and the discrete action set.

A :class:`ParamCircuit` acts on qubits ``1..n_active`` of whatever register it
is applied to; the measured qubit of a sequence is always ``n_active``.
Parameters are packed gate-major into a flat vector, three angles
``(phi, theta, omega)`` per parametrized gate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .quantum import StateVector, _apply_1q, _apply_cnot, _check_qubit

GATE_LABELS = ("I", "X", "Y", "Z", "H", "T", "S")

_S2 = 1.0 / np.sqrt(2.0)
_DISCRETE = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=np.complex128),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128),
    "S": np.array([[1, 0], [0, 1j]], dtype=np.complex128),
}
for _m in _DISCRETE.values():
    _m.setflags(write=False)

PARAM_V = "ParamV"
FIXED_1Q = "Fixed1Q"
CNOT = "CNOT"


@dataclass(frozen=True)
class VParams:
    phi: float
    theta: float
    omega: float


def v_gate(p) -> np.ndarray:
    """Three-angle single-qubit rotation.

    ``[[cos(t/2) e^{-i(phi+omega)/2}, -sin(t/2) e^{i(phi-omega)/2}],
       [sin(t/2) e^{-i(phi-omega)/2},  cos(t/2) e^{i(phi+omega)/2}]]``
    """
    phi, theta, omega = _angles(p)
    return _v_matrix(phi, theta, omega)


def _angles(p) -> tuple[float, float, float]:
    if isinstance(p, VParams):
        vals = (p.phi, p.theta, p.omega)
    else:
        vals = tuple(p)
        if len(vals) != 3:
            raise ValueError("V gate takes exactly three angles")
    vals = tuple(float(v) for v in vals)
    if not all(np.isfinite(vals)):
        raise ValueError(f"non-finite angle in {vals}")
    return vals


def _v_matrix(phi: float, theta: float, omega: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    ep = np.exp(-0.5j * (phi + omega))
    em = np.exp(0.5j * (phi - omega))
    return np.array([[c * ep, -s * em], [s * em.conjugate(), c * ep.conjugate()]])


def _v_derivatives(phi: float, theta: float, omega: float) -> np.ndarray:
    """Stack of dV/dphi, dV/dtheta, dV/domega, shape (3, 2, 2)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    ep = np.exp(-0.5j * (phi + omega))
    em = np.exp(0.5j * (phi - omega))
    v = np.array([[c * ep, -s * em], [s * em.conjugate(), c * ep.conjugate()]])
    d = np.empty((3, 2, 2), dtype=np.complex128)
    d[0] = v * np.array([[-0.5j, 0.5j], [-0.5j, 0.5j]])
    d[1] = 0.5 * np.array([[-s * ep, -c * em], [c * em.conjugate(), -s * ep.conjugate()]])
    d[2] = v * np.array([[-0.5j, -0.5j], [0.5j, 0.5j]])
    return d


def discrete_gate(label: str) -> np.ndarray:
    try:
        return _DISCRETE[label]
    except KeyError:
        raise ValueError(f"unknown gate label {label!r}; expected one of {GATE_LABELS}") from None


@dataclass(frozen=True)
class GateOp:
    kind: str
    wires: tuple[int, ...]
    param_slot: int | None = None
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind == CNOT:
            if len(self.wires) != 2 or self.wires[0] == self.wires[1]:
                raise ValueError(f"CNOT needs two distinct wires, got {self.wires}")
        elif self.kind in (PARAM_V, FIXED_1Q):
            if len(self.wires) != 1:
                raise ValueError(f"{self.kind} acts on exactly one wire")
            if self.kind == PARAM_V and (self.param_slot is None or self.param_slot < 0):
                raise ValueError("ParamV needs a non-negative parameter slot")
            if self.kind == FIXED_1Q:
                discrete_gate(self.label)
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if min(self.wires) < 1:
            raise ValueError("wire indices are 1-based")

    def to_json(self) -> dict:
        out = {"kind": self.kind, "wires": list(self.wires)}
        if self.kind == PARAM_V:
            out["param_slot"] = self.param_slot
        elif self.kind == FIXED_1Q:
            out["label"] = self.label
        return out

    @classmethod
    def from_json(cls, data: dict) -> "GateOp":
        return cls(
            kind=data["kind"],
            wires=tuple(data["wires"]),
            param_slot=data.get("param_slot"),
            label=data.get("label"),
        )


class ParamCircuit:
    """Immutable ordered list of gates acting on qubits ``1..n_active``."""

    def __init__(self, n_active: int, ops: Iterable[GateOp]):
        if n_active < 1:
            raise ValueError(f"n_active must be >= 1, got {n_active}")
        self.n_active = int(n_active)
        self.ops = tuple(ops)
        slots = []
        for op in self.ops:
            if max(op.wires) > self.n_active:
                raise ValueError(f"{op} reaches beyond qubit {self.n_active}")
            if op.kind == PARAM_V:
                slots.append(op.param_slot)
        if sorted(slots) != list(range(len(slots))):
            raise ValueError("ParamV slots must be 0..count-1, each used once")
        self.n_param_gates = len(slots)
        self.n_params = 3 * len(slots)

    def __len__(self):
        return len(self.ops)

    def __repr__(self):
        return f"ParamCircuit(n_active={self.n_active}, ops={len(self.ops)}, n_params={self.n_params})"

    def __eq__(self, other):
        return (
            isinstance(other, ParamCircuit)
            and self.n_active == other.n_active
            and self.ops == other.ops
        )

    @property
    def single_qubit_gate_count(self) -> int:
        return sum(op.kind != CNOT for op in self.ops)

    def to_json(self) -> dict:
        return {"n_active": self.n_active, "ops": [op.to_json() for op in self.ops]}

    @classmethod
    def from_json(cls, data: dict) -> "ParamCircuit":
        return cls(data["n_active"], [GateOp.from_json(o) for o in data["ops"]])


def building_block(n_active: int, first_slot: int = 0) -> list[GateOp]:
    """One layer: a V on every qubit, then a CNOT chain funnelling into the last qubit."""
    if n_active < 2:
        raise ValueError(f"a building block needs at least two qubits, got {n_active}")
    ops = [GateOp(PARAM_V, (q,), param_slot=first_slot + q - 1) for q in range(1, n_active + 1)]
    ops += [GateOp(CNOT, (c, c + 1)) for c in range(n_active - 1, 0, -1)]
    return ops


def sequence_circuit(n_active: int, r: int) -> ParamCircuit:
    """Stack ``n_active * r`` building blocks.

    For a single remaining qubit the block is just one V gate; it is still
    stacked ``r`` times so gate and parameter counts follow ``r * n_active**2``.
    """
    if n_active < 1 or r < 1:
        raise ValueError(f"invalid sizes n_active={n_active}, r={r}")
    ops: list[GateOp] = []
    if n_active == 1:
        for k in range(r):
            ops.append(GateOp(PARAM_V, (1,), param_slot=k))
    else:
        for k in range(n_active * r):
            ops += building_block(n_active, first_slot=k * n_active)
    return ParamCircuit(n_active, ops)


def _check_params(circuit: ParamCircuit, params) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise ValueError(f"expected {circuit.n_params} parameters, got {params.shape[0]}")
    if not np.all(np.isfinite(params)):
        raise ValueError("parameters must be finite")
    return params


def _gate_list(circuit: ParamCircuit, params: np.ndarray, dagger: bool = False):
    """Resolve ops into (matrix-or-None, wires) pairs ready for the kernels."""
    angles = params.reshape(-1, 3)
    out = []
    for op in circuit.ops:
        if op.kind == CNOT:
            out.append((None, op.wires))
            continue
        if op.kind == PARAM_V:
            u = _v_matrix(*angles[op.param_slot])
        else:
            u = discrete_gate(op.label)
        out.append((u.conj().T if dagger else u, op.wires))
    return out


def _run(vec: np.ndarray, n: int, gates) -> np.ndarray:
    for u, wires in gates:
        if u is None:
            vec = _apply_cnot(vec, wires[0], wires[1], n)
        else:
            vec = _apply_1q(vec, u, wires[0], n)
    return vec


def apply_circuit(state: StateVector, circuit: ParamCircuit, params) -> StateVector:
    params = _check_params(circuit, params)
    n = state.n_qubits
    if n < circuit.n_active:
        raise ValueError(f"circuit needs {circuit.n_active} qubits, state has {n}")
    return StateVector(_run(state.amplitudes, n, _gate_list(circuit, params)))


def apply_circuit_inverse(state: StateVector, circuit: ParamCircuit, params) -> StateVector:
    params = _check_params(circuit, params)
    n = state.n_qubits
    if n < circuit.n_active:
        raise ValueError(f"circuit needs {circuit.n_active} qubits, state has {n}")
    gates = _gate_list(circuit, params, dagger=True)[::-1]
    return StateVector(_run(state.amplitudes, n, gates))


# --- discrete actions ----------------------------------------------------------

@dataclass(frozen=True)
class Action:
    """Gate ``gate_label`` on ``control_qubit`` followed by CNOT onto the last qubit."""

    gate_label: str
    control_qubit: int

    def __post_init__(self):
        discrete_gate(self.gate_label)
        if self.control_qubit < 1:
            raise ValueError("control qubit index is 1-based")

    def to_json(self) -> dict:
        return {"gate_label": self.gate_label, "control_qubit": self.control_qubit}

    @classmethod
    def from_json(cls, data: dict) -> "Action":
        return cls(data["gate_label"], int(data["control_qubit"]))


def action_set(n_active: int) -> list[Action]:
    """All gate/control combinations; the measured (last) qubit is never a control."""
    if n_active < 2:
        raise ValueError(f"actions need at least two qubits, got {n_active}")
    return [Action(g, c) for g in GATE_LABELS for c in range(1, n_active)]


def _check_action(a: Action, n: int, target: int) -> None:
    if not 2 <= target <= n:
        raise ValueError(f"target qubit {target} outside [2, {n}]")
    _check_qubit(a.control_qubit, target)
    if a.control_qubit == target:
        raise ValueError("the measured qubit cannot be an action's control")


def _apply_action(vec: np.ndarray, a: Action, n: int, target: int | None = None) -> np.ndarray:
    target = n if target is None else target
    vec = _apply_1q(vec, _DISCRETE[a.gate_label], a.control_qubit, n)
    return _apply_cnot(vec, a.control_qubit, target, n)


def _apply_action_inverse(vec: np.ndarray, a: Action, n: int, target: int | None = None) -> np.ndarray:
    target = n if target is None else target
    vec = _apply_cnot(vec, a.control_qubit, target, n)
    return _apply_1q(vec, _DISCRETE[a.gate_label].conj().T, a.control_qubit, n)


def apply_action(state: StateVector, a: Action, n_active: int | None = None) -> StateVector:
    """Apply an action whose measured qubit is ``n_active`` (default: the last qubit)."""
    n = state.n_qubits
    target = n if n_active is None else n_active
    _check_action(a, n, target)
    return StateVector(_apply_action(state.amplitudes, a, n, target))


def apply_action_inverse(state: StateVector, a: Action, n_active: int | None = None) -> StateVector:
    n = state.n_qubits
    target = n if n_active is None else n_active
    _check_action(a, n, target)
    return StateVector(_apply_action_inverse(state.amplitudes, a, n, target))


def apply_actions(state: StateVector, actions: Sequence[Action]) -> StateVector:
    for a in actions:
        state = apply_action(state, a)
    return state


def action_ops(a: Action, n_active: int) -> list[GateOp]:
    """The equivalent two-op gate list of an action."""
    return [GateOp(FIXED_1Q, (a.control_qubit,), label=a.gate_label), GateOp(CNOT, (a.control_qubit, n_active))]
