"""Dense pure-state simulator.

Qubit 1 is the most significant bit of a basis label and qubit ``n`` (the
"last" qubit, the one that gets measured and removed) is the least
significant bit. Removing the last qubit is therefore a stride-2 gather.

Public functions take and return :class:`StateVector` values. The
underscore-prefixed kernels operate on raw complex arrays and are what the
optimizers call in their inner loops.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
PROJECTION_THRESHOLD = 1e-12


class DegenerateProjectionError(RuntimeError):
    """Raised when the last qubit has (almost) no weight on |0>."""


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        size = amps.shape[0]
        if size < 2 or size & (size - 1):
            raise ValueError(f"length {size} is not a power of two >= 2")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def __len__(self):
        return self.dim

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StateVector":
        pairs = np.asarray(data["amplitudes"], dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            raise ValueError("amplitudes must be a list of [re, im] pairs")
        state = cls(pairs[:, 0] + 1j * pairs[:, 1])
        if state.n_qubits != int(data["n_qubits"]):
            raise ValueError(
                f"n_qubits={data['n_qubits']} does not match {state.dim} amplitudes"
            )
        return state


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > NORM_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > NORM_TOL:
            raise ValueError("density matrix does not have unit trace")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def _check_qubit(q: int, n: int) -> None:
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
        raise ValueError(f"qubit index must be an integer, got {q!r}")
    if not 1 <= q <= n:
        raise ValueError(f"qubit index {q} outside [1, {n}]")


def _check_unitary(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2):
        raise ValueError(f"single-qubit gate must be 2x2, got shape {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > UNITARY_TOL:
        raise ValueError("gate matrix is not unitary")
    return u


# --- raw-array kernels -----------------------------------------------------

def _apply_1q(vec: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    v = vec.reshape(1 << (q - 1), 2, 1 << (n - q))
    return np.matmul(u, v).reshape(-1)


@lru_cache(maxsize=None)
def _cnot_permutation(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    cbit = 1 << (n - control)
    tbit = 1 << (n - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def _apply_cnot(vec: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    return vec[_cnot_permutation(n, control, target)]


def _prob_last(vec: np.ndarray, bit: int = 0) -> float:
    half = vec[bit::2]
    return float(np.vdot(half, half).real)


def _qubit_marginals_zero(vec: np.ndarray, n: int) -> np.ndarray:
    """p_q(|0>) for q = 1..n."""
    probs = (vec.real**2 + vec.imag**2).reshape((2,) * n)
    out = np.empty(n)
    for q in range(n):
        axes = tuple(a for a in range(n) if a != q)
        out[q] = probs.sum(axis=axes)[0]
    return out


# --- public operations -----------------------------------------------------

def zero_state(n: int) -> StateVector:
    if n < 1:
        raise ValueError(f"need at least one qubit, got {n}")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(amps)


def basis_state(bits: str) -> StateVector:
    """Computational basis state from a bit string such as ``"010"``."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"invalid bit string {bits!r}")
    amps = np.zeros(1 << len(bits), dtype=np.complex128)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps)


def from_amplitudes(amps, normalize: bool = False) -> StateVector:
    amps = np.asarray(amps, dtype=np.complex128)
    if normalize:
        amps = amps / np.linalg.norm(amps)
    return StateVector(amps)


def random_state(n: int, rng: np.random.Generator, haar: bool = False) -> StateVector:
    """Random pure state.

    By default real and imaginary parts are drawn uniformly from [0, 1) and the
    vector is normalized, so every amplitude lies in the first quadrant of the
    complex plane. ``haar=True`` draws complex Gaussian amplitudes instead,
    which gives the unitarily invariant distribution.
    """
    if n < 1:
        raise ValueError(f"need at least one qubit, got {n}")
    dim = 1 << n
    if haar:
        raw = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    else:
        raw = rng.random(dim) + 1j * rng.random(dim)
    norm = np.sqrt(np.vdot(raw, raw).real)
    return StateVector(raw / norm)


def apply_1q(state: StateVector, u, q: int) -> StateVector:
    n = state.n_qubits
    _check_qubit(q, n)
    u = _check_unitary(u)
    return StateVector(_apply_1q(state.amplitudes, u, q, n))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    n = state.n_qubits
    _check_qubit(control, n)
    _check_qubit(target, n)
    if control == target:
        raise ValueError("control and target must differ")
    return StateVector(_apply_cnot(state.amplitudes, control, target, n))


def prob_last_zero(state: StateVector) -> float:
    return _prob_last(state.amplitudes, 0)


def prob_last_one(state: StateVector) -> float:
    return _prob_last(state.amplitudes, 1)


def qubit_marginals_zero(state: StateVector) -> np.ndarray:
    """Probability of reading 0 on each qubit, ordered q = 1..n."""
    return _qubit_marginals_zero(state.amplitudes, state.n_qubits)


def project_out_last(state: StateVector) -> tuple[StateVector, float]:
    """Keep the branch where the last qubit reads 0 and drop that qubit.

    Returns the renormalized ``n - 1`` qubit state and the branch probability.
    """
    if state.n_qubits < 2:
        raise ValueError("projection needs at least two qubits")
    kept = state.amplitudes[0::2]
    prob = float(np.vdot(kept, kept).real)
    if prob <= PROJECTION_THRESHOLD:
        raise DegenerateProjectionError(
            f"last qubit has probability {prob:.3e} of |0>; nothing to keep"
        )
    return StateVector(kept / np.sqrt(prob)), prob


def tensor_zero(state: StateVector) -> StateVector:
    """Append a last qubit in |0>."""
    amps = np.zeros(2 * state.dim, dtype=np.complex128)
    amps[0::2] = state.amplitudes
    return StateVector(amps)


def _reduced_keep_rest(vec: np.ndarray) -> np.ndarray:
    m = vec.reshape(-1, 2)
    return m @ m.conj().T


def _reduced_last(vec: np.ndarray) -> np.ndarray:
    m = vec.reshape(-1, 2)
    return m.T @ m.conj()


def reduced_density(state: StateVector, keep: str = "all but last") -> DensityMatrix:
    """Partial trace of |psi><psi|.

    ``keep="all but last"`` traces out the last qubit; ``keep="last"`` traces
    out everything else and returns the last qubit's 2x2 density matrix.
    """
    if state.n_qubits < 2:
        raise ValueError("partial trace needs at least two qubits")
    if keep == "all but last":
        rho = _reduced_keep_rest(state.amplitudes)
    elif keep == "last":
        rho = _reduced_last(state.amplitudes)
    else:
        raise ValueError(f"unknown subsystem {keep!r}")
    return DensityMatrix(0.5 * (rho + rho.conj().T))


def _purity(rho: np.ndarray) -> float:
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(rho.real**2 + rho.imag**2))


def purity(rho: DensityMatrix) -> float:
    return _purity(rho.entries)


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit counts differ: {a.n_qubits} vs {b.n_qubits}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
