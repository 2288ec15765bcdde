"""State tomography by sequential disentanglement.

A pure N-qubit state is driven to |0...0> one qubit at a time, measuring only
the qubit being removed; running the identified circuits backwards from
|0...0> reconstructs the state up to a global phase.
"""
from .circuits import (
    Action,
    GateOp,
    ParamCircuit,
    action_set,
    apply_action,
    apply_circuit,
    apply_circuit_inverse,
    building_block,
    discrete_gate,
    sequence_circuit,
    v_gate,
)
from .quantum import (
    DegenerateProjectionError,
    DensityMatrix,
    StateVector,
    apply_1q,
    apply_cnot,
    fidelity,
    prob_last_zero,
    project_out_last,
    purity,
    random_state,
    reduced_density,
    zero_state,
)
from .rl import RlConfig, RlRecord, rl_disentangle, train_rl_sequence
from .vqc import DisentangleRecord, OptimizerConfig, disentangle, reconstruct

__version__ = "0.1.0"
