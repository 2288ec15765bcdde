import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qst_disentangle.circuits import (
    CNOT,
    FIXED_1Q,
    GATE_LABELS,
    PARAM_V,
    Action,
    GateOp,
    ParamCircuit,
    VParams,
    action_ops,
    action_set,
    apply_action,
    apply_action_inverse,
    apply_circuit,
    apply_circuit_inverse,
    building_block,
    discrete_gate,
    sequence_circuit,
    v_gate,
)
from qst_disentangle.quantum import basis_state, fidelity, from_amplitudes, prob_last_zero, random_state, zero_state

from conftest import ghz

finite = st.floats(-20, 20, allow_nan=False)


def test_v_gate_identity():
    np.testing.assert_allclose(v_gate((0, 0, 0)), np.eye(2), atol=1e-15)


def test_v_gate_theta_pi():
    np.testing.assert_allclose(v_gate(VParams(0, np.pi, 0)), [[0, -1], [1, 0]], atol=1e-15)


def test_v_gate_theta_half_pi():
    np.testing.assert_allclose(v_gate((0, np.pi / 2, 0)), np.array([[1, -1], [1, 1]]) / np.sqrt(2), atol=1e-15)


def test_v_gate_rejects_non_finite():
    with pytest.raises(ValueError):
        v_gate((0, np.nan, 0))
    with pytest.raises(ValueError):
        v_gate((0, 1))


def test_t_squared_is_s():
    t = discrete_gate("T")
    np.testing.assert_allclose(t @ t, discrete_gate("S"), atol=1e-15)


def test_hadamard_involution():
    h = discrete_gate("H")
    np.testing.assert_allclose(h @ h, np.eye(2), atol=1e-15)


def test_pauli_x():
    np.testing.assert_array_equal(discrete_gate("X"), [[0, 1], [1, 0]])


def test_unknown_label():
    with pytest.raises(ValueError):
        discrete_gate("CZ")


@pytest.mark.parametrize("label", GATE_LABELS)
def test_discrete_gates_unitary(label):
    g = discrete_gate(label)
    assert np.max(np.abs(g.conj().T @ g - np.eye(2))) < 1e-12


@settings(max_examples=200, deadline=None)
@given(phi=finite, theta=finite, omega=finite)
def test_v_gate_unitary_and_inverse_closure(phi, theta, omega):
    v = v_gate((phi, theta, omega))
    assert np.max(np.abs(v.conj().T @ v - np.eye(2))) < 1e-12
    np.testing.assert_allclose(v.conj().T, v_gate((-omega, -theta, -phi)), atol=1e-12)


def test_building_block_two_qubits():
    assert building_block(2) == [
        GateOp(PARAM_V, (1,), param_slot=0),
        GateOp(PARAM_V, (2,), param_slot=1),
        GateOp(CNOT, (1, 2)),
    ]


def test_building_block_five_qubits():
    ops = building_block(5)
    assert sum(op.kind == PARAM_V for op in ops) == 5
    cnots = [op.wires for op in ops if op.kind == CNOT]
    assert cnots == [(4, 5), (3, 4), (2, 3), (1, 2)]


def test_building_block_three_qubit_params():
    assert ParamCircuit(3, building_block(3)).n_params == 9


def test_building_block_too_small():
    with pytest.raises(ValueError):
        building_block(1)


@pytest.mark.parametrize("n_active,r,gates,params", [(8, 5, 320, 960), (2, 5, 20, 60), (1, 1, 1, 3), (1, 5, 5, 15)])
def test_sequence_circuit_counts(n_active, r, gates, params):
    c = sequence_circuit(n_active, r)
    assert c.single_qubit_gate_count == gates
    assert c.n_params == params


def test_sequence_circuit_counts_all_sizes():
    for n_s in range(2, 9):
        for r in range(1, 6):
            c = sequence_circuit(n_s, r)
            assert c.single_qubit_gate_count == r * n_s**2
            assert c.n_params == 3 * r * n_s**2
            assert sum(op.kind == CNOT for op in c.ops) == r * n_s * (n_s - 1)


def test_single_qubit_sequence_has_no_cnot():
    assert all(op.kind == PARAM_V for op in sequence_circuit(1, 3).ops)


@pytest.mark.parametrize("n_active,r", [(0, 1), (2, 0)])
def test_sequence_circuit_rejects(n_active, r):
    with pytest.raises(ValueError):
        sequence_circuit(n_active, r)


def test_param_circuit_validation():
    with pytest.raises(ValueError):
        ParamCircuit(2, [GateOp(PARAM_V, (3,), param_slot=0)])
    with pytest.raises(ValueError):
        ParamCircuit(2, [GateOp(PARAM_V, (1,), param_slot=1)])
    with pytest.raises(ValueError):
        GateOp(CNOT, (1, 1))


def test_empty_circuit_is_identity(rng):
    s = random_state(3, rng)
    out = apply_circuit(s, ParamCircuit(3, []), [])
    np.testing.assert_array_equal(out.amplitudes, s.amplitudes)


def test_zero_params_without_cnot_is_identity(rng):
    s = random_state(3, rng)
    circ = ParamCircuit(3, [GateOp(PARAM_V, (q,), param_slot=q - 1) for q in (1, 2, 3)])
    out = apply_circuit(s, circ, np.zeros(9))
    np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-15)


def test_param_length_mismatch(rng):
    with pytest.raises(ValueError):
        apply_circuit(random_state(2, rng), sequence_circuit(2, 1), np.zeros(5))


def test_circuit_inverse_round_trip(rng):
    for n in (2, 3, 4):
        s = random_state(n, rng, haar=True)
        c = sequence_circuit(n, 1)
        p = rng.normal(size=c.n_params)
        there = apply_circuit(s, c, p)
        back = apply_circuit_inverse(there, c, p)
        assert fidelity(back, s) > 1 - 1e-10
        again = apply_circuit(apply_circuit_inverse(s, c, p), c, p)
        np.testing.assert_allclose(again.amplitudes, s.amplitudes, atol=1e-10)


def test_inverse_of_x():
    c = ParamCircuit(1, [GateOp(FIXED_1Q, (1,), label="X")])
    np.testing.assert_allclose(apply_circuit_inverse(zero_state(1), c, []).amplitudes, [0, 1])


def test_circuit_acts_on_leading_qubits(rng):
    s = random_state(4, rng)
    c = sequence_circuit(2, 1)
    p = rng.normal(size=c.n_params)
    out = apply_circuit(s, c, p)
    # qubits 3 and 4 untouched: reduced state on them is unchanged
    before = s.amplitudes.reshape(4, 4)
    after = out.amplitudes.reshape(4, 4)
    np.testing.assert_allclose(before.T @ before.conj(), after.T @ after.conj(), atol=1e-12)


def test_circuit_json_round_trip(rng):
    c = sequence_circuit(3, 2)
    back = ParamCircuit.from_json(json.loads(json.dumps(c.to_json())))
    assert back == c


# --- actions -----------------------------------------------------------------------

@pytest.mark.parametrize("n,d", [(2, 7), (5, 28)])
def test_action_set_size(n, d):
    assert len(action_set(n)) == d


def test_actions_never_control_measured_qubit():
    for n in range(2, 7):
        assert all(a.control_qubit < n for a in action_set(n))


def test_action_set_too_small():
    with pytest.raises(ValueError):
        action_set(1)


def test_action_undoes_bell(bell):
    out = apply_action(bell, Action("I", 1))
    np.testing.assert_allclose(out.amplitudes, [2**-0.5, 0, 2**-0.5, 0], atol=1e-15)
    assert prob_last_zero(out) == pytest.approx(1.0)


def test_action_prepares_bell():
    out = apply_action(zero_state(2), Action("H", 1))
    np.testing.assert_allclose(out.amplitudes, [2**-0.5, 0, 0, 2**-0.5], atol=1e-15)


def test_action_on_ghz():
    out = apply_action(ghz(3), Action("I", 2))
    expected = np.zeros(8)
    expected[0] = expected[6] = 2**-0.5
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-15)
    assert prob_last_zero(out) == pytest.approx(1.0)


def test_action_out_of_range(rng):
    s = random_state(3, rng)
    with pytest.raises(ValueError):
        apply_action(s, Action("X", 3))
    with pytest.raises(ValueError):
        apply_action(s, Action("X", 4))


def test_action_inverse(rng):
    s = random_state(4, rng)
    for a in action_set(4):
        np.testing.assert_allclose(apply_action_inverse(apply_action(s, a), a).amplitudes, s.amplitudes, atol=1e-14)


def test_action_json_round_trip():
    a = Action("T", 3)
    assert Action.from_json(json.loads(json.dumps(a.to_json()))) == a


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
def test_action_matches_equivalent_circuit(seed, n):
    rng = np.random.default_rng(seed)
    s = random_state(n, rng, haar=True)
    acts = action_set(n)
    a = acts[int(rng.integers(len(acts)))]
    via_circuit = apply_circuit(s, ParamCircuit(n, action_ops(a, n)), [])
    np.testing.assert_array_equal(apply_action(s, a).amplitudes, via_circuit.amplitudes)
