"""Discrete-gate disentangling circuits found by REINFORCE.

The agent's "state" is the list of actions chosen so far, one-hot encoded into
``L`` slots. A small tanh MLP maps it to a distribution over the action set.
Every step of an episode is credited with the episode's terminal reward, the
probability that the measured qubit reads 0 after all actions.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .adam import AdamState, adam_step
from .circuits import Action, _apply_action, _apply_action_inverse, action_set
from .quantum import StateVector, _prob_last, project_out_last, zero_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RlConfig:
    episode_len: int = 10
    dataset_size: int = 50
    epochs_per_sequence: int = 100
    reward_stop: float = 1 - 1e-6
    policy_learning_rate: float = 0.003
    hidden_sizes: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if min(self.episode_len, self.dataset_size, self.epochs_per_sequence) < 1:
            raise ValueError("episode_len, dataset_size and epochs_per_sequence must be positive")
        if not 0 < self.reward_stop <= 1 or self.policy_learning_rate <= 0:
            raise ValueError("reward_stop must lie in (0, 1] and the learning rate be positive")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be positive")

    def to_json(self) -> dict:
        out = asdict(self)
        out["hidden_sizes"] = list(self.hidden_sizes)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "RlConfig":
        return cls(**data)


# --- state encoding and policy network -------------------------------------------

def encode_state(actions_so_far: Sequence[int], L: int, d: int) -> np.ndarray:
    """One-hot slots over ``d`` actions plus an "empty" symbol at position ``d``."""
    if len(actions_so_far) > L:
        raise ValueError(f"{len(actions_so_far)} actions do not fit in {L} slots")
    x = np.zeros((L, d + 1))
    x[:, d] = 1.0
    for slot, a in enumerate(actions_so_far):
        if not 0 <= a < d:
            raise ValueError(f"action index {a} outside [0, {d})")
        x[slot, d] = 0.0
        x[slot, a] = 1.0
    return x.reshape(-1)


class PolicyNet:
    """Feed-forward tanh network ending in a softmax; weights live in one flat vector."""

    def __init__(self, input_dim: int, output_dim: int, hidden_sizes=(64, 64),
                 rng: np.random.Generator | None = None, zero: bool = False):
        sizes = [input_dim, *hidden_sizes, output_dim]
        self.shapes = [(a, b) for a, b in zip(sizes[:-1], sizes[1:])]
        self.input_dim = input_dim
        self.output_dim = output_dim
        chunks = []
        for fan_in, fan_out in self.shapes:
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                if rng is None:
                    raise ValueError("a random generator is needed for non-zero initialization")
                bound = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-bound, bound, (fan_in, fan_out))
            chunks += [w.ravel(), np.zeros(fan_out)]
        self.params = np.concatenate(chunks)

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    def layers(self, params: np.ndarray | None = None):
        params = self.params if params is None else params
        out, i = [], 0
        for fan_in, fan_out in self.shapes:
            w = params[i:i + fan_in * fan_out].reshape(fan_in, fan_out)
            i += fan_in * fan_out
            b = params[i:i + fan_out]
            i += fan_out
            out.append((w, b))
        return out

    def forward(self, x: np.ndarray, params: np.ndarray | None = None):
        """Batched forward pass; returns (probs, activations) for backprop."""
        acts = [x]
        layers = self.layers(params)
        h = x
        for w, b in layers[:-1]:
            h = np.tanh(h @ w + b)
            acts.append(h)
        w, b = layers[-1]
        logits = h @ w + b
        logits = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=-1, keepdims=True), acts

    def backward(self, acts, dlogits: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        layers = self.layers(params)
        grads = []
        delta = dlogits
        for k in range(len(layers) - 1, -1, -1):
            w, _ = layers[k]
            a = acts[k]
            grads.append((a.T @ delta, delta.sum(axis=0)))
            if k:
                delta = (delta @ w.T) * (1.0 - a * a)
        flat = []
        for gw, gb in reversed(grads):
            flat += [gw.ravel(), gb]
        return np.concatenate(flat)


def policy_forward(net: PolicyNet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has length {x.shape[-1]}, network expects {net.input_dim}")
    probs, _ = net.forward(np.atleast_2d(x))
    return probs[0] if x.ndim == 1 else probs


# --- episodes ---------------------------------------------------------------------

@dataclass
class Episode:
    actions: list[Action]
    chosen_indices: list[int]
    reward: float
    step_probs: list[float] = field(default_factory=list)


def _sample(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0])[:, None] * cdf[:, -1:]
    return np.minimum((u >= cdf).sum(axis=1), probs.shape[1] - 1)


def _rollout(net: PolicyNet, vec: np.ndarray, n: int, actions: list[Action], L: int,
             batch: int, rng: np.random.Generator) -> list[Episode]:
    d = len(actions)
    states = np.repeat(vec[None, :], batch, axis=0)
    chosen = np.zeros((batch, L), dtype=int)
    step_probs = np.zeros((batch, L))
    x = np.zeros((batch, L, d + 1))
    x[:, :, d] = 1.0
    for t in range(L):
        probs, _ = net.forward(x.reshape(batch, -1))
        idx = _sample(probs, rng)
        chosen[:, t] = idx
        x[np.arange(batch), t, d] = 0.0
        x[np.arange(batch), t, idx] = 1.0
        for b in range(batch):
            states[b] = _apply_action(states[b], actions[idx[b]], n)
            step_probs[b, t] = _prob_last(states[b], 0)
    return [
        Episode(
            actions=[actions[i] for i in chosen[b]],
            chosen_indices=chosen[b].tolist(),
            reward=float(step_probs[b, -1]),
            step_probs=step_probs[b].tolist(),
        )
        for b in range(batch)
    ]


def sample_episode(net: PolicyNet, input_state: StateVector, cfg: RlConfig,
                   rng: np.random.Generator) -> Episode:
    n = input_state.n_qubits
    if n < 2:
        raise ValueError("episodes need at least two qubits")
    actions = action_set(n)
    if net.output_dim != len(actions):
        raise ValueError(f"network outputs {net.output_dim} actions, state has {len(actions)}")
    return _rollout(net, input_state.amplitudes, n, actions, cfg.episode_len, 1, rng)[0]


def episode_reward(input_state: StateVector, actions: Sequence[Action]) -> float:
    """Fresh simulation of an action list; P(last qubit reads 0) at the end."""
    n = input_state.n_qubits
    vec = input_state.amplitudes
    for a in actions:
        vec = _apply_action(vec, a, n)
    return _prob_last(vec, 0)


# --- REINFORCE loss ---------------------------------------------------------------

def _episode_batch(episodes: Sequence[Episode], L: int, d: int):
    xs, idx, weights = [], [], []
    for ep in episodes:
        for t, a in enumerate(ep.chosen_indices):
            xs.append(encode_state(ep.chosen_indices[:t], L, d))
            idx.append(a)
            weights.append(ep.reward)
    return np.array(xs), np.array(idx, dtype=int), np.array(weights)


def policy_loss(episodes: Sequence[Episode], net: PolicyNet, L: int | None = None,
                params: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """``-sum_s log P(a_s) R(a_s)`` over all steps of all episodes, and its gradient."""
    if not episodes:
        raise ValueError("policy loss needs at least one episode")
    if L is None:
        L = net.input_dim // (net.output_dim + 1)
    d = net.output_dim
    x, idx, w = _episode_batch(episodes, L, d)
    probs, acts = net.forward(x, params)
    rows = np.arange(len(idx))
    chosen = probs[rows, idx]
    loss = float(-np.sum(w * np.log(chosen)))
    dlogits = probs * w[:, None]
    dlogits[rows, idx] -= w
    return loss, net.backward(acts, dlogits, params)


# --- training loops -----------------------------------------------------------------

@dataclass
class RlSequenceResult:
    n_active: int
    winning_actions: list[Action]
    reward_max_history: list[float]
    reward_mean_history: list[float]
    stop_epoch: int | None
    success: bool
    reward: float

    def to_json(self) -> dict:
        return {
            "n_active": self.n_active,
            "reward_max_history": self.reward_max_history,
            "reward_mean_history": self.reward_mean_history,
            "winning_actions": [a.to_json() for a in self.winning_actions],
            "stop_epoch": self.stop_epoch,
            "success": self.success,
            "reward": self.reward,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RlSequenceResult":
        return cls(
            n_active=int(data["n_active"]),
            winning_actions=[Action.from_json(a) for a in data["winning_actions"]],
            reward_max_history=[float(r) for r in data["reward_max_history"]],
            reward_mean_history=[float(r) for r in data["reward_mean_history"]],
            stop_epoch=data["stop_epoch"],
            success=bool(data["success"]),
            reward=float(data["reward"]),
        )


def _truncate(episode: Episode, stop: float) -> list[Action]:
    for t, p in enumerate(episode.step_probs):
        if p >= stop:
            return episode.actions[: t + 1]
    return list(episode.actions)


def train_rl_sequence(input_state: StateVector, cfg: RlConfig,
                      rng: np.random.Generator) -> RlSequenceResult:
    n = input_state.n_qubits
    if n < 2:
        raise ValueError("RL sequences need at least two qubits")
    vec = input_state.amplitudes
    p0 = _prob_last(vec, 0)
    if p0 >= cfg.reward_stop:
        return RlSequenceResult(n, [], [], [], 0, True, p0)

    actions = action_set(n)
    d = len(actions)
    L = cfg.episode_len
    net = PolicyNet(L * (d + 1), d, cfg.hidden_sizes, rng)
    opt = AdamState.init(net.n_params, cfg.policy_learning_rate)
    best_max, best_mean = [], []
    for epoch in range(1, cfg.epochs_per_sequence + 1):
        episodes = _rollout(net, vec, n, actions, L, cfg.dataset_size, rng)
        rewards = np.array([ep.reward for ep in episodes])
        best_max.append(float(rewards.max()))
        best_mean.append(float(rewards.mean()))
        # a win is the first step of any episode where the measured qubit reaches |0>
        peaks = np.array([max(ep.step_probs) for ep in episodes])
        winners = np.flatnonzero(peaks >= cfg.reward_stop)
        if winners.size:
            won = _truncate(episodes[winners[0]], cfg.reward_stop)
            return RlSequenceResult(n, won, best_max, best_mean, epoch, True,
                                    episode_reward(input_state, won))
        _, grad = policy_loss(episodes, net, L)
        opt, net.params = adam_step(opt, net.params, grad)
    log.warning("no disentangling sequence for %d active qubits within %d epochs",
                n, cfg.epochs_per_sequence)
    return RlSequenceResult(n, [], best_max, best_mean, None, False, best_max[-1])


@dataclass
class RlRecord:
    n_qubits: int
    sequences: list[RlSequenceResult] = field(default_factory=list)
    final_qubit_prob_zero: float | None = None
    config: RlConfig | None = None

    @property
    def complete(self) -> bool:
        return len(self.sequences) == self.n_qubits - 1

    @property
    def converged(self) -> bool:
        return self.complete and all(s.success for s in self.sequences)

    def to_json(self) -> dict:
        return {
            "kind": "rl",
            "n_qubits": self.n_qubits,
            "config": None if self.config is None else self.config.to_json(),
            "converged": self.converged,
            "final_qubit_prob_zero": self.final_qubit_prob_zero,
            "sequences": [s.to_json() for s in self.sequences],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RlRecord":
        cfg = data.get("config")
        return cls(
            n_qubits=int(data["n_qubits"]),
            sequences=[RlSequenceResult.from_json(s) for s in data["sequences"]],
            final_qubit_prob_zero=data.get("final_qubit_prob_zero"),
            config=None if cfg is None else RlConfig.from_json(cfg),
        )


def rl_disentangle(psi: StateVector, cfg: RlConfig, rng: np.random.Generator) -> RlRecord:
    """Disentangle qubits N..2 with RL; the last remaining qubit is left as found."""
    if psi.n_qubits < 2:
        raise ValueError("RL disentangling needs at least two qubits")
    record = RlRecord(psi.n_qubits, [], None, cfg)
    current = psi
    while current.n_qubits >= 2:
        result = train_rl_sequence(current, cfg, rng)
        record.sequences.append(result)
        if not result.success:
            return record
        n = current.n_qubits
        vec = current.amplitudes
        for a in result.winning_actions:
            vec = _apply_action(vec, a, n)
        current, _ = project_out_last(StateVector(vec / np.linalg.norm(vec)))
    record.final_qubit_prob_zero = _prob_last(current.amplitudes, 0)
    return record


def reconstruct_actions(record: RlRecord) -> StateVector:
    """Invert the recorded action lists starting from |0...0>."""
    if not record.complete:
        raise ValueError("record is missing sequences; cannot reconstruct")
    n = record.n_qubits
    vec = zero_state(n).amplitudes
    for seq in reversed(record.sequences):
        for a in reversed(seq.winning_actions):
            vec = _apply_action_inverse(vec, a, n, seq.n_active)
    return StateVector(vec)
