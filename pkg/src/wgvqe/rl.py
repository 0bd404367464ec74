"""DDQN-driven ansatz search.

An agent grows a circuit one catalog gate at a time; after each placement the
circuit parameters are warm-started and re-tuned for a few Adam steps, and
the agent is rewarded with the negative weighted energy minus a depth
penalty, plus a bonus whenever the energy beats a curriculum threshold that
tracks the best result seen so far. Value estimates come from a small
feed-forward network trained against a softly updated target copy.
"""

from __future__ import annotations

import csv
import json
import time
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .ansatz import ActionCatalog, apply_action, encode_observation
from .simulator import Circuit
from .ssvqe import Adam, SsvqeConfig, SsvqeOutcome, build_shot_plan, optimize, round9
from .waveguide import WaveguideOperator

TARGET_MODES = ("double", "vanilla")

# Baseline HEA depth used to default the gate cap: 6 layers on 3 qubits
# (30 gates), 15 layers on 5 qubits (135 gates).
_BASELINE_LAYERS = {3: 6, 5: 15}


@dataclass(frozen=True)
class RlConfig:
    episodes: int = 500
    d_max: Optional[int] = None  # None: baseline HEA gate count for n_qubits
    gamma: float = 0.99
    tau: float = 0.005
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay: float = 0.995
    depth_penalty: float = 0.01
    bonus: float = 5.0
    threshold_margin: float = 1e-3
    inner_opt_steps: int = 50
    replay_capacity: int = 5000
    batch_size: int = 64
    hidden_sizes: tuple[int, ...] = (128, 64)
    net_learning_rate: float = 1e-3
    seed: int = 0
    target_mode: str = "double"
    early_stop: bool = False
    reward_evaluator: str = "exact"  # exact | adaptive
    reward_shots: int = 1024
    tie_tol: float = 1e-6
    reopt_margin: float = 0.1
    reopt_pool: int = 5

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        for eps in (self.epsilon_start, self.epsilon_end):
            if not 0 <= eps <= 1:
                raise ValueError(f"epsilon values must be in [0, 1], got {eps}")
        if self.depth_penalty < 0:
            raise ValueError("depth_penalty must be >= 0")
        if self.target_mode not in TARGET_MODES:
            raise ValueError(f"target_mode must be one of {TARGET_MODES}")
        if self.reward_evaluator not in ("exact", "adaptive"):
            raise ValueError("reward_evaluator must be 'exact' or 'adaptive'")
        for name in ("episodes", "inner_opt_steps", "replay_capacity", "batch_size",
                     "reward_shots", "reopt_pool"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d_max is not None and self.d_max < 1:
            raise ValueError("d_max must be positive")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")

    def resolve_d_max(self, n_qubits: int) -> int:
        if self.d_max is not None:
            return self.d_max
        layers = _BASELINE_LAYERS.get(n_qubits, 6)
        return layers * (2 * n_qubits - 1)

    def epsilon_at(self, episode: int) -> float:
        return max(self.epsilon_end, self.epsilon_start * self.epsilon_decay ** episode)


@dataclass(frozen=True)
class Experience:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    done: bool

    def __post_init__(self):
        if self.observation.shape != self.next_observation.shape:
            raise ValueError("observation shapes differ within one transition")


class ReplayBuffer:
    """Bounded FIFO memory; eviction is oldest-first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self._items: deque[Experience] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Experience) -> None:
        if self._items and self._items[0].observation.shape != item.observation.shape:
            raise ValueError("transition observation length differs from buffer contents")
        self._items.append(item)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        if batch_size > len(self._items):
            raise ValueError(f"cannot sample {batch_size} from buffer of {len(self._items)}")
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[i] for i in idx]


class QNetwork:
    """Feed-forward value network with ReLU hidden layers and a linear head,
    trained by its own Adam instance."""

    def __init__(self, layer_sizes: Sequence[int], rng: np.random.Generator,
                 learning_rate: float = 1e-3):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._adam = Adam(learning_rate)

    @property
    def n_actions(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def set_parameters(self, params: list[np.ndarray]) -> None:
        n = len(self.weights)
        self.weights = [p.copy() for p in params[:n]]
        self.biases = [p.copy() for p in params[n:]]

    def copy(self) -> "QNetwork":
        clone = object.__new__(QNetwork)
        clone.layer_sizes = self.layer_sizes
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone._adam = Adam(self._adam.learning_rate)
        return clone

    def _forward(self, x: np.ndarray) -> list[np.ndarray]:
        activations = [x]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = activations[-1] @ w + b
            if i < len(self.weights) - 1:
                z = np.maximum(z, 0.0)
            activations.append(z)
        return activations

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        return self._forward(obs)[-1]

    def loss_and_grads(
        self, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray
    ) -> tuple[float, list[np.ndarray]]:
        """MSE between Q(s, a) at the taken actions and the targets, with
        analytic gradients for every weight and bias."""
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        batch = obs.shape[0]
        activations = self._forward(obs)
        q = activations[-1]
        rows = np.arange(batch)
        diff = q[rows, actions] - targets
        loss = float(np.mean(diff ** 2))
        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * diff / batch
        w_grads: list[np.ndarray] = [None] * len(self.weights)
        b_grads: list[np.ndarray] = [None] * len(self.biases)
        delta = dq
        for i in reversed(range(len(self.weights))):
            w_grads[i] = activations[i].T @ delta
            b_grads[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (activations[i] > 0)
        return loss, w_grads + b_grads

    def apply_gradients(self, grads: list[np.ndarray], learning_rate: Optional[float] = None) -> None:
        if learning_rate is not None:
            self._adam.learning_rate = learning_rate
        new_params = self._adam.step(self.parameters(), grads)
        self.set_parameters(new_params)


def reward(energy: float, depth: int, depth_penalty: float, threshold: float,
           bonus: float) -> float:
    """-energy - depth_penalty * depth, plus the bonus when energy < threshold."""
    value = -energy - depth_penalty * depth
    if energy < threshold:
        value += bonus
    return value


def _batch_arrays(batch: Sequence[Experience]):
    obs = np.stack([e.observation for e in batch])
    actions = np.array([e.action for e in batch], dtype=int)
    rewards = np.array([e.reward for e in batch])
    next_obs = np.stack([e.next_observation for e in batch])
    done = np.array([e.done for e in batch], dtype=bool)
    return obs, actions, rewards, next_obs, done


def td_target(
    batch: Sequence[Experience],
    gamma: float,
    online: QNetwork,
    target: QNetwork,
    mode: str = "double",
) -> np.ndarray:
    """Bootstrap targets. ``vanilla`` evaluates max_a Q(s', a) on the target
    network alone; ``double`` selects the argmax with the online network and
    evaluates it on the target network. Terminal transitions use the bare
    reward."""
    if not batch:
        raise ValueError("td_target needs a nonempty batch")
    if mode not in TARGET_MODES:
        raise ValueError(f"mode must be one of {TARGET_MODES}, got {mode!r}")
    _, _, rewards, next_obs, done = _batch_arrays(batch)
    target_q = target.q_values(next_obs)
    if mode == "vanilla":
        future = target_q.max(axis=1)
    else:
        best = np.argmax(online.q_values(next_obs), axis=1)
        future = target_q[np.arange(len(batch)), best]
    return rewards + gamma * future * (~done)


def train_step(
    online: QNetwork,
    target: QNetwork,
    batch: Sequence[Experience],
    gamma: float,
    learning_rate: float,
    mode: str = "double",
) -> float:
    """One Adam step on the TD loss; returns the pre-step loss."""
    targets = td_target(batch, gamma, online, target, mode)
    obs, actions, _, _, _ = _batch_arrays(batch)
    loss, grads = online.loss_and_grads(obs, actions, targets)
    if not np.isfinite(loss):
        raise ArithmeticError(f"non-finite TD loss {loss}; training diverged")
    online.apply_gradients(grads, learning_rate)
    return loss


def soft_update(online: QNetwork, target: QNetwork, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    online_params = online.parameters()
    target_params = target.parameters()
    if len(online_params) != len(target_params):
        raise ValueError("network parameter counts differ")
    merged = []
    for o, t in zip(online_params, target_params):
        if o.shape != t.shape:
            raise ValueError(f"parameter shape mismatch: {o.shape} vs {t.shape}")
        merged.append(tau * o + (1.0 - tau) * t)
    target.set_parameters(merged)


@dataclass
class EpisodeRecord:
    episode: int
    best_energy: float
    depth: int
    reward_sum: float
    epsilon: float
    xi: float
    aborted: bool = False


@dataclass
class Candidate:
    energy: float
    circuit: Circuit
    params: np.ndarray

    @property
    def key(self) -> tuple:
        return (self.energy, self.circuit.n_gates, self.circuit.n_cnot)


@dataclass
class SearchReport:
    episodes: list[EpisodeRecord]
    best_circuit: Circuit
    best_params: np.ndarray
    best_outcome: SsvqeOutcome
    candidates: list[dict]
    gate_summary: dict
    wall_time: float

    def write_episode_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "best_energy", "depth", "reward_sum", "epsilon", "xi"])
            for r in self.episodes:
                writer.writerow(
                    [r.episode, f"{r.best_energy:.9g}", r.depth, f"{r.reward_sum:.9g}",
                     f"{r.epsilon:.9g}", f"{r.xi:.9g}"]
                )

    def to_json(self, path, episode_csv: str, circuit_json: str, outcome_json: str) -> None:
        # Deterministic content only (no wall time): reruns with the same
        # config and seed must be byte-identical.
        summary = {
            k: (round9(v) if isinstance(v, float) else v)
            for k, v in self.gate_summary.items()
        }
        def clean(value):
            if isinstance(value, float):
                return round9(value)
            if isinstance(value, list):
                return [clean(v) for v in value]
            return value

        candidates = [{k: clean(v) for k, v in cand.items()} for cand in self.candidates]
        with open(path, "w") as fh:
            json.dump(
                {
                    "episode_log": episode_csv,
                    "best_circuit": circuit_json,
                    "best_outcome": outcome_json,
                    "gate_summary": summary,
                    "candidates": candidates,
                    "episodes": len(self.episodes),
                },
                fh,
                indent=1,
            )
            fh.write("\n")


def read_episode_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def gate_summary(circuit: Circuit) -> dict:
    total = circuit.n_gates
    return {
        "ry_gates": circuit.n_ry,
        "cnot_gates": circuit.n_cnot,
        "total_gates": total,
        "single_qubit_gates": circuit.n_ry,
        "two_qubit_gates": circuit.n_cnot,
        "single_qubit_ratio": circuit.n_ry / total if total else 0.0,
        "two_qubit_ratio": circuit.n_cnot / total if total else 0.0,
        "parameters": circuit.n_params,
        "qubits": circuit.n_qubits,
    }


def run_search(
    operator: WaveguideOperator,
    rl_cfg: RlConfig,
    ssvqe_cfg: SsvqeConfig,
) -> SearchReport:
    """Grow circuits episode by episode and return the best one, re-optimized
    to full convergence.

    Candidates are collected at every step (the best circuit seen at each
    depth plus the global leaders); each survivor is re-optimized with the
    full iteration budget and the winner is chosen by energy, breaking ties
    within ``tie_tol`` toward fewer total gates, then fewer CNOTs.
    """
    start = time.perf_counter()
    n = operator.n_qubits
    catalog = ActionCatalog(n)
    d_max = rl_cfg.resolve_d_max(n)
    obs_dim = d_max * catalog.size + 1
    master = np.random.default_rng(rl_cfg.seed)
    net_rng, action_rng, replay_rng, shot_rng, reopt_rng = master.spawn(5)

    inner_cfg = replace(
        ssvqe_cfg,
        max_iterations=rl_cfg.inner_opt_steps,
        evaluator="adaptive" if rl_cfg.reward_evaluator == "adaptive" else "exact",
        shots=rl_cfg.reward_shots,
    )
    plan = build_shot_plan(operator.pauli, ssvqe_cfg.weights, ssvqe_cfg.input_basis)
    energy_scale = plan.l1 if plan.l1 > 0 else 1.0

    online = QNetwork(
        (obs_dim, *rl_cfg.hidden_sizes, catalog.size), net_rng, rl_cfg.net_learning_rate
    )
    target = online.copy()
    buffer = ReplayBuffer(rl_cfg.replay_capacity)

    empty = Circuit(n, (), history=())
    baseline_energy = optimize(empty, operator, inner_cfg, shot_rng).final_cost
    xi = baseline_energy
    best_hist = np.inf

    depth_best: dict[int, Candidate] = {}
    leaders: list[Candidate] = []
    records: list[EpisodeRecord] = []

    for episode in range(rl_cfg.episodes):
        epsilon = rl_cfg.epsilon_at(episode)
        circuit = empty
        theta = np.zeros(0)
        energy = baseline_energy
        obs = encode_observation(circuit, energy, d_max, catalog, energy_scale)
        reward_sum = 0.0
        ep_best = np.inf
        aborted = False

        for step in range(d_max):
            if action_rng.random() < epsilon:
                action = int(action_rng.integers(catalog.size))
            else:
                action = int(np.argmax(online.q_values(obs)[0]))
            circuit = apply_action(circuit, catalog, action, d_max)
            if circuit.gates[-1].kind == "RY":
                theta = np.append(theta, 0.0)
            outcome = optimize(circuit, operator, inner_cfg, shot_rng, initial_params=theta)
            theta = outcome.params
            energy = outcome.final_cost
            if not np.isfinite(energy):
                aborted = True
                break
            ep_best = min(ep_best, energy)
            cand = Candidate(energy, circuit, theta.copy())
            depth = circuit.n_gates
            if depth not in depth_best or cand.key < depth_best[depth].key:
                depth_best[depth] = cand
            leaders.append(cand)
            leaders.sort(key=lambda c: c.key)
            del leaders[rl_cfg.reopt_pool:]

            step_reward = reward(energy, depth, rl_cfg.depth_penalty, xi, rl_cfg.bonus)
            reward_sum += step_reward
            done = depth >= d_max or (rl_cfg.early_stop and energy < xi)
            next_obs = encode_observation(circuit, energy, d_max, catalog, energy_scale)
            buffer.push(Experience(obs, action, step_reward, next_obs, done))
            if len(buffer) >= rl_cfg.batch_size:
                train_step(
                    online,
                    target,
                    buffer.sample(rl_cfg.batch_size, replay_rng),
                    rl_cfg.gamma,
                    rl_cfg.net_learning_rate,
                    rl_cfg.target_mode,
                )
                soft_update(online, target, rl_cfg.tau)
            obs = next_obs
            if done:
                break

        records.append(
            EpisodeRecord(
                episode=episode,
                best_energy=ep_best if np.isfinite(ep_best) else float("nan"),
                depth=circuit.n_gates,
                reward_sum=reward_sum,
                epsilon=epsilon,
                xi=xi,
                aborted=aborted,
            )
        )
        if np.isfinite(ep_best):
            best_hist = min(best_hist, ep_best)
            xi = min(xi, best_hist + rl_cfg.threshold_margin)

    if not np.isfinite(best_hist):
        raise RuntimeError("every episode aborted with a non-finite energy")

    # Re-optimize the surviving candidates with the full budget.
    pool: dict[tuple, Candidate] = {}
    for cand in list(depth_best.values()) + leaders:
        if cand.energy <= best_hist + rl_cfg.reopt_margin:
            key = cand.circuit.history
            if key not in pool or cand.key < pool[key].key:
                pool[key] = cand
    refined: list[tuple[Candidate, SsvqeOutcome]] = []
    for cand in sorted(pool.values(), key=lambda c: c.key):
        out = optimize(cand.circuit, operator, ssvqe_cfg, reopt_rng, initial_params=cand.params)
        refined.append((cand, out))
    # One fresh-start restart of the raw leader guards against a poor warm basin.
    leader = min(pool.values(), key=lambda c: c.key)
    fresh = optimize(leader.circuit, operator, ssvqe_cfg, reopt_rng)
    refined.append((leader, fresh))

    best_cost = min(out.final_cost for _, out in refined)
    winners = [(c, o) for c, o in refined if o.final_cost <= best_cost + rl_cfg.tie_tol]
    winners.sort(key=lambda co: (co[0].circuit.n_gates, co[0].circuit.n_cnot, co[1].final_cost))
    best_cand, best_out = winners[0]

    candidates_summary = [
        {
            "history": list(c.circuit.history or ()),
            "gates": c.circuit.n_gates,
            "cnots": c.circuit.n_cnot,
            "search_energy": c.energy,
            "reoptimized_cost": o.final_cost,
            "energies": [float(e) for e in o.energies],
        }
        for c, o in refined
    ]
    return SearchReport(
        episodes=records,
        best_circuit=best_cand.circuit,
        best_params=best_out.params,
        best_outcome=best_out,
        candidates=candidates_summary,
        gate_summary=gate_summary(best_cand.circuit),
        wall_time=time.perf_counter() - start,
    )
