"""Weighted subspace-search VQE engine.

Several mutually orthogonal basis states are evolved under one parameterized
circuit and a single weighted objective sum(w_j <psi_j|U^t H U|psi_j>) is
minimized with Adam on parameter-shift gradients. Cost evaluation is exact,
fixed-shot, or adaptive-shot (an l1-weighted single-shot estimator that
samples (state, term) pairs with probability |w_j a_i| / ||c||_1).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .paulis import PauliSum, exact_expectation
from .simulator import (
    Circuit,
    NoiseSpec,
    _cnot_permutation,
    _depolarize,
    _qubit_pair_indices,
    run_density,
    run_statevector,
    sample_pauli,
)

EVALUATORS = ("exact", "fixed", "adaptive")
PLATEAU_WINDOW = 10


def round9(value: float) -> float:
    """Floats destined for emitted files carry 9 significant digits."""
    return float(f"{float(value):.9g}")


@dataclass(frozen=True)
class SsvqeConfig:
    """Optimization settings. Weights must be strictly decreasing positive
    reals, one per tracked input basis state."""

    weights: tuple[float, ...] = (2.0, 1.0)
    input_basis: tuple[int, ...] = (0, 1)
    learning_rate: float = 0.1
    max_iterations: int = 1000
    convergence_tol: float = 1e-9
    evaluator: str = "exact"
    shots: int = 1024
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        _validate_weights(self.weights)
        if len(self.input_basis) != len(self.weights):
            raise ValueError("need exactly one weight per input basis state")
        if len(set(self.input_basis)) != len(self.input_basis):
            raise ValueError(f"input basis indices must be distinct, got {self.input_basis}")
        if self.evaluator not in EVALUATORS:
            raise ValueError(f"evaluator must be one of {EVALUATORS}, got {self.evaluator!r}")
        if self.shots < 1:
            raise ValueError(f"shot budget must be >= 1, got {self.shots}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _validate_weights(weights: Sequence[float]) -> None:
    if len(weights) == 0:
        raise ValueError("weights must be nonempty")
    if any(w <= 0 for w in weights):
        raise ValueError(f"weights must be positive, got {weights}")
    if any(weights[i] <= weights[i + 1] for i in range(len(weights) - 1)):
        raise ValueError(f"weights must be strictly decreasing, got {weights}")


@dataclass(frozen=True)
class ShotPlan:
    """Sampling plan for the adaptive estimator.

    One entry per (state j, non-identity term i) pair with combined
    coefficient c = w_j * a_i and probability p = |c| / l1. Identity terms
    are folded into ``constant_offset`` and never sampled.
    """

    pauli: PauliSum
    basis_indices: tuple[int, ...]
    entries: tuple[tuple[int, int, float, float], ...]  # (j, i, c, p)
    l1: float
    constant_offset: float

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e[3] for e in self.entries])


def build_shot_plan(
    pauli: PauliSum,
    weights: Sequence[float],
    input_basis: Optional[Sequence[int]] = None,
) -> ShotPlan:
    """Combine weights and Pauli coefficients into the sampling distribution."""
    _validate_weights(weights)
    if len(pauli) == 0:
        raise ValueError("cannot build a shot plan from an empty Pauli sum")
    if input_basis is None:
        input_basis = tuple(range(len(weights)))
    if len(input_basis) != len(weights):
        raise ValueError("need exactly one basis index per weight")
    raw = []
    offset = 0.0
    for j, w in enumerate(weights):
        for i, (coeff, string) in enumerate(pauli.terms):
            if string.is_identity:
                offset += w * coeff
            else:
                raw.append((j, i, w * coeff))
    l1 = float(sum(abs(c) for _, _, c in raw))
    entries = tuple((j, i, c, abs(c) / l1) for j, i, c in raw) if l1 > 0 else ()
    return ShotPlan(
        pauli=pauli,
        basis_indices=tuple(input_basis),
        entries=entries,
        l1=l1,
        constant_offset=offset,
    )


def _evolve_states(
    circuit: Circuit,
    params: np.ndarray,
    basis_indices: Sequence[int],
    noise: NoiseSpec,
) -> list[np.ndarray]:
    if noise.active:
        return [run_density(circuit, params, b, noise) for b in basis_indices]
    return [run_statevector(circuit, params, b) for b in basis_indices]


def adaptive_estimate(
    plan: ShotPlan,
    circuit: Circuit,
    params: Sequence[float],
    budget: int,
    rng: np.random.Generator,
    noise: NoiseSpec = NoiseSpec(),
) -> float:
    """Unbiased estimate of the weighted cost from `budget` single shots.

    Draws (state, term) pairs from the plan's categorical distribution, takes
    one shot each, accumulates sign(c) * outcome, and rescales by l1.
    """
    if budget < 1:
        raise ValueError(f"shot budget must be >= 1, got {budget}")
    if not plan.entries:
        return plan.constant_offset
    params = np.asarray(params, dtype=float)
    states = _evolve_states(circuit, params, plan.basis_indices, noise)
    counts = rng.multinomial(budget, plan.probabilities)
    total = 0.0
    for (j, i, c, _), m in zip(plan.entries, counts):
        if m == 0:
            continue
        string = plan.pauli.terms[i][1]
        outcome_mean = sample_pauli(states[j], string, int(m), rng)
        total += np.sign(c) * outcome_mean * m
    return plan.constant_offset + plan.l1 * total / budget


def _evolve_batch_vec(
    circuit: Circuit, thetas: np.ndarray, basis_indices: Sequence[int]
) -> np.ndarray:
    """Simulate all parameter rows and input states at once: (R, S, 2^n).

    RY and CNOT are real orthogonal and the inputs are basis states, so the
    whole evolution stays in float64.
    """
    n = circuit.n_qubits
    dim = 1 << n
    R, S = thetas.shape[0], len(basis_indices)
    amp = np.zeros((R, S, dim))
    for s, b in enumerate(basis_indices):
        amp[:, s, b] = 1.0
    halves = thetas / 2.0
    cos_all, sin_all = np.cos(halves), np.sin(halves)
    for gate in circuit.gates:
        if gate.kind == "CNOT":
            amp = amp[:, :, _cnot_permutation(n, gate.c, gate.t)]
        else:
            idx0, idx1 = _qubit_pair_indices(n, gate.q)
            c = cos_all[:, gate.slot, None, None]
            s_ = sin_all[:, gate.slot, None, None]
            a0, a1 = amp[:, :, idx0], amp[:, :, idx1]
            amp[:, :, idx0] = c * a0 - s_ * a1
            amp[:, :, idx1] = s_ * a0 + c * a1
    return amp


def _evolve_batch_density(
    circuit: Circuit,
    thetas: np.ndarray,
    basis_indices: Sequence[int],
    noise: NoiseSpec,
) -> np.ndarray:
    """Density-matrix version of the batched evolution: (R, S, 2^n, 2^n).

    Real orthogonal gates and the real-linear depolarizing channel keep the
    matrices real symmetric throughout.
    """
    n = circuit.n_qubits
    dim = 1 << n
    R, S = thetas.shape[0], len(basis_indices)
    rho = np.zeros((R, S, dim, dim))
    for s, b in enumerate(basis_indices):
        rho[:, s, b, b] = 1.0
    for gate in circuit.gates:
        if gate.kind == "CNOT":
            perm = _cnot_permutation(n, gate.c, gate.t)
            rho = rho[:, :, perm, :][:, :, :, perm]
        else:
            # RY is real orthogonal, so G rho G^T needs no conjugation.
            idx0, idx1 = _qubit_pair_indices(n, gate.q)
            half = thetas[:, gate.slot, None, None, None] / 2.0
            c, s_ = np.cos(half), np.sin(half)
            r0, r1 = rho[:, :, idx0, :], rho[:, :, idx1, :]
            rho[:, :, idx0, :] = c * r0 - s_ * r1
            rho[:, :, idx1, :] = s_ * r0 + c * r1
            c0, c1 = rho[:, :, :, idx0], rho[:, :, :, idx1]
            rho[:, :, :, idx0] = c * c0 - s_ * c1
            rho[:, :, :, idx1] = s_ * c0 + c * c1
        if noise.active:
            rho = _depolarize(rho, n, gate.qubits, noise.p)
    return rho


@lru_cache(maxsize=64)
def _stacked_terms(pauli: PauliSum) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Non-identity terms with real phase arrays as stacked matrices:
    (identity offset, coeffs (T,), perms (T, dim), phases (T, dim)).

    Strings with an odd number of Y letters have purely imaginary phases and
    expectation zero on real states; they are dropped here, which is exact
    for the real-valued evolution used by the batched paths.
    """
    dim = pauli.dim
    offset = 0.0
    coeffs, perms, phases = [], [], []
    for coeff, string in pauli.terms:
        if string.is_identity:
            offset += coeff
            continue
        perm, phase = string.action()
        if np.max(np.abs(phase.imag)) > 0:
            continue
        coeffs.append(coeff)
        perms.append(perm)
        phases.append(phase.real)
    if not coeffs:
        return offset, np.zeros(0), np.zeros((0, dim), dtype=int), np.zeros((0, dim))
    return offset, np.array(coeffs), np.vstack(perms), np.vstack(phases)


def _batch_energies(states: np.ndarray, pauli: PauliSum) -> np.ndarray:
    """Per-row, per-state expectation values: (R, S). States must be real."""
    offset, coeffs, perms, phases = _stacked_terms(pauli)
    if coeffs.size == 0:
        return np.full(states.shape[:2], offset)
    if states.ndim == 3:
        # <P_t> per term: sum_b psi[perm_t[b]] phase_t[b] psi[b]
        values = np.einsum("rstb,tb,rsb->rst", states[..., perms], phases, states)
    else:
        # tr(P_t rho) = sum_b phase_t[b] rho[b, perm_t[b]]
        dim = states.shape[-1]
        cols = np.arange(dim)
        values = np.einsum("rstb,tb->rst", states[..., cols[None, :], perms], phases)
    return offset + values @ coeffs


def _exact_batch(
    circuit: Circuit,
    thetas: np.ndarray,
    pauli: PauliSum,
    basis_indices: Sequence[int],
    noise: NoiseSpec,
) -> np.ndarray:
    if noise.active:
        states = _evolve_batch_density(circuit, thetas, basis_indices, noise)
    else:
        states = _evolve_batch_vec(circuit, thetas, basis_indices)
    return _batch_energies(states, pauli)


def weighted_cost(
    circuit: Circuit,
    params: Sequence[float],
    pauli: PauliSum,
    cfg: SsvqeConfig,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """The weighted subspace objective under the configured evaluator."""
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {params.shape}")
    weights = np.asarray(cfg.weights)
    if cfg.evaluator == "exact":
        energies = _exact_batch(circuit, params[None, :], pauli, cfg.input_basis, cfg.noise)
        return float(energies[0] @ weights)
    if rng is None:
        raise ValueError(f"the {cfg.evaluator!r} evaluator needs a random generator")
    if cfg.evaluator == "adaptive":
        plan = build_shot_plan(pauli, cfg.weights, cfg.input_basis)
        return adaptive_estimate(plan, circuit, params, cfg.shots, rng, cfg.noise)
    # fixed: the same shot budget for every (state, term) pair
    states = _evolve_states(circuit, params, cfg.input_basis, cfg.noise)
    total = 0.0
    for w, state in zip(cfg.weights, states):
        value = 0.0
        for coeff, string in pauli.terms:
            if string.is_identity:
                value += coeff
            else:
                value += coeff * sample_pauli(state, string, cfg.shots, rng)
        total += w * value
    return total


def parameter_shift_gradient(
    circuit: Circuit,
    params: Sequence[float],
    pauli: PauliSum,
    cfg: SsvqeConfig,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Exact rotation-gate gradient: g_k = [cost(t_k + pi/2) - cost(t_k - pi/2)] / 2.

    Every parameterized gate must be an RY rotation (the circuit type only
    assigns parameter slots to RY gates).
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {params.shape}")
    n_params = params.shape[0]
    if n_params == 0:
        return np.zeros(0)
    if cfg.evaluator == "exact":
        thetas = np.repeat(params[None, :], 2 * n_params, axis=0)
        for k in range(n_params):
            thetas[2 * k, k] += np.pi / 2
            thetas[2 * k + 1, k] -= np.pi / 2
        energies = _exact_batch(circuit, thetas, pauli, cfg.input_basis, cfg.noise)
        costs = energies @ np.asarray(cfg.weights)
        return (costs[0::2] - costs[1::2]) / 2.0
    grad = np.empty(n_params)
    for k in range(n_params):
        shifted = params.copy()
        shifted[k] += np.pi / 2
        up = weighted_cost(circuit, shifted, pauli, cfg, rng)
        shifted[k] -= np.pi
        down = weighted_cost(circuit, shifted, pauli, cfg, rng)
        grad[k] = (up - down) / 2.0
    return grad


class Adam:
    """Adam optimizer over a list of arrays (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: Optional[list[np.ndarray]] = None
        self._v: Optional[list[np.ndarray]] = None
        self._t = 0

    def step(self, values: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        if self._m is None:
            self._m = [np.zeros_like(v) for v in values]
            self._v = [np.zeros_like(v) for v in values]
        self._t += 1
        out = []
        for i, (value, grad) in enumerate(zip(values, grads)):
            self._m[i] = self.beta1 * self._m[i] + (1 - self.beta1) * grad
            self._v[i] = self.beta2 * self._v[i] + (1 - self.beta2) * grad * grad
            m_hat = self._m[i] / (1 - self.beta1 ** self._t)
            v_hat = self._v[i] / (1 - self.beta2 ** self._t)
            out.append(value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


@dataclass
class SsvqeOutcome:
    """Result of one optimization run. Energies are exact Rayleigh quotients
    of the evolved basis states at the optimum, sorted ascending."""

    params: np.ndarray
    energies: tuple[float, ...]
    states: tuple[np.ndarray, ...]
    cost_trace: np.ndarray
    energy_trace: np.ndarray
    iterations: int
    wall_time: float
    converged: bool

    @property
    def final_cost(self) -> float:
        return float(self.cost_trace[-1])

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "cost"] + [f"E{j}" for j in range(self.energy_trace.shape[1])])
            for it, (cost, row) in enumerate(zip(self.cost_trace, self.energy_trace)):
                writer.writerow([it, f"{cost:.9g}"] + [f"{e:.9g}" for e in row])

    def to_json(self, path, trace_filename: str) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "energies": [round9(e) for e in self.energies],
                    "params": [round9(p) for p in self.params],
                    "iterations": self.iterations,
                    "cost_trace_file": trace_filename,
                },
                fh,
                indent=1,
            )
            fh.write("\n")


def read_trace_csv(path) -> np.ndarray:
    """Load a cost-trace CSV back as a float array (iter, cost, E...)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in row] for row in rows[1:]])


def optimize(
    circuit: Circuit,
    operator,
    cfg: SsvqeConfig,
    rng: Optional[np.random.Generator] = None,
    initial_params: Optional[Sequence[float]] = None,
) -> SsvqeOutcome:
    """Run Adam on the weighted cost and extract the eigenpair estimates.

    Parameters start uniform on (-0.1, 0.1) unless ``initial_params`` is
    given (used to warm-start incremental circuit growth). Stops at
    ``max_iterations`` or after 10 consecutive iterations with cost change
    below ``convergence_tol``. Per-state energies along the trace and in the
    outcome are always exact, independent of the cost evaluator.
    """
    if circuit.n_qubits != operator.n_qubits:
        raise ValueError(
            f"circuit has {circuit.n_qubits} qubits, operator {operator.n_qubits}"
        )
    pauli = operator.pauli
    weights = np.asarray(cfg.weights)
    n_params = circuit.n_params
    if initial_params is not None:
        theta = np.asarray(initial_params, dtype=float).copy()
        if theta.shape != (n_params,):
            raise ValueError(f"expected {n_params} initial parameters, got {theta.shape}")
    else:
        if rng is None and n_params > 0:
            raise ValueError("a random generator is required to initialize parameters")
        theta = rng.uniform(-0.1, 0.1, n_params) if n_params else np.zeros(0)
    if cfg.evaluator != "exact" and rng is None:
        raise ValueError(f"the {cfg.evaluator!r} evaluator needs a random generator")

    start = time.perf_counter()
    adam = Adam(cfg.learning_rate)
    costs: list[float] = []
    energy_rows: list[np.ndarray] = []
    streak = 0
    converged = False
    iterations = 0
    exact_mode = cfg.evaluator == "exact"

    def record(theta_now: np.ndarray) -> None:
        exact = _exact_batch(circuit, theta_now[None, :], pauli, cfg.input_basis, cfg.noise)[0]
        cost = float(exact @ weights) if exact_mode else weighted_cost(
            circuit, theta_now, pauli, cfg, rng
        )
        costs.append(cost)
        energy_rows.append(np.sort(exact))

    def cost_and_gradient(theta_now: np.ndarray) -> np.ndarray:
        """Record the cost at theta_now and return its gradient; in exact
        mode both come from one batched evaluation."""
        if exact_mode:
            rows = np.repeat(theta_now[None, :], 2 * n_params + 1, axis=0)
            for k in range(n_params):
                rows[1 + 2 * k, k] += np.pi / 2
                rows[2 + 2 * k, k] -= np.pi / 2
            energies = _exact_batch(circuit, rows, pauli, cfg.input_basis, cfg.noise)
            row_costs = energies @ weights
            costs.append(float(row_costs[0]))
            energy_rows.append(np.sort(energies[0]))
            return (row_costs[1::2] - row_costs[2::2]) / 2.0
        record(theta_now)
        return parameter_shift_gradient(circuit, theta_now, pauli, cfg, rng)

    if n_params == 0 or cfg.max_iterations == 0:
        record(theta)
    for _ in range(cfg.max_iterations):
        if n_params == 0:
            break
        grad = cost_and_gradient(theta)
        if len(costs) > 1 and abs(costs[-1] - costs[-2]) < cfg.convergence_tol:
            streak += 1
        else:
            streak = 0
        if streak >= PLATEAU_WINDOW:
            converged = True
            break
        theta = adam.step([theta], [grad])[0]
        iterations += 1
    if iterations > 0 and not converged:
        record(theta)

    final_states = _evolve_states(circuit, theta, cfg.input_basis, cfg.noise)
    final_energies = np.array([exact_expectation(pauli, s) for s in final_states])
    order = np.argsort(final_energies)
    return SsvqeOutcome(
        params=theta,
        energies=tuple(float(final_energies[i]) for i in order),
        states=tuple(final_states[i] for i in order),
        cost_trace=np.array(costs),
        energy_trace=np.vstack(energy_rows),
        iterations=iterations,
        wall_time=time.perf_counter() - start,
        converged=converged,
    )
