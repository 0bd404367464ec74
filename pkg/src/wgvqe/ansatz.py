"""Ansatz construction: layered HEA baseline, the gate-placement action
catalog used by the architecture search, and observation encoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .simulator import Circuit, Gate


class CircuitFullError(RuntimeError):
    """Raised when a gate placement would exceed the depth cap."""


@dataclass(frozen=True)
class ActionCatalog:
    """Fixed action ordering: RY on qubits 0..n-1, then CNOT(i, i+1) for
    i = 0..n-2. Size is 2n - 1."""

    n_qubits: int

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError(f"catalog needs at least 2 qubits, got {self.n_qubits}")

    @property
    def size(self) -> int:
        return 2 * self.n_qubits - 1

    def describe(self, index: int) -> str:
        n = self.n_qubits
        if not 0 <= index < self.size:
            raise ValueError(f"action index {index} out of range [0, {self.size})")
        if index < n:
            return f"RY(q{index})"
        i = index - n
        return f"CNOT(q{i}, q{i + 1})"

    def gate_for(self, index: int, next_slot: int) -> Gate:
        n = self.n_qubits
        if not 0 <= index < self.size:
            raise ValueError(f"action index {index} out of range [0, {self.size})")
        if index < n:
            return Gate.ry(index, next_slot)
        i = index - n
        return Gate.cnot(i, i + 1)


def build_hea(n_qubits: int, layers: int) -> Circuit:
    """Hardware-efficient ansatz: per layer, RY on every qubit followed by a
    chain of adjacent CNOTs. Totals n*L RY and (n-1)*L CNOT gates."""
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    gates = []
    slot = 0
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(Gate.ry(q, slot))
            slot += 1
        for i in range(n_qubits - 1):
            gates.append(Gate.cnot(i, i + 1))
    return Circuit(n_qubits=n_qubits, gates=tuple(gates))


def apply_action(
    circuit: Circuit,
    catalog: ActionCatalog,
    action_index: int,
    d_max: Optional[int] = None,
) -> Circuit:
    """Append the catalog gate for `action_index`, recording it in the
    circuit's action history. A new RY takes the next parameter slot (its
    angle starts at 0, so growth leaves the current state unchanged)."""
    if circuit.n_qubits != catalog.n_qubits:
        raise ValueError("circuit and catalog qubit counts differ")
    if d_max is not None and circuit.n_gates >= d_max:
        raise CircuitFullError(f"circuit already holds {circuit.n_gates} >= {d_max} gates")
    gate = catalog.gate_for(action_index, circuit.n_params)
    history = (circuit.history or ()) + (action_index,)
    return Circuit(
        n_qubits=circuit.n_qubits, gates=circuit.gates + (gate,), history=history
    )


def encode_observation(
    circuit: Circuit,
    energy: float,
    d_max: int,
    catalog: ActionCatalog,
    energy_scale: float = 1.0,
) -> np.ndarray:
    """Flattened one-hot placement matrix plus a normalized energy feature.

    The action taken at depth d sets component d * N_A + action; the final
    component is energy / energy_scale. Requires the circuit to carry its
    action history.
    """
    if circuit.history is None:
        raise ValueError("circuit has no recorded action history")
    if len(circuit.history) != circuit.n_gates:
        raise ValueError("action history length does not match gate count")
    if circuit.n_gates > d_max:
        raise ValueError(f"circuit has {circuit.n_gates} gates, beyond d_max={d_max}")
    n_a = catalog.size
    obs = np.zeros(d_max * n_a + 1)
    for depth, action in enumerate(circuit.history):
        if not 0 <= action < n_a:
            raise ValueError(f"history entry {action} outside the catalog")
        obs[depth * n_a + action] = 1.0
    obs[-1] = energy / energy_scale
    return obs
