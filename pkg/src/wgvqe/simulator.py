"""Statevector and density-matrix simulation for RY/CNOT circuits.

Supports per-gate depolarizing noise on the density path and shot-based
Pauli measurement with automatic basis changes (H for X, SDG then H for Y).
Qubit 0 is the most significant bit of the basis index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .paulis import MAX_QUBITS, PauliString

ANSATZ_KINDS = ("RY", "CNOT")
BASIS_CHANGE_KINDS = ("H", "SDG")


@dataclass(frozen=True)
class Gate:
    """One circuit gate. RY carries a parameter slot; H/SDG are reserved for
    measurement-basis changes and never appear in ansatz bodies."""

    kind: str
    q: Optional[int] = None
    c: Optional[int] = None
    t: Optional[int] = None
    slot: Optional[int] = None

    def __post_init__(self):
        if self.kind == "RY":
            if self.q is None or self.q < 0 or self.slot is None or self.slot < 0:
                raise ValueError(f"RY needs a qubit and a parameter slot, got {self}")
        elif self.kind == "CNOT":
            if self.c is None or self.t is None or self.c < 0 or self.t < 0:
                raise ValueError(f"CNOT needs control and target, got {self}")
            if self.c == self.t:
                raise ValueError(f"CNOT control and target must differ, got {self.c}")
        elif self.kind in BASIS_CHANGE_KINDS:
            if self.q is None or self.q < 0:
                raise ValueError(f"{self.kind} needs a qubit, got {self}")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @classmethod
    def ry(cls, q: int, slot: int) -> "Gate":
        return cls(kind="RY", q=q, slot=slot)

    @classmethod
    def cnot(cls, c: int, t: int) -> "Gate":
        return cls(kind="CNOT", c=c, t=t)

    @classmethod
    def h(cls, q: int) -> "Gate":
        return cls(kind="H", q=q)

    @classmethod
    def sdg(cls, q: int) -> "Gate":
        return cls(kind="SDG", q=q)

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.kind == "CNOT":
            return (self.c, self.t)
        return (self.q,)


@dataclass(frozen=True)
class Circuit:
    """Ordered RY/CNOT gate list; ``history`` records the action indices when
    the circuit was grown by catalog actions."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()
    history: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        next_slot = 0
        for gate in self.gates:
            if gate.kind not in ANSATZ_KINDS:
                raise ValueError(
                    f"{gate.kind} is a measurement-basis gate and cannot appear in an ansatz"
                )
            if any(q >= self.n_qubits for q in gate.qubits):
                raise ValueError(f"gate {gate} addresses a qubit >= {self.n_qubits}")
            if gate.kind == "RY":
                if gate.slot != next_slot:
                    raise ValueError(
                        f"RY slots must appear in order 0,1,...; expected {next_slot}, got {gate.slot}"
                    )
                next_slot += 1

    @property
    def n_params(self) -> int:
        return sum(1 for g in self.gates if g.kind == "RY")

    @property
    def n_ry(self) -> int:
        return self.n_params

    @property
    def n_cnot(self) -> int:
        return sum(1 for g in self.gates if g.kind == "CNOT")

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @property
    def depth(self) -> int:
        """Layered depth under greedy parallel scheduling."""
        busy_until = [0] * self.n_qubits
        depth = 0
        for gate in self.gates:
            layer = 1 + max(busy_until[q] for q in gate.qubits)
            for q in gate.qubits:
                busy_until[q] = layer
            depth = max(depth, layer)
        return depth

    def to_json_dict(self) -> dict:
        gates = []
        for g in self.gates:
            if g.kind == "RY":
                gates.append({"g": "RY", "q": g.q, "slot": g.slot})
            else:
                gates.append({"g": "CNOT", "c": g.c, "t": g.t})
        data = {"n_qubits": self.n_qubits, "gates": gates}
        if self.history is not None:
            data["history"] = list(self.history)
        return data

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, data: dict) -> "Circuit":
        gates = []
        for g in data["gates"]:
            if g["g"] == "RY":
                gates.append(Gate.ry(g["q"], g["slot"]))
            elif g["g"] == "CNOT":
                gates.append(Gate.cnot(g["c"], g["t"]))
            else:
                raise ValueError(f"unknown gate kind {g['g']!r} in circuit JSON")
        history = tuple(data["history"]) if "history" in data else None
        return cls(n_qubits=int(data["n_qubits"]), gates=tuple(gates), history=history)

    @classmethod
    def from_json(cls, path) -> "Circuit":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class NoiseSpec:
    """Per-gate depolarizing noise; applied on each gate's own qubits."""

    p: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"depolarizing strength must be in [0, 1], got {self.p}")

    @property
    def active(self) -> bool:
        return self.enabled and self.p > 0.0


@lru_cache(maxsize=1024)
def _qubit_pair_indices(n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices with qubit q = 0 and their bit-flipped partners."""
    bitpos = n - 1 - q
    basis = np.arange(1 << n)
    idx0 = basis[(basis >> bitpos) & 1 == 0]
    idx1 = idx0 | (1 << bitpos)
    idx0.setflags(write=False)
    idx1.setflags(write=False)
    return idx0, idx1


@lru_cache(maxsize=1024)
def _cnot_permutation(n: int, c: int, t: int) -> np.ndarray:
    cpos, tpos = n - 1 - c, n - 1 - t
    basis = np.arange(1 << n)
    perm = np.where((basis >> cpos) & 1 == 1, basis ^ (1 << tpos), basis)
    perm.setflags(write=False)
    return perm


def basis_state(n_qubits: int, index: int) -> np.ndarray:
    if not 0 <= index < (1 << n_qubits):
        raise ValueError(f"basis index {index} out of range for {n_qubits} qubits")
    state = np.zeros(1 << n_qubits, dtype=complex)
    state[index] = 1.0
    return state


def _apply_gate_vec(state: np.ndarray, n: int, gate: Gate, params: np.ndarray) -> np.ndarray:
    """Apply one gate along the last axis of a (..., 2^n) amplitude array."""
    if gate.kind == "CNOT":
        return state[..., _cnot_permutation(n, gate.c, gate.t)]
    idx0, idx1 = _qubit_pair_indices(n, gate.q)
    a0, a1 = state[..., idx0], state[..., idx1]
    out = state.copy()
    if gate.kind == "RY":
        half = params[gate.slot] / 2.0
        c, s = np.cos(half), np.sin(half)
        out[..., idx0] = c * a0 - s * a1
        out[..., idx1] = s * a0 + c * a1
    elif gate.kind == "H":
        inv = 1.0 / np.sqrt(2.0)
        out[..., idx0] = inv * (a0 + a1)
        out[..., idx1] = inv * (a0 - a1)
    elif gate.kind == "SDG":
        out[..., idx1] = -1j * a1
    return out


def run_statevector(circuit: Circuit, params: Sequence[float], basis_index: int = 0) -> np.ndarray:
    """Evolve a computational-basis state through the circuit."""
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"expected {circuit.n_params} parameters, got shape {params.shape}"
        )
    state = basis_state(circuit.n_qubits, basis_index)
    for gate in circuit.gates:
        state = _apply_gate_vec(state, circuit.n_qubits, gate, params)
    return state


def _apply_gate_density(rho: np.ndarray, n: int, gate: Gate, params: np.ndarray) -> np.ndarray:
    # rho -> G rho G^dagger via two one-sided applications.
    rho = _apply_gate_vec(rho.swapaxes(-1, -2), n, gate, params).swapaxes(-1, -2)
    rho = np.conj(_apply_gate_vec(np.conj(rho), n, gate, params))
    return rho


def _depolarize(rho: np.ndarray, n: int, qubits: tuple[int, ...], p: float) -> np.ndarray:
    """rho -> (1-p) rho + p (I/2^k (x) tr_k rho) on the given qubits.

    Works on arrays of shape (..., 2^n, 2^n).
    """
    if p == 0.0:
        return rho
    k = len(qubits)
    K = 1 << k
    dim = 1 << n
    lead = rho.shape[:-2]
    tensor = rho.reshape(lead + (2,) * (2 * n))
    nlead = len(lead)
    ket = [nlead + q for q in qubits]
    bra = [nlead + n + q for q in qubits]
    rest = [ax for ax in range(nlead, nlead + 2 * n) if ax not in ket and ax not in bra]
    # front layout: (lead..., ket_sel, bra_sel, rest...) -> (lead, K, K, D)
    moved = np.moveaxis(tensor, ket + bra + rest, list(range(nlead, nlead + 2 * n)))
    D = dim * dim // (K * K)
    block = moved.reshape(lead + (K, K, D))
    reduced = np.einsum("...aab->...b", block)
    mixed = np.zeros_like(block)
    eye = np.eye(K)
    mixed += eye[..., :, :, None] * (reduced[..., None, None, :] / K)
    out = (1.0 - p) * block + p * mixed
    out = out.reshape(lead + (2,) * (2 * n))
    out = np.moveaxis(out, list(range(nlead, nlead + 2 * n)), ket + bra + rest)
    return out.reshape(lead + (dim, dim))


def run_density(
    circuit: Circuit,
    params: Sequence[float],
    basis_index: int = 0,
    noise: NoiseSpec = NoiseSpec(),
) -> np.ndarray:
    """Evolve a basis state as a density matrix, applying the depolarizing
    channel after each gate on that gate's qubits when noise is active."""
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"expected {circuit.n_params} parameters, got shape {params.shape}"
        )
    n = circuit.n_qubits
    dim = 1 << n
    if not 0 <= basis_index < dim:
        raise ValueError(f"basis index {basis_index} out of range for {n} qubits")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[basis_index, basis_index] = 1.0
    for gate in circuit.gates:
        rho = _apply_gate_density(rho, n, gate, params)
        if noise.active:
            rho = _depolarize(rho, n, gate.qubits, noise.p)
    return rho


def _measurement_probabilities(state: np.ndarray, pauli: PauliString) -> np.ndarray:
    """Z-basis outcome distribution after the basis-change suffix for `pauli`."""
    n = pauli.n_qubits
    suffix: list[Gate] = []
    for q, letter in enumerate(pauli.letters):
        if letter == "X":
            suffix.append(Gate.h(q))
        elif letter == "Y":
            suffix.append(Gate.sdg(q))
            suffix.append(Gate.h(q))
    empty = np.empty(0)
    if state.ndim == 1:
        for gate in suffix:
            state = _apply_gate_vec(state, n, gate, empty)
        probs = np.abs(state) ** 2
    else:
        for gate in suffix:
            state = _apply_gate_density(state, n, gate, empty)
        probs = np.real(np.diag(state)).copy()
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


@lru_cache(maxsize=4096)
def _parities(n: int, support_mask: int) -> np.ndarray:
    basis = np.arange(1 << n)
    masked = basis & support_mask
    bits = np.zeros_like(basis)
    for shift in range(n):
        bits += (masked >> shift) & 1
    out = 1.0 - 2.0 * (bits % 2)
    out.setflags(write=False)
    return out


def sample_pauli(
    state: np.ndarray,
    pauli: PauliString,
    shots: int,
    rng: np.random.Generator,
) -> float:
    """Mean of +-1 outcomes from `shots` measurements of one Pauli string.

    Accepts a statevector or density matrix. Identity-only strings short-
    circuit to +1.0 without sampling.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    if pauli.is_identity:
        return 1.0
    probs = _measurement_probabilities(np.asarray(state), pauli)
    counts = rng.multinomial(shots, probs)
    parities = _parities(pauli.n_qubits, pauli.support_mask)
    return float(np.dot(counts, parities) / shots)
