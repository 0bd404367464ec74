"""Pauli-string algebra: decomposition of Hermitian matrices into weighted
Pauli sums, reconstruction, and exact expectation values.

Convention is big-endian throughout: letter k of a string acts on qubit k,
and qubit 0 is the most significant bit of the computational-basis index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Union

import numpy as np

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_QUBITS = 12
COEFF_PRUNE_TOL = 1e-12
HERMITICITY_TOL = 1e-10


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("IXZ")``."""

    letters: str

    def __post_init__(self):
        n = len(self.letters)
        if not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"Pauli string length must be in [1, {MAX_QUBITS}], got {n}")
        bad = set(self.letters) - set("IXYZ")
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @property
    def support_mask(self) -> int:
        """Bit mask of non-identity positions (qubit 0 is the MSB)."""
        n = len(self.letters)
        mask = 0
        for k, letter in enumerate(self.letters):
            if letter != "I":
                mask |= 1 << (n - 1 - k)
        return mask

    def action(self) -> tuple[np.ndarray, np.ndarray]:
        """Signed-permutation form: P|b> = phase[b] |perm[b]>."""
        return _pauli_action(self.letters)

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix of the tensor product."""
        perm, phase = self.action()
        dim = 1 << self.n_qubits
        mat = np.zeros((dim, dim), dtype=complex)
        mat[perm, np.arange(dim)] = phase
        return mat

    def __str__(self) -> str:
        return self.letters


@lru_cache(maxsize=4096)
def _pauli_action(letters: str) -> tuple[np.ndarray, np.ndarray]:
    n = len(letters)
    dim = 1 << n
    basis = np.arange(dim)
    flip = 0
    phase = np.ones(dim, dtype=complex)
    for k, letter in enumerate(letters):
        bitpos = n - 1 - k
        bits = (basis >> bitpos) & 1
        if letter == "X":
            flip |= 1 << bitpos
        elif letter == "Y":
            flip |= 1 << bitpos
            phase = phase * (1j * (1 - 2 * bits))
        elif letter == "Z":
            phase = phase * (1 - 2 * bits)
    perm = basis ^ flip
    perm.setflags(write=False)
    phase.setflags(write=False)
    return perm, phase


@dataclass(frozen=True)
class PauliSum:
    """Weighted sum of Pauli strings with real coefficients.

    Terms with |coefficient| < 1e-12 are dropped at construction; duplicate
    strings are merged. Build via :meth:`from_terms` or
    :func:`decompose_hermitian`.
    """

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        seen = set()
        for coeff, string in self.terms:
            if not np.isfinite(coeff):
                raise ValueError(f"non-finite coefficient {coeff} for {string}")
            if string.n_qubits != self.n_qubits:
                raise ValueError(
                    f"string {string} has {string.n_qubits} qubits, expected {self.n_qubits}"
                )
            if string.letters in seen:
                raise ValueError(f"duplicate Pauli string {string}")
            seen.add(string.letters)

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[float, Union[str, PauliString]]]) -> "PauliSum":
        merged: dict[str, float] = {}
        for coeff, string in terms:
            letters = string.letters if isinstance(string, PauliString) else str(string)
            merged[letters] = merged.get(letters, 0.0) + float(coeff)
        kept = tuple(
            (c, PauliString(s)) for s, c in merged.items() if abs(c) >= COEFF_PRUNE_TOL
        )
        return cls(n_qubits=n_qubits, terms=kept)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def identity_coefficient(self) -> float:
        for coeff, string in self.terms:
            if string.is_identity:
                return coeff
        return 0.0

    def coefficient(self, letters: str) -> float:
        for coeff, string in self.terms:
            if string.letters == letters:
                return coeff
        return 0.0

    def to_matrix(self) -> np.ndarray:
        """Reconstruct the dense matrix sum(coeff * string)."""
        dim = self.dim
        mat = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for coeff, string in self.terms:
            perm, phase = string.action()
            mat[perm, cols] += coeff * phase
        return mat

    def expectation(self, state: np.ndarray) -> float:
        """<state|H|state> for a statevector, or tr(rho H) for a density matrix."""
        return exact_expectation(self, state)

    def to_json_dict(self) -> dict:
        ordered = sorted(self.terms, key=lambda t: t[1].letters)
        return {
            "n_qubits": self.n_qubits,
            "terms": [{"coeff": float(c), "pauli": s.letters} for c, s in ordered],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, data: dict) -> "PauliSum":
        return cls.from_terms(
            int(data["n_qubits"]),
            [(t["coeff"], t["pauli"]) for t in data["terms"]],
        )

    @classmethod
    def from_json(cls, path) -> "PauliSum":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def decompose_hermitian(matrix: np.ndarray) -> PauliSum:
    """Decompose a Hermitian 2^n x 2^n matrix into a weighted Pauli sum.

    The coefficient of string P is tr(P @ matrix) / 2^n; reconstruction via
    :meth:`PauliSum.to_matrix` reproduces the input to 1e-12 entrywise.

    Raises ValueError for non-square, non-power-of-two or non-Hermitian input
    (reporting the largest asymmetry magnitude).
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    dim = matrix.shape[0]
    n = dim.bit_length() - 1
    if dim != 1 << n or dim < 2:
        raise ValueError(f"matrix dimension {dim} is not a power of two >= 2")
    if n > MAX_QUBITS:
        raise ValueError(f"matrix dimension {dim} exceeds the {MAX_QUBITS}-qubit cap")
    asym = np.max(np.abs(matrix - matrix.conj().T))
    if asym > HERMITICITY_TOL:
        raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")

    cols = np.arange(dim)
    terms = []
    for letters in product("IXYZ", repeat=n):
        string = PauliString("".join(letters))
        perm, phase = string.action()
        # tr(P M) = sum_c phase[c] * M[c, perm[c]]
        coeff = np.sum(phase * matrix[cols, perm]) / dim
        if abs(coeff.imag) > COEFF_PRUNE_TOL:
            raise ValueError(
                f"coefficient of {string} has imaginary part {coeff.imag:.3e}"
            )
        if abs(coeff.real) >= COEFF_PRUNE_TOL:
            terms.append((float(coeff.real), string))
    return PauliSum(n_qubits=n, terms=tuple(terms))


def to_matrix(psum: PauliSum) -> np.ndarray:
    """Dense matrix of a Pauli sum (inverse of :func:`decompose_hermitian`)."""
    return psum.to_matrix()


def exact_expectation(psum: PauliSum, state: np.ndarray) -> float:
    """Expectation of a Pauli sum on a statevector or density matrix.

    Statevectors must be normalized within 1e-9, density matrices must have
    unit trace within 1e-9. Any imaginary residue must stay below 1e-10 and
    is discarded.
    """
    state = np.asarray(state)
    dim = psum.dim
    if state.ndim == 1:
        if state.shape[0] != dim:
            raise ValueError(f"state dimension {state.shape[0]} != 2^{psum.n_qubits}")
        norm = np.linalg.norm(state)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"statevector norm {norm} deviates from 1 by more than 1e-9")
        total = 0.0 + 0.0j
        for coeff, string in psum.terms:
            if string.is_identity:
                total += coeff
                continue
            perm, phase = string.action()
            total += coeff * np.sum(np.conj(state[perm]) * phase * state)
    elif state.ndim == 2:
        if state.shape != (dim, dim):
            raise ValueError(f"density shape {state.shape} != ({dim}, {dim})")
        trace = np.trace(state)
        if abs(trace - 1.0) > 1e-9:
            raise ValueError(f"density trace {trace} deviates from 1 by more than 1e-9")
        cols = np.arange(dim)
        total = 0.0 + 0.0j
        for coeff, string in psum.terms:
            if string.is_identity:
                total += coeff * trace
                continue
            perm, phase = string.action()
            # tr(P rho) = sum_c phase[c] * rho[c, perm[c]]
            total += coeff * np.sum(phase * state[cols, perm])
    else:
        raise ValueError(f"state must be a vector or matrix, got ndim={state.ndim}")
    if abs(total.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {total.imag:.3e}")
    return float(total.real)
