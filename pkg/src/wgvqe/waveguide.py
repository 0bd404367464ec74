"""Finite-difference operators for square-waveguide TE/TM eigenmodes.

Each transverse axis of a square cross-section reduces to the same 1-D
second-difference operator on N = 2^n grid nodes; TM walls impose Dirichlet
conditions (corner diagonal 3/dl^2), TE walls Neumann (corner diagonal
1/dl^2). 2-D modal fields are rank-one products of two 1-D eigenvectors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .paulis import PauliSum, decompose_hermitian

FAMILIES = ("TM", "TE")

# Mode labels count from 1 for TM and from 0 for TE; the label picks the
# 1-D eigenpair fed to each axis (m -> x, n -> y).
_FIRST_MODE_INDEX = {"TM": 1, "TE": 0}


class ConvergenceError(RuntimeError):
    """Eigensolver failed to reach the target residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class WaveguideOperator:
    """Second-difference operator for one transverse axis.

    ``matrix`` is tridiagonal with off-diagonals -1/dl^2; the diagonal is
    [3, 2, ..., 2, 3]/dl^2 for TM and [1, 2, ..., 2, 1]/dl^2 for TE.
    ``pauli`` is its exact Pauli decomposition.
    """

    mode_family: str
    n_qubits: int
    dl: float
    matrix: np.ndarray
    pauli: PauliSum

    @property
    def N(self) -> int:
        return 1 << self.n_qubits


@dataclass(frozen=True)
class ModeField:
    """Rank-one 2-D field grid for one labeled mode.

    ``grid[i, j]`` samples the longitudinal field at x-node i, y-node j and
    is max-normalized to 1; ``kc2`` is the sum of the two 1-D eigenvalues.
    """

    family: str
    m: int
    n_idx: int
    kc2: float
    grid: np.ndarray


def build_operator(family: str, n_qubits: int, dl: float = 1.0) -> WaveguideOperator:
    """Assemble the 1-D operator for one axis of a square guide."""
    family = family.upper()
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    if not 1 <= n_qubits <= 12:
        raise ValueError(f"n_qubits must be in [1, 12], got {n_qubits}")
    if not dl > 0:
        raise ValueError(f"grid step dl must be positive, got {dl}")
    N = 1 << n_qubits
    corner = 3.0 if family == "TM" else 1.0
    diag = np.full(N, 2.0)
    diag[0] = diag[-1] = corner
    matrix = np.diag(diag)
    off = np.full(N - 1, -1.0)
    matrix += np.diag(off, 1) + np.diag(off, -1)
    matrix /= dl * dl
    return WaveguideOperator(
        mode_family=family,
        n_qubits=n_qubits,
        dl=float(dl),
        matrix=matrix,
        pauli=decompose_hermitian(matrix),
    )


def _jacobi_eigh(matrix: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a dense symmetric matrix.

    Returns eigenvalues (ascending) and eigenvectors as columns, each
    unit-norm with its first nonzero component positive.
    """
    A = np.array(matrix, dtype=float)
    N = A.shape[0]
    V = np.eye(N)
    scale = max(np.linalg.norm(A), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.square(A - np.diag(np.diag(A)))))
        if off <= 1e-13 * scale:
            break
        for p in range(N - 1):
            for q in range(p + 1, N):
                apq = A[p, q]
                if abs(apq) <= 1e-16 * scale:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    eigvals = np.diag(A).copy()
    order = np.argsort(eigvals)
    eigvals = eigvals[order]
    V = V[:, order]
    for k in range(N):
        vec = V[:, k]
        lead = np.flatnonzero(np.abs(vec) > 1e-8 * np.max(np.abs(vec)))
        if lead.size and vec[lead[0]] < 0:
            V[:, k] = -vec
    return eigvals, V


def reference_spectrum(op: WaveguideOperator, k: int) -> list[tuple[float, np.ndarray]]:
    """The k smallest eigenpairs of the operator matrix, ascending.

    Uses a dependency-free cyclic Jacobi iteration; every returned pair is
    checked against the residual bound ||A v - lam v|| < 1e-10.
    """
    N = op.N
    if not 1 <= k <= N:
        raise ValueError(f"k must be in [1, {N}], got {k}")
    eigvals, vecs = _jacobi_eigh(op.matrix)
    worst = 0.0
    for i in range(k):
        residual = np.linalg.norm(op.matrix @ vecs[:, i] - eigvals[i] * vecs[:, i])
        worst = max(worst, residual)
    if worst >= 1e-10:
        raise ConvergenceError(
            f"Jacobi iteration left residual {worst:.3e} >= 1e-10", residual=worst
        )
    return [(float(eigvals[i]), vecs[:, i].copy()) for i in range(k)]


def compose_mode(
    family: str,
    x_solution: tuple[float, np.ndarray],
    y_solution: tuple[float, np.ndarray],
    m: int,
    n_idx: int,
) -> ModeField:
    """Combine two 1-D eigenpairs into a rank-one 2-D mode grid."""
    family = family.upper()
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    lam_x, vec_x = x_solution
    lam_y, vec_y = y_solution
    vec_x = np.asarray(vec_x, dtype=float)
    vec_y = np.asarray(vec_y, dtype=float)
    if vec_x.shape != vec_y.shape:
        raise ValueError(f"axis solutions differ in size: {vec_x.shape} vs {vec_y.shape}")
    grid = np.outer(vec_x, vec_y)
    grid = grid / np.max(np.abs(grid))
    return ModeField(family=family, m=m, n_idx=n_idx, kc2=float(lam_x + lam_y), grid=grid)


def reconstruct_mode(family: str, m: int, n_idx: int, n_qubits: int, dl: float = 1.0) -> ModeField:
    """Build the labeled mode (e.g. TM11, TE10) from the 1-D spectra."""
    family = family.upper()
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    first = _FIRST_MODE_INDEX[family]
    if m < first or n_idx < first:
        raise ValueError(f"{family} mode indices start at {first}, got ({m}, {n_idx})")
    op = build_operator(family, n_qubits, dl)
    k = max(m, n_idx) - first + 1
    pairs = reference_spectrum(op, k)
    return compose_mode(family, pairs[m - first], pairs[n_idx - first], m, n_idx)


def parse_mode_label(label: str) -> tuple[str, int, int]:
    """Split a label like ``TM11`` or ``TE10`` into (family, m, n)."""
    label = label.strip().upper()
    if len(label) != 4 or label[:2] not in FAMILIES or not label[2:].isdigit():
        raise ValueError(f"mode label must look like TM11/TE01, got {label!r}")
    return label[:2], int(label[2]), int(label[3])


def write_field_csv(field: ModeField, path) -> None:
    """Grid as CSV: header x0..x{N-1}, one row per y index."""
    N = field.grid.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(N)])
        for j in range(N):
            writer.writerow([f"{field.grid[i, j]:.9g}" for i in range(N)])


def read_field_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    N = len(header)
    grid = np.empty((N, N))
    for j, row in enumerate(data):
        grid[:, j] = [float(v) for v in row]
    return grid


def write_field_meta(field: ModeField, path) -> None:
    kc2 = float(f"{field.kc2:.9g}")
    with open(path, "w") as fh:
        json.dump(
            {"family": field.family, "m": field.m, "n": field.n_idx, "kc2": kc2},
            fh,
            indent=1,
        )
        fh.write("\n")
