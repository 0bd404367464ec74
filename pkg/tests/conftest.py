import numpy as np
import pytest

from wgvqe.waveguide import build_operator

# Analytic 1-D eigenvalues: 2 - 2 cos(k pi / N), k from 1 (TM) or 0 (TE).
TM3_E = [2 - 2 * np.cos(np.pi / 8), 2 - 2 * np.cos(2 * np.pi / 8)]
TM5_E = [2 - 2 * np.cos(np.pi / 32), 2 - 2 * np.cos(2 * np.pi / 32)]

TM3_COEFFS = {
    "III": 2.25, "IIX": -1.0, "IXX": -0.5, "IYY": -0.5, "IZZ": 0.25,
    "XXX": -0.25, "XYY": 0.25, "YXY": -0.25, "YYX": -0.25, "ZIZ": 0.25,
    "ZZI": 0.25,
}
TE3_COEFFS = {
    "III": 1.75, "IIX": -1.0, "IXX": -0.5, "IYY": -0.5, "IZZ": -0.25,
    "XXX": -0.25, "XYY": 0.25, "YXY": -0.25, "YYX": -0.25, "ZIZ": -0.25,
    "ZZI": -0.25,
}


@pytest.fixture(scope="session")
def tm3():
    return build_operator("TM", 3, 1.0)


@pytest.fixture(scope="session")
def te3():
    return build_operator("TE", 3, 1.0)


@pytest.fixture(scope="session")
def tm5():
    return build_operator("TM", 5, 1.0)


@pytest.fixture(scope="session")
def te5():
    return build_operator("TE", 5, 1.0)


def random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_circuit(rng, n_qubits, n_gates):
    from wgvqe.simulator import Circuit, Gate

    gates, slot = [], 0
    for _ in range(n_gates):
        if n_qubits == 1 or rng.random() < 0.6:
            gates.append(Gate.ry(int(rng.integers(n_qubits)), slot))
            slot += 1
        else:
            q = int(rng.integers(n_qubits - 1))
            gates.append(Gate.cnot(q, q + 1))
    return Circuit(n_qubits, tuple(gates))
