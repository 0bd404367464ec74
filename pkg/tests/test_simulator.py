import numpy as np
import pytest

from conftest import random_circuit, random_state
from wgvqe.paulis import PauliString, decompose_hermitian, exact_expectation
from wgvqe.simulator import (
    Circuit,
    Gate,
    NoiseSpec,
    basis_state,
    run_density,
    run_statevector,
    sample_pauli,
)


def kron_unitary(gate: Gate, n: int, params) -> np.ndarray:
    """Naive full-matrix construction, independent of the simulator."""
    eye = np.eye(2, dtype=complex)
    if gate.kind == "RY":
        half = params[gate.slot] / 2
        g = np.array([[np.cos(half), -np.sin(half)], [np.sin(half), np.cos(half)]],
                     dtype=complex)
        mats = [g if k == gate.q else eye for k in range(n)]
    elif gate.kind == "H":
        g = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        mats = [g if k == gate.q else eye for k in range(n)]
    elif gate.kind == "SDG":
        g = np.diag([1.0, -1.0j])
        mats = [g if k == gate.q else eye for k in range(n)]
    else:
        dim = 1 << n
        u = np.zeros((dim, dim), dtype=complex)
        for b in range(dim):
            if (b >> (n - 1 - gate.c)) & 1:
                u[b ^ (1 << (n - 1 - gate.t)), b] = 1.0
            else:
                u[b, b] = 1.0
        return u
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


class TestStatevector:
    def test_empty_circuit(self):
        out = run_statevector(Circuit(2), [], basis_index=0)
        assert out[0] == 1.0 and np.allclose(out[1:], 0.0)

    def test_ry_pi_flips(self):
        out = run_statevector(Circuit(1, (Gate.ry(0, 0),)), [np.pi])
        assert abs(out[1]) == pytest.approx(1.0, abs=1e-12)
        assert abs(out[0]) < 1e-12

    def test_cnot_flips_target(self):
        out = run_statevector(Circuit(2, (Gate.cnot(0, 1),)), [], basis_index=2)
        assert abs(out[3]) == pytest.approx(1.0)

    def test_param_count_mismatch(self):
        with pytest.raises(ValueError, match="parameters"):
            run_statevector(Circuit(1, (Gate.ry(0, 0),)), [0.1, 0.2])

    def test_matches_kronecker_oracle(self):
        rng = np.random.default_rng(21)
        for n in (2, 3):
            for _ in range(10):
                circ = random_circuit(rng, n, 8)
                params = rng.normal(size=circ.n_params)
                u = np.eye(1 << n, dtype=complex)
                for gate in circ.gates:
                    u = kron_unitary(gate, n, params) @ u
                for b in range(1 << n):
                    got = run_statevector(circ, params, b)
                    assert np.max(np.abs(got - u[:, b])) < 1e-12

    def test_norm_preserved(self):
        rng = np.random.default_rng(22)
        circ = random_circuit(rng, 3, 20)
        params = rng.normal(size=circ.n_params)
        out = run_statevector(circ, params, 5)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12

    def test_orthogonality_preserved(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            circ = random_circuit(rng, 3, 15)
            params = rng.normal(size=circ.n_params)
            out0 = run_statevector(circ, params, 0)
            out1 = run_statevector(circ, params, 1)
            assert abs(np.vdot(out0, out1)) < 1e-10


class TestDensity:
    def test_zero_noise_matches_projector(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            circ = random_circuit(rng, 2, 6)
            params = rng.normal(size=circ.n_params)
            b = int(rng.integers(4))
            rho = run_density(circ, params, b, NoiseSpec(0.0, True))
            psi = run_statevector(circ, params, b)
            assert np.max(np.abs(rho - np.outer(psi, psi.conj()))) < 1e-12

    def test_fully_depolarizing_single_qubit(self):
        rho = run_density(Circuit(1, (Gate.ry(0, 0),)), [0.7], 0, NoiseSpec(1.0, True))
        assert np.max(np.abs(rho - np.eye(2) / 2)) < 1e-12

    def test_trace_hermiticity_psd(self):
        rng = np.random.default_rng(32)
        for p in (0.01, 0.1, 0.5):
            circ = random_circuit(rng, 3, 12)
            params = rng.normal(size=circ.n_params)
            rho = run_density(circ, params, 2, NoiseSpec(p, True))
            assert abs(np.trace(rho) - 1.0) < 1e-10
            assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
            assert np.min(np.linalg.eigvalsh(rho)) > -1e-9

    def test_noise_disabled_flag(self):
        circ = Circuit(1, (Gate.ry(0, 0),))
        rho = run_density(circ, [0.3], 0, NoiseSpec(0.9, enabled=False))
        psi = run_statevector(circ, [0.3])
        assert np.max(np.abs(rho - np.outer(psi, psi.conj()))) < 1e-12

    def test_noise_strength_validated(self):
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            NoiseSpec(p=1.5)


class TestSamplePauli:
    def test_z_on_zero_state(self):
        rng = np.random.default_rng(0)
        assert sample_pauli(basis_state(1, 0), PauliString("Z"), 7, rng) == 1.0

    def test_x_on_plus_state(self):
        rng = np.random.default_rng(0)
        plus = run_statevector(Circuit(1, (Gate.ry(0, 0),)), [np.pi / 2])
        assert sample_pauli(plus, PauliString("X"), 13, rng) == 1.0

    def test_z_on_plus_state_statistics(self):
        rng = np.random.default_rng(1)
        plus = run_statevector(Circuit(1, (Gate.ry(0, 0),)), [np.pi / 2])
        mean = sample_pauli(plus, PauliString("Z"), 100_000, rng)
        assert abs(mean) < 0.02

    def test_identity_short_circuits(self):
        rng = np.random.default_rng(2)
        state = random_state(rng, 4)
        assert sample_pauli(state, PauliString("II"), 1, rng) == 1.0

    def test_zero_shots_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError, match="shots"):
            sample_pauli(basis_state(1, 0), PauliString("Z"), 0, rng)

    def test_unbiased_over_random_pairs(self):
        rng = np.random.default_rng(4)
        letters = "IXYZ"
        for _ in range(30):
            n = int(rng.integers(1, 3))
            state = random_state(rng, 1 << n)
            string = PauliString("".join(rng.choice(list(letters), size=n)))
            psum = decompose_hermitian(string.matrix())
            exact = exact_expectation(psum, state)
            estimates = [sample_pauli(state, string, 100, rng) for _ in range(200)]
            se = np.std(estimates, ddof=1) / np.sqrt(len(estimates))
            tol = max(5 * se, 1e-12)
            assert abs(np.mean(estimates) - exact) <= tol

    def test_density_input(self):
        rng = np.random.default_rng(5)
        plus = run_statevector(Circuit(1, (Gate.ry(0, 0),)), [np.pi / 2])
        rho = np.outer(plus, plus.conj())
        assert sample_pauli(rho, PauliString("X"), 9, rng) == 1.0


class TestCircuitType:
    def test_rejects_basis_change_gates(self):
        with pytest.raises(ValueError, match="measurement-basis"):
            Circuit(1, (Gate.h(0),))

    def test_rejects_cnot_same_qubits(self):
        with pytest.raises(ValueError, match="differ"):
            Gate.cnot(1, 1)

    def test_rejects_out_of_range_qubit(self):
        with pytest.raises(ValueError, match="addresses"):
            Circuit(2, (Gate.ry(2, 0),))

    def test_rejects_out_of_order_slots(self):
        with pytest.raises(ValueError, match="slots"):
            Circuit(2, (Gate.ry(0, 1), Gate.ry(1, 0)))

    def test_counts_and_depth(self):
        circ = Circuit(3, (Gate.ry(0, 0), Gate.ry(1, 1), Gate.cnot(0, 1), Gate.cnot(1, 2)))
        assert circ.n_gates == 4
        assert circ.n_ry == 2 and circ.n_params == 2
        assert circ.n_cnot == 2
        assert circ.depth == 3  # RYs in parallel, then the CNOT chain

    def test_json_round_trip(self, tmp_path):
        circ = Circuit(
            3,
            (Gate.ry(0, 0), Gate.cnot(0, 1), Gate.ry(2, 1)),
            history=(0, 3, 2),
        )
        path = tmp_path / "circuit.json"
        circ.to_json(path)
        loaded = Circuit.from_json(path)
        assert loaded == circ

    def test_json_without_history(self, tmp_path):
        circ = Circuit(2, (Gate.ry(1, 0),))
        path = tmp_path / "c.json"
        circ.to_json(path)
        assert Circuit.from_json(path).history is None
