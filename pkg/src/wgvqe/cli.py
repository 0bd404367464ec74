"""Command-line experiment driver.

Subcommands build waveguide Hamiltonians, run single SSVQE optimizations,
drive the RL architecture search, reconstruct 2-D mode fields, sweep
depolarizing-noise levels, and regenerate the resource/accuracy tables.
All stochastic commands require an explicit --seed and produce byte-identical
delimited outputs on reruns; figures are rendered alongside unless
--no-figures is given. Options may also come from a TOML file (--config);
explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import ansatz as ansatz_mod
from . import plotting, rl, ssvqe, waveguide
from .simulator import Circuit, NoiseSpec

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4

DEFAULT_NOISE_LEVELS = (0.001, 0.005, 0.01, 0.02)


def fmt(value: float) -> str:
    return f"{float(value):.9g}"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc


class ConfigError(ValueError):
    pass


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None, required=False):
    """Flag value if given, else TOML value, else default."""
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    if value is None and required:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return value


def _parse_floats(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(",") if v != ""]


def _parse_ints(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if v != ""]


def _out_dir(args: argparse.Namespace, config: dict) -> Path:
    out = _resolve(args, config, "out", required=True)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_ansatz(kind: str, n_qubits: int, layers, path) -> Circuit:
    if kind == "hea":
        if layers is None:
            raise ConfigError("--layers is required for the hea ansatz")
        return ansatz_mod.build_hea(n_qubits, int(layers))
    if kind == "file":
        if path is None:
            raise ConfigError("--ansatz-file is required for the file ansatz")
        circuit = Circuit.from_json(path)
        if circuit.n_qubits != n_qubits:
            raise ConfigError(
                f"ansatz file targets {circuit.n_qubits} qubits, expected {n_qubits}"
            )
        return circuit
    raise ConfigError(f"unknown ansatz kind {kind!r} (expected hea or file)")


def _ssvqe_config(args: argparse.Namespace, config: dict, noise_p: float = 0.0) -> ssvqe.SsvqeConfig:
    weights = tuple(_parse_floats(_resolve(args, config, "weights", default=[2.0, 1.0])))
    basis = tuple(_parse_ints(_resolve(args, config, "basis", default=[0, 1])))
    return ssvqe.SsvqeConfig(
        weights=weights,
        input_basis=basis,
        learning_rate=float(_resolve(args, config, "lr", default=0.1)),
        max_iterations=int(_resolve(args, config, "max_iter", default=1000)),
        convergence_tol=float(_resolve(args, config, "tol", default=1e-9)),
        evaluator=str(_resolve(args, config, "evaluator", default="exact")),
        shots=int(_resolve(args, config, "shots", default=1024)),
        noise=NoiseSpec(p=noise_p, enabled=noise_p > 0),
    )


def _analytic_pair(family: str, n_qubits: int, dl: float) -> list[float]:
    """Reference E0/E1 for figure annotations: (2 - 2 cos(k pi / N)) / dl^2."""
    N = 1 << n_qubits
    first = 1 if family == "TM" else 0
    return [(2.0 - 2.0 * np.cos((first + k) * np.pi / N)) / (dl * dl) for k in range(2)]


def cmd_hamiltonian(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    family = str(_resolve(args, config, "family", required=True)).upper()
    n_qubits = int(_resolve(args, config, "qubits", required=True))
    dl = float(_resolve(args, config, "dl", default=1.0))
    out = _out_dir(args, config)
    op = waveguide.build_operator(family, n_qubits, dl)
    if args.action == "build":
        with open(out / "hamiltonian.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in op.matrix:
                writer.writerow([fmt(v) for v in row])
        with open(out / "operator.json", "w") as fh:
            json.dump(
                {"family": op.mode_family, "n_qubits": op.n_qubits, "dl": op.dl, "N": op.N},
                fh,
                indent=1,
            )
            fh.write("\n")
        print(f"wrote {out / 'hamiltonian.csv'} and {out / 'operator.json'}")
    else:
        op.pauli.to_json(out / "pauli.json")
        print(f"wrote {out / 'pauli.json'} ({len(op.pauli)} terms)")
    return EXIT_OK


def cmd_ssvqe_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    family = str(_resolve(args, config, "family", required=True)).upper()
    n_qubits = int(_resolve(args, config, "qubits", required=True))
    dl = float(_resolve(args, config, "dl", default=1.0))
    seed = _resolve(args, config, "seed", required=True)
    noise_p = float(_resolve(args, config, "noise_p", default=0.0))
    cfg = _ssvqe_config(args, config, noise_p)
    circuit = _load_ansatz(
        str(_resolve(args, config, "ansatz", default="hea")),
        n_qubits,
        _resolve(args, config, "layers"),
        _resolve(args, config, "ansatz_file"),
    )
    out = _out_dir(args, config)
    op = waveguide.build_operator(family, n_qubits, dl)
    outcome = ssvqe.optimize(circuit, op, cfg, np.random.default_rng(int(seed)))
    outcome.write_trace_csv(out / "trace.csv")
    outcome.to_json(out / "outcome.json", "trace.csv")
    if _resolve(args, config, "figures", default=True):
        plotting.save_trace(
            ssvqe.read_trace_csv(out / "trace.csv"),
            _analytic_pair(family, n_qubits, dl),
            f"{family} {n_qubits}q SSVQE",
            out / "trace.png",
        )
    print(
        f"energies: {', '.join(fmt(e) for e in outcome.energies)} "
        f"({outcome.iterations} iterations)"
    )
    return EXIT_OK


def cmd_search_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    family = str(_resolve(args, config, "family", required=True)).upper()
    n_qubits = int(_resolve(args, config, "qubits", required=True))
    dl = float(_resolve(args, config, "dl", default=1.0))
    seed = int(_resolve(args, config, "seed", required=True))
    cfg = _ssvqe_config(args, config)
    rl_cfg = rl.RlConfig(
        episodes=int(_resolve(args, config, "episodes", default=500)),
        d_max=(lambda v: int(v) if v is not None else None)(_resolve(args, config, "d_max")),
        gamma=float(_resolve(args, config, "gamma", default=0.99)),
        tau=float(_resolve(args, config, "tau", default=0.005)),
        epsilon_decay=float(_resolve(args, config, "epsilon_decay", default=0.995)),
        depth_penalty=float(_resolve(args, config, "depth_penalty", default=0.01)),
        bonus=float(_resolve(args, config, "bonus", default=5.0)),
        threshold_margin=float(_resolve(args, config, "threshold_margin", default=1e-3)),
        inner_opt_steps=int(_resolve(args, config, "inner_steps", default=50)),
        replay_capacity=int(_resolve(args, config, "replay", default=5000)),
        batch_size=int(_resolve(args, config, "batch_size", default=64)),
        net_learning_rate=float(_resolve(args, config, "net_lr", default=1e-3)),
        seed=seed,
        target_mode=str(_resolve(args, config, "target_mode", default="double")),
        reward_evaluator=str(_resolve(args, config, "reward_evaluator", default="exact")),
        reward_shots=int(_resolve(args, config, "reward_shots", default=1024)),
    )
    out = _out_dir(args, config)
    op = waveguide.build_operator(family, n_qubits, dl)
    report = rl.run_search(op, rl_cfg, cfg)
    report.write_episode_csv(out / "episodes.csv")
    report.best_circuit.to_json(out / "best_circuit.json")
    report.best_outcome.write_trace_csv(out / "best_trace.csv")
    report.best_outcome.to_json(out / "best_outcome.json", "best_trace.csv")
    report.to_json(out / "report.json", "episodes.csv", "best_circuit.json", "best_outcome.json")
    if _resolve(args, config, "figures", default=True):
        plotting.save_search(
            rl.read_episode_csv(out / "episodes.csv"),
            f"{family} {n_qubits}q search (seed {seed})",
            out / "search.png",
        )
    summary = report.gate_summary
    print(
        f"best circuit: {summary['total_gates']} gates "
        f"({summary['ry_gates']} RY, {summary['cnot_gates']} CNOT); "
        f"energies: {', '.join(fmt(e) for e in report.best_outcome.energies)}"
    )
    return EXIT_OK


def cmd_field_reconstruct(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    mode = str(_resolve(args, config, "mode", required=True))
    n_qubits = int(_resolve(args, config, "qubits", required=True))
    dl = float(_resolve(args, config, "dl", default=1.0))
    out = _out_dir(args, config)
    family, m, n_idx = waveguide.parse_mode_label(mode)
    field = waveguide.reconstruct_mode(family, m, n_idx, n_qubits, dl)
    waveguide.write_field_csv(field, out / "field.csv")
    waveguide.write_field_meta(field, out / "field.json")
    if _resolve(args, config, "figures", default=True):
        plotting.save_field(
            field.grid, f"{family}{m}{n_idx} (kc2={fmt(field.kc2)})", out / "field.png"
        )
    print(f"{family}{m}{n_idx}: kc2 = {fmt(field.kc2)}")
    return EXIT_OK


def _sweep_cell(op, circuit, cfg, level: float, seed: int):
    noisy = ssvqe.SsvqeConfig(
        weights=cfg.weights,
        input_basis=cfg.input_basis,
        learning_rate=cfg.learning_rate,
        max_iterations=cfg.max_iterations,
        convergence_tol=cfg.convergence_tol,
        evaluator=cfg.evaluator,
        shots=cfg.shots,
        noise=NoiseSpec(p=level, enabled=level > 0),
    )
    outcome = ssvqe.optimize(circuit, op, noisy, np.random.default_rng(seed))
    rows = []
    for it, (cost, energies) in enumerate(zip(outcome.cost_trace, outcome.energy_trace)):
        rows.append((level, seed, it, cost, energies[0], energies[1]))
    return rows


def cmd_noise_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    family = str(_resolve(args, config, "family", required=True)).upper()
    n_qubits = int(_resolve(args, config, "qubits", required=True))
    dl = float(_resolve(args, config, "dl", default=1.0))
    seeds = _parse_ints(_resolve(args, config, "seeds", required=True))
    levels = _parse_floats(_resolve(args, config, "levels", default=list(DEFAULT_NOISE_LEVELS)))
    if not seeds:
        raise ConfigError("at least one seed is required")
    if any(not 0 <= lv <= 1 for lv in levels):
        raise ConfigError(f"noise levels must lie in [0, 1], got {levels}")
    cfg = _ssvqe_config(args, config)
    circuit = _load_ansatz(
        str(_resolve(args, config, "ansatz", default="hea")),
        n_qubits,
        _resolve(args, config, "layers"),
        _resolve(args, config, "ansatz_file"),
    )
    out = _out_dir(args, config)
    op = waveguide.build_operator(family, n_qubits, dl)
    threads = int(os.environ.get("WGVQE_THREADS", "4"))
    cells = [(level, seed) for level in levels for seed in seeds]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {
            (level, seed): pool.submit(_sweep_cell, op, circuit, cfg, level, seed)
            for level, seed in cells
        }
        results = {key: fut.result() for key, fut in futures.items()}
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "seed", "iter", "cost", "E0", "E1"])
        for key in sorted(results):
            for level, seed, it, cost, e0, e1 in results[key]:
                writer.writerow([fmt(level), seed, it, fmt(cost), fmt(e0), fmt(e1)])
    if _resolve(args, config, "figures", default=True):
        with open(out / "sweep.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        last_rows = {}
        for r in rows:
            last_rows[(r["level"], r["seed"])] = r
        plotting.save_noise_sweep(
            list(last_rows.values()),
            _analytic_pair(family, n_qubits, dl),
            f"{family} {n_qubits}q noise sweep",
            out / "sweep.png",
        )
    print(f"wrote {out / 'sweep.csv'} ({len(cells)} cells)")
    return EXIT_OK


_RESOURCE_ROWS = (
    "cnot_gates",
    "ry_gates",
    "total_gates",
    "single_qubit_gates",
    "two_qubit_gates",
    "single_qubit_ratio_pct",
    "two_qubit_ratio_pct",
    "parameters",
    "qubits",
)


def _resource_metrics(circuit: Circuit) -> dict:
    summary = rl.gate_summary(circuit)
    return {
        "cnot_gates": summary["cnot_gates"],
        "ry_gates": summary["ry_gates"],
        "total_gates": summary["total_gates"],
        "single_qubit_gates": summary["single_qubit_gates"],
        "two_qubit_gates": summary["two_qubit_gates"],
        "single_qubit_ratio_pct": 100.0 * summary["single_qubit_ratio"],
        "two_qubit_ratio_pct": 100.0 * summary["two_qubit_ratio"],
        "parameters": summary["parameters"],
        "qubits": summary["qubits"],
    }


def _error_entry(value: float, analytic: float) -> float:
    # Percent error, except absolute deviation when the reference is zero
    # (references below 1e-12 count as zero: the solver returns ~1e-17 for
    # the exact zero eigenvalue).
    if abs(analytic) < 1e-12:
        return abs(value)
    return abs(value - analytic) / abs(analytic) * 100.0


def cmd_report_tables(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    system = str(_resolve(args, config, "system", default="3q"))
    if system not in ("3q", "5q"):
        raise ConfigError(f"--system must be 3q or 5q, got {system!r}")
    n_qubits = 3 if system == "3q" else 5
    layers = 6 if system == "3q" else 15
    seed = int(_resolve(args, config, "seed", required=True))
    dl = float(_resolve(args, config, "dl", default=1.0))
    cfg = _ssvqe_config(args, config)
    out = _out_dir(args, config)

    hea = ansatz_mod.build_hea(n_qubits, layers)
    columns: dict[str, Circuit] = {"hea": hea}
    for family_key in ("tm", "te"):
        path = _resolve(args, config, f"rl_circuit_{family_key}")
        if path is not None:
            columns[f"rl_{family_key}"] = Circuit.from_json(path)

    with open(out / "resources.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + list(columns))
        metrics = {name: _resource_metrics(circ) for name, circ in columns.items()}
        for row in _RESOURCE_ROWS:
            writer.writerow([row] + [fmt(metrics[name][row]) for name in columns])

    energy_rows = []
    for family in ("TM", "TE"):
        op = waveguide.build_operator(family, n_qubits, dl)
        analytic = [
            lam if abs(lam) >= 1e-12 else 0.0
            for lam, _ in waveguide.reference_spectrum(op, 2)
        ]
        per_column = {}
        for name, circ in columns.items():
            if name.startswith("rl_") and name != f"rl_{family.lower()}":
                continue
            outcome = ssvqe.optimize(circ, op, cfg, np.random.default_rng(seed))
            per_column[name] = outcome.energies
        for j in range(2):
            row = {"family": family, "metric": f"E{j}", "analytic": fmt(analytic[j])}
            for name, energies in per_column.items():
                row[name] = fmt(energies[j])
            energy_rows.append(row)
        for j in range(2):
            row = {"family": family, "metric": f"E{j}_err", "analytic": ""}
            for name, energies in per_column.items():
                row[name] = fmt(_error_entry(energies[j], analytic[j]))
            energy_rows.append(row)

    all_columns = ["family", "metric", "hea"] + [c for c in columns if c != "hea"] + ["analytic"]
    with open(out / "energies.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=all_columns, restval="")
        writer.writeheader()
        for row in energy_rows:
            writer.writerow(row)

    if _resolve(args, config, "figures", default=True):
        plotting.save_resources(
            {name: _resource_metrics(circ) for name, circ in columns.items()},
            f"{system} circuit resources",
            out / "resources.png",
        )
    print(f"wrote {out / 'resources.csv'} and {out / 'energies.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgvqe",
        description="Waveguide eigenmode SSVQE toolkit (simulation only)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, seed: bool = True):
        p.add_argument("--config", help="TOML config file; flags override it")
        p.add_argument("--out", help="output directory (all paths relative to it)")
        p.add_argument(
            "--figures",
            action=argparse.BooleanOptionalAction,
            default=None,
            help="render PNG figures next to the delimited outputs (default on)",
        )
        if seed:
            p.add_argument("--seed", type=int, help="random seed (required)")

    def ssvqe_opts(p: argparse.ArgumentParser):
        p.add_argument("--weights", help="comma-separated weights, default 2,1")
        p.add_argument("--basis", help="comma-separated input basis indices, default 0,1")
        p.add_argument("--lr", type=float, help="Adam learning rate, default 0.1")
        p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap, default 1000")
        p.add_argument("--tol", type=float, help="plateau tolerance, default 1e-9")
        p.add_argument("--evaluator", choices=("exact", "fixed", "adaptive"))
        p.add_argument("--shots", type=int, help="shot budget for shot evaluators")

    def ansatz_opts(p: argparse.ArgumentParser):
        p.add_argument("--ansatz", choices=("hea", "file"), help="ansatz kind, default hea")
        p.add_argument("--layers", type=int, help="HEA layer count")
        p.add_argument("--ansatz-file", dest="ansatz_file", help="circuit JSON path")

    ham = sub.add_parser("hamiltonian", help="build or decompose waveguide operators")
    ham.add_argument("action", choices=("build", "decompose"))
    ham.add_argument("--family", help="tm or te")
    ham.add_argument("--qubits", type=int)
    ham.add_argument("--dl", type=float)
    common(ham, seed=False)
    ham.set_defaults(func=cmd_hamiltonian)

    run = sub.add_parser("ssvqe", help="single SSVQE optimization")
    run_sub = run.add_subparsers(dest="action", required=True)
    run_run = run_sub.add_parser("run")
    run_run.add_argument("--family")
    run_run.add_argument("--qubits", type=int)
    run_run.add_argument("--dl", type=float)
    run_run.add_argument("--noise-p", dest="noise_p", type=float, help="depolarizing strength")
    ansatz_opts(run_run)
    ssvqe_opts(run_run)
    common(run_run)
    run_run.set_defaults(func=cmd_ssvqe_run)

    search = sub.add_parser("search", help="RL circuit search")
    search_sub = search.add_subparsers(dest="action", required=True)
    search_run = search_sub.add_parser("run")
    search_run.add_argument("--family")
    search_run.add_argument("--qubits", type=int)
    search_run.add_argument("--dl", type=float)
    search_run.add_argument("--episodes", type=int)
    search_run.add_argument("--d-max", dest="d_max", type=int)
    search_run.add_argument("--gamma", type=float)
    search_run.add_argument("--tau", type=float)
    search_run.add_argument("--epsilon-decay", dest="epsilon_decay", type=float)
    search_run.add_argument("--depth-penalty", dest="depth_penalty", type=float)
    search_run.add_argument("--bonus", type=float)
    search_run.add_argument("--threshold-margin", dest="threshold_margin", type=float)
    search_run.add_argument("--inner-steps", dest="inner_steps", type=int)
    search_run.add_argument("--replay", type=int)
    search_run.add_argument("--batch-size", dest="batch_size", type=int)
    search_run.add_argument("--net-lr", dest="net_lr", type=float)
    search_run.add_argument("--target-mode", dest="target_mode", choices=("double", "vanilla"))
    search_run.add_argument("--reward-evaluator", dest="reward_evaluator",
                            choices=("exact", "adaptive"))
    search_run.add_argument("--reward-shots", dest="reward_shots", type=int)
    ssvqe_opts(search_run)
    common(search_run)
    search_run.set_defaults(func=cmd_search_run)

    fieldp = sub.add_parser("field", help="reconstruct 2-D mode fields")
    field_sub = fieldp.add_subparsers(dest="action", required=True)
    field_run = field_sub.add_parser("reconstruct")
    field_run.add_argument("--mode", help="mode label: TM11, TM21, TE01 or TE10")
    field_run.add_argument("--qubits", type=int)
    field_run.add_argument("--dl", type=float)
    common(field_run, seed=False)
    field_run.set_defaults(func=cmd_field_reconstruct)

    noise = sub.add_parser("noise", help="noise robustness sweeps")
    noise_sub = noise.add_subparsers(dest="action", required=True)
    noise_run = noise_sub.add_parser("sweep")
    noise_run.add_argument("--family")
    noise_run.add_argument("--qubits", type=int)
    noise_run.add_argument("--dl", type=float)
    noise_run.add_argument("--levels", help="comma-separated depolarizing strengths")
    noise_run.add_argument("--seeds", help="comma-separated seeds")
    ansatz_opts(noise_run)
    ssvqe_opts(noise_run)
    common(noise_run, seed=False)
    noise_run.set_defaults(func=cmd_noise_sweep)

    report = sub.add_parser("report", help="regenerate resource/accuracy tables")
    report_sub = report.add_subparsers(dest="action", required=True)
    report_tables = report_sub.add_parser("tables")
    report_tables.add_argument("--system", choices=("3q", "5q"))
    report_tables.add_argument("--dl", type=float)
    report_tables.add_argument("--rl-circuit-tm", dest="rl_circuit_tm")
    report_tables.add_argument("--rl-circuit-te", dest="rl_circuit_te")
    ssvqe_opts(report_tables)
    common(report_tables)
    report_tables.set_defaults(func=cmd_report_tables)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
