"""``consensus-nids`` command line: simulate, study, validate.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .consensus import FREEZE, GLOBAL
from .dataset import ConfigError, SyntheticSpec
from .simulator import (
    DataSpec,
    SimulationConfig,
    TopologySpec,
    compare_consensus_vs_hierarchical,
    load_corpora,
    run_grid,
    run_simulation,
)
from .spectral import read_weights_csv, verify_convergence_conditions, weights_for, write_weights_csv

log = logging.getLogger("consensus_nids")

DEFAULT_SIZES = (9, 25, 49, 81, 121)
SCHEME_CHOICES = ("metropolis", "best-constant", "local-degree", "max-degree")
FIG_SCHEMES = ("best-constant", "local-degree", "max-degree")

STUDY_COLUMNS = [
    "figure", "topology", "kind", "n", "edges", "scheme", "mean_rounds", "min_rounds",
    "max_rounds", "mean_consensus_hops", "h_ce", "h_co", "accuracy_consensus",
    "accuracy_hierarchical", "accuracy_distributed", "disagreement_iterations",
]


class UsageError(Exception):
    pass


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _add_topology_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("topology")
    g.add_argument("--topology", choices=("ring", "torus", "petersen", "random", "file"),
                   default="torus")
    g.add_argument("--n", type=int, help="node count (ring, random, file)")
    g.add_argument("--side", type=int, help="torus side length")
    g.add_argument("--edges", type=int, help="edge count (random)")
    g.add_argument("--topology-file", help="edge-list file for --topology file")
    g.add_argument("--topology-seed", type=int, help="random graph seed (defaults to --seed)")


def _add_sim_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--epsilon", type=_positive_float, default=1e-3)
    g.add_argument("--tau", type=_positive_float, default=1.0)
    g.add_argument("--ratio", type=_fraction, default=0.6,
                   help="fraction of modules receiving an anomalous connection per iteration")
    g.add_argument("--rounds", type=_positive_int, default=1000)
    g.add_argument("--mode", choices=(GLOBAL, FREEZE), default=GLOBAL)
    g.add_argument("--max-consensus-rounds", type=_positive_int, default=100_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="out", help="output directory")

    d = p.add_argument_group("data")
    d.add_argument("--synthetic", action="store_true", help="generate a synthetic corpus")
    d.add_argument("--n-records", type=int, default=2000)
    d.add_argument("--anomalous-fraction", type=_fraction, default=0.5)
    d.add_argument("--train-fraction", type=float, default=0.7)
    d.add_argument("--n-categorical", type=int, default=SyntheticSpec.n_categorical)
    d.add_argument("--n-numeric", type=int, default=SyntheticSpec.n_numeric)
    d.add_argument("--n-categories", type=int, default=SyntheticSpec.n_categories)
    d.add_argument("--separation", type=float, default=SyntheticSpec.separation)
    d.add_argument("--train-csv")
    d.add_argument("--test-csv")
    d.add_argument("--label-map", help="label map file (default: built-in DDoS map)")
    d.add_argument("--csv-header", action="store_true", help="CSV files carry a header row")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-nids", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation and write its report")
    _add_topology_args(sim)
    sim.add_argument("--scheme", choices=SCHEME_CHOICES, default="best-constant")
    _add_sim_args(sim)
    sim.add_argument("--trace-iterations", type=int, default=0,
                     help="write the consensus trajectory of the first K iterations")

    study = sub.add_parser("study", help="run a grid of simulations (figure presets)")
    study.add_argument("--figs", nargs="+", choices=("2", "3", "4", "5", "6"), default=[])
    study.add_argument("--topologies", nargs="*", default=[],
                       choices=("ring", "torus", "petersen", "random"))
    study.add_argument("--sizes", nargs="*", type=int, default=list(DEFAULT_SIZES),
                       help="node counts for ring/torus (torus sizes must be squares)")
    study.add_argument("--schemes", nargs="*", choices=SCHEME_CHOICES, default=["best-constant"])
    study.add_argument("--random-count", type=int, default=10)
    study.add_argument("--workers", type=int, help="parallel grid cells (default $CONSENSUS_NIDS_THREADS or 1)")
    _add_sim_args(study)

    val = sub.add_parser("validate", help="check the consensus convergence conditions")
    _add_topology_args(val)
    val.add_argument("--scheme", choices=SCHEME_CHOICES, default="best-constant")
    val.add_argument("--weights-csv", help="validate this matrix instead of a built-in scheme")
    val.add_argument("--export-csv", help="write the weight matrix to this CSV file")
    val.add_argument("--seed", type=int, default=0)
    return parser


def _topology_spec(args) -> TopologySpec:
    seed = args.topology_seed if args.topology_seed is not None else args.seed
    if args.topology == "file" and not args.topology_file:
        raise UsageError("--topology file requires --topology-file")
    if args.topology == "torus" and args.side is None and args.n is not None:
        side = round(args.n ** 0.5)
        if side * side != args.n:
            raise UsageError(f"--n {args.n} is not a perfect square; use --side for tori")
        args.side = side
    spec = TopologySpec(args.topology, n=args.n, side=args.side, edges=args.edges,
                        seed=seed, path=args.topology_file)
    try:
        spec.build()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def _data_spec(args) -> DataSpec:
    if not args.synthetic and not (args.train_csv and args.test_csv):
        raise UsageError("no corpus given: pass --train-csv and --test-csv, or --synthetic")
    generator = SyntheticSpec(args.n_categorical, args.n_numeric, args.n_categories, args.separation)
    if args.synthetic:
        try:
            generator.validate()
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
        if not 0.0 < args.train_fraction < 1.0:
            raise UsageError("--train-fraction must lie strictly between 0 and 1")
    return DataSpec(
        synthetic=args.synthetic,
        n_records=args.n_records,
        anomalous_fraction=args.anomalous_fraction,
        train_fraction=args.train_fraction,
        generator=generator,
        train_csv=args.train_csv,
        test_csv=args.test_csv,
        label_map=args.label_map,
        header=args.csv_header,
    )


def _sim_config(args, topology: TopologySpec, scheme: str) -> SimulationConfig:
    return SimulationConfig(
        topology=topology,
        scheme=scheme.replace("-", "_"),
        epsilon=args.epsilon,
        tau=args.tau,
        ratio=args.ratio,
        rounds=args.rounds,
        mode=args.mode,
        seed=args.seed,
        max_consensus_rounds=args.max_consensus_rounds,
        data=_data_spec(args),
    )


def _digest(path: str | None) -> str | None:
    if not path:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_digests(args) -> dict:
    names = ("train_csv", "test_csv", "label_map", "topology_file", "weights_csv")
    return {name: _digest(getattr(args, name, None)) for name in names if getattr(args, name, None)}


def _write_manifest(out: Path, manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest["created_at"] = datetime.now(timezone.utc).isoformat()
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def cmd_simulate(args) -> int:
    topology = _topology_spec(args)
    config = _sim_config(args, topology, args.scheme)
    out = Path(args.out)
    manifest = {
        "tool": "consensus-nids",
        "version": __version__,
        "command": "simulate",
        "config": config.to_dict(),
        "inputs": _input_digests(args),
        "outputs": {},
        "status": "running",
    }
    trace_fh = None
    try:
        trace = None
        if args.trace_iterations > 0:
            out.mkdir(parents=True, exist_ok=True)
            trace_path = out / "trace.csv"
            trace_fh = open(trace_path, "w", newline="")
            writer = csv.writer(trace_fh, lineterminator="\n")
            writer.writerow(["iteration", "round", "node", "x_a", "x_n", "residual"])
            manifest["outputs"]["trace"] = str(trace_path)

            def trace(it, rnd, node, xa, xn, res):
                if it < args.trace_iterations:
                    writer.writerow([it, rnd, node, repr(xa), repr(xn), repr(res)])

        report = run_simulation(config, trace=trace)
        paths = report.write(out)
        manifest["outputs"].update({k: str(v) for k, v in paths.items()})
        manifest["status"] = "ok"
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        if trace_fh is not None:
            trace_fh.close()
        _write_manifest(out, manifest)
    s = report.summary()
    cmp = compare_consensus_vs_hierarchical(report)
    print(
        f"{topology.label} {config.scheme}: mean rounds {s['mean_rounds']:.2f}, "
        f"accuracy consensus {s['accuracy']['consensus']:.4f} "
        f"hierarchical {s['accuracy']['hierarchical']:.4f}, "
        f"disagreements {cmp['disagreement_iterations']} -> {out}"
    )
    return 0


def _torus_side(n: int) -> int:
    side = round(n ** 0.5)
    if side * side != n:
        raise UsageError(f"torus size {n} is not a perfect square")
    return side


def _grid(kinds, sizes, schemes, random_count: int, seed: int):
    topologies = []
    for kind in kinds:
        if kind == "ring":
            topologies += [TopologySpec("ring", n=n) for n in sizes]
        elif kind == "torus":
            topologies += [TopologySpec("torus", side=_torus_side(n)) for n in sizes]
        elif kind == "petersen":
            topologies.append(TopologySpec("petersen"))
        elif kind == "random":
            topologies += [TopologySpec("random", n=10, edges=15, seed=seed + i)
                           for i in range(random_count)]
    return [(t, s) for t in topologies for s in schemes]


def _fig_grid(fig: str, sizes, random_count: int, seed: int):
    if fig == "2":
        return _grid(["torus"], sizes, FIG_SCHEMES, random_count, seed)
    if fig == "3":
        return _grid(["ring", "torus"], sizes, ["best-constant"], random_count, seed)
    if fig == "4":
        return _grid(["petersen", "random"], sizes, ["best-constant"], random_count, seed)
    if fig == "5":
        return _grid(["ring", "torus", "petersen", "random"], sizes, FIG_SCHEMES, random_count, seed)
    return _grid(["torus"], sizes, ["best-constant"], random_count, seed)


def cmd_study(args) -> int:
    if not args.figs and not args.topologies:
        raise UsageError("empty grid: pass --figs or --topologies")
    if not args.sizes and any(k in ("ring", "torus") for k in args.topologies):
        raise UsageError("empty grid: --sizes is empty")
    cells: list[tuple[str, TopologySpec, str]] = []
    for fig in args.figs:
        cells += [(fig, t, s) for t, s in _fig_grid(fig, args.sizes, args.random_count, args.seed)]
    if args.topologies:
        if not args.schemes:
            raise UsageError("empty grid: --schemes is empty")
        grid = _grid(args.topologies, args.sizes, args.schemes, args.random_count, args.seed)
        cells += [("custom", t, s) for t, s in grid]
    if not cells:
        raise UsageError("empty grid")

    base = _sim_config(args, cells[0][1], cells[0][2])
    out = Path(args.out)
    manifest = {
        "tool": "consensus-nids",
        "version": __version__,
        "command": "study",
        "config": base.to_dict(),
        "grid": [{"figure": f, "topology": t.label, "scheme": s} for f, t, s in cells],
        "inputs": _input_digests(args),
        "outputs": {},
        "status": "running",
    }
    try:
        train, test = load_corpora(base)
        # figures share cells (e.g. torus/best-constant); simulate each once
        unique = list(dict.fromkeys((t, s) for _, t, s in cells))
        results = dict(zip(unique, run_grid(unique, base, train, test, args.workers)))
        rows = [{"figure": fig, **results[(t, s)]} for fig, t, s in cells]
        out.mkdir(parents=True, exist_ok=True)
        path = out / "study.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=STUDY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        manifest["outputs"]["study"] = str(path)
        manifest["status"] = "ok"
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        _write_manifest(out, manifest)
    print(f"{len(rows)} grid cells -> {path}")
    return 0


def cmd_validate(args) -> int:
    topology = _topology_spec(args)
    topo = topology.build()
    if args.weights_csv:
        try:
            W = read_weights_csv(args.weights_csv)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        source = args.weights_csv
    else:
        W = weights_for(topo, args.scheme).entries
        source = args.scheme
    if args.export_csv:
        write_weights_csv(W, args.export_csv)
    if W.shape != (topo.n, topo.n):
        print(f"error: matrix is {W.shape[0]}x{W.shape[1]}, topology has n={topo.n}", file=sys.stderr)
        return 1
    report = verify_convergence_conditions(W, topo)
    print(f"weights: {source} on {topology.label} (n={topo.n}, |E|={topo.num_edges})")
    for name in ("sparsity", "symmetric", "row_stochastic", "contraction"):
        print(f"  {name:<15} {'PASS' if getattr(report, name) else 'FAIL'}")
    print(f"  ||W - J||_2     {report.norm!r}")
    if not report.ok:
        print(f"failed conditions: {', '.join(report.failures())}")
        return 1
    return 0


COMMANDS = {"simulate": cmd_simulate, "study": cmd_study, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
