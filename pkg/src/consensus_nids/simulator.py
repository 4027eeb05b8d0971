"""End-to-end simulation of consensus vs. centralised intrusion detection.

Every simulation iteration assigns one test connection to each module,
lets the modules agree on the joint log-likelihood by average consensus,
and scores the resulting network-wide decision alongside the exact
hierarchical one. Hop costs are tallied for consensus, hierarchical
aggregation (``h_ce``) and all-to-all distribution (``h_co``).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import classifier
from .classifier import ANOMALOUS, NORMAL, NaiveBayesModel
from .consensus import (
    DEFAULT_MAX_ROUNDS,
    FREEZE,
    GLOBAL,
    ConvergenceError,
    Operator,
    initialize,
    recover_joint,
    run_to_convergence,
)
from .dataset import (
    ConfigError,
    LabeledCorpus,
    SyntheticSpec,
    default_label_map,
    generate_synthetic,
    load_label_map,
    load_nslkdd_csv,
    round_half_up,
    split,
)
from .detection import decide, hierarchical_aggregate, network_posterior
from .spectral import verify_convergence_conditions, weights_for
from .topology import (
    Topology,
    graph_median,
    load_edge_list,
    make_petersen,
    make_random,
    make_ring,
    make_torus,
)

__all__ = [
    "APPROACHES",
    "TopologySpec",
    "DataSpec",
    "SimulationConfig",
    "ConfusionCounts",
    "IterationRecord",
    "SimulationReport",
    "load_corpora",
    "run_simulation",
    "compare_consensus_vs_hierarchical",
    "run_grid",
    "convergence_study",
]

log = logging.getLogger(__name__)

APPROACHES = ("consensus", "hierarchical", "distributed")


@dataclass(frozen=True)
class TopologySpec:
    kind: str = "torus"
    n: int | None = None
    side: int | None = None
    edges: int | None = None
    seed: int = 0
    path: str | None = None

    def build(self) -> Topology:
        if self.kind == "ring":
            return make_ring(self.n if self.n is not None else 9)
        if self.kind == "torus":
            return make_torus(self.side if self.side is not None else 3)
        if self.kind == "petersen":
            return make_petersen()
        if self.kind == "random":
            n = self.n if self.n is not None else 10
            m = self.edges if self.edges is not None else 15
            return make_random(n, m, self.seed)
        if self.kind == "file":
            if not self.path:
                raise ConfigError("file topology needs a path")
            return load_edge_list(self.path, self.n)
        raise ConfigError(f"unknown topology kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "ring":
            return f"ring{self.n if self.n is not None else 9}"
        if self.kind == "torus":
            side = self.side if self.side is not None else 3
            return f"torus{side * side}"
        if self.kind == "random":
            return f"random{self.n or 10}_{self.edges or 15}_s{self.seed}"
        if self.kind == "file":
            return f"file:{self.path}"
        return self.kind


@dataclass(frozen=True)
class DataSpec:
    """Where train/test connections come from.

    Synthetic corpora are generated from the simulation seed and split
    stratified; CSV corpora are read as given.
    """

    synthetic: bool = True
    n_records: int = 2000
    anomalous_fraction: float = 0.5
    train_fraction: float = 0.7
    generator: SyntheticSpec = SyntheticSpec()
    train_csv: str | None = None
    test_csv: str | None = None
    label_map: str | None = None
    header: bool = False


@dataclass(frozen=True)
class SimulationConfig:
    topology: TopologySpec = TopologySpec()
    scheme: str = "best_constant"
    epsilon: float = 1e-3
    tau: float = 1.0
    ratio: float = 0.6
    rounds: int = 1000
    mode: str = GLOBAL
    seed: int = 0
    max_consensus_rounds: int = DEFAULT_MAX_ROUNDS
    data: DataSpec = DataSpec()

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if not 0.0 <= self.ratio <= 1.0:
            raise ConfigError("ratio must lie in [0, 1]")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.mode not in (GLOBAL, FREEZE):
            raise ConfigError(f"mode must be {GLOBAL!r} or {FREEZE!r}")
        if self.max_consensus_rounds < 1:
            raise ConfigError("max_consensus_rounds must be >= 1")
        if not self.data.synthetic and not (self.data.train_csv and self.data.test_csv):
            raise ConfigError("CSV data needs both train_csv and test_csv")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def record(self, truth: bool, alert: bool) -> None:
        if truth and alert:
            self.tp += 1
        elif truth:
            self.fn += 1
        elif alert:
            self.fp += 1
        else:
            self.tn += 1

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        """``(TP + TN) / (TP + TN + FP + FN)``."""
        if self.total == 0:
            raise ZeroDivisionError("no decisions recorded")
        return (self.tp + self.tn) / self.total


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    anomalous_modules: int
    rounds_used: int
    consensus_hops: int
    h_ce: int
    h_co: int
    consensus_alert: bool
    hierarchical_alert: bool
    distributed_alert: bool
    truth: bool
    disagreeing_nodes: int
    max_joint_error: float


CSV_COLUMNS = [f.name for f in IterationRecord.__dataclass_fields__.values()]


@dataclass
class SimulationReport:
    config: dict
    topology: dict
    confusion: dict[str, ConfusionCounts]
    iterations: list[IterationRecord]
    node_disagreements: list[int]

    def accuracy(self, approach: str) -> float:
        return self.confusion[approach].accuracy

    @property
    def rounds_used(self) -> list[int]:
        return [it.rounds_used for it in self.iterations]

    def summary(self) -> dict:
        rounds = self.rounds_used
        cons = [it.consensus_hops for it in self.iterations]
        hce = [it.h_ce for it in self.iterations]
        hco = [it.h_co for it in self.iterations]
        return {
            "iterations": len(self.iterations),
            "mean_rounds": float(np.mean(rounds)),
            "min_rounds": int(min(rounds)),
            "max_rounds": int(max(rounds)),
            "mean_consensus_hops": float(np.mean(cons)),
            "cumulative_consensus_hops": int(sum(cons)),
            "cumulative_h_ce": int(sum(hce)),
            "cumulative_h_co": int(sum(hco)),
            "disagreement_iterations": sum(1 for it in self.iterations if it.disagreeing_nodes),
            "max_joint_error": float(max(it.max_joint_error for it in self.iterations)),
            "accuracy": {a: c.accuracy for a, c in self.confusion.items()},
        }

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "topology": self.topology,
            "confusion": {a: asdict(c) for a, c in self.confusion.items()},
            "summary": self.summary(),
            "node_disagreements": self.node_disagreements,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for it in self.iterations:
            writer.writerow([_cell(getattr(it, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json", "iterations": out / "iterations.csv"}
        paths["report"].write_text(self.to_json())
        paths["iterations"].write_text(self.to_csv())
        return paths


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def load_corpora(config: SimulationConfig) -> tuple[LabeledCorpus, LabeledCorpus]:
    data = config.data
    if data.synthetic:
        corpus = generate_synthetic(
            config.seed, data.n_records, data.anomalous_fraction, data.generator
        )
        return split(corpus, data.train_fraction, config.seed)
    label_map = load_label_map(data.label_map) if data.label_map else default_label_map()
    train = load_nslkdd_csv(data.train_csv, label_map=label_map, header=data.header)
    test = load_nslkdd_csv(data.test_csv, label_map=label_map, header=data.header)
    return train, test


class _Pool:
    """Per-class record indices drawn without replacement, reshuffled when empty."""

    def __init__(self, indices, rng: np.random.Generator, label: str):
        self.indices = np.asarray(indices, dtype=np.int64)
        self.rng = rng
        self.label = label
        self.order = np.empty(0, dtype=np.int64)
        self.pos = 0

    def draw(self) -> int:
        if self.indices.size == 0:
            raise ConfigError(f"test corpus has no {self.label} records")
        if self.pos >= self.order.size:
            self.order = self.indices[self.rng.permutation(self.indices.size)]
            self.pos = 0
        idx = int(self.order[self.pos])
        self.pos += 1
        return idx


def run_simulation(
    config: SimulationConfig,
    train: LabeledCorpus | None = None,
    test: LabeledCorpus | None = None,
    model: NaiveBayesModel | None = None,
    trace=None,
) -> SimulationReport:
    """Run ``config.rounds`` iterations of detection on one topology.

    ``train``/``test`` override the corpora named in ``config.data``; a
    pre-trained ``model`` skips training. ``trace(iteration, round, node,
    x_a, x_n, residual)`` receives the consensus trajectory when given.
    """
    config.validate()
    if train is None or test is None:
        train, test = load_corpora(config)
    if model is None:
        model = classifier.train(train.schema, train.records)
    topo = config.topology.build()
    W = weights_for(topo, config.scheme)
    cond = verify_convergence_conditions(W, topo)
    if not cond.ok:
        raise ConfigError(
            f"{config.scheme} weights violate convergence conditions on "
            f"{config.topology.label}: {cond.failures()}"
        )
    op = Operator(W, topo)
    n = topo.n
    central = graph_median(topo)
    priors = (model.log_priors[ANOMALOUS], model.log_priors[NORMAL])

    rng = np.random.default_rng(config.seed)
    pools = {
        h: _Pool([i for i, r in enumerate(test.records) if r.label == h], rng, h)
        for h in (ANOMALOUS, NORMAL)
    }
    cache: dict[int, tuple[float, float]] = {}

    def local(idx: int) -> tuple[float, float]:
        if idx not in cache:
            cache[idx] = classifier.log_likelihoods(model, test.records[idx])
        return cache[idx]

    k = round_half_up(config.ratio * n)
    confusion = {a: ConfusionCounts() for a in APPROACHES}
    node_disagreements = [0] * n
    iterations = []
    for it in range(config.rounds):
        anomalous = np.zeros(n, dtype=bool)
        anomalous[rng.choice(n, size=k, replace=False)] = True
        picks = [pools[ANOMALOUS if anomalous[i] else NORMAL].draw() for i in range(n)]
        lls = np.array([local(idx) for idx in picks])

        node_trace = None
        if trace is not None:
            node_trace = lambda r, i, xa, xn, res, _it=it: trace(_it, r, i, xa, xn, res)
        result = run_to_convergence(
            initialize(lls), op, topo, config.epsilon, config.max_consensus_rounds,
            config.mode, node_trace,
        )
        if not result.converged:
            raise ConvergenceError(
                f"iteration {it}: consensus on {config.topology.label} with "
                f"{config.scheme} weights did not converge within "
                f"{config.max_consensus_rounds} rounds "
                f"(max residual {float(result.state.residuals.max()):.3g})"
            )
        joints = recover_joint(result.state, n)
        exact, h_ce = hierarchical_aggregate(lls, topo, central)
        h_co = h_ce * (n - 1)

        truth = k > 0
        central_decision = decide(network_posterior(exact, priors), config.tau)
        node_alerts = [decide(network_posterior(j, priors), config.tau).alert for j in joints]
        disagreeing = 0
        for i, alert in enumerate(node_alerts):
            if alert != central_decision.alert:
                node_disagreements[i] += 1
                disagreeing += 1

        confusion["consensus"].record(truth, node_alerts[0])
        confusion["hierarchical"].record(truth, central_decision.alert)
        confusion["distributed"].record(truth, central_decision.alert)
        iterations.append(IterationRecord(
            iteration=it,
            anomalous_modules=k,
            rounds_used=result.rounds_used,
            consensus_hops=result.state.hop_count,
            h_ce=h_ce,
            h_co=h_co,
            consensus_alert=node_alerts[0],
            hierarchical_alert=central_decision.alert,
            distributed_alert=central_decision.alert,
            truth=truth,
            disagreeing_nodes=disagreeing,
            max_joint_error=float(np.max(np.abs(joints - np.array(exact)))),
        ))

    topo_info = {
        "label": config.topology.label,
        "kind": topo.kind,
        "n": n,
        "edges": topo.num_edges,
        "central": central,
    }
    return SimulationReport(config.to_dict(), topo_info, confusion, iterations, node_disagreements)


def compare_consensus_vs_hierarchical(report: SimulationReport) -> dict:
    """Signed accuracy gap and how many iterations had any dissenting node."""
    return {
        "accuracy_delta": report.accuracy("consensus") - report.accuracy("hierarchical"),
        "disagreement_iterations": sum(1 for it in report.iterations if it.disagreeing_nodes),
    }


def _study_cell(args) -> dict:
    config, train, test, model = args
    report = run_simulation(config, train, test, model)
    s = report.summary()
    return {
        "topology": config.topology.label,
        "kind": report.topology["kind"],
        "n": report.topology["n"],
        "edges": report.topology["edges"],
        "scheme": config.scheme,
        "mean_rounds": s["mean_rounds"],
        "min_rounds": s["min_rounds"],
        "max_rounds": s["max_rounds"],
        "mean_consensus_hops": s["mean_consensus_hops"],
        "h_ce": report.iterations[0].h_ce,
        "h_co": report.iterations[0].h_co,
        "accuracy_consensus": s["accuracy"]["consensus"],
        "accuracy_hierarchical": s["accuracy"]["hierarchical"],
        "accuracy_distributed": s["accuracy"]["distributed"],
        "disagreement_iterations": s["disagreement_iterations"],
    }


def default_workers() -> int:
    env = os.environ.get("CONSENSUS_NIDS_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_grid(
    cells,
    config: SimulationConfig,
    train: LabeledCorpus | None = None,
    test: LabeledCorpus | None = None,
    workers: int | None = None,
) -> list[dict]:
    """Simulate each ``(TopologySpec, scheme)`` cell; rows come back in cell order.

    All cells share the corpora and trained model so that round counts are
    comparable across topologies and schemes.
    """
    cells = list(cells)
    if not cells:
        raise ConfigError("study grid is empty")
    if train is None or test is None:
        train, test = load_corpora(config)
    model = classifier.train(train.schema, train.records)
    jobs = [
        (replace(config, topology=t, scheme=s.replace("-", "_")), train, test, model)
        for t, s in cells
    ]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_study_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_study_cell, jobs))


def convergence_study(
    topologies,
    schemes,
    config: SimulationConfig,
    train: LabeledCorpus | None = None,
    test: LabeledCorpus | None = None,
    workers: int | None = None,
) -> list[dict]:
    """Mean consensus rounds (and costs, accuracies) for every topology x scheme."""
    return run_grid(product(topologies, schemes), config, train, test, workers)
