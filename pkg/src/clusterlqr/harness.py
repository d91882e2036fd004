"""Experiment driver: design sweeps, weight comparisons, instance validation.

Reproduces the study shapes at configurable scale: relative H2 error
against the cluster count for several design methods, paired
fixed-weight/designed-weight comparisons, and full-versus-reduced
pipeline timings.  Results are emitted as a tidy CSV (one row per design,
cluster count and seed) plus a JSON summary; rows are deterministic given
the configuration and seeds, timing columns aside.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import numpy as np

from ._linalg import dominant_eigvec
from .cluster_design import (
    closed_loop_cluster_inputs,
    coherency_cluster_inputs,
    open_loop_h2_cluster_inputs,
    weighted_kmeans,
)
from .errors import ClusterLqrError, ConfigError
from .lqr import (
    closed_loop_gramian,
    hinf_norm,
    model_matching_error,
    solve_are_full,
    stable_eigenbasis,
)
from .mmio import (
    generator_params_from_json,
    load_graph,
    load_partition,
    load_matrix,
    load_system,
    partition_to_lists,
    save_graph,
    save_system,
)
from .netgen import LtiSystem, consensus_mode, generate_clustered_consensus, pbh_checks
from .projection import (
    build_projection,
    control_inversion,
    count_links,
    projection_mismatch,
    reduce_system,
    solve_reduced_lqr,
    screen_projection_weights,
    weighted_error_bound,
)
from .spectral import LowRankConfig, eta_estimate, low_rank_gap_bound, low_rank_gramian, partial_stable_eigenbasis
from .weight_design import (
    UnstableModes,
    WeightDesignConfig,
    alternating_design,
    stable_weight_design,
    unstable_weight_design,
)

CSV_COLUMNS = [
    "design",
    "r",
    "seed",
    "rel_error",
    "xi_kappa",
    "links",
    "t_full_ms",
    "t_reduced_ms",
    "stable",
    "sparse_links",  # reserved for an external sparsity-promoting baseline
]

KNOWN_DESIGNS = ("cluster", "weight", "alternating", "baseline:coherency", "baseline:openloop_h2")


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    generator: dict | None = None
    system_dir: str | None = None
    designs: list[str] = field(default_factory=lambda: ["cluster"])
    r_list: list[int] = field(default_factory=lambda: [2])
    kappa: int = 5
    q_spec: dict | None = None
    r_weight_spec: dict | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str | None = None
    kmeans: dict = field(default_factory=dict)
    weight: dict = field(default_factory=dict)
    partition_file: str | None = None
    timing_reps: int = 3
    diagnostics: bool = False

    def __post_init__(self):
        if self.generator is None and self.system_dir is None:
            raise ConfigError("config needs either 'generator' parameters or a 'system_dir'")
        for d in self.designs:
            if d not in KNOWN_DESIGNS:
                raise ConfigError(f"unknown design '{d}' (known: {KNOWN_DESIGNS})")
        if not self.r_list or any(r < 1 for r in self.r_list):
            raise ConfigError("r_list must hold positive cluster counts")
        if self.kappa < 1:
            raise ConfigError("kappa must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.timing_reps < 1:
            raise ConfigError("timing_reps must be at least 1")
        if self.generator is not None:
            self.generator = generator_params_from_json(dict(self.generator))
        if self.system_dir is not None and not Path(self.system_dir).is_dir():
            raise ConfigError(f"system_dir does not exist: {self.system_dir}")
        if self.partition_file is not None and not Path(self.partition_file).is_file():
            raise ConfigError(f"partition_file does not exist: {self.partition_file}")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**doc)


def _apply_weight_spec(sys: LtiSystem, graph, q_spec, r_weight_spec) -> LtiSystem:
    n = sys.n
    Q, R = sys.Q, sys.R
    if q_spec is not None:
        if "scaled_identity" in q_spec:
            Q = float(q_spec["scaled_identity"]) * np.eye(n)
        elif q_spec.get("laplacian_squared"):
            if graph is None:
                raise ConfigError("laplacian_squared Q needs a graph")
            L = graph.laplacian(weighted=False)
            Q = L @ L
        elif "file" in q_spec:
            Q = load_matrix(q_spec["file"])
        else:
            raise ConfigError(f"unintelligible q_spec: {q_spec}")
    if r_weight_spec is not None:
        if "scaled_identity" in r_weight_spec:
            R = float(r_weight_spec["scaled_identity"]) * np.eye(sys.m)
        elif "file" in r_weight_spec:
            R = load_matrix(r_weight_spec["file"])
        else:
            raise ConfigError(f"unintelligible r_spec: {r_weight_spec}")
    return LtiSystem(A=sys.A, B=sys.B, B_d=sys.B_d, Q=Q, R=R)


def instantiate(config: ExperimentConfig, seed: int):
    """Build (system, graph) for one seed; generator seeds are overridden per row."""
    if config.generator is not None:
        params = dict(config.generator)
        params["seed"] = seed
        graph, sys_ = generate_clustered_consensus(**params)
    else:
        sys_ = load_system(config.system_dir)
        graph_dir = Path(config.system_dir)
        graph = load_graph(graph_dir) if (graph_dir / "adjacency.mtx").exists() else None
    sys_ = _apply_weight_spec(sys_, graph, config.q_spec, config.r_weight_spec)
    return sys_, graph


def _reference_weight(sys: LtiSystem, graph) -> np.ndarray:
    if graph is not None:
        return consensus_mode(graph)
    _, v = dominant_eigvec(sys.A)
    return v


def _median_time(fn, reps: int):
    """Median wall-clock seconds over ``reps`` calls; returns (result, seconds)."""
    times = []
    result = None
    for _ in range(reps):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return result, median(times)


def _design_partition_weight(design, sys, graph, factor, r, vbar, config, seed):
    """Partition and weight vector for one design method."""
    km = dict(config.kmeans)
    km.setdefault("restarts", 10)
    km["seed"] = seed
    wcfg = WeightDesignConfig(**config.weight) if config.weight else WeightDesignConfig()
    if design == "cluster":
        problem = closed_loop_cluster_inputs(sys, vbar, factor, r, **km)
        return weighted_kmeans(problem).partition, vbar
    if design == "baseline:coherency":
        if graph is None:
            raise ConfigError("coherency design needs graph data")
        problem = coherency_cluster_inputs(graph, r, **km)
        return weighted_kmeans(problem).partition, vbar
    if design == "baseline:openloop_h2":
        problem = open_loop_h2_cluster_inputs(sys, vbar, r, **km)
        return weighted_kmeans(problem).partition, vbar
    if design == "weight":
        if config.partition_file is not None:
            partition = load_partition(config.partition_file)
        else:
            if graph is None:
                raise ConfigError("weight design without partition_file needs graph data")
            problem = coherency_cluster_inputs(graph, r, **km)
            partition = weighted_kmeans(problem).partition
        modes = UnstableModes.from_state_matrix(sys.A)
        if modes.n_v:
            w = unstable_weight_design(partition, factor, sys.Q, modes, wcfg)
        else:
            w = stable_weight_design(partition, factor)
        return partition, w
    if design == "alternating":
        result = alternating_design(sys, factor, r, cfg=wcfg, kmeans_options=km)
        return result.projection.partition, result.projection.w
    raise ConfigError(f"unknown design '{design}'")


def _reduced_pipeline(config, sys, graph, design, r, vbar, seed):
    """One timed pass of the reduced pipeline: Gramian surrogate, design, reduced LQR."""
    basis = partial_stable_eigenbasis(sys, LowRankConfig(kappa=config.kappa))
    factor = low_rank_gramian(sys, basis)
    partition, w = _design_partition_weight(design, sys, graph, factor, r, vbar, config, seed)
    proj = build_projection(partition, w)
    reduced = reduce_system(sys, proj)
    x_tilde, alpha = solve_reduced_lqr(reduced)
    return factor, proj, x_tilde, alpha


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_csv(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(row.get(col)) for col in CSV_COLUMNS))
    path.write_text("\n".join(lines) + "\n")


def _diagnostic_bounds(sys, graph, x_full, proj, x_tilde, alpha, exact_factor, basis_full, kappa):
    """Error-bound chain evaluated on the exact Gramian (moderate n only)."""
    from .lqr import are_solution_bound_matrices

    x_hat = proj.P.T @ x_tilde @ proj.P
    E = x_full - x_hat
    weighted_error = float(np.linalg.norm(E @ exact_factor.factor))
    gamma = hinf_norm(sys.A - sys.G @ x_hat, sys.G)
    reduced = reduce_system(sys, proj)
    r = reduced.r
    beta_tilde = are_solution_bound_matrices(
        reduced.A, reduced.G + alpha * np.eye(r), reduced.Q + alpha * np.eye(r)
    )
    f_bound = weighted_error_bound(proj, sys, x_full, exact_factor, alpha, beta_tilde)
    tail = basis_full.eigenvalues[kappa:]
    rank_gap = low_rank_gap_bound(tail, eta_estimate(basis_full), sys.n_b)
    return {
        "weighted_error": weighted_error,
        "weighted_error_bound": f_bound,
        "gamma": gamma,
        "gamma_chain_bound": gamma * weighted_error,
        "rank_gap_bound": rank_gap,
        "beta_tilde": beta_tilde,
    }


def run_sweep(config: ExperimentConfig) -> list[dict]:
    """Run every (seed, design, r) cell; returns rows and writes CSV/JSON if out_dir set.

    Unstable projected loops are recorded with stable=false and an empty
    rel_error, never dropped.
    """
    rows: list[dict] = []
    for seed in config.seeds:
        sys_, graph = instantiate(config, seed)
        vbar = _reference_weight(sys_, graph)
        sol_full, t_full = _median_time(lambda: solve_are_full(sys_), config.timing_reps)
        exact_factor = basis_full = None
        if config.diagnostics:
            basis_full = stable_eigenbasis(sys_)
            exact_factor = closed_loop_gramian(sys_, basis_full)
        for design in config.designs:
            for r in config.r_list:
                if r > sys_.n:
                    raise ConfigError(f"r={r} exceeds the state dimension {sys_.n}")
                (factor, proj, x_tilde, alpha), t_red = _median_time(
                    lambda: _reduced_pipeline(config, sys_, graph, design, r, vbar, seed),
                    config.timing_reps,
                )
                controller = control_inversion(
                    sys_, proj, x_full=sol_full.X, graph=graph, screen=False
                )
                stable = controller.certificate("closed_loop_eig").satisfied
                rel_error = None
                if stable:
                    rel_error = model_matching_error(sys_, sol_full.K, controller.K_hat).rel_error
                row = {
                    "design": design,
                    "r": proj.partition.r,
                    "seed": seed,
                    "rel_error": rel_error,
                    "xi_kappa": projection_mismatch(proj, factor),
                    "links": count_links(sys_.n, proj.partition.r)["two_layer"],
                    "t_full_ms": t_full * 1e3,
                    "t_reduced_ms": t_red * 1e3,
                    "stable": stable,
                    "sparse_links": None,
                    "alpha_used": controller.alpha_used,
                    "certificates": {
                        c.kind: {"satisfied": c.satisfied, "margin": c.margin}
                        for c in controller.certificates
                    },
                    "partition": partition_to_lists(proj.partition),
                }
                if config.diagnostics:
                    row["bounds"] = _diagnostic_bounds(
                        sys_, graph, sol_full.X, proj, x_tilde, alpha,
                        exact_factor, basis_full, config.kappa,
                    )
                rows.append(row)
    _persist(config, rows, "sweep")
    return rows


def run_weight_comparison(config: ExperimentConfig) -> list[dict]:
    """Paired rows: fixed reference weight versus designed weight on fixed clusters."""
    r = config.r_list[0]
    rows: list[dict] = []
    for seed in config.seeds:
        sys_, graph = instantiate(config, seed)
        vbar = _reference_weight(sys_, graph)
        sol_full, t_full = _median_time(lambda: solve_are_full(sys_), config.timing_reps)
        basis = partial_stable_eigenbasis(sys_, LowRankConfig(kappa=config.kappa))
        factor = low_rank_gramian(sys_, basis)
        km = dict(config.kmeans)
        km.setdefault("restarts", 10)
        km["seed"] = seed
        if config.partition_file is not None:
            partition = load_partition(config.partition_file)
        else:
            if graph is None:
                raise ConfigError("weight comparison without partition_file needs graph data")
            partition = weighted_kmeans(coherency_cluster_inputs(graph, r, **km)).partition
        wcfg = WeightDesignConfig(**config.weight) if config.weight else WeightDesignConfig()
        modes = UnstableModes.from_state_matrix(sys_.A)
        if modes.n_v:
            designed, design_report = unstable_weight_design(
                partition, factor, sys_.Q, modes, wcfg, full_output=True
            )
        else:
            designed, design_report = stable_weight_design(partition, factor, full_output=True)
        for name, w in (("weight:reference", vbar), ("weight:designed", designed)):
            proj = build_projection(partition, w)
            controller = control_inversion(
                sys_, proj, x_full=sol_full.X, graph=graph, screen=False
            )
            stable = controller.certificate("closed_loop_eig").satisfied
            rel_error = None
            if stable:
                rel_error = model_matching_error(sys_, sol_full.K, controller.K_hat).rel_error
            row = {
                "design": name,
                "r": partition.r,
                "seed": seed,
                "rel_error": rel_error,
                "xi_kappa": projection_mismatch(proj, factor),
                "links": count_links(sys_.n, partition.r)["two_layer"],
                "t_full_ms": t_full * 1e3,
                "t_reduced_ms": None,
                "stable": stable,
                "sparse_links": None,
                "partition": partition_to_lists(partition),
            }
            if name == "weight:designed":
                row["weights"] = [float(x) for x in w]
                row["design_report"] = design_report
            rows.append(row)
    _persist(config, rows, "weights")
    return rows


def validate_instance(config: ExperimentConfig) -> dict:
    """Pre-flight diagnostics: PBH tests, weight screening, spectral gap, certificates."""
    seed = config.seeds[0]
    sys_, graph = instantiate(config, seed)
    vbar = _reference_weight(sys_, graph)
    report: dict = {"n": sys_.n, "seed": seed}
    pbh = pbh_checks(sys_)
    report["pbh"] = {
        "stabilizable": pbh.stabilizable,
        "detectable": pbh.detectable,
        "controllable_from_Bd": pbh.controllable_from_Bd,
    }
    kappa = min(config.kappa, sys_.n)
    probe = min(kappa + 1, sys_.n)
    basis = partial_stable_eigenbasis(sys_, LowRankConfig(kappa=probe))
    lam = basis.eigenvalues
    if kappa >= sys_.n or len(lam) <= kappa:
        report["spectral_gap_ratio"] = 1.0
        report["low_rank"] = "exact"
    else:
        report["spectral_gap_ratio"] = float(abs(lam[kappa - 1]) / abs(lam[kappa]))
        report["low_rank"] = f"kappa={kappa}"
    from .netgen import ClusterPartition

    screening = {}
    for name, w in (("reference", vbar), ("ones", np.ones(sys_.n))):
        try:
            screen_projection_weights(sys_, ClusterPartition([tuple(range(sys_.n))]), w)
            screening[name] = True
        except ClusterLqrError:
            screening[name] = False
    report["weight_screening"] = screening
    if config.generator is not None and graph is not None:
        from .netgen import generate_clustered_graph, is_almost_equitable

        params = {k: v for k, v in config.generator.items() if k != "b_d_columns"}
        params["seed"] = seed
        _, planted = generate_clustered_graph(**params)
        report["planted_partition_almost_equitable"] = is_almost_equitable(graph, planted)
    from .lqr import stability_certificates

    certs = stability_certificates(sys_, np.zeros((sys_.n, sys_.n)))
    report["isotropic_input_gain"] = next(
        (c.satisfied for c in certs if c.kind == "isotropic_input_gain"), False
    )
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validate.json").write_text(json.dumps(report, indent=2, default=str))
    return report


def generate_instance(config: ExperimentConfig) -> dict:
    """Generate the configured system and persist it under out_dir."""
    if config.generator is None:
        raise ConfigError("generate needs generator parameters")
    seed = config.seeds[0]
    sys_, graph = instantiate(config, seed)
    if config.out_dir is None:
        raise ConfigError("generate needs an output directory")
    out = Path(config.out_dir)
    save_system(out, sys_)
    if graph is not None:
        save_graph(out, graph)
    meta = {"n": sys_.n, "m": sys_.m, "n_b": sys_.n_b, "seed": seed}
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    return meta


def _persist(config: ExperimentConfig, rows: list[dict], stem: str) -> None:
    if not config.out_dir:
        return
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"{stem}.csv", rows)
    doc = {
        "columns": CSV_COLUMNS,
        "rows": rows,
    }
    (out / f"{stem}_summary.json").write_text(json.dumps(doc, indent=2, default=str))
