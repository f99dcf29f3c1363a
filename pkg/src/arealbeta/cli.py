"""Command-line entry points: fit, summarize, compare, simulate, diagnose.

A run is described by one YAML config file (documented in the README);
command-line flags override individual keys. Exit codes partition the
failure modes: 0 success, 2 configuration, 3 ingest, 4 sampling,
5 diagnostics alarm.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import ingest, posterior, predict, simulate
from .config import ModelConfig, config_from_dict
from .errors import ConfigError, DiagnosticsAlarm, IngestError, SamplingError
from .ingest import Panel, PanelSchema
from .mcmc import PosteriorDraws, diagnostics, run_sampler
from .spatial import RegionGraph

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_INGEST = 3
EXIT_SAMPLING = 4
EXIT_DIAGNOSTICS = 5


def _load_run_config(path: str | None, overrides: dict) -> dict:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as handle:
                raw = yaml.safe_load(handle) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return raw


def run_digest(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _model_config(raw: dict) -> ModelConfig:
    return config_from_dict(raw.get("model", {}))


def _load_graph(raw: dict) -> RegionGraph:
    paths = raw.get("paths", {})
    adjacency = paths.get("adjacency", "builtin-italy")
    if adjacency == "builtin-italy":
        return ingest.italy_graph()
    regions_path = paths.get("regions")
    if regions_path is None:
        raise ConfigError("paths.regions (one region per line) is required for a custom adjacency file")
    regions = [
        line.strip()
        for line in Path(regions_path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return ingest.load_adjacency(adjacency, regions)


def load_inputs(raw: dict) -> tuple[Panel, RegionGraph, dict]:
    """Ingest pipeline: panel, adjacency, PCA block reduction, scaling."""
    paths = raw.get("paths", {})
    if "panel" not in paths:
        raise ConfigError("paths.panel is required")
    graph = _load_graph(raw)
    schema_cfg = raw.get("ingest", {}).get("schema", {})
    schema = PanelSchema(**schema_cfg) if schema_cfg else PanelSchema()
    panel = ingest.load_panel(paths["panel"], schema=schema, region_names=graph.region_names)

    ingest_cfg = raw.get("ingest", {})
    provenance: dict = {}
    pca_cfg = ingest_cfg.get("pca")
    score_names: tuple[str, ...] = ()
    if pca_cfg:
        block = tuple(pca_cfg["block"])
        panel, reduction = ingest.reduce_covariate_block(
            panel,
            block,
            variance_threshold=float(pca_cfg.get("variance_threshold", 0.7)),
            force_count=pca_cfg.get("force_count", 2),
            score_prefix=pca_cfg.get("score_prefix", "pc"),
        )
        score_names = panel.covariate_names[-reduction.n_retained :]
        provenance["pca"] = {
            "block": list(block),
            "n_retained": reduction.n_retained,
            "explained_variance_ratio": [float(r) for r in reduction.explained_variance_ratio],
            "cumulative_explained": reduction.cumulative_explained,
        }

    scaling_cfg = ingest_cfg.get("scaling", {})
    policy = dict(scaling_cfg.get("overrides", {}))
    for name in score_names:
        policy.setdefault(name, "passthrough")  # PCA scores are standardized already
    recipe = ingest.fit_scaling(panel, policy=policy, default=scaling_cfg.get("default", "standardize"))
    panel = ingest.apply_scaling(panel, recipe)
    provenance["scaling"] = recipe.to_dict()
    return panel, graph, provenance


def _write_diagnostics_csv(path: Path, table: dict, digest: str, seed) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_digest={digest} seed={seed}\n")
        writer = csv.writer(handle)
        writer.writerow(["parameter", "rhat", "ess"])
        for name, (rhat, ess) in table.items():
            writer.writerow([name, rhat, ess])


def _check_alarm(table: dict, threshold: float) -> list[str]:
    return [
        name
        for name, (rhat, _) in table.items()
        if rhat == rhat and rhat > threshold  # NaN-safe comparison
    ]


def cmd_fit(raw: dict) -> int:
    config = _model_config(raw)
    panel, graph, provenance = load_inputs(raw)
    out_dir = Path(raw.get("paths", {}).get("output", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    draws = run_sampler(config, panel, graph)
    digest = run_digest(raw)
    draws.metadata["run_config"] = raw
    draws.metadata["run_digest"] = digest
    draws.metadata["provenance"] = provenance
    draws.write_csv(out_dir / "draws.csv")
    draws.write_metadata(out_dir / "metadata.json")

    table = diagnostics(draws)
    _write_diagnostics_csv(out_dir / "diagnostics.csv", table, digest, config.sampler.seed)
    threshold = float(raw.get("diagnostics", {}).get("rhat_alarm", 1.1))
    alarmed = _check_alarm(table, threshold)
    if alarmed:
        log.error("rhat above %.3f for: %s", threshold, ", ".join(alarmed))
        raise DiagnosticsAlarm(f"{len(alarmed)} parameters exceed the rhat alarm threshold")
    return 0


def _read_draws(raw: dict, args: argparse.Namespace) -> PosteriorDraws:
    draws_path = Path(args.draws)
    metadata_path = draws_path.with_name("metadata.json")
    if not draws_path.exists():
        raise ConfigError(f"draws file {draws_path} does not exist")
    if not metadata_path.exists():
        raise ConfigError(f"metadata sidecar {metadata_path} is missing")
    draws = PosteriorDraws.read_csv(draws_path, metadata_path)
    if args.config is not None:
        expected = _model_config(raw).digest()
        found = draws.metadata.get("config_digest")
        if found != expected:
            raise ConfigError(
                f"draws were produced under config digest {found}, "
                f"but the supplied config has digest {expected}"
            )
    return draws


def cmd_summarize(raw: dict, args: argparse.Namespace) -> int:
    draws = _read_draws(raw, args)
    out_dir = Path(args.output or raw.get("paths", {}).get("output", "."))
    threshold = float(raw.get("summaries", {}).get("inclusion_threshold", 0.5))
    written = posterior.summary_report(draws, out_dir, inclusion_threshold=threshold)
    for name, path in written.items():
        log.info("wrote %s -> %s", name, path)
    return 0


def cmd_compare(raw: dict) -> int:
    base = raw.get("model", {})
    compare_cfg = raw.get("compare", {})
    variant_tags = compare_cfg.get("variants", ["M1", "M2", "M3", "M4"])
    variants = []
    for tag in variant_tags:
        variants.append(config_from_dict({**base, "variant": tag}))
    panel, graph, _ = load_inputs(raw)
    test_time = compare_cfg.get("test_time", panel.n_times - 1)
    predictive_seed = int(compare_cfg.get("predictive_seed", 0))
    point = compare_cfg.get("point", "mean")

    out_dir = Path(raw.get("paths", {}).get("output", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = run_digest(raw)
    rows = predict.compare_models(
        panel, graph, variants, int(test_time), predictive_seed=predictive_seed, point=point
    )
    with open(out_dir / "metrics.csv", "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_digest={digest}\n")
        writer = csv.writer(handle)
        writer.writerow(["Model", "RMSE", "RMSE (F)", "RMSE (M)", "MAE", "MBPV", "SLPD"])
        for row in rows:
            writer.writerow(row.as_list())
    failures = [row for row in rows if row.error]
    for row in failures:
        log.error("variant %s failed: %s", row.model, row.error)
    return 0 if not failures else EXIT_SAMPLING


def cmd_simulate(raw: dict) -> int:
    sim = raw.get("simulate", {})
    if "lattice" in sim.get("graph", {}):
        rows, cols = sim["graph"]["lattice"]
        graph = simulate.lattice_graph(int(rows), int(cols))
    elif sim.get("graph", {}).get("builtin") == "italy":
        graph = ingest.italy_graph()
    else:
        raise ConfigError("simulate.graph needs either 'lattice: [rows, cols]' or 'builtin: italy'")
    params_cfg = dict(sim.get("params", {}))
    if "beta" in params_cfg:
        params_cfg["beta"] = np.asarray(params_cfg["beta"], dtype=float)
    try:
        params = simulate.GenerativeParams(**params_cfg)
    except TypeError as exc:
        raise ConfigError(f"bad simulate.params: {exc}") from exc
    panel, truth = simulate.simulate_panel(
        graph,
        n_times=int(sim.get("n_times", 10)),
        params=params,
        seed=int(sim.get("seed", 0)),
        n_groups=int(sim.get("n_groups", 2)),
    )
    out_dir = Path(raw.get("paths", {}).get("output", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    simulate.write_panel_csv(panel, out_dir / "panel.csv")
    truth["run_digest"] = run_digest(raw)
    simulate.write_truth_json(truth, out_dir / "truth.json")
    with open(out_dir / "regions.txt", "w", encoding="utf-8") as handle:
        handle.write("\n".join(graph.region_names) + "\n")
    with open(out_dir / "adjacency.csv", "w", encoding="utf-8") as handle:
        handle.write("# simulated adjacency\n")
        for i in range(graph.n_regions):
            for j in graph.neighbors[i]:
                if j > i:
                    handle.write(f"{graph.region_names[i]},{graph.region_names[j]}\n")
    return 0


def cmd_diagnose(raw: dict, args: argparse.Namespace) -> int:
    draws = _read_draws(raw, args)
    table = diagnostics(draws)
    out_dir = Path(args.output or raw.get("paths", {}).get("output", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = draws.metadata.get("run_digest", draws.metadata.get("config_digest", ""))
    _write_diagnostics_csv(out_dir / "diagnostics.csv", table, digest, draws.metadata.get("seed"))
    threshold = float(raw.get("diagnostics", {}).get("rhat_alarm", 1.1))
    alarmed = _check_alarm(table, threshold)
    if alarmed:
        raise DiagnosticsAlarm(f"{len(alarmed)} parameters exceed the rhat alarm threshold")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arealbeta",
        description="Bayesian Beta regression for areal panel rates",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        p.add_argument("--config", required=config_required, help="YAML run config file")
        p.add_argument("--seed", type=int, help="override model.sampler.seed")
        p.add_argument("--output", help="override paths.output")

    p_fit = sub.add_parser("fit", help="run the sampler and write draws + diagnostics")
    add_common(p_fit)
    p_fit.add_argument("--panel", help="override paths.panel")
    p_fit.add_argument("--variant", help="override model.variant")
    p_fit.add_argument("--iterations", type=int, help="override model.sampler.iterations")

    p_sum = sub.add_parser("summarize", help="emit posterior summary tables from a draws file")
    p_sum.add_argument("draws", help="path to draws.csv (metadata.json beside it)")
    p_sum.add_argument("--config", help="verify the draws against this config")
    p_sum.add_argument("--output")

    p_cmp = sub.add_parser("compare", help="fit model variants and score the test year")
    add_common(p_cmp)
    p_cmp.add_argument("--panel", help="override paths.panel")

    p_sim = sub.add_parser("simulate", help="generate a synthetic panel from the model")
    add_common(p_sim)

    p_diag = sub.add_parser("diagnose", help="recompute convergence diagnostics for a draws file")
    p_diag.add_argument("draws")
    p_diag.add_argument("--config")
    p_diag.add_argument("--output")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "model.sampler.seed": getattr(args, "seed", None),
        "paths.output": getattr(args, "output", None),
        "paths.panel": getattr(args, "panel", None),
        "model.variant": getattr(args, "variant", None),
        "model.sampler.iterations": getattr(args, "iterations", None),
    }
    return {k: v for k, v in mapping.items() if v is not None}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        raw = _load_run_config(getattr(args, "config", None), _overrides(args))
        if args.command == "fit":
            return cmd_fit(raw)
        if args.command == "summarize":
            return cmd_summarize(raw, args)
        if args.command == "compare":
            return cmd_compare(raw)
        if args.command == "simulate":
            return cmd_simulate(raw)
        if args.command == "diagnose":
            return cmd_diagnose(raw, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except IngestError as exc:
        log.error("ingest error: %s", exc)
        return EXIT_INGEST
    except SamplingError as exc:
        log.error("sampling error: %s", exc)
        return EXIT_SAMPLING
    except DiagnosticsAlarm as exc:
        log.error("diagnostics alarm: %s", exc)
        return EXIT_DIAGNOSTICS


if __name__ == "__main__":
    sys.exit(main())
