"""Command-line pipeline around the library.

Commands hand artifacts to each other through files only: datasets as
graph JSON with a .meta.json sidecar, models and explainers as JSON
checkpoints that embed their resolved training config, evaluations as
CSV/JSON plus a rendered PNG next to each delimited report.

Config precedence is defaults < --config file < explicit flags. Flags
default to None so only the ones actually passed override the file.
Relative paths resolve under $GRAPHXPLAIN_DATA_DIR when it is set.

Exit codes: 0 ok, 1 usage, 2 bad data, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .attribution import exact_attribution_all, target_context
from .datasets import GENERATORS, load_dataset, meta_path, save_dataset
from .errors import DataError, NumericError
from .explainer import (
    ExplainerConfig,
    estimate_max_hop,
    explain,
    load_explainer,
    save_explainer,
    train_explainer,
)
from .figures import plot_correlation, plot_fidelity, plot_throughput
from .gcn import TrainConfig, load_model, save_model, train_target
from .graph import Graph
from .seeding import derive_rng

DATA_DIR_VAR = "GRAPHXPLAIN_DATA_DIR"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here says 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def resolve_path(text: str) -> Path:
    path = Path(text)
    base = os.environ.get(DATA_DIR_VAR)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(resolve_path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise DataError(f"config file {path} is not valid JSON: {err}")
    if not isinstance(payload, dict):
        raise DataError(f"config file {path} must hold a JSON object")
    return payload


def merged_config(args, defaults: dict) -> dict:
    """defaults < config file < flags; flags use None as 'not passed'."""
    out = dict(defaults)
    file_cfg = _load_config_file(getattr(args, "config", None))
    for key, value in file_cfg.items():
        if key not in defaults:
            raise DataError(f"unknown config key {key!r} (expected one of {sorted(defaults)})")
        out[key] = value
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
    return out


def _write_meta(path: Path, payload: dict) -> None:
    meta_path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")))


def _load_graph_data(path: Path):
    ds = load_dataset(path)
    return ds, ds.graphs


def eval_targets(ds, all_nodes: bool) -> np.ndarray:
    """Test split by default; --all-nodes widens to every instance."""
    if ds.is_multi:
        if all_nodes:
            return np.arange(len(ds.graphs), dtype=np.int64)
        if ds.splits is None:
            raise DataError("dataset has no graph splits; pass --all-nodes")
        return np.asarray(ds.splits["test"], dtype=np.int64)
    g = ds.graphs
    if all_nodes or g.masks is None:
        return np.arange(g.num_nodes, dtype=np.int64)
    return np.asarray(g.masks["test"], dtype=np.int64)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_data(args) -> int:
    if args.name not in GENERATORS:
        raise DataError(f"unknown dataset {args.name!r}; choose from {sorted(GENERATORS)}")
    overrides = _load_config_file(args.config)
    overrides["seed"] = args.seed
    ds = GENERATORS[args.name](**overrides)
    out = resolve_path(args.out or f"{args.name}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    count = len(ds.graphs) if ds.is_multi else ds.graphs.num_nodes
    unit = "graphs" if ds.is_multi else "nodes"
    print(f"gen-data: {args.name} seed={args.seed} -> {out} ({count} {unit})")
    return 0


_TRAIN_DEFAULTS = {
    "learning_rate": 1e-3,
    "epochs": 200,
    "batch_size": 64,
    "weight_decay": 0.0,
    "seed": 0,
    "restarts": 1,
    "num_layers": 3,
    "hidden_dim": 20,
}


def cmd_train_target(args) -> int:
    cfg = merged_config(args, _TRAIN_DEFAULTS)
    ds, data = _load_graph_data(resolve_path(args.data))
    train_cfg = TrainConfig(
        learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        weight_decay=cfg["weight_decay"],
        seed=cfg["seed"],
        restarts=cfg["restarts"],
    )
    model, report = train_target(
        data, train_cfg, num_layers=cfg["num_layers"], hidden_dim=cfg["hidden_dim"], splits=ds.splits
    )
    out = resolve_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(out, model, config=cfg)
    acc = report["accuracy"]
    print(
        "train-target: %s head, test acc %.3f (train %.3f / valid %.3f) -> %s"
        % (model.head, acc["test"], acc["train"], acc["valid"], out)
    )
    return 0


def cmd_probe_maxhop(args) -> int:
    ds, data = _load_graph_data(resolve_path(args.data))
    model = load_model(resolve_path(args.model))
    g = data[0] if ds.is_multi else data
    rng = derive_rng(args.seed, "probe")
    probes = rng.choice(g.num_nodes, size=min(args.probes, g.num_nodes), replace=False)
    k = estimate_max_hop(model, g, probes, k_max=args.k_max)
    print(f"probe-maxhop: K={k} (probes={probes.size}, k_max={args.k_max})")
    if args.out:
        out = resolve_path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps(
                {"max_hop": k, "probes": int(probes.size), "k_max": args.k_max, "seed": args.seed},
                sort_keys=True,
            )
        )
    return 0


_EXPLAINER_DEFAULTS = {
    "embedding_dim": 20,
    "mode": "bidirectional",
    "supervision": "removal",
    "max_hop": None,
    "learning_rate": None,
    "epochs": 200,
    "batch_size": 64,
    "patience": 10,
    "weight_decay": 0.0,
    "seed": 0,
}


def cmd_train_explainer(args) -> int:
    cfg = merged_config(args, _EXPLAINER_DEFAULTS)
    ds, data = _load_graph_data(resolve_path(args.data))
    model = load_model(resolve_path(args.model))
    expl_cfg = ExplainerConfig(
        embedding_dim=cfg["embedding_dim"],
        mode=cfg["mode"],
        supervision=cfg["supervision"],
        max_hop=cfg["max_hop"],
        learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        patience=cfg["patience"],
        weight_decay=cfg["weight_decay"],
        seed=cfg["seed"],
    )
    explainer, report = train_explainer(model, data, expl_cfg, splits=ds.splits)
    out = resolve_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_explainer(out, explainer, config=cfg)
    print(
        "train-explainer: %s/%s K=%d, %d epochs, val loss %.5f -> %s"
        % (cfg["supervision"], cfg["mode"], report["max_hop"], report["epochs_run"], report["best_val_loss"], out)
    )
    return 0


def cmd_explain(args) -> int:
    ds, data = _load_graph_data(resolve_path(args.data))
    model = load_model(resolve_path(args.model))
    explainer = load_explainer(resolve_path(args.explainer))
    if args.targets:
        targets = np.array([int(t) for t in args.targets.split(",")], dtype=np.int64)
    else:
        targets = eval_targets(ds, args.all_nodes)
    results = explain(explainer, model, data, targets, batch_size=args.batch_size)
    out = resolve_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for res in results:
            fh.write(
                json.dumps(
                    {
                        "target": res.target,
                        "sources": res.sources.tolist(),
                        "scores": res.scores.tolist(),
                    }
                )
                + "\n"
            )
    _write_meta(out, {"targets": int(targets.size), "explainer": str(args.explainer)})
    print(f"explain: {len(results)} explanations -> {out}")
    return 0


def cmd_eval_fidelity(args) -> int:
    ds, data = _load_graph_data(resolve_path(args.data))
    model = load_model(resolve_path(args.model))
    explainer = load_explainer(resolve_path(args.explainer))
    targets = eval_targets(ds, args.all_nodes)
    expls = explain(explainer, model, data, targets)
    reports = [ev.fidelity_report(model, data, expls, method=args.method, workers=args.workers)]
    if not args.no_baseline:
        rng = derive_rng(args.seed, "random-baseline")
        rand = ev.random_explanations(data, targets, hops=explainer.max_hop, rng=rng)
        reports.append(ev.fidelity_report(model, data, rand, method="random", workers=args.workers))
    out = resolve_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ev.fidelity_to_csv(out, reports)
    _write_meta(out, {"targets": int(targets.size), "seed": args.seed, "method": args.method})
    figure = plot_fidelity(out, reports)
    plus, minus = ev.mean_fidelity(reports[0])
    print(
        "eval-fidelity: %s mean fid+ %.4f / fid- %.4f over %d targets -> %s (+ %s)"
        % (args.method, plus, minus, targets.size, out, figure)
    )
    return 0


def cmd_eval_auc(args) -> int:
    ds, data = _load_graph_data(resolve_path(args.data))
    model = load_model(resolve_path(args.model))
    explainer = load_explainer(resolve_path(args.explainer))
    if ds.motif_mask is None:
        raise DataError("dataset has no ground-truth motif mask")
    targets = eval_targets(ds, args.all_nodes)
    expls = explain(explainer, model, data, targets)
    if ds.is_multi:
        masks = {int(i): np.asarray(ds.motif_mask[int(i)], dtype=bool) for i in targets}
    else:
        masks = np.asarray(ds.motif_mask, dtype=bool)
    auc = ev.auc_ground_truth(expls, masks)
    print(f"eval-auc: AUC {auc:.4f} over {targets.size} targets")
    if args.out:
        out = resolve_path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps({"auc": auc, "targets": int(targets.size)}, sort_keys=True))
    return 0


def cmd_correlate(args) -> int:
    ds, data = _load_graph_data(resolve_path(args.data))
    if ds.is_multi:
        raise DataError("correlation studies run on a single node-classification graph")
    model = load_model(resolve_path(args.model))
    methods = args.methods.split(",")
    studies = [
        ev.correlation_study(model, data, method=m.strip(), pairs=args.pairs, seed=args.seed, hops=args.hops)
        for m in methods
    ]
    out = resolve_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ev.correlation_to_csv(out, studies)
    _write_meta(out, {"pairs": args.pairs, "seed": args.seed, "hops": args.hops})
    figure = plot_correlation(out, studies)
    summary = ", ".join(f"{s.method} r={s.r:.3f}" for s in studies)
    print(f"correlate: {summary} -> {out} (+ {figure})")
    return 0


def cmd_bench(args) -> int:
    ds, data = _load_graph_data(resolve_path(args.data))
    model = load_model(resolve_path(args.model))
    explainer = load_explainer(resolve_path(args.explainer))
    targets = eval_targets(ds, args.all_nodes)
    if args.limit:
        targets = targets[: args.limit]
    reports = {
        "amortized": ev.bench_throughput(
            lambda ts: explain(explainer, model, data, ts), targets, warmup=args.warmup, repeats=args.repeats
        )
    }
    if args.exact:
        if ds.is_multi:
            raise DataError("exact-oracle benchmarking runs on node tasks only")
        hops = explainer.max_hop
        eligible = [
            int(v)
            for v in targets
            if target_context(model, data, int(v), hops=hops).pool.size <= args.exact_cap
        ]
        if not eligible:
            raise DataError(f"no target has an enumerable neighborhood (<= {args.exact_cap} neighbors)")

        def run_exact(ts):
            for v in ts:
                exact_attribution_all(target_context(model, data, int(v), hops=hops))

        reports["exact"] = ev.bench_throughput(run_exact, eligible, warmup=args.warmup, repeats=args.repeats)
    out = resolve_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps({k: ev.throughput_payload(r) for k, r in reports.items()}, sort_keys=True, indent=2)
    )
    figure = plot_throughput(out, reports)
    summary = ", ".join(f"{k} {r.throughput:.1f}/s" for k, r in reports.items())
    print(f"bench: {summary} -> {out} (+ {figure})")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def _add_common(sub, *, config=True, seed=True):
    if config:
        sub.add_argument("--config", help="JSON file of config overrides")
    if seed:
        sub.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="graphxplain",
        description="Train GNN targets, learn amortized explainers, and evaluate explanation fidelity.",
        epilog=f"Relative paths resolve under ${DATA_DIR_VAR} when set. Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic benchmark dataset")
    p.add_argument("name", help=f"one of {sorted(GENERATORS)}")
    p.add_argument("--out", help="output path (default <name>.json)")
    _add_common(p)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-target", help="train the black-box GCN")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    for key in _TRAIN_DEFAULTS:
        kind = float if key in ("learning_rate", "weight_decay") else int
        p.add_argument(f"--{key.replace('_', '-')}", type=kind, default=None)
    p.add_argument("--config", help="JSON file of config overrides")
    p.set_defaults(fn=cmd_train_target)

    p = sub.add_parser("probe-maxhop", help="probe the receptive-field radius of a trained model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--probes", type=int, default=8)
    p.add_argument("--k-max", type=int, default=6)
    p.add_argument("--out")
    _add_common(p, config=False)
    p.set_defaults(fn=cmd_probe_maxhop)

    p = sub.add_parser("train-explainer", help="train the amortized explainer")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("removal", "mi"), default=None, dest="supervision",
                   help="supervision signal (default removal)")
    p.add_argument("--embedding", choices=("bidirectional", "single"), default=None, dest="mode",
                   help="embedding layout (default bidirectional)")
    for key in ("embedding_dim", "max_hop", "epochs", "batch_size", "patience"):
        p.add_argument(f"--{key.replace('_', '-')}", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON file of config overrides")
    p.set_defaults(fn=cmd_train_explainer)

    p = sub.add_parser("explain", help="emit ranked explanations as JSONL")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--explainer", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--targets", help="comma-separated ids (default: test split)")
    p.add_argument("--all-nodes", action="store_true")
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("eval-fidelity", help="fidelity curves as CSV plus a rendered figure")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--explainer", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="explainer", help="method label for CSV rows")
    p.add_argument("--all-nodes", action="store_true")
    p.add_argument("--no-baseline", action="store_true", help="skip the random-ranking baseline")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p, config=False)
    p.set_defaults(fn=cmd_eval_fidelity)

    p = sub.add_parser("eval-auc", help="explanation AUC against ground-truth motifs")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--explainer", required=True)
    p.add_argument("--out")
    p.add_argument("--all-nodes", action="store_true")
    p.set_defaults(fn=cmd_eval_auc)

    p = sub.add_parser("correlate", help="attribution vs Fidelity+ correlation study")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", default="removal,mi")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--hops", type=int, default=1)
    _add_common(p, config=False)
    p.set_defaults(fn=cmd_correlate)

    p = sub.add_parser("bench", help="explanation throughput benchmark")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--explainer", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--limit", type=int, help="cap the number of benchmarked targets")
    p.add_argument("--all-nodes", action="store_true")
    p.add_argument("--exact", action="store_true", help="also time the exact enumeration oracle")
    p.add_argument("--exact-cap", type=int, default=14)
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as err:
        return int(err.code or 0)
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"data error: missing file: {err.filename or err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
