"""Command-line entry point.

Each subcommand wraps one pipeline stage and writes JSON or delimited
text, to ``--out`` when given and to stdout otherwise. Any failure prints
``error: ...`` on stderr and exits with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .fingerprint import VALID_EPSILON, compute_fingerprints
from .graph import dataset_stats, load_edge_list, load_labels, stratified_split
from .harness import (SWEEPABLE, Dataset, RunConfig, ablation_table, align_rows,
                      preprocess, run_pipeline, sweep)
from .latent import (apply_ablation, default_latent_target, isomap_embed, partition_neighbors,
                     select_rho)
from .model import ABLATIONS, accuracy, assemble_input, predict, train
from .structural import build_structural_features
from .synthetic import SyntheticSpec, generate_synthetic


def _ratios(text):
    parts = tuple(float(x) for x in text.split(","))
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated ratios")
    return parts


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out=None):
    _emit(json.dumps(obj, indent=2) + "\n", out)


def _load_config(args) -> RunConfig:
    values = io.read_key_values(args.config) if args.config else {}
    base = Path(args.config).parent if args.config else Path(".")
    for key in ("graph", "features", "labels", "cache_dir"):
        if key in values and not Path(values[key]).is_absolute():
            values[key] = str(base / values[key])
    for item in args.set or ():
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return RunConfig.from_mapping(values)


def _dataset(cfg: RunConfig) -> Dataset:
    if not (cfg.graph and cfg.features and cfg.labels):
        raise ValueError("config must name graph, features and labels files")
    return Dataset.from_files(cfg.graph, cfg.features, cfg.labels)


# ---------------------------------------------------------------- stage commands

def cmd_stats(args):
    g = load_edge_list(args.graph)
    labels = align_rows(g, load_labels(args.labels), "labels")
    _emit_json(dataset_stats(g, labels).as_dict(), args.out)


def cmd_split(args):
    labels = load_labels(args.labels)
    masks = stratified_split(labels, args.ratios, seed=args.seed)
    io.write_masks(args.out or sys.stdout, *masks)


def cmd_fingerprint(args):
    g = load_edge_list(args.graph)
    fps = compute_fingerprints(g, k=args.k, b=args.b, epsilon=args.eps, c=args.c,
                               mode=args.mode, method=args.method)
    io.write_fingerprints(args.out or sys.stdout, fps)


def cmd_features(args):
    fps = io.read_fingerprints(args.fingerprints)
    g = load_edge_list(args.graph) if args.graph else None
    if g is not None and args.k is None:
        raise ValueError("--graph needs --k to scope the candidate pairs")
    S = build_structural_features(fps, g, args.k)
    io.write_structural(args.out or sys.stdout, S)


def cmd_embed(args):
    g = load_edge_list(args.graph)
    emb = isomap_embed(g, m=args.dims)
    io.write_coords(args.out or sys.stdout, emb)


def cmd_partition(args):
    g = load_edge_list(args.graph)
    emb = io.read_coords(args.coords) if args.coords else isomap_embed(g, m=2)
    if args.rho == "auto":
        rho = select_rho(emb, default_latent_target(g), g)
    else:
        rho = float(args.rho)
    part = apply_ablation(partition_neighbors(g, emb, rho), args.ablation)
    io.write_relations(args.out or sys.stdout, part)
    print(json.dumps({"rho": rho, "entries": int(part.center.size),
                      "relations": int(part.num_relations)}), file=sys.stderr)


# ---------------------------------------------------------------- training

def _prepared(cfg: RunConfig, seed: int, masks_path=None):
    data = _dataset(cfg)
    pre = preprocess(data, cfg)
    part = apply_ablation(pre.partition, cfg.ablation)
    inputs = assemble_input(data.features, pre.S, zero_structure=cfg.ablation == "no_structure")
    if masks_path:
        masks = io.read_masks(masks_path)
    else:
        masks = stratified_split(data.labels, cfg.ratios, seed=seed)
    return data, part, inputs, masks


def cmd_train(args):
    cfg = _load_config(args)
    seed = cfg.model.seed
    data, part, inputs, (tr, va, te) = _prepared(cfg, seed, args.masks)
    mcfg = replace(cfg.model, ablation=cfg.ablation)
    log = None if args.quiet else (lambda e, l, v: print(f"{e} {l:.6f} {v:.4f}"))
    res = train(mcfg, inputs, part, data.labels, tr, va, te,
                num_classes=int(data.labels.max()) + 1, log=log)
    if args.params_out:
        io.write_params(args.params_out, res.params)
    _emit(json.dumps(res.summary()) + "\n", args.out)


def cmd_eval(args):
    cfg = _load_config(args)
    data, part, inputs, (tr, va, te) = _prepared(cfg, cfg.model.seed, args.masks)
    params = io.read_params(args.params)
    logits = predict(params, replace(cfg.model, ablation=cfg.ablation), inputs, part)
    _emit_json({"train_acc": accuracy(logits, data.labels, tr),
                "val_acc": accuracy(logits, data.labels, va),
                "test_acc": accuracy(logits, data.labels, te)}, args.out)


def cmd_run(args):
    cfg = _load_config(args)
    _emit_json(run_pipeline(cfg).as_dict(), args.out)


def _grid(param, text):
    if param == "bc":
        pairs = []
        for item in text.split(";"):
            b, c = item.split(",")
            pairs.append((float(b), float(c)))
        return pairs
    return [float(v) if param in ("b", "c") else int(v) for v in text.split(",")]


def cmd_sweep(args):
    cfg = _load_config(args)
    rows = sweep(cfg, args.param, _grid(args.param, args.values), _dataset(cfg))
    _emit_json(rows, args.out)


def cmd_ablate(args):
    cfg = _load_config(args)
    variants = tuple(args.variants.split(",")) if args.variants else (
        "full", "no_geometry", "no_latent", "rwr_weights", "no_structure")
    _emit_json(ablation_table(cfg, _dataset(cfg), variants), args.out)


def cmd_synth(args):
    values = {}
    for item in args.set or ():
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    fields = SyntheticSpec.__dataclass_fields__
    unknown = set(values) - set(fields)
    if unknown:
        raise ValueError(f"unknown synthetic settings {sorted(unknown)}")
    kw = {k: type(getattr(SyntheticSpec, k))(v) for k, v in values.items()}
    spec = SyntheticSpec(**kw)
    g, table = generate_synthetic(spec, args.ratios)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_edge_list(out / "graph.txt", g)
    np.savetxt(out / "features.txt", table.features, fmt="%g")
    np.savetxt(out / "labels.txt", table.labels, fmt="%d")
    io.write_masks(out / "masks.txt", table.train, table.val, table.test)
    io.write_key_values(out / "config.txt", {"graph": "graph.txt", "features": "features.txt",
                                             "labels": "labels.txt", "seeds": "0..4"})
    _emit_json({"nodes": g.num_nodes, "edges": g.num_edges, "dir": str(out),
                "stats": dataset_stats(g, table.labels).as_dict()})


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wgcn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stats", help="direction/degree statistics of a labelled graph")
    s.add_argument("graph")
    s.add_argument("labels")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("split", help="stratified train/val/test masks")
    s.add_argument("labels")
    s.add_argument("--ratios", type=_ratios, default=(0.6, 0.2, 0.2))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("fingerprint", help="structural fingerprints of every node")
    s.add_argument("graph")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--b", type=float, default=0.3)
    s.add_argument("--eps", type=int, default=3, choices=VALID_EPSILON)
    s.add_argument("--c", type=float, default=0.5)
    s.add_argument("--mode", choices=("ddrwr", "rwr"), default="ddrwr")
    s.add_argument("--method", choices=("auto", "direct", "iterate"), default="auto")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fingerprint)

    s = sub.add_parser("features", help="weighted-Jaccard structural features")
    s.add_argument("--fingerprints", required=True)
    s.add_argument("--graph", help="restrict pairs to the 2k-hop ball (needs --k)")
    s.add_argument("--k", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("embed", help="Isomap coordinates of the undirected graph")
    s.add_argument("graph")
    s.add_argument("--dims", type=int, default=2)
    s.add_argument("--out")
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("partition", help="relation partition of every neighborhood")
    s.add_argument("graph")
    s.add_argument("--coords", help="coordinate file from 'embed'; recomputed if omitted")
    s.add_argument("--rho", default="auto")
    s.add_argument("--ablation", choices=ABLATIONS, default="full")
    s.add_argument("--out")
    s.set_defaults(func=cmd_partition)

    def with_config(sp_):
        sp_.add_argument("--config", help="key = value file")
        sp_.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a config entry (repeatable)")
        sp_.add_argument("--out")

    s = sub.add_parser("train", help="train one model; per-epoch rows then a JSON summary")
    with_config(s)
    s.add_argument("--masks", help="mask file from 'split'; default splits with the model seed")
    s.add_argument("--params-out")
    s.add_argument("--quiet", action="store_true", help="skip per-epoch rows")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="accuracy of saved parameters")
    with_config(s)
    s.add_argument("--params", required=True)
    s.add_argument("--masks")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("run", help="full pipeline over all configured seeds")
    with_config(s)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one full run per grid value")
    with_config(s)
    s.add_argument("--param", choices=SWEEPABLE, required=True)
    s.add_argument("--values", required=True,
                   help="comma list, or 'b,c;b,c;...' for --param bc")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("ablate", help="accuracy table over ablation variants")
    with_config(s)
    s.add_argument("--variants", help="comma list; default all")
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("synth", help="write a synthetic dataset directory")
    s.add_argument("--out", required=True)
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--ratios", type=_ratios, default=(0.6, 0.2, 0.2))
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
