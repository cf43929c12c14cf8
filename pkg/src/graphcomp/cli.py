"""``graphcomp`` command line.

Every subcommand writes one JSON document to ``--out`` (or stdout). Exit
status is 0 on success, 1 for invalid input and 2 for runtime or numerical
failures.

``complement`` persists its results under ``--cache`` so that ``train``,
``evaluate`` and ``spectral-check`` can reuse them without re-complementing.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import FILTER_MODELS, PRESETS, SyntheticSpec, filter_sweep, homophily_ratio, preset, spearman, synth_graph
from .cgc import assemble_complemented_graph, cgc_forward, load_checkpoint, save_checkpoint
from .complementation import ComplementEdges
from .discrimination import VERDICTS, discriminate
from .exceptions import GraphCompError, ValidationError
from .io import load_dataset, read_edges, save_dataset, split_nodes
from .nn import accuracy
from .pipeline import (
    RunConfig,
    complement_summary,
    dumps_report,
    pipeline,
    run_cgc_stage,
    run_complement_stage,
    stage_seed,
)
from .spectral import psd_check, verify_proposition1

log = logging.getLogger("graphcomp")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

MODEL_FILE = "model.json"
EDGES_FILE = "complement_edges.txt"
STATE_FILE = "state.json"
CHECKPOINT_FILE = "checkpoint.json"


def load_config(path: Optional[str], seed: Optional[int]) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
        cfg = RunConfig.from_json(text)
    return cfg if seed is None else cfg.with_seed(seed)


def _emit(doc, out: Optional[str]) -> None:
    text = dumps_report(doc)
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _need(args, name):
    if getattr(args, name) is None:
        raise ValidationError(f"--{name} is required for '{args.command}'")
    return getattr(args, name)


def _dataset(args):
    return load_dataset(_need(args, "dataset"))


def _split(g, cfg):
    return split_nodes(g, cfg.split_ratios, stage_seed(cfg.seed, "split"))


def _discriminate(g, cfg):
    dc = cfg.discrimination
    return discriminate(g, dc.n_resamples, dc.threshold, stage_seed(cfg.seed, "discriminate"))


# cache -------------------------------------------------------------------

def write_cache(root, model, edges: ComplementEdges, state: dict) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    (root / MODEL_FILE).write_text(model.to_json(), encoding="utf-8")
    with open(root / EDGES_FILE, "w", encoding="utf-8") as fh:
        fh.write(f"# {edges.kind} k={edges.k_per_node}\n")
        fh.writelines(f"{i} {j}\n" for i, j in edges.edges)
    (root / STATE_FILE).write_text(json.dumps(state, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_cache(root, g, cfg: RunConfig):
    """Return ``(verdict, ComplementEdges)`` from a cache written by ``complement``."""
    root = Path(root)
    state_path = root / STATE_FILE
    if not state_path.exists():
        raise ValidationError(f"no cached complement in {root}; run 'complement' first")
    state = json.loads(state_path.read_text(encoding="utf-8"))
    if state.get("n_nodes") != g.n_nodes:
        raise ValidationError(f"cache was built for {state.get('n_nodes')} nodes, dataset has {g.n_nodes}")
    if state.get("seed") != cfg.seed:
        raise ValidationError(f"cache was built with seed {state.get('seed')}, config seed is {cfg.seed}")
    if state.get("verdict") not in VERDICTS:
        raise ValidationError(f"cache state has an invalid verdict {state.get('verdict')!r}")
    raw, _ = read_edges(root / EDGES_FILE)
    edges = ComplementEdges(raw, state["kind"], int(state["k_per_node"]))
    return state["verdict"], edges


# subcommands ---------------------------------------------------------------

def cmd_discriminate(args, cfg):
    return _discriminate(_dataset(args), cfg).to_dict()


def cmd_complement(args, cfg):
    g = _dataset(args)
    train, _, _ = _split(g, cfg)
    disc = _discriminate(g, cfg)
    model, edges = run_complement_stage(g, cfg, train, disc.verdict)
    summary = complement_summary(edges, g.labels)
    if args.cache is not None:
        write_cache(args.cache, model, edges, {
            "seed": cfg.seed, "n_nodes": g.n_nodes, "verdict": disc.verdict,
            "kind": edges.kind, "k_per_node": edges.k_per_node,
        })
    return {"discrimination": disc.to_dict(), "verdict": disc.verdict, "complement": summary,
            "loss_history": model.loss_history}


def _complemented(args, g, cfg):
    split = _split(g, cfg)
    if args.cache is not None:
        verdict, edges = read_cache(args.cache, g, cfg)
    else:
        verdict = _discriminate(g, cfg).verdict
        _, edges = run_complement_stage(g, cfg, split[0], verdict)
    return verdict, edges, split


def cmd_train(args, cfg):
    g = _dataset(args)
    verdict, edges, split = _complemented(args, g, cfg)
    report = run_cgc_stage(g, cfg, edges, verdict, split)
    if args.cache is not None:
        ckpt = save_checkpoint(report.final_params, stage_seed(cfg.seed, "cgc"), cfg.cgc.epochs)
        (Path(args.cache) / CHECKPOINT_FILE).write_text(ckpt, encoding="utf-8")
    return {"verdict": verdict, "train": report.to_dict()}


def cmd_evaluate(args, cfg):
    g = _dataset(args)
    cache = Path(_need(args, "cache"))
    ckpt = cache / CHECKPOINT_FILE
    if not ckpt.exists():
        raise ValidationError(f"no checkpoint in {cache}; run 'train' first")
    params = load_checkpoint(ckpt.read_text(encoding="utf-8"))
    verdict, edges = read_cache(cache, g, cfg)
    split = _split(g, cfg)
    cg = assemble_complemented_graph(g, edges, verdict, split)
    logits = cgc_forward(cg, params)
    acc = {name: accuracy(logits, g.labels, idx) for name, idx in zip(("train", "val", "test"), split)}
    return {"verdict": verdict, "accuracy": acc, "coefficients": params.to_dict(include_weights=False)}


def cmd_spectral_check(args, cfg):
    g = _dataset(args)
    verdict, edges, split = _complemented(args, g, cfg)
    cg = assemble_complemented_graph(g, edges, verdict, split)
    seed = stage_seed(cfg.seed, "cgc")
    return {"proposition": verify_proposition1(cg, seed=seed).to_dict(), "psd": psd_check(cg).to_dict()}


def _synth_spec(args) -> SyntheticSpec:
    base = preset(args.preset) if args.preset else SyntheticSpec()
    overrides = {k: v for k, v in {
        "n_nodes": args.n_nodes, "n_classes": args.n_classes, "n_edges": args.n_edges,
        "target_homophily": args.homophily, "noise": args.noise, "n_features": args.n_features,
    }.items() if v is not None}
    d = {f: getattr(base, f) for f in base.__dataclass_fields__ if f != "source"}
    d.update(overrides)
    d["seed"] = args.seed if args.seed is not None else 0
    return SyntheticSpec(**d)


def cmd_synth(args, cfg):
    spec = _synth_spec(args)
    g = synth_graph(spec)
    save_dataset(g, _need(args, "dataset"))
    spec_doc = {f: getattr(spec, f) for f in spec.__dataclass_fields__ if f != "source"}
    return {"spec": spec_doc, "dataset": str(args.dataset), "n_nodes": g.n_nodes, "n_edges": g.n_edges,
            "homophily": homophily_ratio(g.edges, g.labels).to_dict()}


def _floats(s):
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {s!r}") from None


def cmd_sweep(args, cfg):
    base = _synth_spec(args)
    seeds = [int(v) for v in _floats(args.seeds)]
    grid = _floats(args.grid)
    curve = filter_sweep(grid, args.model, base, seeds, args.self_weight, args.epochs)
    rho = spearman([p["x"] for p in curve], [p["y"] for p in curve]) if len(curve) > 1 else None
    return {"model": args.model, "curve": curve, "spearman": rho}


def cmd_pipeline(args, cfg):
    return pipeline(cfg, _need(args, "dataset"))


COMMANDS = {
    "discriminate": (cmd_discriminate, "KS test of a dataset's edges against random pairs"),
    "complement": (cmd_complement, "train the complement encoder and synthesize the complementary half"),
    "train": (cmd_train, "train CGC on the complemented graph"),
    "evaluate": (cmd_evaluate, "accuracy of a trained checkpoint on each split"),
    "spectral-check": (cmd_spectral_check, "dense spectral checks on the complemented graph"),
    "synth": (cmd_synth, "write a planted-homophily synthetic dataset"),
    "sweep": (cmd_sweep, "single-filter accuracy across homophily levels"),
    "pipeline": (cmd_pipeline, "discriminate, complement and train in one run"),
}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are invalid input, not runtime failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphcomp", description="Discriminate, complement and classify graph datasets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON file")
    common.add_argument("--dataset", help="dataset directory (edges.txt, features.csv, labels.txt)")
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--seed", type=int, help="override the config's root seed")
    common.add_argument("--cache", help="directory holding cached complement results")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        if name in ("synth", "sweep"):
            p.add_argument("--preset", choices=sorted(PRESETS))
            p.add_argument("--n-nodes", type=int)
            p.add_argument("--n-classes", type=int)
            p.add_argument("--n-edges", type=int)
            p.add_argument("--n-features", type=int)
            p.add_argument("--homophily", type=float, help="target homophily in [0, 1]")
            p.add_argument("--noise", type=float)
        if name == "sweep":
            p.add_argument("--model", choices=FILTER_MODELS, default="low-pass-only")
            p.add_argument("--grid", default="0.1,0.3,0.5,0.7,0.9")
            p.add_argument("--seeds", default="0,1,2")
            p.add_argument("--self-weight", type=float, default=1.0)
            p.add_argument("--epochs", type=int, default=200)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fn = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config, args.seed)
        doc = fn(args, cfg)
        _emit(doc, args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GraphCompError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
