"""Command line entry point: ``mgtraj gen-data | train | eval | grad-check``.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, gradsuite, nn
from .checkpoint import load_checkpoint, save_checkpoint
from .evaluate import evaluate, evaluation_indices, split_window
from .experiment import ExperimentManifest
from .metrics import R_MAX
from .model import make_batch
from .plots import fan_svg, pi_histogram_svg
from .sampling import STRATEGIES, write_predictions
from .sim import build_junction_scene, load_dataset, make_circle_toy, save_dataset, simulate_dataset
from .sim.toy import N_STARTS
from .training import ConfigError, TrainConfig, train

log = logging.getLogger("mgtraj")

SCENES = {"junction2": "two_way", "junction3": "three_way", "corridor": "corridor", "circle": None}
SCENE_IDS = {"two_way": "junction2", "three_way": "junction3", "corridor": "corridor"}
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Bad arguments or inputs; reported with exit code 2."""


# ---------------------------------------------------------------------------
# gen-data


def cmd_gen_data(args):
    out = Path(args.out)
    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.scene == "circle":
        per_start = max(1, args.n // N_STARTS)
        if per_start * N_STARTS != args.n:
            log.info("circle: %d records requested, writing %d (equal count per start)",
                     args.n, per_start * N_STARTS)
        ds = make_circle_toy(seed=args.seed, n_per_start=per_start)
    else:
        ds = simulate_dataset(build_junction_scene(SCENES[args.scene]), args.n, seed=args.seed)
    try:
        save_dataset(ds, out)
    except OSError as exc:
        raise UsageError(f"cannot write dataset to {out}: {exc}") from None
    config = {"command": "gen-data", "scene": args.scene, "n": args.n, "seed": args.seed}
    ExperimentManifest.create("gen-data", config, args.seed, out).write(out)
    print(f"wrote {len(ds)} records to {out}")
    return 0


# ---------------------------------------------------------------------------
# train


def _load_data(path):
    if path is None:
        raise UsageError("no dataset given (config field 'data' or --data)")
    path = Path(path)
    if not (path / "gt_index.json").is_file():
        raise UsageError(f"data: no dataset at {path}")
    return load_dataset(path)


def cmd_train(args):
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file {args.config} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for key in ("data", "out", "epochs", "seed", "model"):
        val = getattr(args, key)
        if val is not None:
            doc[key] = val
    cfg = TrainConfig.from_dict(doc)
    ds = _load_data(cfg.data)
    out = Path(cfg.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    train_idx, _ = ds.train_test_split()

    def progress(epoch, stats):
        print(f"epoch {epoch}: " + " ".join(f"{k}={v:.4f}" for k, v in stats.items()), flush=True)

    model, _ = train(cfg, ds.subset(train_idx), log_path=out / "train_log.csv", progress=progress)
    save_checkpoint(model, out, cfg.to_dict())
    ExperimentManifest.create("train", cfg.to_dict(), cfg.seed, cfg.data, out).write(out)
    print(f"checkpoint written to {out}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _eval_indices(ds, subset):
    idx = evaluation_indices(ds, multimodal=subset != "all")
    if subset == "split":
        kind = {v: k for k, v in SCENE_IDS.items()}.get(ds.scene_id)
        if kind is None:
            raise UsageError(f"subset 'split' needs a junction scene, got {ds.scene_id!r}")
        idx = idx[split_window(ds, build_junction_scene(kind).junction)[idx]]
    return idx


def cmd_eval(args):
    ckpt = Path(args.ckpt)
    if not (ckpt / "manifest.json").is_file():
        raise UsageError(f"ckpt: no checkpoint at {ckpt}")
    model, manifest = load_checkpoint(ckpt)
    train_cfg = manifest["config"].get("train") or {}
    expected = args.n_generators
    if args.config is not None:
        expected = TrainConfig.load(args.config).n_generators
        if train_cfg.get("model") in ("gan", "gan_l2", "infogan"):
            expected = 1
    if expected is not None and expected != manifest["n_generators"]:
        raise UsageError(f"n_generators: checkpoint has {manifest['n_generators']}, config expects {expected}")
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    ds = _load_data(args.data)
    idx = _eval_indices(ds, args.subset)
    if len(idx) == 0:
        raise UsageError("the dataset has no evaluation records")
    report, sets, _ = evaluate(model, ds, idx, k=args.k, strategy=args.strategy, r_max=args.r_max,
                               seed=args.seed)
    out = Path(args.out) if args.out else ckpt / "eval"
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out / "metrics.csv").write_text(report.csv_header() + "\n" + report.csv_row() + "\n", encoding="utf-8")
    write_predictions(out / "predictions.csv", sets)

    groups = ds.groups()
    shown, seen = [], set()
    for j, i in enumerate(idx):
        if ds.keys[i] not in seen:
            seen.add(ds.keys[i])
            shown.append(j)
        if len(shown) == 4:
            break
    gt = [ds.positions[groups[ds.keys[idx[j]]], 8:] for j in shown]
    fan = fan_svg(ds.grid, ds.positions[idx[shown], :8], gt, [sets[j].trajectories for j in shown],
                  [sets[j].generator_ids for j in shown], title=f"{ds.scene_id} predictions")
    (out / "fan.svg").write_text(fan, encoding="utf-8")
    n_g = manifest["n_generators"]
    counts = np.zeros(n_g, dtype=int)
    for ps in sets:
        counts += np.bincount(ps.generator_ids, minlength=n_g)
    with nn.no_grad():
        batch = make_batch(ds, idx[: min(len(idx), 256)])
        mean_pi = model.pi(model.encoder(batch)).data.mean(axis=0)
    (out / "pi_hist.svg").write_text(pi_histogram_svg(mean_pi, counts), encoding="utf-8")

    config = {"command": "eval", "checkpoint_config": manifest["config_hash"], "k": args.k,
              "strategy": args.strategy, "r_max": args.r_max, "subset": args.subset}
    ExperimentManifest.create("eval", config, args.seed, args.data, ckpt).write(out)
    print(report.to_json(), end="")
    return 0


# ---------------------------------------------------------------------------
# grad-check


def cmd_grad_check(args):
    seeds = 10 if args.quick else 100
    slow = 3 if args.quick else 20

    def show(r):
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} max rel err {r.error:.3e} (tol {r.tol:g})",
              flush=True)

    results = gradsuite.run(primitive_seeds=seeds, slow_seeds=slow, progress=show)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("gradient check failed: " + ", ".join(failed))
        return EXIT_NUMERIC
    print(f"all {len(results)} gradient checks passed")
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    p = argparse.ArgumentParser(prog="mgtraj", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"mgtraj {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="simulate a dataset")
    g.add_argument("--scene", required=True, choices=sorted(SCENES))
    g.add_argument("--n", type=int, default=5000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", parents=[common], help="train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--data")
    t.add_argument("--out")
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--model")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--k", type=int, default=20)
    e.add_argument("--strategy", choices=STRATEGIES, default="expectation")
    e.add_argument("--r-max", type=float, default=R_MAX)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--subset", choices=("all", "multimodal", "split"), default="all",
                   help="which held-out records to score")
    e.add_argument("--config", help="training config to check the checkpoint against")
    e.add_argument("--n-generators", type=int, help="expected number of generators")
    e.add_argument("--out", help="output directory (default: <ckpt>/eval)")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("grad-check", parents=[common], help="run the finite-difference gradient suite")
    c.add_argument("--quick", action="store_true", help="fewer random cases per primitive")
    c.set_defaults(func=cmd_grad_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except nn.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
