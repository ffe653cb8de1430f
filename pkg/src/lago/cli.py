"""Batch command line: synthetic generation, inference runs, budget sweeps,
oracle checks, and fusion-weight calibration.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from lago import calibrate as calibrate_mod
from lago import synth
from lago.aggregation import classify
from lago.config import ConfigError, RunConfig, load_config
from lago.features import BundleFormatError, FeatureBundle, load_bundle, save_bundle
from lago.search import search_top_k_crops


class InputError(ValueError):
    """Bad user input (missing files, malformed config, inconsistent data)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; input errors are 1
        self.print_usage(sys.stderr)
        raise InputError(message)


def _workers() -> int:
    env = os.environ.get("LAGO_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise InputError(f"LAGO_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise InputError("LAGO_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _fmt(x: float) -> str:
    return repr(float(x))


def _load_bundles(directory: str) -> list[FeatureBundle]:
    root = Path(directory)
    if not root.is_dir():
        raise InputError(f"bundle directory not found: {directory}")
    paths = sorted(root.glob("*.lago"))
    if not paths:
        raise InputError(f"no .lago bundles in {directory}")
    try:
        bundles = [load_bundle(p) for p in paths]
    except BundleFormatError as exc:
        raise InputError(str(exc)) from exc
    ys = {b.num_classes for b in bundles}
    if len(ys) != 1:
        raise InputError(f"bundles disagree on class count: {sorted(ys)}")
    return sorted(bundles, key=lambda b: b.image_id)


def _run_config(args) -> RunConfig:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        raise InputError(str(exc)) from exc
    if getattr(args, "seed", None) is not None:
        cfg.rng_seed = args.seed
    if getattr(args, "lam", None) is not None:
        cfg.lam = args.lam
    return cfg


def _classify_all(
    bundles: list[FeatureBundle], cfg: RunConfig, views: int | None = None, strategy: str = "lago"
):
    pipe = cfg.pipeline()
    agg = cfg.aggregation(views=views)

    def one(bundle: FeatureBundle):
        return classify(bundle, pipe, agg, rng_seed=cfg.rng_seed, strategy=strategy)

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(one, bundles))
    return sorted(results, key=lambda r: r.image_id)


def _accuracy(results, bundles) -> float:
    truth = {b.image_id: b.ground_truth for b in bundles}
    labelled = [r for r in results if truth[r.image_id] is not None]
    if not labelled:
        raise InputError("accuracy requires ground-truth labels in the bundles")
    correct = sum(1 for r in labelled if r.predicted == truth[r.image_id])
    return correct / len(labelled)


# --- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    try:
        specs = synth.load_suite(args.suite)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read suite {args.suite}: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        bundle = synth.make_scene(spec)
        save_bundle(bundle, out / f"{bundle.image_id}.lago")
    if not specs:
        print("warning: empty suite, no bundles written", file=sys.stderr)
    print(f"wrote {len(specs)} bundle(s) to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = _run_config(args)
    bundles = _load_bundles(args.bundles)
    results = _classify_all(bundles, cfg)

    y = bundles[0].num_classes
    truth = {b.image_id: b.ground_truth for b in bundles}
    header = ["image_id", "predicted", "ground_truth", "confidence", "gamma"]
    header += [f"z_{i}" for i in range(y)]
    lines = [",".join(header)]
    for r in results:
        gt = truth[r.image_id]
        row = [
            r.image_id,
            str(r.predicted),
            "" if gt is None else str(gt),
            _fmt(r.confidence),
            _fmt(r.gamma),
        ]
        row += [_fmt(v) for v in r.z_final]
        lines.append(",".join(row))
    Path(args.out).write_text("\n".join(lines) + "\n")

    if args.crops:
        dump = {}
        for r in results:
            dump[r.image_id] = {
                "confidence": r.confidence,
                "gamma": r.gamma,
                "stage1": [list(c.box.as_tuple()) + [c.s_combined] for c in r.stage_one.crops],
                "final": [
                    list(c.box.as_tuple()) + [c.s_combined, c.origin.value] for c in r.ranked
                ],
            }
        Path(args.crops).write_text(json.dumps(dump, indent=2, sort_keys=True) + "\n")

    if args.cache:
        cache_dir = Path(args.cache)
        cache_dir.mkdir(parents=True, exist_ok=True)
        for r in results:
            gt = truth[r.image_id]
            if gt is None:
                raise InputError(f"{r.image_id}: score caches require ground-truth labels")
            entry = calibrate_mod.cache_entry_from_result(r, gt)
            calibrate_mod.save_cache_entry(entry, cache_dir / f"{r.image_id}.json")

    if all(truth[r.image_id] is not None for r in results):
        print(f"accuracy {_fmt(_accuracy(results, bundles))} over {len(results)} image(s)")
    else:
        print(f"classified {len(results)} image(s)")
    return 0


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    bundles = _load_bundles(args.bundles)
    try:
        budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
    except ValueError as exc:
        raise InputError(f"bad budget list {args.budgets!r}") from exc
    if not budgets:
        raise InputError("budget list is empty")
    lines = ["budget,strategy,accuracy"]
    for budget in budgets:
        for strategy in ("lago", "random"):
            results = _classify_all(bundles, cfg, views=budget, strategy=strategy)
            lines.append(f"{budget},{strategy},{_fmt(_accuracy(results, bundles))}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"swept {len(budgets)} budget(s) over {len(bundles)} image(s)")
    return 0


def cmd_oracle(args) -> int:
    try:
        bundle = load_bundle(args.bundle)
    except (OSError, BundleFormatError) as exc:
        raise InputError(str(exc)) from exc
    cfg = _run_config(args)
    gamma = args.gamma
    w_text = None
    if gamma != 0.0:
        if bundle.ground_truth is None:
            raise InputError("gamma > 0 needs a ground-truth class to pick the text prototype")
        w_text = bundle.text_bank.classes[bundle.ground_truth].prototype

    search_cfg = cfg.pipeline().search
    oracle = synth.brute_force_best_box(bundle, w_text, gamma, args.quantize, search_cfg.min_box)
    best = None
    for b0 in bundle.proposals:
        for crop in search_top_k_crops(bundle, b0, w_text, gamma, search_cfg):
            if best is None or crop.s_combined > best.s_combined:
                best = crop
    assert best is not None

    report = {
        "image_id": bundle.image_id,
        "gamma": gamma,
        "quantize": args.quantize,
        "proposals": len(bundle.proposals),
        "oracle_box": list(oracle.box.as_tuple()),
        "oracle_score": oracle.s_combined,
        "search_box": list(best.box.as_tuple()),
        "search_score": best.s_combined,
        "ratio": best.s_combined / oracle.s_combined,
        # A lattice coarser than the patch grid can sit below the continuous optimum.
        "quantize_below_grid_resolution": args.quantize < max(bundle.grid.height, bundle.grid.width),
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"search/oracle ratio {_fmt(report['ratio'])}")
    return 0


def _grid(arg: str, name: str) -> list[float]:
    try:
        vals = [float(v) for v in arg.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad {name} grid {arg!r}") from exc
    if not vals:
        raise InputError(f"{name} grid is empty")
    return vals


def cmd_calibrate(args) -> int:
    cache = calibrate_mod.load_cache(args.cache)
    if not cache:
        raise InputError(f"no cache entries in {args.cache}")
    betas = _grid(args.grid_beta, "beta")
    alphas = _grid(args.grid_alpha, "alpha")
    lambdas = _grid(args.grid_lambda, "lambda")
    result = calibrate_mod.grid_search(cache, betas, alphas, lambdas)
    payload = {
        "beta": result.beta,
        "alpha_dc": result.alpha_dc,
        "lambda": result.lam,
        "accuracy": result.accuracy,
        "grid_sizes": [len(set(betas)), len(set(alphas)), len(set(lambdas))],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(
        f"best beta={_fmt(result.beta)} alpha_dc={_fmt(result.alpha_dc)} "
        f"lambda={_fmt(result.lam)} accuracy={_fmt(result.accuracy)}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lago", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate bundles from a scene suite")
    p.add_argument("--suite", required=True, help="JSON list of scene specs")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="classify every bundle in a directory")
    p.add_argument("--bundles", required=True)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--crops", default=None, help="optional ranked-crop JSON dump")
    p.add_argument("--cache", default=None, help="optional score-cache directory for calibration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="accuracy vs view budget, lago and random strategies")
    p.add_argument("--bundles", required=True)
    p.add_argument("--budgets", required=True, help="comma-separated view counts")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="search quality against the brute-force lattice")
    p.add_argument("--bundle", required=True, help="one .lago file")
    p.add_argument("--quantize", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("calibrate", help="grid-search fusion weights on a score cache")
    p.add_argument("--cache", required=True)
    p.add_argument("--grid-beta", required=True)
    p.add_argument("--grid-alpha", required=True)
    p.add_argument("--grid-lambda", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
