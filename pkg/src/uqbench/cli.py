"""Command-line surface: eval, curves, toy, gradcheck, selftest.

Exit codes: 0 success, 1 internal failure, 2 user/input error. Every run
prints its resolved configuration. Manifest entries may be processed by a
small thread pool capped by the optional UQBENCH_THREADS variable; outputs
are written in entry order so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, nn, viz
from .grid import Field, ValidityMask, extract_valid
from .io import (
    InputError,
    export_curves_csv,
    export_report_json,
    format_float,
    load_manifest,
    read_mask_pgm,
    read_pfm,
)
from .loss import bce_loss, gaussian_nll, laplacian_nll, mse_loss
from .metrics import combine_reports, depth_error_maps, depth_report, epe_map, flow_report
from .reference import run_selftest
from .sparsify import (
    SparsificationConfig,
    ause_dataset_wise,
    ause_image_wise,
    auroc,
    reliability_labels_depth,
    reliability_labels_flow,
    sparsification_result,
)
from .toy1d import METHODS, ToyConfig, run_toy

_DEFAULTS = {"m": 0.05, "normalize": True, "thr": 1.25, "flow_k": 2.0}


def _print_config(command: str, config: dict):
    print(f"uqbench {command} config: {json.dumps(config, sort_keys=True)}")


def _thread_count(n_entries: int) -> int:
    cap = os.environ.get("UQBENCH_THREADS")
    if cap is not None:
        try:
            cap = max(1, int(cap))
        except ValueError as exc:
            raise InputError(f"UQBENCH_THREADS must be an integer, got {cap!r}") from exc
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_entries, cap))


def _resolve_eval_options(args, manifest) -> dict:
    opts = manifest.options
    cfg = {
        "task": manifest.task,
        "m": args.m if args.m is not None else opts.get("m", _DEFAULTS["m"]),
        "thr": args.thr if args.thr is not None else opts.get("thr", _DEFAULTS["thr"]),
        "flow_k": args.flow_k
        if args.flow_k is not None
        else opts.get("flow_k", _DEFAULTS["flow_k"]),
    }
    if args.no_normalize:
        cfg["normalize"] = False
    else:
        cfg["normalize"] = bool(opts.get("normalize", _DEFAULTS["normalize"]))
    clip = args.clip_depth if args.clip_depth is not None else opts.get("depth_clip")
    if clip is not None:
        lo, hi = float(clip[0]), float(clip[1])
        if not 0 < lo < hi:
            raise InputError(f"depth clip range must satisfy 0 < min < max, got {clip}")
        cfg["depth_clip"] = [lo, hi]
    else:
        cfg["depth_clip"] = None
    return cfg


@dataclass
class _EntryData:
    errors: dict          # variant name -> PixelSeries of per-pixel errors
    scores: object        # PixelSeries of uncertainty values
    labels: np.ndarray    # reliable flags per valid pixel
    report: object        # MetricReport


def _load_entry(entry, task: str, cfg: dict) -> _EntryData:
    channels = 2 if task == "flow" else 1
    pred = read_pfm(entry.prediction_path, channels)
    gt = read_pfm(entry.ground_truth_path, channels)
    unc = read_pfm(entry.uncertainty_path, 1)
    if entry.mask_path is not None:
        mask = read_mask_pgm(entry.mask_path)
    else:
        mask = ValidityMask.all_valid(gt.height, gt.width)
    if (unc.height, unc.width) != (gt.height, gt.width):
        raise InputError(
            f"{entry.uncertainty_path}: uncertainty shape "
            f"({unc.height}, {unc.width}) does not match ground truth"
        )
    if task == "depth" and cfg["depth_clip"] is not None:
        lo, hi = cfg["depth_clip"]
        d = gt.data[:, :, 0]
        mask = ValidityMask(mask.valid & (d >= lo) & (d <= hi))
        if mask.count_valid == 0:
            raise InputError(
                f"{entry.ground_truth_path}: no valid pixels left after depth clipping"
            )
        pred = Field(np.clip(pred.data, lo, hi))
    scores = extract_valid(unc, mask)
    if task == "depth":
        maps = depth_error_maps(pred, gt, mask)
        errors = {
            "rmse": extract_valid(maps["sq_err"], mask),
            "absrel": extract_valid(maps["absrel_err"], mask),
        }
        labels = reliability_labels_depth(pred, gt, mask, cfg["thr"]).labels
        report = depth_report(pred, gt, mask, cfg["thr"])
    else:
        emap = epe_map(pred, gt, mask)
        errors = {"epe": extract_valid(emap, mask)}
        labels = reliability_labels_flow(pred, gt, mask, cfg["flow_k"]).labels
        report = flow_report(pred, gt, mask)
    return _EntryData(errors, scores, labels, report)


def _load_all_entries(manifest, cfg) -> list[_EntryData]:
    workers = _thread_count(len(manifest.entries))
    if workers == 1:
        return [_load_entry(e, manifest.task, cfg) for e in manifest.entries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda e: _load_entry(e, manifest.task, cfg), manifest.entries)
        )


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = _resolve_eval_options(args, manifest)
    cfg["ause"] = args.ause
    cfg["manifest"] = args.manifest
    _print_config("eval", cfg)
    sp_cfg = SparsificationConfig(cfg["m"], cfg["normalize"])
    entries = _load_all_entries(manifest, cfg)

    variants = ("rmse", "absrel") if manifest.task == "depth" else ("epe",)
    ause_block = {"mode": args.ause}
    for variant in variants:
        statistic = "rmse" if variant == "rmse" else "mean"
        pairs = [(e.errors[variant], e.scores) for e in entries]
        if args.ause == "image":
            agg = ause_image_wise(pairs, sp_cfg, statistic)
            ause_block[variant] = agg.value
            ause_block["n_images_skipped"] = agg.n_skipped
        else:
            ause_block[variant] = ause_dataset_wise(pairs, sp_cfg, statistic)

    from .grid import PixelSeries
    from .sparsify import ReliabilityLabels

    pooled_scores = PixelSeries.from_values(
        np.concatenate([e.scores.values for e in entries])
    )
    pooled_labels = ReliabilityLabels(np.concatenate([e.labels for e in entries]))
    try:
        pooled_auroc = auroc(pooled_scores, pooled_labels)
    except ValueError as exc:
        print(f"warning: AUROC undefined ({exc})", file=sys.stderr)
        pooled_auroc = None

    report = {
        "tool": {"name": "uqbench", "version": __version__},
        "config": cfg,
        "n_entries": len(entries),
        "metrics": combine_reports([e.report for e in entries]).as_dict(),
        "per_entry_metrics": [e.report.as_dict() for e in entries],
        "ause": ause_block,
        "auroc": pooled_auroc,
    }
    export_report_json(report, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_curves(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = _resolve_eval_options(args, manifest)
    cfg["out"] = args.out
    cfg["svg"] = args.svg
    _print_config("curves", cfg)
    sp_cfg = SparsificationConfig(cfg["m"], cfg["normalize"])
    entries = _load_all_entries(manifest, cfg)
    os.makedirs(args.out, exist_ok=True)
    for i, entry in enumerate(entries):
        for variant, series in entry.errors.items():
            statistic = "rmse" if variant == "rmse" else "mean"
            result = sparsification_result(series, entry.scores, sp_cfg, statistic)
            stem = os.path.join(args.out, f"entry{i:03d}_{variant}")
            export_curves_csv(result, stem + ".csv")
            if args.svg:
                with open(stem + ".svg", "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(viz.curve_svg(result, f"entry {i} ({variant})"))
    print(f"wrote curves for {len(entries)} entries to {args.out}")
    return 0


def cmd_toy(args) -> int:
    methods = tuple(args.methods.split(",")) if args.methods else METHODS
    cfg = ToyConfig(
        seed=args.seed, epochs=args.epochs, batch_size=args.batch, methods=methods
    )
    _print_config(
        "toy",
        {
            "seed": cfg.seed,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "methods": list(cfg.methods),
            "out": args.out,
        },
    )
    run = run_toy(cfg)
    os.makedirs(args.out, exist_ok=True)
    ds = run.dataset
    for name, result in run.results.items():
        lines = ["x,y_true,mean,sigma"]
        est = result.estimate
        for x, y, mu, sg in zip(ds.test_x, ds.test_y, est.mean, est.sigma):
            lines.append(
                ",".join(format_float(v) for v in (x, y, mu, sg))
            )
        path = os.path.join(args.out, f"predictions_{name}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    summary = {
        "tool": {"name": "uqbench", "version": __version__},
        "config": {
            "seed": cfg.seed,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "hidden_units": cfg.hidden_units,
            "ensemble_size": cfg.ensemble_size,
            "mc_passes": cfg.mc_passes,
            "mc_dropout_rate": cfg.mc_dropout_rate,
            "methods": list(cfg.methods),
        },
        "dataset": ds.metadata,
        "report": run.report,
    }
    export_report_json(summary, os.path.join(args.out, "summary.json"))
    with open(
        os.path.join(args.out, "toy.svg"), "w", encoding="utf-8", newline="\n"
    ) as fh:
        fh.write(viz.toy_svg(run))
    print(f"wrote toy outputs to {args.out}")
    return 0


def _gradcheck_losses():
    def mse_closure(t):
        return lambda out: (
            float(np.mean((out[:, 0] - t) ** 2)),
            np.column_stack([2.0 * (out[:, 0] - t) / t.size]),
        )

    def bce_closure(t):
        def fn(out):
            losses, grad = bce_loss(t, out[:, 0])
            return float(np.mean(losses)), np.column_stack([grad / t.size])

        return fn

    def gauss_closure(t):
        def fn(out):
            losses, dmu, dlv = gaussian_nll(out[:, 0], out[:, 1], t)
            return float(np.mean(losses)), np.column_stack([dmu, dlv]) / t.size

        return fn

    def laplace_closure(t):
        def fn(out):
            losses, dmu, dlb = laplacian_nll(out[:, 0], out[:, 1], t)
            return float(np.mean(losses)), np.column_stack([dmu, dlb]) / t.size

        return fn

    return {
        "mse": (1, mse_closure),
        "bce": (1, bce_closure),
        "gaussian_nll": (2, gauss_closure),
        "laplacian_nll": (2, laplace_closure),
    }


def random_gradcheck_net(rng, out_size: int) -> nn.MLP:
    """Small random net with smooth activations (no relu kinks near zero)."""
    hidden = [int(rng.integers(4, 17)) for _ in range(int(rng.integers(1, 3)))]
    sizes = [2] + hidden + [out_size]
    acts = ["sigmoid"] * len(hidden) + ["identity"]
    return nn.init_mlp(sizes, activations=acts, seed=rng)


def cmd_gradcheck(args) -> int:
    _print_config("gradcheck", {"trials": args.trials, "seed": args.seed})
    rng = np.random.default_rng(args.seed)
    failed = False
    for name, (out_size, closure) in _gradcheck_losses().items():
        worst = 0.0
        for _ in range(args.trials):
            net = random_gradcheck_net(rng, out_size)
            x = rng.standard_normal((4, 2))
            if name == "bce":
                targets = rng.uniform(0.05, 0.95, 4)
            else:
                targets = rng.standard_normal(4)
            worst = max(worst, nn.grad_check(net, closure(targets), x))
        status = "ok" if worst < 1e-4 else "FAIL"
        print(f"{name}: max relative error {worst:.3e} [{status}]")
        failed = failed or worst >= 1e-4
    return 1 if failed else 0


def cmd_selftest(args) -> int:
    _print_config("selftest", {"instances": args.instances, "seed": args.seed})
    deviations = run_selftest(args.instances, args.seed)
    failed = False
    for name, dev in deviations.items():
        status = "ok" if dev <= 1e-12 else "FAIL"
        print(f"{name}: max deviation {dev:.3e} [{status}]")
        failed = failed or dev > 1e-12
    return 1 if failed else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqbench",
        description="Pixel-wise regression uncertainty evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate uncertainty maps from a manifest")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True, help="output report JSON path")
    p_eval.add_argument("--ause", choices=("image", "dataset"), default="image")
    p_eval.add_argument("--m", type=float, default=None, help="removal fraction per step")
    p_eval.add_argument("--no-normalize", action="store_true")
    p_eval.add_argument("--thr", type=float, default=None, help="depth inlier threshold")
    p_eval.add_argument("--flow-k", type=float, default=None, help="flow EPE reliability bound")
    p_eval.add_argument(
        "--clip-depth", nargs=2, type=float, default=None, metavar=("MIN", "MAX")
    )
    p_eval.set_defaults(func=cmd_eval)

    p_curves = sub.add_parser("curves", help="export per-entry sparsification curves")
    p_curves.add_argument("--manifest", required=True)
    p_curves.add_argument("--out", required=True, help="output directory")
    p_curves.add_argument("--svg", action="store_true")
    p_curves.add_argument("--m", type=float, default=None)
    p_curves.add_argument("--no-normalize", action="store_true")
    p_curves.add_argument("--thr", type=float, default=None)
    p_curves.add_argument("--flow-k", type=float, default=None)
    p_curves.add_argument(
        "--clip-depth", nargs=2, type=float, default=None, metavar=("MIN", "MAX")
    )
    p_curves.set_defaults(func=cmd_curves)

    p_toy = sub.add_parser("toy", help="run the 1D uncertainty benchmark")
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out", required=True, help="output directory")
    p_toy.add_argument(
        "--methods", default=None, help=f"comma-separated subset of {','.join(METHODS)}"
    )
    p_toy.add_argument("--epochs", type=int, default=50)
    p_toy.add_argument("--batch", type=int, default=50)
    p_toy.set_defaults(func=cmd_toy)

    p_grad = sub.add_parser("gradcheck", help="verify loss/network gradients")
    p_grad.add_argument("--trials", type=int, default=100)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_self = sub.add_parser("selftest", help="brute-force oracle equivalence suite")
    p_self.add_argument("--instances", type=int, default=200)
    p_self.add_argument("--seed", type=int, default=0)
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal assertion
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
