"""Command-line surface.

Four subcommands. `train` fits the full model on the config's synthetic
dataset and writes the model container, the loss-curve CSV, a JSON summary,
and a loss-curve PNG. `eval` scores a saved model on the config's dataset
and writes an evaluation JSON plus figure. `ablate` sweeps one axis on a
single shared dataset and writes the sweep JSON plus figure. `attn` exports
the cross-attention heatmaps of a saved model on one scene as PGM files
plus a montage PNG.

JSON/CSV/PGM outputs are byte-deterministic for a fixed config and seed;
the PNGs are presentation only. Usage errors exit 2, runtime failures
(missing files, corrupt containers, bad indices) exit 1.
"""
from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

from ..decoder import attention_heatmap
from ..errors import IndexOutOfRange
from .config import parse_config
from .container import load_model, save_model
from .figures import (ap_bars_png, attention_montage_png, density_png,
                      loss_curve_png, sweep_png)
from .reports import write_json, write_loss_curve, write_pgm

AXES = ("loss", "lambda", "layer-order", "depth", "components")
SWEEPS = {
    "loss": ("loss.kind", ("focal", "asl")),
    "lambda": ("loss.lambda", (0.0, 0.5, 1.0, 1.5, 2.0)),
    "layer-order": ("decoder.order", ("SCF", "CSF", "CF")),
    "depth": ("decoder.depth", (1, 2, 3)),
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cql",
        description="category-query interaction classifier: train, evaluate, "
                    "ablate, and export attention maps on synthetic scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the full model")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--report", required=True)

    p_ablate = sub.add_parser("ablate", help="sweep one ablation axis")
    p_ablate.add_argument("--axis", required=True, choices=AXES)
    p_ablate.add_argument("--config", required=True)
    p_ablate.add_argument("--out", required=True)

    p_attn = sub.add_parser("attn", help="export attention heatmaps")
    p_attn.add_argument("--model", required=True)
    p_attn.add_argument("--scene", required=True, type=int)
    p_attn.add_argument("--out", required=True)
    return parser


def cmd_train(args) -> int:
    from ..harness import dataset_from_run, train

    run = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = dataset_from_run(run)
    model, curve = train(run, data)

    save_model(model, out / "model.cql")
    write_loss_curve(curve, out / "loss_curve.csv")
    write_json({
        "config": run.to_dict(),
        "steps": len(curve),
        "initial_loss": curve[0] if curve else None,
        "final_loss": curve[-1] if curve else None,
    }, out / "train_report.json")
    loss_curve_png(curve, out / "loss_curve.png")
    print(f"trained {len(curve)} steps on {len(data)} scenes -> {out}")
    return 0


def cmd_eval(args) -> int:
    from ..harness import (collect_predictions, dataset_from_run, density_map,
                           evaluate_ap)

    model = load_model(args.model)
    run = parse_config(args.config)
    if (model.run.k, model.run.d) != (run.k, run.d):
        raise ValueError(
            f"model was built for k={model.run.k}, d={model.run.d}; "
            f"config asks for k={run.k}, d={run.d}")
    data = dataset_from_run(run)
    preds = collect_predictions(model, data)
    report = evaluate_ap(preds, data)
    report.density_map = density_map(preds, data)

    report_path = Path(args.report)
    if report_path.parent != Path(""):
        report_path.parent.mkdir(parents=True, exist_ok=True)
    write_json({"config": run.to_dict(), **report.to_dict()}, report_path)
    ap_bars_png(report.per_category_ap,
                report_path.with_name(report_path.stem + "_ap.png"))
    shown = "n/a" if report.mean_ap is None else f"{report.mean_ap:.4f}"
    print(f"mAP {shown} over {len(data)} scenes -> {report_path}")
    return 0


def _sweep_setting(base_run, key: str, value):
    run = copy.deepcopy(base_run)
    run.set(key, value)
    return run.resolve()


def cmd_ablate(args) -> int:
    from ..harness import (collect_predictions, compare_models,
                           dataset_from_run, evaluate_ap, improvement_ratio,
                           train)

    base = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = dataset_from_run(base)  # one dataset per sweep: axes share scenes

    if args.axis == "components":
        comparison = compare_models(base, data)
        variants = {}
        for letter, report in comparison.reports.items():
            variants[letter] = {
                "mean_ap": report.mean_ap,
                "per_category_ap": report.per_category_ap,
                "density": report.density_map,
                "final_loss": comparison.curves[letter][-1],
            }
        base_density = comparison.reports["a"].density_map
        full_density = comparison.reports["d"].density_map
        payload = {
            "axis": "components",
            "config": base.to_dict(),
            "variants": variants,
            "delta_c_minus_b": (comparison.reports["c"].mean_ap
                                - comparison.reports["b"].mean_ap),
            "density_ratios_d_vs_a": {
                bucket: improvement_ratio(base_density[bucket],
                                          full_density[bucket])
                for bucket in base_density},
        }
        write_json(payload, out / "ablate_components.json")
        letters = sorted(variants)
        sweep_png(letters, [variants[v]["mean_ap"] for v in letters],
                  out / "ablate_components.png", "variant")
        density_png(full_density, base_density,
                    payload["density_ratios_d_vs_a"],
                    out / "ablate_components_density.png")
        print(f"components: " + ", ".join(
            f"({v}) {variants[v]['mean_ap']:.4f}" for v in letters)
            + f" -> {out}")
        return 0

    key, values = SWEEPS[args.axis]
    settings = []
    for value in values:
        run = _sweep_setting(base, key, value)
        model, curve = train(run, data)
        report = evaluate_ap(collect_predictions(model, data), data)
        settings.append({
            "value": value,
            "mean_ap": report.mean_ap,
            "per_category_ap": report.per_category_ap,
            "final_loss": curve[-1] if curve else None,
        })
    stem = f"ablate_{args.axis.replace('-', '_')}"
    write_json({"axis": args.axis, "key": key, "config": base.to_dict(),
                "settings": settings}, out / f"{stem}.json")
    sweep_png([s["value"] for s in settings],
              [s["mean_ap"] for s in settings],
              out / f"{stem}.png", args.axis)
    print(f"{args.axis}: " + ", ".join(
        f"{s['value']}={s['mean_ap']:.4f}" for s in settings) + f" -> {out}")
    return 0


def cmd_attn(args) -> int:
    from ..harness import dataset_from_run

    model = load_model(args.model)
    data = dataset_from_run(model.run)
    if not 0 <= args.scene < len(data):
        raise IndexOutOfRange(
            f"scene {args.scene} outside dataset of {len(data)} scenes")
    scene = data[args.scene]
    _, maps = model.decode_image(scene.grid)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    panels = []
    for layer in range(len(maps.maps)):
        for cat in range(model.run.k):
            grid = attention_heatmap(maps, layer, cat).data
            name = f"attn_l{layer}_c{cat}.pgm"
            write_pgm(grid, out / name)
            files.append(name)
            panels.append((f"layer {layer} cat {cat}", grid))
    write_json({
        "config": model.run.to_dict(),
        "scene": args.scene,
        "layers": len(maps.maps),
        "categories": model.run.k,
        "grid": [maps.height, maps.width],
        "files": files,
    }, out / "attn_report.json")
    attention_montage_png(panels, out / "attn_montage.png")
    print(f"wrote {len(files)} heatmaps for scene {args.scene} -> {out}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "attn": cmd_attn,
}


def dispatch(argv) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse prints usage; exit 2 on bad usage
        return int(exc.code) if exc.code is not None else 0
    try:
        return COMMANDS[args.command](args)
    except (ValueError, TypeError, FileNotFoundError, IndexError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
