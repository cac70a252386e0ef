import argparse
import importlib.metadata
import json
import logging
import os
import platform
import sys
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from . import version_info
from .caching import clear_cache
from .camera import IlluminationSpec, LaserSpec, NoiseSpec, Scenario, expose
from .config import SimConfig, load_config
from .datagen import (
    DatasetManifest,
    ScenarioDistribution,
    center_crop,
    list_scenes,
    synth_dataset,
    test_grid,
    verify_manifest,
)
from .doe_opt import (
    HalfRingParams,
    StageSchedule,
    grad_check,
    grad_check_config,
    half_ring_mask,
    initial_mask,
    optimize_doe,
    run_two_stage,
)
from .errors import GridMismatchError, SimulatorException
from .io import (
    export_psf_stack,
    load_height_map,
    load_rgb_png,
    load_sensor_image,
    save_height_map,
    save_rgb_png16,
    save_sensor_image,
    write_csv,
    write_run_manifest,
)
from .metrics import compare_masks, quality_report, suppression_report
from .optics import HeightMap, build_psf_stack, uncoded_psf_stack
from .plotting import plot_height_map, plot_history, plot_psf_montage, plot_suppression
from .restore import RestoreParams, restore_pipeline
from .spectral import identity_illuminant, lift_rgb_to_hsi, project_hsi_to_rgb
from .utils import setup_logging

log = logging.getLogger("dazzlesim.cli")

GRAD_TOLERANCE = 1e-4


class CommandOutput(NamedTuple):
    outputs: list[Path]
    extra: dict[str, Any]
    ok: bool = True


def show_version() -> None:
    entries: list[str] = []

    entries.append(
        f"- Python v{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}-{sys.version_info.releaselevel}"
    )
    entries.append(
        f"- dazzlesim v{version_info.major}.{version_info.minor}.{version_info.micro}-{version_info.releaselevel}"
    )

    try:
        version = importlib.metadata.version("dazzlesim")
        if version:
            entries.append(f"    - dazzlesim metadata: v{version}")
    except importlib.metadata.PackageNotFoundError:
        pass

    uname = platform.uname()
    entries.append(f"- system info: {uname.system} {uname.release} {uname.version}")
    print("\n".join(entries))


def _memory_estimate(cfg: SimConfig) -> float:
    # complex pupil, its padded transform and the per-band float frames, in GiB
    pupil = cfg.pupil_res[0] * cfg.pupil_res[1] * 16 * 3
    frame = 4 * cfg.sensor_res[0] * cfg.sensor_res[1] * 8 * 4
    return cfg.n_bands * (pupil + frame) / 2**30


def build_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> SimConfig:
    if args.full:
        base = SimConfig.full_scale()
    elif args.desk:
        base = SimConfig.desk()
    elif args.config is None and args.fallback_config is not None:
        base = args.fallback_config()
    elif args.config is None:
        parser.error("one of --config, --desk or --full is required")
    else:
        base = SimConfig()

    try:
        cfg = load_config(args.config, base=base) if args.config else base
        if args.seed is not None:
            cfg = cfg.replace(rng_seed=args.seed)
    except SimulatorException as e:
        parser.error(str(e))

    if args.full:
        log.warning("Full-scale run needs roughly %.1f GiB of working memory", _memory_estimate(cfg))
    return cfg


def load_mask(parser: argparse.ArgumentParser, path: str | None, cfg: SimConfig) -> HeightMap:
    if path is None:
        return HeightMap.flat(cfg)
    try:
        mask = load_height_map(path)
    except (OSError, KeyError, ValueError, GridMismatchError) as e:
        parser.error(f"Unable to read mask {path}: {e}")
    if mask.shape != cfg.pupil_res:
        parser.error(f"mask {path} has shape {mask.shape}, the config's pupil is {cfg.pupil_res}")
    return mask


def load_scene(parser: argparse.ArgumentParser, path: str, cfg: SimConfig) -> np.ndarray:
    try:
        return center_crop(load_rgb_png(path), cfg)
    except OSError as e:
        parser.error(str(e))


def write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    log.info("Wrote %s", path)
    return path


def psf_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    mask = half_ring_mask(cfg) if args.half_ring else load_mask(parser, args.mask, cfg)
    psf = build_psf_stack(mask, cfg, workers=args.threads)
    out: Path = args.out

    outputs = [
        out / "psf.raw",
        export_psf_stack(psf, out / "psf.raw"),
        plot_psf_montage(psf, out / "psf_montage.png"),
        plot_height_map(mask, out / "mask.png"),
    ]
    report = suppression_report(psf, uncoded_psf_stack(cfg))
    outputs.append(write_json(out / "suppression.json", report.to_dict()))
    return CommandOutput(outputs, {"mask_hash": mask.digest(), "mean_lsr": report.mean_lsr})


def simulate_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    mask = load_mask(parser, args.mask, cfg)
    rgb = load_scene(parser, args.scene, cfg)
    noise = NoiseSpec.disabled() if args.no_noise else NoiseSpec.from_config(cfg)
    scenario = Scenario(
        LaserSpec(args.lambda_l / 1e9, args.alpha_l, tuple(args.incidence)),
        IlluminationSpec(args.alpha_b, args.illuminant),
        noise,
        cfg.exposure_time if args.exposure is None else args.exposure,
    )

    cube = lift_rgb_to_hsi(rgb, cfg.grid)
    psf = build_psf_stack(mask, cfg, workers=args.threads)
    sensor = expose(cube, mask, scenario, cfg.rng_seed, cfg, psf=psf)
    out: Path = args.out
    gt = np.clip(project_hsi_to_rgb(cube, identity_illuminant(cfg.grid)), 0, 1)
    save_rgb_png16(gt, out / "gt.png")
    side = save_sensor_image(sensor, out / "sensor.png")
    log.info("Captured %r", sensor)
    return CommandOutput(
        [out / "sensor.png", side, out / "gt.png"],
        {"saturated_pixels": sensor.saturated_pixels, "damage_risk": scenario.laser.damage_risk},
    )


def _schedule(args: argparse.Namespace, cfg: SimConfig) -> StageSchedule:
    sched = StageSchedule.desk() if args.desk or cfg.pupil_res[0] <= 256 else StageSchedule()
    changes: dict[str, Any] = {}
    if args.iters is not None:
        changes["stage1_iters"] = args.iters
    if args.lr is not None:
        changes["lr_weights"] = args.lr
    if args.accumulate:
        changes["accumulate_bands"] = args.accumulate
    if getattr(args, "stage2_iters", None) is not None:
        changes["stage2_iters"] = args.stage2_iters
    return StageSchedule.from_dict({**sched.to_dict(), **changes}) if changes else sched


def _init_mask(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig, sched: StageSchedule) -> HeightMap:
    if args.init == "flat":
        return HeightMap.flat(cfg)
    if args.init == "half-ring":
        return half_ring_mask(cfg, HalfRingParams.default(cfg))
    if args.init == "file":
        return load_mask(parser, args.mask, cfg)
    return initial_mask(cfg, sched, cfg.rng_seed)


def optimize_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    sched = _schedule(args, cfg)
    init = _init_mask(parser, args, cfg, sched)
    mask, history = optimize_doe(init, sched, cfg, workers=args.threads)
    out: Path = args.out

    save_height_map(mask, out / "mask.raw")
    write_csv(
        ("iteration", "l_doe", "mean_lsr", "mean_bsr", "best_l_doe", "lr"),
        ([r["iteration"], r["l_doe"], r["mean_lsr"], r["mean_bsr"], r["best_l_doe"], r["lr"]] for r in history),
        out / "history.csv",
    )
    report = suppression_report(build_psf_stack(mask, cfg, workers=args.threads), uncoded_psf_stack(cfg))
    outputs = [
        out / "mask.raw",
        out / "mask.json",
        out / "history.csv",
        write_json(out / "report.json", {"mask_hash": mask.digest(), "schedule": sched.to_dict(), "suppression": report.to_dict()}),
        plot_height_map(mask, out / "mask.png"),
    ]
    if history:
        outputs.append(plot_history(history, out / "history.png"))
    return CommandOutput(outputs, {"mask_hash": mask.digest(), "mean_lsr": report.mean_lsr, "mean_bsr": report.mean_bsr})


def two_stage_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    sched = _schedule(args, cfg)
    init = _init_mask(parser, args, cfg, sched)
    try:
        scenes = list_scenes(args.val_scenes)[: args.n_val]
    except FileNotFoundError as e:
        parser.error(str(e))
    val = [load_scene(parser, str(p), cfg) for p in scenes]

    mask, params, report = run_two_stage(cfg, sched, val, init=init, workers=args.threads)
    out: Path = args.out
    save_height_map(mask, out / "mask.raw")
    outputs = [
        out / "mask.raw",
        out / "mask.json",
        write_json(out / "restore.json", params.to_dict()),
        write_json(out / "report.json", report.to_dict()),
        plot_height_map(mask, out / "mask.png"),
    ]
    return CommandOutput(outputs, {"mask_hash": mask.digest(), "val_charbonnier": report.val_charbonnier})


def synth_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    mask = load_mask(parser, args.mask, cfg)
    dist = ScenarioDistribution(literal=args.literal)
    if args.p_free is not None:
        dist = ScenarioDistribution(literal=args.literal, p_free=args.p_free)
    try:
        manifest = synth_dataset(
            args.scenes,
            mask,
            dist,
            args.n_items,
            args.out,
            cfg,
            downsample=args.downsample,
            workers=args.threads,
        )
    except FileNotFoundError as e:
        parser.error(str(e))

    extra: dict[str, Any] = {"items": len(manifest), "distribution": dist.to_dict()}
    ok = True
    if args.verify:
        bad = verify_manifest(manifest, mask, cfg, fraction=args.verify, seed=cfg.rng_seed)
        extra["verify_mismatches"] = bad
        ok = not bad
    return CommandOutput([manifest.path], extra, ok)


def test_grid_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    mask = load_mask(parser, args.mask, cfg)
    try:
        manifest = test_grid(args.scenes, mask, cfg, args.out, workers=args.threads)
    except FileNotFoundError as e:
        parser.error(str(e))
    return CommandOutput([manifest.path], {"items": len(manifest), "strata": manifest.strata()})


def _mean(values: list[float]) -> float | None:
    finite = [v for v in values if np.isfinite(v)]
    return float(np.mean(finite)) if finite else None


def _aggregate(rows: list[dict[str, Any]]) -> dict[str, Any]:
    return {
        "items": len(rows),
        "l1": _mean([r["l1"] for r in rows]),
        "psnr": _mean([r["psnr"] for r in rows]),
        "charbonnier_fft": _mean([r["charbonnier_fft"] for r in rows]),
        "raw_l1": _mean([r["raw_l1"] for r in rows]),
    }


def eval_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    try:
        manifest = DatasetManifest.load(args.manifest)
    except (OSError, ValueError) as e:
        parser.error(f"Unable to read manifest {args.manifest}: {e}")

    missing = [
        str(manifest.root / p)
        for e in manifest
        for p in (e.sensor_path, e.gt_path)
        if not (manifest.root / p).is_file()
    ]
    if missing:
        parser.error("missing dataset files:\n  " + "\n  ".join(missing))

    mask = load_mask(parser, args.mask, cfg)
    params = RestoreParams()
    if args.restore:
        params = RestoreParams.from_dict(json.loads(Path(args.restore).read_text(encoding="utf-8")))

    psf = build_psf_stack(mask, cfg, workers=args.threads) if len(manifest) else None
    rows: list[dict[str, Any]] = []
    for entry in manifest:
        sensor = load_sensor_image(manifest.root / entry.sensor_path)
        gt = load_rgb_png(manifest.root / entry.gt_path)
        est = restore_pipeline(sensor, mask, cfg, params, psf=psf)
        quality = quality_report(est, gt)
        raw = quality_report(sensor.counts / sensor.s_sat, gt)
        rows.append(
            {
                "index": entry.index,
                "stratum": entry.stratum,
                "l1": quality.l1,
                "psnr": quality.psnr,
                "charbonnier_fft": quality.charbonnier_fft,
                "raw_l1": raw.l1,
            }
        )
        log.debug("Item %d: l1 %.4g (raw %.4g)", entry.index, quality.l1, raw.l1)

    strata: dict[str, list[dict[str, Any]]] = {}
    for row in rows:
        strata.setdefault("all" if row["stratum"] is None else repr(float(row["stratum"])), []).append(row)
    report = {
        "mask_hash": mask.digest(),
        "restore": params.to_dict(),
        "overall": _aggregate(rows) if rows else {},
        "strata": {key: _aggregate(group) for key, group in strata.items()},
    }

    out: Path = args.out
    write_csv(
        ("stratum", "items", "l1", "psnr", "charbonnier_fft", "raw_l1"),
        ([key, *_aggregate(group).values()] for key, group in strata.items()),
        out / "eval.csv",
    )
    return CommandOutput([write_json(out / "eval.json", report), out / "eval.csv"], {"items": len(rows)})


def grad_check_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    results = [grad_check(cfg, seed=seed, directions=args.directions, step=args.step) for seed in args.seeds]
    worst = max(r.max_error for r in results)
    data = {
        "tolerance": args.tolerance,
        "max_error": worst,
        "seeds": {str(r.seed): r.errors for r in results},
    }
    ok = worst <= args.tolerance
    if not ok:
        log.error("Gradient check failed: max relative error %.3e above %.1e", worst, args.tolerance)
    return CommandOutput([write_json(args.out / "grad_check.json", data)], {"max_error": worst}, ok)


def _named_masks(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> dict[str, HeightMap]:
    masks: dict[str, HeightMap] = {}
    if not args.no_baselines:
        masks["flat"] = HeightMap.flat(cfg)
        masks["half-ring"] = half_ring_mask(cfg)
    for spec in args.masks:
        name, _, path = spec.rpartition("=")
        masks[name or Path(path).stem] = load_mask(parser, path, cfg)
    if not masks:
        parser.error("lsr-table needs at least one mask")
    return masks


def lsr_table_command(parser: argparse.ArgumentParser, args: argparse.Namespace, cfg: SimConfig) -> CommandOutput:
    reports = compare_masks(cfg, _named_masks(parser, args, cfg))
    nm = [f"{x:.1f}" for x in cfg.grid.nm]
    header = ("mask", *(f"lsr_{x}" for x in nm), *(f"bsr_{x}" for x in nm))
    out: Path = args.out
    write_csv(header, ([name, *r.lsr, *r.bsr] for name, r in reports.items()), out / "lsr_table.csv")
    outputs = [out / "lsr_table.csv", write_json(out / "lsr_table.json", {k: r.to_dict() for k, r in reports.items()})]
    outputs.extend(plot_suppression(r, out / f"suppression_{name}.png") for name, r in reports.items())
    return CommandOutput(outputs, {name: r.mean_lsr for name, r in reports.items()})


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="a JSON config file, applied on top of the chosen preset")
    common.add_argument("--seed", type=int, help="overrides the config's rng_seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory. Defaults to 'out'")
    scale = common.add_mutually_exclusive_group()
    scale.add_argument("--desk", action="store_true", help="use the desk-scale preset (128² pupil and sensor, 5 bands)")
    scale.add_argument("--full", action="store_true", help="use the full-scale preset")
    common.add_argument("--threads", type=int, default=os.cpu_count(), help="worker threads. Defaults to the CPU count")
    common.add_argument("--log-file", default="dazzlesim.log", help="log file. Defaults to 'dazzlesim.log'")
    common.add_argument("--verbose", action="store_true", help="also log to stderr")
    common.set_defaults(fallback_config=None)
    return common


def add_psf_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("psf", parents=[common], help="render the PSF stack and mask of a DOE")
    parser.set_defaults(func=psf_command)
    parser.add_argument("--mask", help="a height map file. Defaults to a flat mask")
    parser.add_argument("--half-ring", action="store_true", help="use the half-ring baseline mask")


def add_simulate_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("simulate", parents=[common], help="capture one scene through a mask")
    parser.set_defaults(func=simulate_command)
    parser.add_argument("scene", help="an RGB scene image")
    parser.add_argument("--mask", help="a height map file. Defaults to a flat mask")
    parser.add_argument("--alpha-l", type=float, default=0.0, help="laser strength in multiples of I_sat")
    parser.add_argument("--lambda-l", type=float, default=550.0, help="laser wavelength in nm")
    parser.add_argument("--incidence", type=float, nargs=2, default=(0.0, 0.0), metavar=("N_U", "N_V"))
    parser.add_argument("--alpha-b", type=float, default=0.7, help="background scale")
    parser.add_argument("--illuminant", choices=("d65", "flat"), default="d65")
    parser.add_argument("--exposure", type=float, help="exposure time in seconds")
    parser.add_argument("--no-noise", action="store_true", help="disable every noise source")


def _add_schedule_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--iters", type=int, help="stage 1 iterations")
    parser.add_argument("--lr", type=float, help="initial learning rate")
    parser.add_argument("--accumulate", type=int, default=0, help="accumulate gradients over band subsets of this size")
    parser.add_argument("--init", choices=("random", "flat", "half-ring", "file"), default="random")
    parser.add_argument("--mask", help="the initial mask when --init=file")


def add_optimize_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("optimize", parents=[common], help="optimize a DOE for laser suppression")
    parser.set_defaults(func=optimize_command)
    _add_schedule_args(parser)


def add_two_stage_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser(
        "two-stage", parents=[common], help="optimize a DOE, then tune the restoration on validation scenes"
    )
    parser.set_defaults(func=two_stage_command)
    _add_schedule_args(parser)
    parser.add_argument("val_scenes", help="directory of validation scenes")
    parser.add_argument("--n-val", type=int, default=4, help="validation scenes to use")
    parser.add_argument("--stage2-iters", type=int, help="refinement evaluations per restoration parameter")


def add_synth_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("synth", parents=[common], help="synthesize a training dataset")
    parser.set_defaults(func=synth_command)
    parser.add_argument("scenes", help="directory of RGB scenes")
    parser.add_argument("-n", "--n-items", type=int, required=True, help="number of pairs")
    parser.add_argument("--mask", help="a height map file. Defaults to a flat mask")
    parser.add_argument("--downsample", type=int, help="resize the pairs to this square size")
    parser.add_argument("--literal", action="store_true", help="literal replication mode")
    parser.add_argument("--p-free", type=float, help="probability of a laser-free item")
    parser.add_argument("--verify", type=float, default=0.0, metavar="FRACTION", help="spot-check this share of items")


def add_test_grid_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("test-grid", parents=[common], help="build the fixed evaluation grid")
    parser.set_defaults(func=test_grid_command)
    parser.add_argument("scenes", help="directory of RGB scenes")
    parser.add_argument("--mask", help="a height map file. Defaults to a flat mask")


def add_eval_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("eval", parents=[common], help="restore and score every item of a dataset")
    parser.set_defaults(func=eval_command)
    parser.add_argument("manifest", help="a manifest.jsonl file or its directory")
    parser.add_argument("--mask", help="the dataset's mask. Defaults to a flat mask")
    parser.add_argument("--restore", help="a restoration parameter JSON file")


def add_grad_check_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser(
        "grad-check", parents=[common], help="compare the analytic DOE gradient with finite differences"
    )
    parser.set_defaults(func=grad_check_command, fallback_config=grad_check_config)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--directions", type=int, default=20)
    parser.add_argument("--step", type=float, default=1e-9, help="finite difference step in meters")
    parser.add_argument("--tolerance", type=float, default=GRAD_TOLERANCE)


def add_lsr_table_args(
    subparser: "argparse._SubParsersAction[argparse.ArgumentParser]", common: argparse.ArgumentParser
) -> None:
    parser = subparser.add_parser("lsr-table", parents=[common], help="per-band LSR and BSR of several masks")
    parser.set_defaults(func=lsr_table_command)
    parser.add_argument("masks", nargs="*", help="height map files, optionally as NAME=PATH")
    parser.add_argument("--no-baselines", action="store_true", help="leave out the flat and half-ring masks")


def core(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.version:
        show_version()
    else:
        parser.print_help()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dazzlesim", description="Laser dazzle camera simulation and DOE optimization"
    )
    parser.add_argument("-v", "--version", action="store_true", help="shows the library version")
    parser.set_defaults(func=None)

    common = _common_parser()
    subparser = parser.add_subparsers(dest="subcommand", title="subcommands")
    add_psf_args(subparser, common)
    add_simulate_args(subparser, common)
    add_optimize_args(subparser, common)
    add_two_stage_args(subparser, common)
    add_synth_args(subparser, common)
    add_test_grid_args(subparser, common)
    add_eval_args(subparser, common)
    add_grad_check_args(subparser, common)
    add_lsr_table_args(subparser, common)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    args = parser.parse_args(argv)
    if args.func is None:
        core(parser, args)
        return 0

    setup_logging(filename=args.log_file)
    if args.verbose:
        stream = logging.StreamHandler()
        stream.setFormatter(logging.Formatter("[{levelname:<8}] {name}: {message}", style="{"))
        logging.getLogger().addHandler(stream)

    cfg = build_config(parser, args)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        result: CommandOutput = args.func(parser, args, cfg)
    except (SimulatorException, OSError, ValueError) as e:
        log.error("%s failed: %s", args.subcommand, e)
        parser.exit(1, f"{parser.prog} {args.subcommand}: error: {e}\n")
    finally:
        clear_cache()

    write_run_manifest(
        args.out / f"run_{args.subcommand}.json",
        command=args.subcommand,
        argv=argv,
        cfg=cfg,
        seed=cfg.rng_seed,
        outputs=result.outputs,
        extra=result.extra,
    )
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
