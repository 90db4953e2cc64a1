"""Command-line front end.

Subcommands:

* ``simulate``   generate a synthetic space-variant-blur dataset on disk
* ``deconvolve`` restore an object from a dataset or frame files
* ``evaluate``   FRC / SSIM of an estimate against a ground truth
* ``sweep``      noise-level or tile-count parameter sweeps

Every deconvolve run writes a JSON manifest capturing the full
configuration, inputs, and seeds; ``deconvolve --from-manifest`` replays
it, reproducing the object output byte for byte.  All flag validation
happens before any file is touched.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import read_dataset, read_image, write_dataset, write_png16
from .driver import DeconvConfig, run, run_online
from .metrics import SsimParams, align_to, frc, rn_max, ssim, write_frc_csv
from .simulate import make_stack, make_test_object, random_field

__all__ = ["main", "build_parser", "load_manifest"]


# ---------------------------------------------------------------------------
# config plumbing

CONFIG_FLAGS = {
    "iterations": dict(type=int, help="number of iterations"),
    "tiles": dict(type=int, nargs=2, metavar=("P", "Q"), help="subsection grid"),
    "support_radius": dict(type=int, help="PSF support disk radius (pixels)"),
    "apod_width": dict(type=float, help="apodization width (pixels)"),
    "apod_width_delta": dict(type=float, help="extra width of the complementary apodization"),
    "epsilon": dict(type=float, help="spectral division threshold"),
    "sensitivity": dict(type=float, help="isoplanatism weight exponent"),
    "weight_cap": dict(type=float, help="upper bound for isoplanatism weights"),
    "uniform_weights": dict(action="store_true", help="disable isoplanatism weighting"),
}


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    defaults = DeconvConfig()
    group = parser.add_argument_group("deconvolution parameters")
    for name, kwargs in CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        if "action" in kwargs:
            group.add_argument(flag, default=False, **kwargs)
        else:
            group.add_argument(flag, default=getattr(defaults, name), **kwargs)
    group.add_argument("--window", type=int, default=None, metavar="S",
                       help="online mode: moving-window size")


def config_from_args(args: argparse.Namespace) -> DeconvConfig:
    return DeconvConfig(
        iterations=args.iterations,
        tiles=tuple(args.tiles),
        support_radius=args.support_radius,
        apod_width=args.apod_width,
        apod_width_delta=args.apod_width_delta,
        epsilon=args.epsilon,
        sensitivity=args.sensitivity,
        weight_cap=args.weight_cap,
        online_window=args.window,
        uniform_weights=args.uniform_weights,
    )


def config_from_dict(data: dict) -> DeconvConfig:
    data = dict(data)
    data["tiles"] = tuple(data["tiles"])
    return DeconvConfig(**data)


def fail(errors):
    for error in errors if isinstance(errors, (list, tuple)) else [errors]:
        print(f"error: {error}", file=sys.stderr)
    raise SystemExit(2)


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    shape = (args.size, args.size)
    errors = []
    if args.frames < 1:
        errors.append(f"--frames must be >= 1, got {args.frames}")
    if args.sigma < 0:
        errors.append(f"--sigma must be >= 0, got {args.sigma}")
    if args.psf_sigma[0] <= 0 or args.psf_sigma[1] < args.psf_sigma[0]:
        errors.append(f"--psf-sigma must be an increasing positive pair, got {args.psf_sigma}")
    if args.shift[0] < 0 or args.shift[1] < args.shift[0]:
        errors.append(f"--shift must be an increasing nonnegative pair, got {args.shift}")
    if errors:
        fail(errors)

    field_params = {
        "anchors": [args.anchors, args.anchors],
        "sigma_range": list(args.psf_sigma),
        "shift_range": list(args.shift),
        "support_radius": args.psf_radius,
        "masked": args.masked,
    }

    def field_gen(s, rng):
        return random_field(
            shape, rng,
            anchors=(args.anchors, args.anchors),
            sigma_range=tuple(args.psf_sigma),
            shift_range=tuple(args.shift),
            support_radius=args.psf_radius,
            masked=args.masked,
        )

    obj = make_test_object(shape, seed=args.object_seed)
    stack = make_stack(obj, args.frames, field_gen=field_gen,
                       sigma=args.sigma, seed=args.seed)
    manifest = write_dataset(
        args.out, stack.frames, obj,
        meta={
            "seed": args.seed,
            "sigma": args.sigma,
            "object_seed": args.object_seed,
            "field_params": field_params,
        },
    )
    print(f"wrote {args.frames} frames + ground truth to {args.out}")
    print(f"manifest: {manifest}")
    return 0


# ---------------------------------------------------------------------------
# deconvolve

def load_manifest(path) -> dict:
    with open(path) as handle:
        return json.load(handle)


def _load_frames(args) -> tuple[np.ndarray, list[str]]:
    if args.dataset:
        frames, _, _ = read_dataset(args.dataset)
        names = sorted(str(p) for p in Path(args.dataset).glob("frame_*.png"))
        return frames, names
    frames = [read_image(p) for p in args.frames]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        fail(f"frames disagree in shape: {sorted(shapes)}")
    return np.stack(frames), [str(p) for p in args.frames]


def _write_psf_montages(result, outdir: Path) -> None:
    psfs = result.psfs
    p_tiles, q_tiles = psfs.tiles
    d = 2 * psfs.radius + 1
    pad = 2
    for s in range(psfs.n_frames):
        canvas = np.zeros((p_tiles * (d + pad) - pad, q_tiles * (d + pad) - pad))
        for p in range(p_tiles):
            for q in range(q_tiles):
                patch = psfs.patches[p, q, s]
                peak = patch.max()
                if peak > 0:
                    patch = patch / peak
                canvas[p * (d + pad) : p * (d + pad) + d,
                       q * (d + pad) : q * (d + pad) + d] = patch
        write_png16(outdir / f"psfs_frame_{s:03d}.png", canvas)


def _execute_deconvolve(frames: np.ndarray, input_names: list[str],
                        cfg: DeconvConfig, threads: int, outdir: Path,
                        quiet: bool = False) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    frames = np.maximum(frames, 0.0)

    started = time.perf_counter()
    if cfg.online_window is not None:
        steps = list(run_online(frames, cfg, threads=threads))
        obj = steps[-1].obj
        diagnostics = [s.diagnostics for s in steps]
        result = None
    else:
        progress = None
        if not quiet:
            progress = lambda k, d: print(
                f"iteration {k:3d}  change {d['object_change']:.3e}", file=sys.stderr
            )
        result = run(frames, cfg, threads=threads, progress=progress)
        obj = result.obj
        diagnostics = result.diagnostics
    elapsed = time.perf_counter() - started

    np.save(outdir / "object.npy", obj)
    peak = obj.max()
    write_png16(outdir / "object.png", obj / peak if peak > 0 else obj)
    if result is not None:
        _write_psf_montages(result, outdir)

    with open(outdir / "diagnostics.csv", "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=sorted(diagnostics[0].keys()))
        writer.writeheader()
        writer.writerows(diagnostics)

    manifest = {
        "command": "deconvolve",
        "version": __version__,
        "config": asdict(cfg),
        "inputs": input_names,
        "threads": threads,
        "outputs": {
            "object_npy": "object.npy",
            "object_png": "object.png",
            "diagnostics": "diagnostics.csv",
        },
        "elapsed_s": elapsed,
        "diagnostics": diagnostics,
    }
    manifest_path = outdir / "manifest.json"
    with open(manifest_path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
    return manifest_path


def cmd_deconvolve(args) -> int:
    if args.from_manifest:
        manifest = load_manifest(args.from_manifest)
        cfg = config_from_dict(manifest["config"])
        inputs = manifest["inputs"]
        frames = np.stack([read_image(p) for p in inputs])
        threads = args.threads
    else:
        if not args.dataset and not args.frames:
            fail("provide --dataset, --frames, or --from-manifest")
        frames, inputs = _load_frames(args)
        cfg = config_from_args(args)
        threads = args.threads

    errors = cfg.validation_errors(shape=frames.shape[1:], n_frames=frames.shape[0])
    if threads < 1:
        errors.append(f"--threads must be >= 1, got {threads}")
    if errors:
        fail(errors)

    manifest_path = _execute_deconvolve(
        frames, inputs, cfg, threads, Path(args.out), quiet=args.quiet
    )
    print(f"wrote results to {args.out}")
    print(f"manifest: {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# evaluate

def cmd_evaluate(args) -> int:
    estimate = np.load(args.estimate) if str(args.estimate).endswith(".npy") else read_image(args.estimate)
    truth = np.load(args.truth) if str(args.truth).endswith(".npy") else read_image(args.truth)
    if estimate.shape != truth.shape:
        fail(f"shape mismatch: estimate {estimate.shape}, truth {truth.shape}")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    if args.align:
        estimate, shift, error = align_to(estimate, truth)
        print(f"aligned estimate by shift ({shift[0]:+.2f}, {shift[1]:+.2f}); "
              f"relative L2 error {error:.4f}")

    curve = frc(truth, estimate)
    write_frc_csv(curve, outdir / "frc.csv")
    crossing = rn_max(curve)

    scale = truth.max()
    params = SsimParams(dynamic_range=scale if scale > 0 else 1.0)
    similarity = ssim(truth, np.clip(estimate, 0.0, truth.max()), params)

    print(f"rn_max: {crossing}")
    print(f"ssim: {similarity:.4f}")
    if args.plot:
        _plot_frc(curve, outdir / "frc.png")
        print(f"plot: {outdir / 'frc.png'}")
    return 0


def _plot_frc(curve, path) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        fail("--plot requires matplotlib (pip install matplotlib)")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve.rings, curve.correlation, label="FRC")
    ax.plot(curve.rings, np.minimum(curve.threshold, 1.5), "--", label="2-sigma curve")
    ax.set_xlabel("ring")
    ax.set_ylabel("correlation")
    ax.set_ylim(-0.2, 1.5)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_sweep(rows, xkey, ykey, path, logx=False) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        fail("--plot requires matplotlib (pip install matplotlib)")
    xs = [row[xkey] for row in rows]
    ys = [row[ykey] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, "o-")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xkey)
    ax.set_ylabel(ykey)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# sweep

def _sweep_noise(args, cfg: DeconvConfig, outdir: Path) -> list[dict]:
    shape = (args.size, args.size)
    obj = make_test_object(shape, seed=args.object_seed)
    truth = obj / obj.sum()
    rows = []
    for sigma in args.sigmas:
        for rep in range(args.reps):
            seed = args.seed + rep
            stack = make_stack(obj, args.frames, sigma=sigma, seed=seed)
            frames = np.maximum(stack.frames, 0.0)
            result = run(frames, cfg, threads=args.threads)
            aligned, _, error = align_to(result.obj, truth)
            scale = truth.max()
            similarity = ssim(truth, np.clip(aligned, 0.0, scale),
                              SsimParams(dynamic_range=scale))
            rows.append({
                "sigma": sigma, "rep": rep, "seed": seed,
                "ssim": similarity, "rel_l2": error,
            })
            print(f"sigma={sigma:g} rep={rep}: ssim={similarity:.4f}", file=sys.stderr)
    return rows


def _sweep_tiles(args, cfg: DeconvConfig, outdir: Path) -> list[dict]:
    shape = (args.size, args.size)
    obj = make_test_object(shape, seed=args.object_seed)
    truth = obj / obj.sum()
    stack = make_stack(obj, args.frames, sigma=args.sigmas[0], seed=args.seed)
    frames = np.maximum(stack.frames, 0.0)
    rows = []
    for count in args.tile_counts:
        tiled = DeconvConfig(**{**asdict(cfg), "tiles": (count, count)})
        result = run(frames, tiled, threads=args.threads)
        aligned, _, error = align_to(result.obj, truth)
        crossing = rn_max(frc(truth, aligned))
        rows.append({
            "tiles": count, "pq": count * count, "efficiency": 1.0 / (count * count),
            "rn_max": crossing, "rel_l2": error,
        })
        print(f"tiles={count}x{count}: rn_max={crossing}", file=sys.stderr)
    return rows


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    errors = cfg.validation_errors(shape=(args.size, args.size), n_frames=args.frames)
    if args.reps < 1:
        errors.append(f"--reps must be >= 1, got {args.reps}")
    if args.axis == "tiles" and not args.tile_counts:
        errors.append("--tile-counts required for the tiles axis")
    if errors:
        fail(errors)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.axis == "noise":
        rows = _sweep_noise(args, cfg, outdir)
        csv_path = outdir / "noise_sweep.csv"
        plot_spec = ("sigma", "ssim", True)
    else:
        rows = _sweep_tiles(args, cfg, outdir)
        csv_path = outdir / "tile_sweep.csv"
        plot_spec = ("pq", "rn_max", False)

    with open(csv_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {csv_path}")
    if args.plot:
        xkey, ykey, logx = plot_spec
        _plot_sweep(rows, xkey, ykey, outdir / f"{args.axis}_sweep.png", logx=logx)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svdeconv",
        description="Blind multi-frame deconvolution of space-variant blur",
    )
    parser.add_argument("--version", action="version", version=f"svdeconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--size", type=int, default=256, help="image side length")
    sim.add_argument("--frames", type=int, default=30, help="number of frames")
    sim.add_argument("--sigma", type=float, default=1e-4, help="noise standard deviation")
    sim.add_argument("--seed", type=int, default=0, help="master seed")
    sim.add_argument("--object-seed", type=int, default=11, help="ground-truth scene seed")
    sim.add_argument("--anchors", type=int, default=3, help="PSF anchor grid side")
    sim.add_argument("--psf-sigma", type=float, nargs=2, default=(1.0, 3.0),
                     metavar=("MIN", "MAX"), help="anchor blur width range")
    sim.add_argument("--shift", type=float, nargs=2, default=(0.0, 4.0),
                     metavar=("MIN", "MAX"), help="anchor translation range (morph)")
    sim.add_argument("--psf-radius", type=int, default=6, help="anchor support radius")
    sim.add_argument("--masked", action="store_true", help="irregular masked anchors")
    sim.set_defaults(func=cmd_simulate)

    dec = sub.add_parser("deconvolve", help="restore an object from frames")
    dec.add_argument("--dataset", help="dataset directory (from simulate)")
    dec.add_argument("--frames", nargs="+", help="frame image files")
    dec.add_argument("--from-manifest", help="replay a previous run's manifest")
    dec.add_argument("--out", required=True, help="output directory")
    dec.add_argument("--threads", type=int, default=1, help="worker threads")
    dec.add_argument("--quiet", action="store_true", help="suppress progress output")
    add_config_flags(dec)
    dec.set_defaults(func=cmd_deconvolve)

    ev = sub.add_parser("evaluate", help="FRC / SSIM against ground truth")
    ev.add_argument("--estimate", required=True, help="estimated object (png/pgm/npy)")
    ev.add_argument("--truth", required=True, help="ground truth image")
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--align", action=argparse.BooleanOptionalAction, default=True,
                    help="remove the global shift/scale ambiguity first")
    ev.add_argument("--plot", action="store_true", help="also render a PNG chart")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="noise or tile-count sweep")
    sw.add_argument("--axis", choices=("noise", "tiles"), required=True)
    sw.add_argument("--out", required=True, help="output directory")
    sw.add_argument("--size", type=int, default=128, help="image side length")
    sw.add_argument("--frames", type=int, default=15, help="frames per stack")
    sw.add_argument("--reps", type=int, default=10, help="repetitions per level")
    sw.add_argument("--seed", type=int, default=0, help="base seed")
    sw.add_argument("--object-seed", type=int, default=11)
    sw.add_argument("--sigmas", type=float, nargs="+",
                    default=(1e-5, 1e-4, 1e-3, 1e-2, 1e-1), help="noise levels")
    sw.add_argument("--tile-counts", type=int, nargs="+", default=(2, 3, 5, 7))
    sw.add_argument("--threads", type=int, default=1)
    sw.add_argument("--plot", action="store_true")
    add_config_flags(sw)
    sw.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
