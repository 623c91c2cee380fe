"""Command-line entry point: ``lbbnet {generate,train,eval,sweep,replay}``.

Exit codes: 0 success, 2 configuration/usage, 3 I/O, 4 data content.
Every command writes ``<output>.manifest.json`` next to its main output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import DATASET_FORMAT_VERSION, MODEL_FORMAT_VERSION, __version__
from . import dataset as dsmod
from . import neuralnet as nn
from .array import ArrayConfig
from .errors import (DegenerateGeometry, DimensionMismatch, EmptyTrainingSet, FormatError,
                     RowCountMismatch, SceneError, SceneFull, UserInsideBuilding, ZeroNormChannel)
from .precoders import (EvalReport, direction_precoder, evaluate, n_sweep, oracle_precoders,
                        orthogonal_precoders, report_from, spatial_channels, spatial_map,
                        write_sweep_csv)
from .scene import default_scene, load_scene

log = logging.getLogger("lbbnet")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def _int_list(s):
    try:
        vals = [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("expected a non-empty list of positive integers")
    return vals


def _add_array_args(p, side_default=8):
    p.add_argument("--side", type=_positive_int, default=side_default,
                   help="antennas per UPA side (A = side^2)")
    p.add_argument("--freq", type=_positive_float, default=3.5e9, help="carrier frequency [Hz]")
    p.add_argument("--spacing", type=_positive_float, default=None,
                   help="element spacing [m] (default half wavelength)")


def _add_model_args(p):
    p.add_argument("--arch", choices=nn.ARCHS, default="rff")
    p.add_argument("--rff", type=_positive_int, default=1000, help="number of random Fourier features R")
    p.add_argument("--sigma-inv", type=_positive_float, default=50.0,
                   help="inverse RFF frequency std 1/s [m]")
    p.add_argument("--depth", type=_positive_int, default=4, help="MLP depth Q")
    p.add_argument("--width", type=_positive_int, default=512, help="MLP width M")
    p.add_argument("--epochs", type=_positive_int, default=50)
    p.add_argument("--batch", type=_positive_int, default=100)
    p.add_argument("--lr", type=_positive_float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbbnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"lbbnet {__version__} (LBBD v{DATASET_FORMAT_VERSION}, "
                                f"LBBM v{MODEL_FORMAT_VERSION})")
    parser.add_argument("--threads", type=_positive_int, default=1,
                        help="cap on numerical worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a labeled dataset from a scene")
    g.add_argument("--scene", help="scene JSON (default: shipped desk scene)")
    _add_array_args(g)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train an RFF network or the plain MLP")
    t.add_argument("--data", required=True)
    _add_model_args(t)
    t.add_argument("--test-fraction", type=float, default=None,
                   help="hold out this fraction (split seeded by --split-seed)")
    t.add_argument("--split-seed", type=int, default=0)
    t.add_argument("--float64", action="store_true", help="train in double precision")
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--trace", help="per-epoch cost CSV (default <out>.trace.csv)")

    e = sub.add_parser("eval", help="score a model or a baseline")
    who = e.add_mutually_exclusive_group(required=True)
    who.add_argument("--model")
    who.add_argument("--baseline", choices=("direction", "oracle", "orthogonal-oracle"))
    e.add_argument("--data")
    e.add_argument("--test-fraction", type=float, default=None,
                   help="score only the test part of this split")
    e.add_argument("--split-seed", type=int, default=0)
    e.add_argument("--scene", help="scene JSON for grid maps or the direction baseline")
    e.add_argument("--grid-pitch", type=_positive_float, default=None)
    _add_array_args(e)
    e.add_argument("--cdf")
    e.add_argument("--values")
    e.add_argument("--summary")
    e.add_argument("--heatmap")
    e.add_argument("--grid-csv")

    s = sub.add_parser("sweep", help="correlation versus number of training channels")
    s.add_argument("--scene")
    _add_array_args(s)
    s.add_argument("--n-list", type=_int_list, required=True)
    s.add_argument("--eval-size", type=_positive_int, default=2000)
    _add_model_args(s)
    s.add_argument("--no-timings", action="store_true", help="omit the train_seconds column")
    s.add_argument("--out", required=True)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    return parser


def _array_cfg(args) -> ArrayConfig:
    return ArrayConfig(args.side, args.freq, args.spacing)


def _scene(path):
    return load_scene(path) if path else default_scene()


def _write_manifest(out, argv, args, outputs, seeds, started, extra=None):
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seeds": seeds,
        "inputs": {k: config.get(k) for k in ("scene", "data", "model") if config.get(k)},
        "outputs": outputs,
        "tool_version": __version__,
        "format_versions": {"LBBD": DATASET_FORMAT_VERSION, "LBBM": MODEL_FORMAT_VERSION},
        "threads": args.threads,
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    path = f"{out}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def cmd_generate(args, argv, started):
    cfg = _array_cfg(args)
    scene = _scene(args.scene)
    ds = dsmod.build_dataset(scene, cfg, args.n, args.seed)
    dsmod.save(ds, args.out)
    zero = int(ds.zero_norm.sum())
    print(f"N={len(ds)} zero_norm={zero}")
    _write_manifest(args.out, argv, args, [args.out], {"users": args.seed}, started,
                    {"zero_norm_count": zero})


def _split_for(ds, args):
    if args.test_fraction is None:
        live = np.flatnonzero(~ds.zero_norm)
        return dsmod.Split(live, np.zeros(0, dtype=np.int64), np.flatnonzero(ds.zero_norm))
    return dsmod.split(ds, args.test_fraction, args.split_seed)


def cmd_train(args, argv, started):
    ds = dsmod.load(args.data)
    sp = _split_for(ds, args)
    rff = nn.RffConfig(args.rff, 1.0 / args.sigma_inv, args.seed)
    mlp = nn.MlpConfig(args.depth, args.width, 2 * ds.array_cfg.num_antennas)
    tc = nn.TrainConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
                        rng_seed=args.seed)
    res = nn.train(ds, sp, rff, mlp, tc, arch=args.arch,
                   dtype=np.float64 if args.float64 else np.float32, log=log.info)
    nn.save_model(res.model, args.out)
    trace = args.trace or f"{args.out}.trace.csv"
    with open(trace, "w") as fh:
        fh.write("epoch,cost\n")
        for k, c in enumerate(res.epoch_costs, 1):
            fh.write(f"{k},{c!r}\n")
    print(f"trained {args.arch}: {res.steps} steps, final cost {res.epoch_costs[-1]:.5f}")
    _write_manifest(args.out, argv, args, [args.out, trace],
                    {"rff": args.seed, "init": args.seed, "shuffle": args.seed + 1,
                     "split": args.split_seed}, started,
                    {"steps": res.steps, "train_seconds": round(res.seconds, 3)})


def _baseline_fn(kind, scene, cfg):
    if kind == "direction":
        if scene is None:
            raise UsageError("the direction baseline needs a scene (--scene or a scene-built dataset)")
        return direction_precoder(scene, cfg)
    return None


def cmd_eval(args, argv, started):
    model = nn.load_model(args.model) if args.model else None
    outputs = []
    if args.data is None and args.grid_pitch is None:
        raise UsageError("eval needs --data or --grid-pitch")
    if args.data is not None and args.grid_pitch is not None:
        raise UsageError("--data and --grid-pitch are mutually exclusive")

    if args.data is not None:
        ds = dsmod.load(args.data)
        cfg = ds.array_cfg
        if args.test_fraction is None:
            idx = np.arange(len(ds))
        else:
            sp = dsmod.split(ds, args.test_fraction, args.split_seed)
            idx = np.concatenate([sp.test_indices, sp.excluded_indices])
        if model is not None:
            report = evaluate(model, ds, idx)
        elif args.baseline == "direction":
            scene = load_scene(args.scene) if args.scene else ds.get_scene()
            report = evaluate(_baseline_fn("direction", scene, cfg), ds, idx)
        else:
            H = ds.channels[idx]
            W = oracle_precoders(H) if args.baseline == "oracle" else orthogonal_precoders(H)
            report = report_from(W, H, idx)
        if args.cdf:
            report.write_cdf_csv(args.cdf)
            outputs.append(args.cdf)
        if args.values:
            report.write_values_csv(args.values)
            outputs.append(args.values)
        if args.summary:
            report.write_summary_json(args.summary)
            outputs.append(args.summary)
        summary = report.summary()
    else:
        scene = _scene(args.scene)
        cfg = model.array_cfg if model is not None else _array_cfg(args)
        chans = spatial_channels(scene, cfg, args.grid_pitch)
        if model is not None:
            fn = model
        elif args.baseline == "direction":
            fn = _baseline_fn("direction", scene, cfg)
        else:
            xs, ys, pts, H, blocked, los = chans
            lookup = oracle_precoders(H) if args.baseline == "oracle" else orthogonal_precoders(H)
            table = {tuple(p): w for p, w in zip(map(tuple, pts), lookup)}

            def fn(locations):
                return np.array([table[tuple(p)] for p in locations])
        smap = spatial_map(fn, scene, cfg, args.grid_pitch, chans)
        if args.heatmap:
            smap.write_svg(args.heatmap)
            outputs.append(args.heatmap)
        if args.grid_csv:
            smap.write_csv(args.grid_csv)
            outputs.append(args.grid_csv)
        eta = smap.eta[~np.isnan(smap.eta)]
        report = EvalReport(eta, np.arange(eta.size), int(smap.zero.sum()))
        if args.cdf:
            report.write_cdf_csv(args.cdf)
            outputs.append(args.cdf)
        if args.summary:
            report.write_summary_json(args.summary)
            outputs.append(args.summary)
        summary = report.summary()
        summary.update({"los_mean": smap.region_mean(smap.los & ~smap.inside),
                        "nlos_mean": smap.region_mean(smap.nlos)})
    print(json.dumps(summary, sort_keys=True))
    anchor = outputs[0] if outputs else (args.model or args.data or "eval")
    _write_manifest(anchor, argv, args, outputs, {"split": args.split_seed}, started,
                    {"summary": summary})


def cmd_sweep(args, argv, started):
    cfg = _array_cfg(args)
    scene = _scene(args.scene)
    rff = nn.RffConfig(args.rff, 1.0 / args.sigma_inv, args.seed)
    mlp = nn.MlpConfig(args.depth, args.width, 2 * cfg.num_antennas)
    tc = nn.TrainConfig(epochs=args.epochs, batch_size=args.batch, learning_rate=args.lr,
                        rng_seed=args.seed)
    rows = n_sweep(scene, cfg, args.n_list, args.eval_size, args.seed, rff, mlp, tc,
                   arch=args.arch, log=log.info)
    write_sweep_csv(rows, args.out, include_seconds=not args.no_timings)
    for r in rows:
        print(f"N={r.n} median={r.median:.4f} mean={r.mean:.4f}")
    _write_manifest(args.out, argv, args, [args.out], {"eval": args.seed, "train_base": args.seed + 1},
                    started)


def cmd_replay(args, argv, started):
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"manifest is not valid JSON: {exc}")
    recorded = manifest.get("argv")
    if not recorded:
        raise UsageError("manifest has no recorded argv")
    if recorded and recorded[0] == "replay":
        raise UsageError("refusing to replay a replay")
    return main(recorded)


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval,
            "sweep": cmd_sweep, "replay": cmd_replay}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    started = time.perf_counter()
    try:
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            rc = COMMANDS[args.command](args, argv, started)
        return rc or EXIT_OK
    except (UsageError, SceneError, UserInsideBuilding, SceneFull, DegenerateGeometry,
            ValueError) as exc:
        # data-content errors are ValueError subclasses too; classify them first
        if isinstance(exc, (EmptyTrainingSet, ZeroNormChannel)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        if isinstance(exc, (FormatError, DimensionMismatch, RowCountMismatch)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
