"""Command-line driver: ``gazewalk saliency | simulate | analyze``.

Exit codes: 0 success, 2 input/data error, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import load_config, load_fixations_csv, load_frames, parse_config, read_salmap, \
    read_scanpath_jsonl, write_preview_png, write_salmap, write_scanpath_jsonl
from .errors import ConfigError, EstimationError, InputError
from .saliency import SurpriseTracker, build_feature_stack, itti_saliency, self_information_map
from .stats import MODE_BOUNDS_DEG, ccdf, fixation_metrics, ks_two_sample, split_modes, \
    tail_stability
from .walker import SaliencySource, run_scanpath

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3


@dataclass
class RunManifest:
    command: str
    config_hash: str | None
    seed: int | None
    inputs: list[str]
    version: str = __version__
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("GAZEWALK_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# saliency


def _saliency_maps(frames, method: str):
    if method == "itti":
        return [itti_saliency(f) for f in frames]
    if method == "selfinfo":
        return [self_information_map(build_feature_stack(f, 1)) for f in frames]
    if method == "surprise":
        tracker = SurpriseTracker()
        return [tracker(f) for f in frames]
    raise ConfigError(f"unknown saliency method {method!r}", "method")


def cmd_saliency(args) -> int:
    t0 = time.perf_counter()
    frames = load_frames(args.input, args.pattern)
    maps = _saliency_maps(frames, args.method)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(maps):
        write_salmap(out / f"map_{i:05d}.salmap", m)
        if args.preview:
            write_preview_png(out / f"map_{i:05d}.png", m)
    RunManifest("saliency", config_hash({"method": args.method}), None, [str(args.input)],
                wall_time_s=time.perf_counter() - t0,
                extra={"method": args.method, "maps": len(maps)}).write(out / "manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _simulate_one(job):
    source, walker_cfg, motor, path = job
    write_scanpath_jsonl(path, run_scanpath(source, walker_cfg, motor))
    return str(path)


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    run = load_config(args.config) if args.config else parse_config("")
    if args.seed is not None:
        run.walker = replace(run.walker, seed=args.seed)
    if run.walker.seed is None:
        raise ConfigError("missing required key 'seed' (set it in the config or pass --seed)",
                          "seed")
    if args.observers < 1:
        raise ConfigError("observers must be >= 1", "observers")
    frames = load_frames(args.frames, args.pattern, run.walker.tick_ms)
    frame_ms = run.frame_ms or run.walker.tick_ms
    maps = _saliency_maps(frames, run.saliency)
    source = SaliencySource.from_maps(maps, frame_ms=frame_ms)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(source, replace(run.walker, seed=run.walker.seed + k), run.motor,
             out / f"observer_{k:03d}.jsonl") for k in range(args.observers)]
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            written = list(pool.map(_simulate_one, jobs))
    else:
        written = [_simulate_one(j) for j in jobs]
    cfg = run.to_dict()
    RunManifest("simulate", config_hash(cfg), run.walker.seed,
                [str(args.frames)] + ([str(args.config)] if args.config else []),
                wall_time_s=time.perf_counter() - t0,
                extra={"observers": args.observers, "outputs": [Path(p).name for p in written],
                       "config": cfg}).write(out / "manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _scanpath_shifts(path) -> tuple[np.ndarray, np.ndarray]:
    """Gaze-shift amplitudes (fixational jitter excluded) and gaze positions."""
    sp = read_scanpath_jsonl(path)
    if len(sp) == 0:
        raise InputError(f"{path}: empty scan path")
    amps = sp.gaze_shifts()
    return amps, sp.positions()


def _human_shifts(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if path.suffix == ".jsonl":
        return _scanpath_shifts(path)
    records, _ = load_fixations_csv(path)
    if not records:
        raise InputError(f"{path}: no fixations")
    groups: dict = {}
    for r in records:
        groups.setdefault((r.observer, r.stimulus), []).append(r)
    amps = []
    for recs in groups.values():
        recs.sort(key=lambda r: r.t_ms)
        p = np.array([(r.x, r.y) for r in recs])
        d = np.hypot(*np.diff(p, axis=0).T) if len(p) > 1 else np.zeros(0)
        amps.append(d[d > 0])
    return np.concatenate(amps), np.array([(r.x, r.y) for r in records])


def _write_ccdf(path, values) -> None:
    curve = ccdf(values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "ccdf"])
        for x, v in zip(curve.x, curve.values):
            w.writerow([repr(float(x)), repr(float(v))])


def _tail(values) -> dict:
    try:
        return tail_stability(values).to_dict()
    except (EstimationError, InputError) as exc:
        return {"error": str(exc)}


def cmd_analyze(args) -> int:
    t0 = time.perf_counter()
    sims = [_scanpath_shifts(p) for p in args.scanpaths]
    amps = np.concatenate([a for a, _ in sims])
    if amps.size == 0:
        raise InputError("scan paths contain no gaze shifts")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"n_scanpaths": len(sims), "n_shifts": int(amps.size),
                    "px_per_degree": args.px_per_degree, "mode_bounds_deg": list(MODE_BOUNDS_DEG)}

    _write_ccdf(out / "ccdf_all.csv", amps)
    report["tail_all"] = _tail(amps)
    modes = split_modes(amps, args.px_per_degree)
    report["modes"] = {}
    for name, vals in modes.items():
        entry = {"n": int(vals.size)}
        if vals.size:
            _write_ccdf(out / f"ccdf_{name}.csv", vals)
            entry["tail"] = _tail(vals)
        report["modes"][name] = entry

    if args.human:
        human, human_pos = _human_shifts(args.human)
        if human.size == 0:
            raise InputError(f"{args.human}: no gaze shifts")
        _write_ccdf(out / "ccdf_human.csv", human)
        d, p = ks_two_sample(amps, human)
        report["ks"] = {"statistic": d, "p_value": p, "n_sim": int(amps.size),
                        "n_human": int(human.size)}
    if args.map:
        smap = read_salmap(args.map)
        if args.human:
            pts = human_pos
        else:
            pts = np.concatenate([p for _, p in sims])
        n, a = fixation_metrics(smap, pts)
        report["fixation_metrics"] = {"nss": None if np.isnan(n) else n, "auc": a}

    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    RunManifest("analyze", None, None, [str(p) for p in args.scanpaths]
                + [str(x) for x in (args.human, args.map) if x],
                wall_time_s=time.perf_counter() - t0).write(out / "manifest.json")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gazewalk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("saliency", help="compute saliency maps for an image or frame directory")
    s.add_argument("input")
    s.add_argument("--method", choices=("itti", "selfinfo", "surprise"), default="itti")
    s.add_argument("--pattern", default="*.png")
    s.add_argument("--preview", action="store_true", help="also write 16-bit PNG previews")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_saliency)

    s = sub.add_parser("simulate", help="simulate scan paths of one or more observers")
    s.add_argument("frames")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--observers", type=int, default=1)
    s.add_argument("--pattern", default="*.png")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="CCDF, tail, KS and fixation metrics for scan paths")
    s.add_argument("scanpaths", nargs="+")
    s.add_argument("--human", help="human fixation CSV or scan-path JSONL")
    s.add_argument("--map", help="SALMAP file for NSS/AUC")
    s.add_argument("--px-per-degree", type=float, default=30.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"gazewalk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"gazewalk: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
