"""Experiment runner: image I/O, sweep grids, CSV traces, command line."""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, ImageIOError
from .filters import FILTER_KINDS, FilterSpec, apply_filter
from .methods import METHOD_IDS, MethodSpec
from .reverse import BASELINES, IterationTrace, ReverseProblem, RunConfig, run_reverse
from .schedules import ScheduleSpec

TRACE_HEADER = "n,psnr_db,pct_improvement,lambda_raw,lambda_clipped,mu,singular"
SUMMARY_HEADER = "method,mu,accel,final_pct,status"


# ---------------------------------------------------------------------------
# image I/O

def load_image(path) -> np.ndarray:
    """Load an 8-bit grayscale PGM (P5) or PNG as a float64 matrix in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise ImageIOError(f"{path}: no such file")
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".pnm"):
        return _load_pgm(path)
    if suffix == ".png":
        return _load_png(path)
    raise ImageIOError(f"{path}: unsupported format {suffix!r} (expected .pgm or .png)")


def _load_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ImageIOError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError:
        raise ImageIOError(f"{path}: corrupt PGM header") from None
    if width < 1 or height < 1:
        raise ImageIOError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageIOError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    pos += 1  # single whitespace byte after the header
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise ImageIOError(f"{path}: truncated raster "
                           f"({len(raster)} of {width * height} bytes)")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return pixels.astype(np.float64) / 255.0


def _load_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode != "L":
                raise ImageIOError(f"{path}: PNG must be 8-bit grayscale (mode {im.mode!r})")
            pixels = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError:
        raise ImageIOError(f"{path}: corrupt or unrecognized PNG") from None
    return pixels.astype(np.float64) / 255.0


def save_image(img, path) -> None:
    """Save a matrix as 8-bit PGM or PNG, clamping to [0, 1], rounding half up."""
    path = Path(path)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ImageIOError(f"{path}: expected a 2-D image")
    if not np.all(np.isfinite(img)):
        raise ImageIOError(f"{path}: refusing to save non-finite image")
    quantized = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    suffix = path.suffix.lower()
    try:
        if suffix in (".pgm", ".pnm"):
            header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
            path.write_bytes(header + quantized.tobytes())
        elif suffix == ".png":
            Image.fromarray(quantized, mode="L").save(path)
        else:
            raise ImageIOError(f"{path}: unsupported format {suffix!r} (expected .pgm or .png)")
    except OSError as exc:
        if isinstance(exc, ImageIOError):
            raise
        raise ImageIOError(f"{path}: {exc}") from exc


def synthetic_image(size: int = 64, block: int = 8) -> np.ndarray:
    """Deterministic test pattern: diagonal ramp plus a checkerboard."""
    if size < 2 or block < 1:
        raise ConfigError("size must be >= 2 and block >= 1")
    idx = np.arange(size)
    ramp = (idx[:, None] + idx[None, :]) / (2.0 * (size - 1))
    checker = ((idx[:, None] // block + idx[None, :] // block) % 2).astype(np.float64)
    return 0.5 + 0.35 * (ramp - 0.5) + 0.18 * (2.0 * checker - 1.0)


# ---------------------------------------------------------------------------
# CSV output

def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_trace_csv(trace: IterationTrace, path) -> None:
    """Write the per-iteration trace with the fixed seven-column schema."""
    lines = [TRACE_HEADER]
    for rec in trace.records:
        lines.append(",".join((
            str(rec.n), _fmt(rec.psnr_db), _fmt(rec.pct), _fmt(rec.lambda_raw),
            _fmt(rec.lambda_clipped), _fmt(rec.mu), "1" if rec.singular else "0",
        )))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_summary_csv(rows: Sequence[dict], path) -> None:
    lines = [SUMMARY_HEADER]
    for row in rows:
        lines.append(",".join((row["method"], row["mu"], row["accel"],
                               row["final_pct"], row["status"])))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


# ---------------------------------------------------------------------------
# sweep driver

FilterEntry = Union[FilterSpec, tuple]   # FilterSpec or (label, callable)


@dataclass
class SweepConfig:
    """Grid of (filter x method x schedule x accelerator) runs."""

    image: Union[str, Path, np.ndarray]
    filters: Sequence[FilterEntry]
    methods: Sequence[str] = METHOD_IDS
    schedules: Sequence[str] = ("1",)
    accelerators: Sequence[str] = ("none",)
    iters: Union[int, Mapping[str, int]] = 300
    tau: float = 0.75
    out_dir: Union[str, Path] = "out"
    snapshot_stride: int = 100
    divergence_psnr_floor: float = 1.0
    workers: int | None = None
    save_images: bool = True


def make_schedule(label: str, iters: int) -> ScheduleSpec:
    """Build a schedule from its CLI label: a number, ed1, ed2, or cheby[:P=n]."""
    label = label.strip()
    if label == "ed1":
        return ScheduleSpec(kind="ed1", total=iters)
    if label == "ed2":
        return ScheduleSpec(kind="ed2", total=iters)
    if label == "cheby" or label.startswith("cheby:"):
        period = 64
        if ":" in label:
            _, _, tail = label.partition(":")
            key, _, value = tail.partition("=")
            if key != "P":
                raise ConfigError(f"unknown chebyshev option {key!r}")
            period = _parse_int(value, "P")
        return ScheduleSpec(kind="chebyshev", period=period)
    try:
        return ScheduleSpec(kind="constant", mu=float(label))
    except ValueError:
        raise ConfigError(f"unknown schedule {label!r}; expected a number, "
                          "ed1, ed2, or cheby[:P=n]") from None


def _normalize_filter(entry: FilterEntry) -> tuple[str, object]:
    if isinstance(entry, FilterSpec):
        return entry.label(), entry
    label, fn = entry
    if not callable(fn):
        raise ConfigError("filter entry must be a FilterSpec or (label, callable)")
    return str(label), fn


def _resolve_method(name: str, tau: float):
    if name in BASELINES:
        return name
    return MethodSpec(name, tau=tau)


def _run_variant(problem, method, schedule_label, accel, iters, tau, floor, stride):
    config = RunConfig(
        method=_resolve_method(method, tau),
        schedule=make_schedule(schedule_label, iters),
        accelerator=accel,
        max_iters=iters,
        divergence_psnr_floor=floor,
        snapshot_stride=stride,
    )
    return run_reverse(problem, config)


def run_sweep(cfg: SweepConfig) -> dict[str, list[dict]]:
    """Run the whole grid, writing one trace CSV per variant and one summary
    CSV per filter.  A diverging or failing variant is recorded in the
    summary and never interrupts the others.
    """
    if not cfg.filters or not cfg.methods or not cfg.schedules or not cfg.accelerators:
        raise ConfigError("filters, methods, schedules, accelerators must be non-empty")
    for name in cfg.methods:
        if name not in METHOD_IDS and name not in BASELINES:
            raise ConfigError(f"unknown method {name!r}")

    if isinstance(cfg.image, np.ndarray):
        truth = np.asarray(cfg.image, dtype=np.float64)
    else:
        truth = _load_input(str(cfg.image))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")

    workers = cfg.workers or os.cpu_count() or 1
    summaries: dict[str, list[dict]] = {}
    for entry in cfg.filters:
        label, filt = _normalize_filter(entry)
        iters = cfg.iters[label] if isinstance(cfg.iters, Mapping) else int(cfg.iters)
        combos = [(m, s, a) for m in cfg.methods for s in cfg.schedules
                  for a in cfg.accelerators]
        try:
            x0 = apply_filter(filt, truth) if isinstance(filt, FilterSpec) else filt(truth)
            problem = ReverseProblem(x0=x0, filter=filt, reference=truth)
        except Exception as exc:   # a broken filter must not kill other filters
            rows = [{"method": m, "mu": s, "accel": a, "final_pct": "ERROR",
                     "status": _sanitize(f"error: {exc}")} for m, s, a in combos]
            write_summary_csv(rows, out_dir / f"summary__{label}.csv")
            summaries[label] = rows
            continue

        def task(combo, _problem=problem, _iters=iters, _label=label):
            method, sched, accel = combo
            slug = f"{_label}__{method}__{_slug(sched)}__{accel}"
            try:
                trace = _run_variant(_problem, method, sched, accel, _iters,
                                     cfg.tau, cfg.divergence_psnr_floor,
                                     cfg.snapshot_stride)
            except Exception as exc:   # isolation: a bad variant must not kill the sweep
                return {"method": method, "mu": sched, "accel": accel,
                        "final_pct": "ERROR", "status": _sanitize(f"error: {exc}")}
            write_trace_csv(trace, out_dir / f"{slug}.csv")
            if cfg.save_images:
                save_image(np.clip(trace.final_x, 0.0, 1.0),
                           out_dir / f"{slug}_recovered.pgm")
            if trace.status == "diverged":
                return {"method": method, "mu": sched, "accel": accel,
                        "final_pct": "DIVERGED",
                        "status": f"diverged at {trace.diverged_at}"}
            return {"method": method, "mu": sched, "accel": accel,
                    "final_pct": _fmt(trace.final_pct) or "n/a",
                    "status": "completed"}

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, combos))
        write_summary_csv(rows, out_dir / f"summary__{label}.csv")
        summaries[label] = rows
    return summaries


def _sanitize(text: str) -> str:
    return text.replace(",", ";").replace("\n", " ")


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "-" for ch in text)


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {text!r}") from None


def _parse_float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {text!r}") from None


def parse_filter_spec(text: str) -> FilterSpec:
    """Parse CLI filter syntax, e.g. gaussian:sigma=1 or guided:r=8,eps=0.01."""
    kind, _, tail = text.partition(":")
    if kind not in FILTER_KINDS:
        raise ConfigError(f"unknown filter {kind!r}; expected one of {FILTER_KINDS}")
    params: dict[str, str] = {}
    if tail:
        for item in tail.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ConfigError(f"malformed filter option {item!r}")
            params[key.strip()] = value.strip()

    def take(key, default=None):
        if key in params:
            return params.pop(key)
        if default is None:
            raise ConfigError(f"filter {kind} requires {key}=...")
        return default

    if kind == "gaussian":
        spec = FilterSpec.gaussian(_parse_float(take("sigma"), "sigma"))
    elif kind == "box":
        spec = FilterSpec.box(_parse_int(take("r"), "r"))
    elif kind == "guided":
        spec = FilterSpec.guided(_parse_int(take("r"), "r"),
                                 _parse_float(take("eps"), "eps"))
    else:
        spec = FilterSpec.bilateral(_parse_float(take("sigma_s"), "sigma_s"),
                                    _parse_float(take("sigma_r"), "sigma_r"))
    if params:
        raise ConfigError(f"unknown filter option(s) {sorted(params)} for {kind}")
    return spec


def _load_input(text: str) -> np.ndarray:
    """An image path, or synthetic[:size] for the built-in test pattern."""
    if text == "synthetic" or text.startswith("synthetic:"):
        size = 64
        if ":" in text:
            size = _parse_int(text.partition(":")[2], "synthetic size")
        return synthetic_image(size)
    return load_image(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steffensen",
                     description="Reverse black-box image filters with vector "
                                 "Steffensen acceleration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_filter = sub.add_parser("filter", help="apply a filter (fabricate an observation)")
    p_filter.add_argument("--input", required=True,
                          help="image path, or synthetic[:size]")
    p_filter.add_argument("--filter", required=True, help="e.g. gaussian:sigma=1")
    p_filter.add_argument("--out", required=True, help="output image path (.pgm/.png)")
    p_filter.set_defaults(func=_cmd_filter)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True,
                        help="ground-truth image path, or synthetic[:size]")
    common.add_argument("--iters", type=int, default=300)
    common.add_argument("--tau", type=float, default=0.75)
    common.add_argument("--psnr-floor", type=float, default=1.0)
    common.add_argument("--snapshot-stride", type=int, default=100)
    common.add_argument("--out", default="out", help="output directory")

    p_run = sub.add_parser("run", parents=[common], help="run a single variant")
    p_run.add_argument("--filter", required=True)
    p_run.add_argument("--method", default="A1",
                       help=f"one of {', '.join(METHOD_IDS + BASELINES)}")
    p_run.add_argument("--mu", default="1", help="number, ed1, ed2, or cheby[:P=n]")
    p_run.add_argument("--accel", default="none", choices=("none", "nesterov", "afm"))
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", parents=[common], help="run a grid of variants")
    p_sweep.add_argument("--filter", action="append", required=True,
                         help="repeatable filter spec")
    p_sweep.add_argument("--methods", default=",".join(METHOD_IDS),
                         help="comma list; 'all' for the full catalog")
    p_sweep.add_argument("--mus", default="1", help="comma list of schedules")
    p_sweep.add_argument("--accels", default="none", help="comma list of accelerators")
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def _cmd_filter(args) -> int:
    img = _load_input(args.input)
    spec = parse_filter_spec(args.filter)
    save_image(np.clip(apply_filter(spec, img), 0.0, 1.0), args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    truth = _load_input(args.input)
    spec = parse_filter_spec(args.filter)
    name = args.method
    if name not in METHOD_IDS and name not in BASELINES:
        raise ConfigError(f"unknown method {name!r}")
    x0 = apply_filter(spec, truth)
    problem = ReverseProblem(x0=x0, filter=spec, reference=truth)
    trace = _run_variant(problem, name, args.mu, args.accel, args.iters,
                         args.tau, args.psnr_floor, args.snapshot_stride)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    slug = f"{spec.label()}__{name}__{_slug(args.mu)}__{args.accel}"
    write_trace_csv(trace, out_dir / f"{slug}.csv")
    save_image(x0, out_dir / f"{spec.label()}_observation.pgm")
    save_image(np.clip(trace.final_x, 0.0, 1.0), out_dir / f"{slug}_recovered.pgm")
    last = trace.records[-1] if trace.records else None
    print(f"{name} mu={args.mu} accel={args.accel}: status={trace.status}"
          + (f" diverged_at={trace.diverged_at}" if trace.diverged_at is not None else "")
          + (f" psnr0={trace.psnr0:.3f}dB" if trace.psnr0 is not None else "")
          + (f" final={last.psnr_db:.3f}dB pct={last.pct:.2f}%"
             if last is not None and last.psnr_db is not None else ""))
    print(f"trace: {out_dir / (slug + '.csv')}")
    return 0


def _cmd_sweep(args) -> int:
    methods = tuple(METHOD_IDS) if args.methods == "all" else \
        tuple(m.strip() for m in args.methods.split(",") if m.strip())
    cfg = SweepConfig(
        image=_load_input(args.input),
        filters=[parse_filter_spec(f) for f in args.filter],
        methods=methods,
        schedules=tuple(s.strip() for s in args.mus.split(",") if s.strip()),
        accelerators=tuple(a.strip() for a in args.accels.split(",") if a.strip()),
        iters=args.iters,
        tau=args.tau,
        out_dir=args.out,
        snapshot_stride=args.snapshot_stride,
        divergence_psnr_floor=args.psnr_floor,
        workers=args.workers,
    )
    summaries = run_sweep(cfg)
    for label, rows in summaries.items():
        done = sum(1 for r in rows if r["status"] == "completed")
        print(f"{label}: {done}/{len(rows)} variants completed, "
              f"summary in {Path(args.out) / ('summary__' + label + '.csv')}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ImageIOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
