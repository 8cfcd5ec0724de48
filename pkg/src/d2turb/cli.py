"""Command-line interface.

Subcommands: generate, degrade, invert-flow, inspect, validate, selftest.
Exit codes are a stable scripting contract: 0 success, 1 fatal error,
2 completed with skips, 64 usage error. The environment variable
``D2TURB_LOG`` sets the log level and never affects outputs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import formats
from .config import OpticalConfig, parse_config, replace
from .errors import EngineError
from .flowinv import forward_splat_invert
from .pipeline import ScenePair, generate_dataset, synthesize_sample, validate_dataset
from .version import ENGINE_VERSION

log = logging.getLogger("d2turb")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are exit 64, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _configure_logging() -> None:
    level = os.environ.get("D2TURB_LOG", "WARNING").upper()
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level if level in ("DEBUG", "INFO", "WARNING", "ERROR") else "WARNING")


def _load_config(path, seed=None, count=None, flat_field=None) -> OpticalConfig:
    config = parse_config(path) if path else OpticalConfig()
    if seed is not None:
        config = replace(config, seed=seed)
    if count is not None:
        config = replace(config, sample_count=count)
    if flat_field is not None:
        config = replace(config, flat_field_mode=flat_field)
    return config


def _pair_scenes(clean_dir: Path, depth_dir: Path, suffix: str) -> tuple[list[ScenePair], list[str]]:
    pairs = []
    missing = []
    for clean_path in sorted(clean_dir.glob("*.png")):
        stem = clean_path.stem
        candidates = [depth_dir / f"{stem}{suffix}.png", depth_dir / f"{stem}.png"]
        depth_path = next((c for c in candidates if c.exists()), None)
        if depth_path is None:
            missing.append(stem)
        else:
            pairs.append(ScenePair(str(clean_path), str(depth_path), stem))
    return pairs, missing


def cmd_generate(args) -> int:
    config = _load_config(args.config, args.seed, args.count)
    clean_dir = Path(args.clean_dir)
    depth_dir = Path(args.depth_dir)
    if not clean_dir.is_dir() or not depth_dir.is_dir():
        print("error: clean and depth paths must be directories", file=sys.stderr)
        return EXIT_FATAL
    pairs, missing = _pair_scenes(clean_dir, depth_dir, args.depth_suffix)
    for stem in missing:
        log.warning("no depth map for %s", stem)
    if missing and args.strict:
        print(f"error: missing depth for {len(missing)} image(s): {missing[0]}", file=sys.stderr)
        return EXIT_FATAL
    if not pairs:
        print("error: no paired clean/depth images found", file=sys.stderr)
        return EXIT_FATAL
    manifest = generate_dataset(
        config, pairs, args.out, workers=args.workers, strict=args.strict
    )
    counts = manifest["category_counts"]
    print(
        f"generated {manifest['sample_count']} samples "
        f"(weak {counts['weak']}, medium {counts['medium']}, strong {counts['strong']}) "
        f"-> {args.out}"
    )
    skipped = len(manifest["skipped"]) + len(missing)
    if skipped:
        print(f"skipped {skipped} input(s)", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_degrade(args) -> int:
    from .pipeline import load_scene

    config = _load_config(args.config, args.seed)
    scene = load_scene(ScenePair(args.image, args.depth, Path(args.image).stem))
    out_dir = Path(args.out)

    sample = synthesize_sample(scene, config, 0)
    formats.write_sample(out_dir, sample, engine_version=ENGINE_VERSION, debug=True)
    print(
        f"degraded {scene.identifier}: D/r0 {sample.metadata['d_over_r0']:.3f} "
        f"({sample.metadata['category']}) -> {out_dir}"
    )

    if args.flat_field:
        flat_config = replace(config, flat_field_mode=True)
        flat_sample = synthesize_sample(scene, flat_config, 0)
        flat_dir = out_dir / "flat_field"
        formats.write_sample(flat_dir, flat_sample, engine_version=ENGINE_VERSION, debug=True)
        print(f"flat-field baseline -> {flat_dir}")
    return EXIT_OK


def cmd_invert_flow(args) -> int:
    forward = formats.read_flow(getattr(args, "in")).astype(np.float64)
    flow = forward_splat_invert(forward)
    formats.write_flow(args.out, flow.vectors)
    covered = float(flow.validity.mean())
    print(f"inverted {getattr(args, 'in')} -> {args.out} (coverage {covered:.1%})")
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = Path(getattr(args, "in"))
    if path.is_file() and path.suffix == ".d2fl":
        field = formats.read_flow(path)
        mag = np.hypot(field[..., 0], field[..., 1])
        print(f"D2FL v{formats.FLOW_VERSION} {field.shape[0]}x{field.shape[1]} x2 float32")
        print(f"|v| mean {mag.mean():.4f} px, max {mag.max():.4f} px")
        return EXIT_OK
    if path.is_dir() and (path / formats.META_FILENAME).exists():
        meta = formats.read_json(path / formats.META_FILENAME)
        for key in sorted(meta):
            print(f"{key} = {meta[key]}")
        return EXIT_OK
    if path.is_dir() and (path / formats.MANIFEST_FILENAME).exists():
        manifest = formats.read_json(path / formats.MANIFEST_FILENAME)
        print(f"dataset: {manifest['sample_count']} samples, engine {manifest['engine_version']}")
        print(f"categories: {manifest['category_counts']}")
        print(f"created: {manifest['created_at']}")
        return EXIT_OK
    print(f"error: nothing to inspect at {path}", file=sys.stderr)
    return EXIT_FATAL


def cmd_validate(args) -> int:
    report = validate_dataset(args.dataset)
    for problem in report["problems"]:
        print(f"problem: {problem}", file=sys.stderr)
    status = "ok" if report["ok"] else "INVALID"
    print(
        f"validate {args.dataset}: {status} "
        f"({report['samples_listed']} samples, "
        f"{report['flow_residuals_checked']} flow residual checks)"
    )
    return EXIT_OK if report["ok"] else EXIT_FATAL


def cmd_selftest(args) -> int:
    from .selftest import run_all

    results = run_all(fast=args.fast)
    for result in results:
        print(result.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FATAL


def build_parser() -> _Parser:
    parser = _Parser(prog="d2turb", description="Depth-aware turbulence degradation engine")
    parser.add_argument("--version", action="version", version=f"d2turb {ENGINE_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="synthesize a paired dataset from clean/depth directories")
    p.add_argument("--config", help="TOML configuration file (defaults apply when omitted)")
    p.add_argument("--clean-dir", required=True, help="directory of clean RGB PNG images")
    p.add_argument("--depth-dir", required=True, help="directory of grayscale depth PNGs")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, help="override the configured global seed")
    p.add_argument("--workers", type=int, default=1, help="parallel workers (outputs identical)")
    p.add_argument("--count", type=int, help="number of samples to synthesize")
    p.add_argument("--depth-suffix", default="_depth", help="depth filename stem suffix")
    p.add_argument("--strict", action="store_true", help="abort on unpaired or unreadable inputs")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("degrade", help="degrade a single image/depth pair")
    p.add_argument("--image", required=True, help="clean RGB PNG")
    p.add_argument("--depth", required=True, help="grayscale depth PNG")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", required=True, help="output directory for the sample tuple")
    p.add_argument("--seed", type=int, help="override the configured global seed")
    p.add_argument("--flat-field", action="store_true",
                   help="also write the uniform-strength baseline for comparison")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("invert-flow", help="invert a forward D2FL field into backward flow")
    p.add_argument("--in", required=True, help="forward displacement .d2fl")
    p.add_argument("--out", required=True, help="output backward flow .d2fl")
    p.set_defaults(func=cmd_invert_flow)

    p = sub.add_parser("inspect", help="print flow header, sample metadata, or dataset summary")
    p.add_argument("--in", required=True, help=".d2fl file, sample directory, or dataset root")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("validate", help="verify dataset integrity and consistency")
    p.add_argument("--dataset", required=True, help="dataset root directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("selftest", help="run the statistical self-checks")
    p.add_argument("--fast", action="store_true", help="reduced-size variants for smoke testing")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
