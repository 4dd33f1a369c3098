"""Command line interface: ``flowmesd {metric,refine,viz,batch}``.

Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .exceptions import FlowMesdError, MissingSecondInputError
from .harness import (
    METRIC_FIELDS,
    load_manifest,
    report_to_csv,
    report_to_json,
    run_batch,
)
from .io import load_flow, load_image, save_flow, save_png
from .metrics import evaluate, gradient
from .refine import MODES, ErConfig, edge_refine
from .validation import EvalRegion
from .viz import flow_to_color, gradient_difference_map, gradient_magnitude_map

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2

log = logging.getLogger("flowmesd")


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _region(text):
    try:
        return EvalRegion.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_flow(path):
    try:
        return load_flow(path)
    except OSError as exc:
        raise _InputError(f"{path}: {exc.strerror or exc}") from None
    except FlowMesdError as exc:
        raise _InputError(f"{path}: {exc}") from None


def _er_config(args) -> ErConfig:
    return ErConfig(n1=args.n1, n2=args.n2, radius=args.radius, mode=args.mode)


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_metric(args) -> int:
    gt = _load_flow(args.gt)
    est = _load_flow(args.est)
    report = evaluate(gt, est, args.region)
    if args.format == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        writer.writerow([repr(v) if isinstance(v, float) else v
                         for v in (getattr(report, k) for k in METRIC_FIELDS)])
        text = buf.getvalue()
    _emit(text, args.output)
    return EXIT_OK


def cmd_refine(args) -> int:
    flow = _load_flow(args.flow)
    try:
        image = load_image(args.image)
    except OSError as exc:
        raise _InputError(f"{args.image}: {exc.strerror or exc}") from None
    if Path(args.out).suffix.lower() != Path(args.flow).suffix.lower():
        raise _InputError(f"output {args.out} must use the input's format ({Path(args.flow).suffix})")
    refined = edge_refine(flow, image, _er_config(args))
    save_flow(args.out, refined)
    return EXIT_OK


def cmd_viz(args) -> int:
    gt = _load_flow(args.gt)
    est = _load_flow(args.est) if args.est else None
    if args.kind == "graddiff" and est is None:
        raise MissingSecondInputError("graddiff needs both a ground-truth and an estimated flow")
    if args.region is not None:
        top, left, h, w = args.region.rect
        args.region.to_mask(gt.shape)
        gt = gt.crop(top, left, h, w)
        est = est.crop(top, left, h, w) if est is not None else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fields = [("gt", gt)] + ([("est", est)] if est is not None else [])
    if args.kind == "color":
        for name, f in fields:
            save_png(out_dir / f"color_{name}.png", flow_to_color(f, args.norm))
    elif args.kind == "grad":
        for name, f in fields:
            save_png(out_dir / f"grad_{name}.png",
                     gradient_magnitude_map(gradient(f), args.which, args.norm))
    else:
        save_png(out_dir / "graddiff.png",
                 gradient_difference_map(gradient(gt), gradient(est), args.norm))
    return EXIT_OK


def cmd_batch(args) -> int:
    manifest = load_manifest(args.manifest)
    agg = run_batch(manifest, with_er=args.with_er, er_config=_er_config(args), jobs=args.jobs)
    out_dir = Path(args.out_dir) if args.out_dir else (manifest.output_dir or Path(args.manifest).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = out_dir / f"{manifest.dataset}_report.csv"
        path.write_text(report_to_csv(agg))
    else:
        path = out_dir / f"{manifest.dataset}_report.json"
        path.write_text(report_to_json(agg))
    for f in agg.frames:
        if not f.ok:
            print(f"skipped {f.frame_id}: {f.error}", file=sys.stderr)
    summary = agg.summary()
    print(json.dumps(summary))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _add_er_options(p):
    p.add_argument("--radius", type=int, default=7, help="window half-width (default 7)")
    p.add_argument("--n1", type=float, default=7.0, help="spatial bandwidth (default 7)")
    p.add_argument("--n2", type=float, default=7.0, help="colour bandwidth (default 7)")
    p.add_argument("--mode", choices=MODES, default="weighted-median")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowmesd", description="Optical flow evaluation with AEPE and MESD.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("metric", help="AEPE and MESD of one estimate against ground truth")
    p.add_argument("gt")
    p.add_argument("est")
    p.add_argument("--region", type=_region, help="top,left,height,width")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-o", "--output", help="write to file instead of stdout")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("refine", help="apply edge refinement to a flow file")
    p.add_argument("flow")
    p.add_argument("image", help="first frame of the pair (8-bit PNG/PPM)")
    p.add_argument("out")
    _add_er_options(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("viz", help="colour codings, gradient maps, gradient-difference maps")
    p.add_argument("gt")
    p.add_argument("est", nargs="?")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("color", "grad", "graddiff"), default="color")
    p.add_argument("--norm", type=float, help="explicit normalization constant")
    p.add_argument("--which", choices=("u", "v", "both"), default="both",
                   help="gradient planes for --kind grad")
    p.add_argument("--region", type=_region, help="crop top,left,height,width before rendering")
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("batch", help="evaluate every frame pair in a manifest")
    p.add_argument("manifest")
    p.add_argument("--with-er", action="store_true", help="also evaluate edge-refined estimates")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out-dir", help="defaults to the manifest's output_dir or its directory")
    p.add_argument("--jobs", type=int, default=1, help="frames evaluated in parallel")
    _add_er_options(p)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (_InputError, FlowMesdError, ValueError, OSError) as exc:
        print(f"flowmesd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"flowmesd {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
