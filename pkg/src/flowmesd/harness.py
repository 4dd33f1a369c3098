"""Batch evaluation over a manifest of frame pairs.

Manifest formats
----------------
JSON::

    {"dataset": "sintel-clean",
     "output_dir": "out",
     "entries": [{"frame_id": "alley_1/0001",
                  "gt_path": "gt/frame_0001.flo",
                  "est_path": "pwc/frame_0001.flo",
                  "image_path": "clean/frame_0001.png",
                  "region": "10,20,64,64"}]}

Plain text (one entry per line, whitespace separated, ``-`` for a missing
optional column, ``#`` starts a comment)::

    dataset = sintel-clean
    output_dir = out
    # frame_id   gt_path   est_path   [image_path]   [region]
    alley_1/0001 gt/frame_0001.flo pwc/frame_0001.flo clean/frame_0001.png -

Relative paths are resolved against the manifest's directory.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import FlowMesdError, ManifestError
from .io import load_flow, load_image
from .metrics import MetricReport, evaluate
from .refine import ErConfig, edge_refine
from .validation import EvalRegion

log = logging.getLogger(__name__)

METRIC_FIELDS = ["aepe", "mesd", "ess_ux", "ess_uy", "ess_vx", "ess_vy",
                 "n_flow", "n_ux", "n_uy", "n_vx", "n_vy"]
SUMMARY_ID = "__mean__"

_DIRECTIVE = re.compile(r"^(?P<key>dataset|output_dir)\s*=\s*(?P<value>.+)$")


@dataclass
class ManifestEntry:
    frame_id: str
    gt_path: Path
    est_path: Path
    image_path: Path | None = None
    region: EvalRegion | None = None


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    dataset: str = "dataset"
    output_dir: Path | None = None


def _parse_region(value, where):
    if value in (None, "", "-"):
        return None
    try:
        if isinstance(value, (list, tuple)):
            return EvalRegion(rect=tuple(value))
        return EvalRegion.parse(value)
    except (ValueError, TypeError) as exc:
        raise ManifestError(f"{where}: bad region {value!r}: {exc}") from None


def _resolve(base: Path, value):
    if value in (None, "", "-"):
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def parse_manifest(text: str, base_dir=".") -> Manifest:
    """Parse manifest text (JSON or line-oriented)."""
    base = Path(base_dir)
    stripped = text.lstrip()
    raw_entries = []
    dataset, output_dir = "dataset", None
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from None
        dataset = str(doc.get("dataset", dataset))
        output_dir = doc.get("output_dir")
        entries = doc.get("entries")
        if not isinstance(entries, list):
            raise ManifestError("JSON manifest needs an 'entries' list")
        for i, e in enumerate(entries):
            if not isinstance(e, dict):
                raise ManifestError(f"entry {i}: expected an object")
            raw_entries.append((f"entry {i}", e))
    else:
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            directive = _DIRECTIVE.match(line)
            if directive:
                if directive["key"] == "dataset":
                    dataset = directive["value"]
                else:
                    output_dir = directive["value"]
                continue
            cols = line.split()
            if not 3 <= len(cols) <= 5:
                raise ManifestError(f"line {lineno}: expected 3 to 5 columns, got {len(cols)}")
            cols += ["-"] * (5 - len(cols))
            raw_entries.append((f"line {lineno}", dict(zip(
                ("frame_id", "gt_path", "est_path", "image_path", "region"), cols))))

    entries = []
    seen = set()
    for where, e in raw_entries:
        try:
            frame_id = str(e["frame_id"])
            gt, est = e["gt_path"], e["est_path"]
        except KeyError as exc:
            raise ManifestError(f"{where}: missing field {exc.args[0]!r}") from None
        if frame_id in seen:
            raise ManifestError(f"{where}: duplicate frame_id {frame_id!r}")
        seen.add(frame_id)
        entries.append(ManifestEntry(
            frame_id=frame_id,
            gt_path=_resolve(base, gt),
            est_path=_resolve(base, est),
            image_path=_resolve(base, e.get("image_path")),
            region=_parse_region(e.get("region"), where),
        ))
    if not entries:
        raise ManifestError("manifest has no entries")
    return Manifest(entries, dataset, _resolve(base, output_dir))


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    return parse_manifest(text, path.parent)


@dataclass
class FrameResult:
    frame_id: str
    report: MetricReport | None = None
    er_report: MetricReport | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def relative_improvement(before, after):
    """``(before - after) / before * 100``; ``None`` when undefined."""
    if before is None or after is None or before == 0:
        return None
    return (before - after) / before * 100.0


def _mean(values):
    # fsum is exactly rounded, hence independent of frame order
    values = list(values)
    return math.fsum(values) / len(values) if values else None


@dataclass
class AggregateReport:
    dataset: str
    frames: list[FrameResult]
    with_er: bool = False
    n_frames: int = field(init=False)
    n_failed: int = field(init=False)
    mean_aepe: float | None = field(init=False)
    mean_mesd: float | None = field(init=False)
    er_mean_aepe: float | None = field(init=False, default=None)
    er_mean_mesd: float | None = field(init=False, default=None)
    aepe_improvement: float | None = field(init=False, default=None)
    mesd_improvement: float | None = field(init=False, default=None)

    def __post_init__(self):
        good = [f for f in self.frames if f.ok]
        self.n_frames = len(self.frames)
        self.n_failed = self.n_frames - len(good)
        self.mean_aepe = _mean(f.report.aepe for f in good)
        self.mean_mesd = _mean(f.report.mesd for f in good)
        if self.with_er:
            self.er_mean_aepe = _mean(f.er_report.aepe for f in good)
            self.er_mean_mesd = _mean(f.er_report.mesd for f in good)
            self.aepe_improvement = relative_improvement(self.mean_aepe, self.er_mean_aepe)
            self.mesd_improvement = relative_improvement(self.mean_mesd, self.er_mean_mesd)

    def summary(self) -> dict:
        keys = ["dataset", "n_frames", "n_failed", "mean_aepe", "mean_mesd"]
        if self.with_er:
            keys += ["er_mean_aepe", "er_mean_mesd", "aepe_improvement", "mesd_improvement"]
        return {k: getattr(self, k) for k in keys}

    def to_dict(self) -> dict:
        frames = []
        for f in self.frames:
            row = {"frame_id": f.frame_id, "error": f.error,
                   "report": f.report.to_dict() if f.report else None}
            if self.with_er:
                row["er_report"] = f.er_report.to_dict() if f.er_report else None
                row["aepe_improvement"] = relative_improvement(
                    f.report.aepe if f.report else None, f.er_report.aepe if f.er_report else None)
                row["mesd_improvement"] = relative_improvement(
                    f.report.mesd if f.report else None, f.er_report.mesd if f.er_report else None)
            frames.append(row)
        return {"summary": self.summary(), "frames": frames}


def evaluate_entry(entry: ManifestEntry, with_er: bool = False,
                   er_config: ErConfig = ErConfig()) -> FrameResult:
    """Evaluate one manifest entry; errors are captured, not raised."""
    try:
        gt = load_flow(entry.gt_path)
        est = load_flow(entry.est_path)
        report = evaluate(gt, est, entry.region)
        er_report = None
        if with_er:
            if entry.image_path is None:
                raise ManifestError("edge refinement requested but entry has no image_path")
            refined = edge_refine(est, load_image(entry.image_path), er_config)
            er_report = evaluate(gt, refined, entry.region)
        return FrameResult(entry.frame_id, report, er_report)
    except (FlowMesdError, OSError) as exc:
        log.warning("frame %s skipped: %s", entry.frame_id, exc)
        return FrameResult(entry.frame_id, error=f"{type(exc).__name__}: {exc}")


def run_batch(manifest: Manifest, with_er: bool = False, er_config: ErConfig = ErConfig(),
              jobs: int = 1) -> AggregateReport:
    """Evaluate every entry; results keep manifest order whatever the completion order."""
    def work(entry):
        return evaluate_entry(entry, with_er, er_config)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            frames = list(pool.map(work, manifest.entries))
    else:
        frames = [work(e) for e in manifest.entries]
    return AggregateReport(manifest.dataset, frames, with_er)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_header(with_er: bool) -> list[str]:
    header = ["frame_id", "status"] + METRIC_FIELDS
    if with_er:
        header += ["er_" + k for k in METRIC_FIELDS] + ["aepe_improvement", "mesd_improvement"]
    return header


def report_to_csv(agg: AggregateReport) -> str:
    """Per-frame rows followed by one summary row (``frame_id == "__mean__"``).

    In the summary row ``status`` holds ``ok/total`` and the ``n_*`` columns
    are left empty.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(agg.with_er))
    for f in agg.frames:
        if not f.ok:
            row = [f.frame_id, "failed"] + [""] * (len(csv_header(agg.with_er)) - 2)
            writer.writerow(row)
            continue
        row = [f.frame_id, "ok"] + [_fmt(getattr(f.report, k)) for k in METRIC_FIELDS]
        if agg.with_er:
            row += [_fmt(getattr(f.er_report, k)) for k in METRIC_FIELDS]
            row += [_fmt(relative_improvement(f.report.aepe, f.er_report.aepe)),
                    _fmt(relative_improvement(f.report.mesd, f.er_report.mesd))]
        writer.writerow(row)

    good = [f for f in agg.frames if f.ok]

    def means(attr):
        out = []
        for k in METRIC_FIELDS:
            if k.startswith("n_"):
                out.append("")
            else:
                out.append(_fmt(_mean(getattr(getattr(f, attr), k) for f in good)))
        return out

    summary = [SUMMARY_ID, f"{len(good)}/{agg.n_frames}"] + means("report")
    if agg.with_er:
        summary += means("er_report") + [_fmt(agg.aepe_improvement), _fmt(agg.mesd_improvement)]
    writer.writerow(summary)
    return buf.getvalue()


def report_to_json(agg: AggregateReport) -> str:
    return json.dumps(agg.to_dict(), indent=2, sort_keys=False) + "\n"
