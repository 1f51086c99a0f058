"""Command-line entry point.

Subcommands::

    maskrepair synth    SCRIPT.json --root DIR [--name NAME]
    maskrepair select   --root DIR          raw proposals -> top-k selection
    maskrepair refine   --root DIR          selection + temporal repair
    maskrepair diagnose --root DIR          detection/refinement only, no writes to masks
    maskrepair evaluate --root DIR          predictions vs ground truth

Layout roots can also come from ``MASKREPAIR_ROOT``, ``MASKREPAIR_FRAMES``,
``MASKREPAIR_RAW``, ``MASKREPAIR_GT`` and ``MASKREPAIR_OUTPUT``.

``refine`` and ``diagnose`` write ``<name>.json`` and ``<name>.txt`` reports
next to the masks they processed. The JSON report is an object with keys
``sequence``, ``passes``, ``converged``, ``seconds`` and ``entries``; each
entry has ``object_id``, ``frame``, ``status``, ``pass`` and ``details``.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .flow import FlowParams
from .masks import SequenceBundle
from .metrics import evaluate_sequence, global_summary
from .selection import CRITERIA, SelectionConfig, score_objects, select_top
from .sequence_io import DatasetLayout, SequenceIOError, davis_palette, load_sequence, save_frames, save_masks
from .synthetic import SceneScript, ScriptError, inject_defects, render
from .temporal import VOTE_REFERENCES, InconsistencyReport, TcConfig, diagnose, run_tc

REPORT_NAME = "report"
DIAGNOSE_NAME = "diagnose"


@dataclass(frozen=True)
class RunConfig:
    command: str
    layout: DatasetLayout
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    tc: TcConfig = field(default_factory=TcConfig)
    sequences: tuple[str, ...] = ()
    jobs: int = 1
    verbose: bool = False
    masks_subdir: str | None = None
    output_subdir: str | None = None
    matching: str = "hungarian"
    json_path: Path | None = None
    overlays: Path | None = None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskrepair", description="Repair per-object video masks.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--root", help="dataset root (default: $MASKREPAIR_ROOT or .)")
    common.add_argument("--frames-subdir")
    common.add_argument("--raw-subdir")
    common.add_argument("--gt-subdir")
    common.add_argument("--output-subdir")
    common.add_argument("-v", "--verbose", action="store_true")

    batch = argparse.ArgumentParser(add_help=False)
    batch.add_argument("--sequences", nargs="+", default=[], help="only these sequences")
    batch.add_argument("--jobs", type=int, default=1, help="sequences processed in parallel")

    sel = argparse.ArgumentParser(add_help=False)
    g = sel.add_argument_group("object selection")
    g.add_argument("--alpha", type=float, default=5.0)
    g.add_argument("--top-k", type=int, default=20)
    g.add_argument("--criterion", choices=CRITERIA, default="combined")

    tc = argparse.ArgumentParser(add_help=False)
    g = tc.add_argument_group("temporal consistency")
    g.add_argument("--window", type=int, default=5)
    g.add_argument("--tau-min", type=float, default=0.4)
    g.add_argument("--tau-max", type=float, default=0.7)
    g.add_argument("--size-ref", type=float, default=0.01)
    g.add_argument("--zoom-centroid-tol", type=float, default=0.2)
    g.add_argument("--min-component-frac", type=float, default=0.0005)
    g.add_argument("--minor-add-frac", type=float, default=0.05)
    g.add_argument("--overseg-cover-frac", type=float, default=0.6)
    g.add_argument("--erosion-radius", type=int, default=1)
    g.add_argument("--max-passes", type=int, default=None, help="default: number of frames")
    g.add_argument("--bins", type=int, default=32, help="histogram bins per channel")
    g.add_argument("--vote-reference", choices=VOTE_REFERENCES, default="max")
    g.add_argument("--no-refining", action="store_true", help="skip the occlusion check")
    g.add_argument("--not-use-all-objects", action="store_true", help="ignore raw proposals when correcting")
    g = tc.add_argument_group("optical flow")
    g.add_argument("--flow-window", type=int, default=15)
    g.add_argument("--flow-levels", type=int, default=3)
    g.add_argument("--flow-iterations", type=int, default=5)
    g.add_argument("--eigen-floor", type=float, default=1e-4)

    p = sub.add_parser("select", parents=[common, batch, sel], help="keep the top-k raw proposals")
    p.add_argument("--masks-subdir", help="input masks (default: raw)")
    p = sub.add_parser("refine", parents=[common, batch, sel, tc], help="selection then temporal repair")
    p.add_argument("--masks-subdir", help="input masks (default: raw)")
    p = sub.add_parser("diagnose", parents=[common, batch, tc], help="report inconsistencies without correcting")
    p.add_argument("--masks-subdir", help="masks to inspect (default: output)")
    p.add_argument("--overlays", type=Path, help="write overlay images of flagged frames here")
    p = sub.add_parser("evaluate", parents=[common, batch], help="J and F against ground truth")
    p.add_argument("--masks-subdir", help="predictions (default: output)")
    p.add_argument("--matching", choices=("hungarian", "identity"), default="hungarian")
    p.add_argument("--json", dest="json_path", type=Path, help="also write results as JSON")
    p = sub.add_parser("synth", parents=[common], help="render a scripted synthetic sequence")
    p.add_argument("script", type=Path)
    p.add_argument("--name", help="sequence name (default: script file stem)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    layout = DatasetLayout.from_env(
        args.root,
        frames_subdir=args.frames_subdir,
        raw_masks_subdir=args.raw_subdir,
        gt_subdir=args.gt_subdir,
        output_subdir=args.output_subdir,
    )
    selection = SelectionConfig()
    if hasattr(args, "alpha"):
        selection = SelectionConfig(args.alpha, args.top_k, args.criterion)
    tc = TcConfig()
    if hasattr(args, "window"):
        tc = TcConfig(
            window=args.window,
            occlusion_tau_min=args.tau_min,
            occlusion_tau_max=args.tau_max,
            size_ref=args.size_ref,
            zoom_centroid_tol=args.zoom_centroid_tol,
            min_component_frac=args.min_component_frac,
            minor_add_frac=args.minor_add_frac,
            overseg_cover_frac=args.overseg_cover_frac,
            erosion_radius=args.erosion_radius,
            max_passes=args.max_passes,
            bins_per_channel=args.bins,
            refine=not args.no_refining,
            use_all_objects=not args.not_use_all_objects,
            vote_reference=args.vote_reference,
            flow=FlowParams(
                window_size=args.flow_window,
                pyramid_levels=args.flow_levels,
                iterations_per_level=args.flow_iterations,
                eigen_floor=args.eigen_floor,
            ),
        )
    if getattr(args, "jobs", 1) < 1:
        raise ValueError("--jobs must be >= 1")
    return RunConfig(
        command=args.command,
        layout=layout,
        selection=selection,
        tc=tc,
        sequences=tuple(getattr(args, "sequences", ())),
        jobs=getattr(args, "jobs", 1),
        verbose=args.verbose,
        masks_subdir=getattr(args, "masks_subdir", None),
        output_subdir=args.output_subdir,
        matching=getattr(args, "matching", "hungarian"),
        json_path=getattr(args, "json_path", None),
        overlays=getattr(args, "overlays", None),
    )


# -- per-sequence work (top level so it pickles for the process pool) ----------


def _write_report(report: InconsistencyReport, directory: Path, stem: str, name: str, seconds: float) -> None:
    record = {
        "sequence": name,
        "passes": report.passes,
        "converged": report.converged,
        "seconds": round(seconds, 3),
        "entries": report.to_records(),
    }
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{stem}.json").write_text(json.dumps(record, indent=2) + "\n")
    (directory / f"{stem}.txt").write_text(report.to_text() + "\n")


def _overlay(frame: np.ndarray, labels: np.ndarray, flagged_ids: set[int]) -> np.ndarray:
    palette = np.asarray(davis_palette(), dtype=float).reshape(256, 3)
    out = frame.astype(float)
    for oid in flagged_ids:
        m = labels == oid
        out[m] = 0.5 * out[m] + 0.5 * palette[oid % 256]
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def _format_scores(bundle: SequenceBundle, cfg: SelectionConfig) -> list[str]:
    lines = [f"  {'id':>5} {'frames':>6} {'size':>8} {'score':>9}"]
    for s in score_objects(bundle, cfg):
        lines.append(f"  {s.id:>5} {s.appearance_count:>6} {s.relative_size:>8.4f} {s.combined:>9.4f}")
    return lines


def process_sequence(cfg: RunConfig, name: str) -> dict:
    """Run one subcommand on one sequence; returns printable lines and metrics."""
    start = time.perf_counter()
    layout = cfg.layout
    lines: list[str] = []
    result: dict = {"name": name}
    if cfg.command in ("select", "refine"):
        raw = load_sequence(layout, name, cfg.masks_subdir or layout.raw_masks_subdir)
        selected = select_top(raw, cfg.selection)
        if cfg.verbose:
            lines.extend(_format_scores(raw, cfg.selection))
        out = selected
        if cfg.command == "refine":
            out, report = run_tc(selected, raw, cfg.tc)
            result["corrected"] = len(report.corrected())
            lines.append(f"  passes={report.passes} converged={report.converged} corrected={result['corrected']}")
            if cfg.verbose and report.entries:
                lines.extend("  " + ln for ln in report.to_text().splitlines())
        out_dir = save_masks(out, layout, name)
        if cfg.command == "refine":
            _write_report(report, out_dir, REPORT_NAME, name, time.perf_counter() - start)
        result["ids"] = list(out.sorted_ids)
        n_frames = out.n_frames
    elif cfg.command == "diagnose":
        subdir = cfg.masks_subdir or layout.output_subdir
        bundle = load_sequence(layout, name, subdir)
        report = diagnose(bundle, cfg.tc)
        result["entries"] = report.to_records()
        lines.extend("  " + ln for ln in report.to_text().splitlines())
        _write_report(report, layout.sequence_dir(subdir, name), DIAGNOSE_NAME, name, time.perf_counter() - start)
        if cfg.overlays is not None:
            flagged: dict[int, set[int]] = {}
            for e in report.entries:
                flagged.setdefault(e.frame, set()).add(e.object_id)
            target = cfg.overlays / name
            target.mkdir(parents=True, exist_ok=True)
            for t, ids in sorted(flagged.items()):
                img = _overlay(bundle.frames[t], bundle.masks[t], ids)
                Image.fromarray(img, mode="RGB").save(target / f"{t:05d}.png")
        n_frames = bundle.n_frames
    elif cfg.command == "evaluate":
        pred = load_sequence(layout, name, cfg.masks_subdir or layout.output_subdir)
        gt = load_sequence(layout, name, layout.gt_subdir)
        metrics = evaluate_sequence(pred, gt, cfg.matching)
        result["metrics"] = metrics
        for o in metrics.objects:
            match = "-" if o.matched_id is None else str(o.matched_id)
            lines.append(f"  object {o.id:>3} <- {match:>3}  J {100 * o.j_mean:5.1f}  F {100 * o.f_mean:5.1f}")
        n_frames = gt.n_frames
    else:
        raise ValueError(f"unknown command {cfg.command!r}")
    seconds = time.perf_counter() - start
    result["seconds"] = seconds
    result["header"] = f"{name}: {n_frames} frames in {seconds:.2f} s ({1000 * seconds / max(n_frames, 1):.1f} ms/frame)"
    result["lines"] = lines
    return result


def _safe_process(cfg: RunConfig, name: str) -> dict:
    try:
        return process_sequence(cfg, name)
    except (SequenceIOError, ValueError) as exc:
        return {"name": name, "error": f"{name}: {exc}"}


def _run_batch(cfg: RunConfig) -> int:
    names = list(cfg.sequences) or cfg.layout.sequences()
    if not names:
        print("no sequences found", file=sys.stderr)
        return 1
    if cfg.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_safe_process, [cfg] * len(names), names))
    else:
        results = [_safe_process(cfg, n) for n in names]

    status = 0
    for r in results:
        if "error" in r:
            print(f"error: {r['error']}", file=sys.stderr)
            status = 1
            continue
        print(r["header"])
        for ln in r["lines"]:
            print(ln)
    if cfg.command == "evaluate":
        seqs = [r["metrics"] for r in results if "metrics" in r]
        summary = global_summary(seqs)
        print(f"J&F {summary['J&F']:.1f}  J {summary['J']:.1f}  F {summary['F']:.1f}")
        if cfg.json_path is not None:
            payload = {
                "global": summary,
                "sequences": {
                    s.name: [
                        {"id": o.id, "matched_id": o.matched_id, "J": 100 * o.j_mean, "F": 100 * o.f_mean}
                        for o in s.objects
                    ]
                    for s in seqs
                },
            }
            cfg.json_path.write_text(json.dumps(payload, indent=2) + "\n")
    return status


def _run_synth(args: argparse.Namespace, layout: DatasetLayout) -> int:
    script = SceneScript.load(args.script)
    name = args.name or args.script.stem
    clean = render(script)
    raw, _ = inject_defects(clean, script.defects)
    save_frames(raw, layout, name)
    save_masks(clean, layout, name, layout.gt_subdir)
    save_masks(raw, layout, name, layout.raw_masks_subdir)
    print(f"{name}: {script.frames} frames written under {layout.root}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if cfg.command == "synth":
            return _run_synth(args, cfg.layout)
        return _run_batch(cfg)
    except (SequenceIOError, ScriptError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
