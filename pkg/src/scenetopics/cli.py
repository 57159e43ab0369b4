"""Command line: ``extract``, ``model``, ``score``, ``eval`` and ``synth``.

Every command takes ``--config FILE`` (flat ``key = value``), ``--seed``,
``--out DIR`` and one ``--<key>`` flag per config key. Flags override the file.
The effective configuration is written to ``DIR/config.txt``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from .cells import NeighborhoodSpec
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig
from .model import Hyperparams, TopicModel, iter_frames
from .scoring import ScoringError, ks_statistic, score_timeline, timeline_from_assignments, top_peaks
from .stream import StreamFormatError, parse_stream, write_stream


class UsageError(Exception):
    pass


def _write(path: Path, data: bytes | str) -> None:
    path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return RunConfig.load(args.config, overrides)


def _read_input(path: str, what: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} {p} does not exist")
    return p.read_bytes()


# -- extract ---------------------------------------------------------------

def cmd_extract(args) -> int:
    from .features.pipeline import extract_directory

    cfg = _config(args)
    if not Path(args.frames_dir).is_dir():
        raise UsageError(f"frames directory {args.frames_dir} does not exist")
    result = extract_directory(args.frames_dir, cfg)
    out = _out_dir(args)
    _write(out / "words.txt", write_stream(result.observations, result.layout))
    _write(out / "codebook.json", result.codebook.to_json())
    _write(out / "config.txt", cfg.dump())
    for t, n in enumerate(result.words_per_frame):
        print(f"frame {t}: {n} words")
    return 0


# -- model -----------------------------------------------------------------

def write_assignments(model: TopicModel) -> str:
    buf = io.StringIO()
    buf.write("t,x,y,word,label\n")
    ob = model.obs
    for i in range(ob.n):
        buf.write(f"{ob.t[i]},{ob.x[i]},{ob.y[i]},{ob.words[i]},{ob.z[i]}\n")
    return buf.getvalue()


def read_assignments(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["t", "x", "y", "word", "label"]:
        raise ScoringError("assignments file must start with header t,x,y,word,label")
    try:
        data = np.array([[int(v) for v in r] for r in rows[1:] if r], np.int64).reshape(-1, 5)
    except ValueError:
        raise ScoringError("non-integer field in assignments file") from None
    return data[:, 0], data[:, 4]


def cmd_model(args) -> int:
    cfg = _config(args)
    observations, layout = parse_stream(_read_input(args.stream, "stream file"))
    if not observations:
        raise UsageError("stream contains no observations")
    if args.resume:
        model = load_checkpoint(_read_input(args.resume, "checkpoint"))
        if model.layout != layout:
            raise UsageError("checkpoint vocabulary does not match the stream header")
        done = sum(1 for o in observations if o.t <= model.cursor)
        if done != model.n_observations:
            raise UsageError("checkpoint does not match the stream prefix it claims to cover")
    else:
        model = TopicModel(
            layout,
            hyper=Hyperparams(cfg.alpha, cfg.beta, cfg.gamma),
            neighborhood=NeighborhoodSpec(cfg.spatial_radius, cfg.temporal_radius),
            cell_size=cfg.cell_size,
            iters_per_step=cfg.iters_per_step,
            seed=cfg.seed,
        )
    truncated = False
    for t, frame in iter_frames(observations):
        if t <= model.cursor:
            continue
        if 0 <= cfg.stop_after <= t:
            truncated = True
            break
        model.process_frame(frame)
    if cfg.mode == "batch" and not truncated:
        for _ in range(cfg.batch_sweeps):
            model.sweep()
    model.audit()
    out = _out_dir(args)
    _write(out / "model.ckpt", save_checkpoint(model))
    _write(out / "assignments.csv", write_assignments(model))
    _write(out / "config.txt", cfg.dump())
    print(f"{model.n_observations} observations, {len(model.frames)} frames, "
          f"{len(model.active_topics)} active topics")
    return 0


# -- score -----------------------------------------------------------------

def report_csv(report) -> str:
    tl = report.timeline
    buf = io.StringIO()
    buf.write(",".join(["t", "score", "normalized_score"] + [f"p_topic_{k}" for k in range(tl.K)]) + "\n")
    for j, t in enumerate(tl.frames):
        cells = [str(int(t)), repr(float(report.scores[j])), repr(float(report.normalized_scores[j]))]
        cells += [repr(float(p)) for p in tl.dist[j]]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def read_report(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["t", "score", "normalized_score"]:
        raise ScoringError("report must start with header t,score,normalized_score,...")
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], float).reshape(-1, len(rows[0]))
    return {"t": body[:, 0].astype(np.int64), "score": body[:, 1], "normalized": body[:, 2], "dist": body[:, 3:]}


def cmd_score(args) -> int:
    cfg = _config(args)
    model = load_checkpoint(_read_input(args.checkpoint, "checkpoint"))
    if args.assignments:
        frame_of, labels = read_assignments(_read_input(args.assignments, "assignments file").decode())
        if len(labels) != model.n_observations or not np.array_equal(frame_of, model.frame_index):
            raise UsageError("assignments file does not match the checkpoint")
    else:
        frame_of, labels = model.frame_index, model.assignments
    keep = frame_of >= cfg.burn_in
    if not keep.any():
        raise UsageError("no timesteps left to score after burn-in")
    timeline = timeline_from_assignments(frame_of[keep], labels[keep])
    report = score_timeline(timeline, cfg.max_peaks, cfg.min_separation)
    peaks = [{"rank": r + 1, "score": s, "t": t} for r, (t, s) in enumerate(report.peaks)]
    out = _out_dir(args)
    _write(out / "report.csv", report_csv(report))
    _write(out / "peaks.json", _json(peaks))
    _write(out / "config.txt", cfg.dump())
    print(f"scored {timeline.T} timesteps over {timeline.K} topics; top peak "
          f"t={peaks[0]['t']} S={peaks[0]['score']:.4g}" if peaks else "no peaks")
    return 0


# -- eval ------------------------------------------------------------------

def event_density(truth: dict, frames: np.ndarray) -> np.ndarray:
    if "density" in truth:
        dens = np.asarray(truth["density"], float)
        if frames.max(initial=-1) >= len(dens):
            raise UsageError("report timeline extends beyond the ground-truth density")
        return dens[frames]
    dens = np.zeros(len(frames))
    for ev in truth.get("events", []):
        inside = (frames >= ev["t_start"]) & (frames < ev["t_end"])
        dens[inside] = ev.get("score", 1.0)
    return dens


def match_topic(truth: dict, report: dict, density: np.ndarray, assignments_text: str | None,
                choice: str) -> tuple[int, str]:
    K = report["dist"].shape[1]
    if choice != "auto":
        k = int(choice)
        if not 0 <= k < K:
            raise UsageError(f"topic {k} not in report (K={K})")
        return k, "fixed"
    if assignments_text is not None and "labels" in truth and truth.get("events"):
        _, labels = read_assignments(assignments_text)
        gt = np.asarray(truth["labels"], np.int64)
        if len(gt) != len(labels):
            raise UsageError("ground-truth labels and assignments differ in length")
        universe = np.unique(labels)
        anomalous = gt >= min(ev["label"] for ev in truth["events"])
        overlap = np.bincount(np.searchsorted(universe, labels[anomalous]), minlength=len(universe))
        return int(np.argmax(overlap)), "word-overlap"
    if density.sum() <= 0:
        raise UsageError("ground truth has no events to match a topic against")
    target = density / density.sum()
    cols = report["dist"]
    mass = cols.sum(axis=0)
    overlap = [np.minimum(cols[:, k] / mass[k], target).sum() if mass[k] > 0 else -1.0 for k in range(K)]
    return int(np.argmax(overlap)), "timeline-overlap"


def cmd_eval(args) -> int:
    cfg = _config(args)
    report = read_report(_read_input(args.report, "report").decode())
    try:
        truth = json.loads(_read_input(args.ground_truth, "ground truth"))
    except ValueError:
        raise UsageError("ground truth is not valid JSON") from None
    frames = report["t"]
    density = event_density(truth, frames)
    assignments_text = _read_input(args.assignments, "assignments file").decode() if args.assignments else None
    topic, how = match_topic(truth, report, density, assignments_text, cfg.topic)
    D = ks_statistic(report["dist"][:, topic], density)
    events = truth.get("events", [])
    if args.peaks:
        peaks = [(p["t"], p["score"]) for p in json.loads(_read_input(args.peaks, "peaks file"))]
    else:
        peaks = top_peaks(report["score"], len(events) or cfg.max_peaks, cfg.min_separation, frames=frames)
    table = []
    hit_windows = set()
    for rank, (t, s) in enumerate(peaks, start=1):
        window = next((j for j, ev in enumerate(events) if ev["t_start"] <= t < ev["t_end"]), None)
        if window is not None:
            hit_windows.add(window)
        table.append({"rank": rank, "t": int(t), "score": float(s), "hit": window is not None, "window": window})
    result = {
        "ks_statistic": D,
        "topic": topic,
        "topic_match": how,
        "peaks": table,
        "peaks_hit": sum(r["hit"] for r in table),
        "windows_hit": len(hit_windows),
        "windows_total": len(events),
    }
    out = _out_dir(args)
    _write(out / "eval.json", _json(result))
    _write(out / "config.txt", cfg.dump())
    print(f"KS D={D:.4f} (topic {topic}, {how}); {result['windows_hit']}/{len(events)} windows hit")
    return 0


# -- synth -----------------------------------------------------------------

def cmd_synth(args) -> int:
    from .synth import generate, parse_spec

    cfg = _config(args)
    spec_text = _read_input(args.spec, "spec file").decode()
    spec = parse_spec(spec_text)
    if args.seed is not None:
        spec.seed = args.seed
    result = generate(spec)
    truth = {
        "events": result.events,
        "labels": result.labels.tolist(),
        "density": result.event_density(spec.T).tolist(),
    }
    out = _out_dir(args)
    _write(out / "words.txt", write_stream(result.observations, result.layout))
    _write(out / "truth.json", _json(truth))
    _write(out / "spec.txt", spec_text if spec_text.endswith("\n") else spec_text + "\n")
    _write(out / "config.txt", cfg.dump())
    print(f"{len(result.observations)} words over {spec.T} frames, {len(result.events)} planted events")
    return 0


# -- entry -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scenetopics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")
        group = p.add_argument_group("config overrides")
        for f in dataclasses.fields(RunConfig):
            if f.name == "seed":
                continue
            group.add_argument(f"--{f.name.replace('_', '-')}", dest=f"cfg_{f.name}", metavar="VALUE")
        return p

    p = common(sub.add_parser("extract", help="frames directory -> word stream + codebook"))
    p.add_argument("frames_dir")
    p.set_defaults(func=cmd_extract)

    p = common(sub.add_parser("model", help="word stream -> checkpoint + assignments"))
    p.add_argument("stream")
    p.add_argument("--resume", help="continue from a checkpoint")
    p.set_defaults(func=cmd_model)

    p = common(sub.add_parser("score", help="checkpoint -> perplexity report + peaks"))
    p.add_argument("checkpoint")
    p.add_argument("--assignments")
    p.set_defaults(func=cmd_score)

    p = common(sub.add_parser("eval", help="report vs ground truth -> KS statistic + peak hits"))
    p.add_argument("report")
    p.add_argument("ground_truth")
    p.add_argument("--peaks")
    p.add_argument("--assignments", help="per-word labels, for word-overlap topic matching")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("synth", help="spec file -> synthetic word stream + ground truth"))
    p.add_argument("spec")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"scenetopics {args.command}: {exc}", file=sys.stderr)
        return 2
    except (StreamFormatError, CheckpointError, ScoringError, ValueError, OSError) as exc:
        print(f"scenetopics {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
