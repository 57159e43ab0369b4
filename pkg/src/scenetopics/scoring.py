"""Per-timestep topic distributions, perplexity anomaly scores, peaks, and KS evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ScoringError(ValueError):
    pass


@dataclass
class TopicTimeline:
    """Rows are timesteps, columns are compacted topic labels."""

    frames: np.ndarray          # frame index of each row
    dist: np.ndarray            # (T, K) row-stochastic
    labels: np.ndarray          # original label of each column
    counts: np.ndarray          # (T, K) raw assignment counts
    empty_frames: list[int] = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.dist.shape[0]

    @property
    def K(self) -> int:
        return self.dist.shape[1]


@dataclass
class PerplexityReport:
    timeline: TopicTimeline
    marginal: np.ndarray
    scores: np.ndarray
    normalized_scores: np.ndarray
    peaks: list[tuple[int, float]]


def timeline_from_assignments(frame_of: np.ndarray, labels: np.ndarray,
                              frames: np.ndarray | None = None) -> TopicTimeline:
    """Histogram assignments per frame over the compacted label universe.

    ``frames`` lists the timesteps to report; any listed frame without
    assignments is recorded in ``empty_frames`` and left out of the rows.
    """
    frame_of = np.asarray(frame_of, np.int64)
    labels = np.asarray(labels, np.int64)
    if frame_of.shape != labels.shape:
        raise ScoringError("frame and label arrays differ in length")
    if np.any(labels < 0):
        raise ScoringError("unassigned observations cannot be scored")
    universe = np.unique(labels)
    present = np.unique(frame_of)
    wanted = present if frames is None else np.asarray(frames, np.int64)
    empty = sorted(set(wanted.tolist()) - set(present.tolist()))
    rows = np.setdiff1d(wanted, np.asarray(empty, np.int64))
    keep = np.isin(frame_of, rows)
    row = np.searchsorted(rows, frame_of[keep])
    col = np.searchsorted(universe, labels[keep])
    counts = np.zeros((len(rows), len(universe)), np.int64)
    np.add.at(counts, (row, col), 1)
    totals = counts.sum(axis=1, keepdims=True)
    dist = counts / np.where(totals == 0, 1, totals)
    return TopicTimeline(frames=rows, dist=dist, labels=universe, counts=counts, empty_frames=empty)


def timeline_from_model(model) -> TopicTimeline:
    return timeline_from_assignments(model.frame_index, model.assignments)


def marginal(timeline: TopicTimeline | np.ndarray) -> np.ndarray:
    """Average of the per-timestep topic distributions."""
    dist = timeline.dist if isinstance(timeline, TopicTimeline) else np.asarray(timeline, float)
    if dist.ndim != 2 or dist.shape[0] == 0:
        raise ScoringError("marginal of an empty timeline")
    # exactly rounded column sums, so the result is independent of column layout
    return np.array([math.fsum(col) for col in dist.T.tolist()]) / dist.shape[0]


def perplexity(row, marginal_dist) -> float:
    """exp of the cross entropy of ``row`` against ``marginal_dist``.

    Terms are summed with ``math.fsum`` so the result does not depend on label order.
    """
    row = np.asarray(row, float)
    q = np.asarray(marginal_dist, float)
    support = row > 0
    if np.any(q[support] <= 0):
        raise ScoringError("marginal has zero mass where the row has mass")
    # scalar logs: vectorised log may round differently by array position
    terms = [p * math.log(m) for p, m in zip(row[support].tolist(), q[support].tolist())]
    return math.exp(-math.fsum(terms))


def entropy(row) -> float:
    row = np.asarray(row, float)
    return -math.fsum(p * math.log(p) for p in row[row > 0].tolist())


def normalize_scores(scores) -> np.ndarray:
    s = np.asarray(scores, float)
    if s.size == 0:
        raise ScoringError("no scores to normalize")
    lo, hi = s.min(), s.max()
    if hi == lo:
        return np.zeros_like(s)
    return (s - lo) / (hi - lo)


def top_peaks(scores, max_peaks: int, min_separation: int, frames=None) -> list[tuple[int, float]]:
    """Greedy non-maximum suppression: highest scores first, skipping any within
    ``min_separation`` frames of an already chosen peak. Ties go to the earlier frame."""
    if min_separation < 0:
        raise ValueError("min_separation must be non-negative")
    s = np.asarray(scores, float)
    frames = np.arange(len(s)) if frames is None else np.asarray(frames, np.int64)
    chosen: list[tuple[int, float]] = []
    for j in np.lexsort((frames, -s)):
        if len(chosen) >= max_peaks:
            break
        t = int(frames[j])
        if all(abs(t - c) > min_separation for c, _ in chosen):
            chosen.append((t, float(s[j])))
    return chosen


def score_timeline(timeline: TopicTimeline, max_peaks: int = 8, min_separation: int = 20) -> PerplexityReport:
    q = marginal(timeline)
    scores = np.array([perplexity(r, q) for r in timeline.dist])
    return PerplexityReport(
        timeline=timeline,
        marginal=q,
        scores=scores,
        normalized_scores=normalize_scores(scores),
        peaks=top_peaks(scores, max_peaks, min_separation, frames=timeline.frames),
    )


def ks_statistic(a, b) -> float:
    """Largest CDF gap between two non-negative timelines, each normalised to unit mass."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape or a.ndim != 1:
        raise ScoringError("ks_statistic needs two sequences of equal length")
    if np.any(a < 0) or np.any(b < 0):
        raise ScoringError("ks_statistic inputs must be non-negative")
    ca, cb = np.cumsum(a), np.cumsum(b)
    if a.size == 0 or ca[-1] <= 0 or cb[-1] <= 0:
        raise ScoringError("ks_statistic input has zero total")
    return float(np.max(np.abs(ca / ca[-1] - cb / cb[-1])))


def check_bounds(report: PerplexityReport) -> None:
    """Raise if any score leaves [1, T * exp(H(row))]."""
    T = report.timeline.T
    for row, s in zip(report.timeline.dist, report.scores):
        upper = T * math.exp(entropy(row))
        if not (1.0 - 1e-12 <= s <= upper * (1 + 1e-12)):
            raise ScoringError(f"score {s} outside [1, {upper}]")
