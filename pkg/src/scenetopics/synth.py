"""Synthetic word streams with planted anomaly windows, and an exact posterior
over label partitions for tiny single-cell instances.

Spec files are flat ``key = value`` text::

    V = 60
    T = 500
    width = 512
    height = 512
    cell_size = 128
    words_per_frame = 200
    seed = 7
    topic.0 = uniform:0:20
    topic.0.weight = 0.5
    topic.1 = uniform:20:40
    topic.1.weight = 0.5
    window.0 = 100:110
    window.0.dist = uniform:40:60
    window.0.intensity = 0.8
    window.0.region = 0:0:256:256     # optional x0:y0:x1:y1

Distributions are ``uniform:lo:hi`` (half-open word range) or
``probs:p0,p1,...`` listing all V probabilities.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .config import ConfigError, parse_kv
from .model import Hyperparams
from .stream import VocabularyLayout, WordObservation

MAX_EXACT_N = 8
MAX_EXACT_V = 3


@dataclass(frozen=True)
class AnomalyWindow:
    t_start: int
    t_end: int               # exclusive
    dist: np.ndarray
    intensity: float
    region: tuple[int, int, int, int] | None = None

    def __contains__(self, t: int) -> bool:
        return self.t_start <= t < self.t_end


@dataclass
class SynthSpec:
    V: int
    T: int
    background_topics: list[np.ndarray]
    background_weights: list[float]
    anomaly_windows: list[AnomalyWindow] = field(default_factory=list)
    words_per_frame: int = 200
    width: int = 512
    height: int = 512
    cell_size: int = 128
    seed: int = 0

    def validate(self) -> "SynthSpec":
        if self.V <= 0 or self.T <= 0 or self.words_per_frame <= 0:
            raise ConfigError("V, T and words_per_frame must be positive")
        if self.width <= 0 or self.height <= 0 or self.cell_size <= 0:
            raise ConfigError("frame geometry must be positive")
        if not self.background_topics:
            raise ConfigError("at least one background topic is required")
        if len(self.background_weights) != len(self.background_topics):
            raise ConfigError("one weight per background topic")
        w = np.asarray(self.background_weights, float)
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
            raise ConfigError("background weights must be non-negative and sum to 1")
        for d in self.background_topics + [win.dist for win in self.anomaly_windows]:
            _check_dist(d, self.V)
        taken = np.zeros(self.T, bool)
        for win in self.anomaly_windows:
            if not 0 <= win.t_start < win.t_end <= self.T:
                raise ConfigError(f"window [{win.t_start}, {win.t_end}) outside [0, {self.T})")
            if not 0 < win.intensity <= 1:
                raise ConfigError("window intensity must lie in (0, 1]")
            if taken[win.t_start : win.t_end].any():
                raise ConfigError("anomaly windows overlap")
            taken[win.t_start : win.t_end] = True
            if win.region is not None:
                x0, y0, x1, y1 = win.region
                if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                    raise ConfigError("window region outside the frame")
        return self

    @property
    def layout(self) -> VocabularyLayout:
        return VocabularyLayout.single(self.V, "synth")


def _check_dist(d: np.ndarray, V: int) -> None:
    if d.shape != (V,) or np.any(d < 0) or not math.isclose(d.sum(), 1.0, abs_tol=1e-9):
        raise ConfigError("distributions must have V non-negative entries summing to 1")


def parse_distribution(text: str, V: int) -> np.ndarray:
    kind, _, rest = text.partition(":")
    try:
        if kind == "uniform":
            lo, hi = (int(p) for p in rest.split(":"))
            if not 0 <= lo < hi <= V:
                raise ConfigError(f"uniform range {lo}:{hi} outside [0, {V})")
            d = np.zeros(V)
            d[lo:hi] = 1.0 / (hi - lo)
        elif kind == "probs":
            d = np.array([float(p) for p in rest.split(",")])
        else:
            raise ConfigError(f"unknown distribution kind {kind!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad distribution {text!r}") from None
    _check_dist(d, V)
    return d


def parse_spec(text: str) -> SynthSpec:
    kv = parse_kv(text)

    def take(key, cast, default=None):
        if key in kv:
            try:
                return cast(kv.pop(key))
            except ValueError:
                raise ConfigError(f"bad value for {key}") from None
        if default is None:
            raise ConfigError(f"missing key {key}")
        return default

    V = take("V", int)
    spec = SynthSpec(
        V=V,
        T=take("T", int),
        background_topics=[],
        background_weights=[],
        words_per_frame=take("words_per_frame", int, 200),
        width=take("width", int, 512),
        height=take("height", int, 512),
        cell_size=take("cell_size", int, 128),
        seed=take("seed", int, 0),
    )
    topic_ids = sorted({int(m.group(1)) for k in kv if (m := re.fullmatch(r"topic\.(\d+)", k))})
    for i in topic_ids:
        spec.background_topics.append(parse_distribution(kv.pop(f"topic.{i}"), V))
        spec.background_weights.append(take(f"topic.{i}.weight", float, 1.0 / len(topic_ids)))
    window_ids = sorted({int(m.group(1)) for k in kv if (m := re.fullmatch(r"window\.(\d+)", k))})
    for i in window_ids:
        try:
            t0, t1 = (int(p) for p in kv.pop(f"window.{i}").split(":"))
        except ValueError:
            raise ConfigError(f"window.{i} must be start:end") from None
        region = take(f"window.{i}.region", lambda s: tuple(int(p) for p in s.split(":")), ())
        if region and len(region) != 4:
            raise ConfigError(f"window.{i}.region must be x0:y0:x1:y1")
        spec.anomaly_windows.append(AnomalyWindow(
            t0, t1,
            parse_distribution(take(f"window.{i}.dist", str), V),
            take(f"window.{i}.intensity", float, 1.0),
            region or None,
        ))
    if kv:
        raise ConfigError(f"unknown spec keys: {', '.join(sorted(kv))}")
    return spec.validate()


@dataclass
class SynthResult:
    observations: list[WordObservation]
    labels: np.ndarray       # ground-truth source per word: background topic j, or n_background + window index
    events: list[dict]
    layout: VocabularyLayout

    def event_density(self, T: int) -> np.ndarray:
        """Fraction of each frame's words drawn from an anomaly distribution."""
        n_bg = min(e["label"] for e in self.events) if self.events else 0
        t = np.array([o.t for o in self.observations], np.int64)
        total = np.bincount(t, minlength=T).astype(float)
        anom = np.bincount(t[self.labels >= n_bg], minlength=T).astype(float) if self.events else np.zeros(T)
        return anom / np.where(total == 0, 1, total)


def generate(spec: SynthSpec) -> SynthResult:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_bg = len(spec.background_topics)
    bg_cdf = [np.cumsum(d) for d in spec.background_topics]
    weights = np.asarray(spec.background_weights, float)
    n = spec.words_per_frame
    obs: list[WordObservation] = []
    labels: list[np.ndarray] = []
    window_at = {}
    for j, win in enumerate(spec.anomaly_windows):
        for t in range(win.t_start, win.t_end):
            window_at[t] = j
    for t in range(spec.T):
        topic = rng.choice(n_bg, size=n, p=weights)
        u = rng.random(n)
        words = np.empty(n, np.int64)
        for j in range(n_bg):
            sel = topic == j
            words[sel] = _inverse_cdf(bg_cdf[j], u[sel], spec.V)
        xs = rng.integers(0, spec.width, n)
        ys = rng.integers(0, spec.height, n)
        lab = topic.astype(np.int64)
        j = window_at.get(t)
        if j is not None:
            win = spec.anomaly_windows[j]
            hit = rng.random(n) < win.intensity
            words[hit] = _inverse_cdf(np.cumsum(win.dist), rng.random(int(hit.sum())), spec.V)
            lab[hit] = n_bg + j
            if win.region is not None:
                x0, y0, x1, y1 = win.region
                xs[hit] = rng.integers(x0, x1, int(hit.sum()))
                ys[hit] = rng.integers(y0, y1, int(hit.sum()))
        obs.extend(WordObservation(t, int(x), int(y), int(w)) for x, y, w in zip(xs, ys, words))
        labels.append(lab)
    events = [
        {"rank": j + 1, "t": (win.t_start + win.t_end - 1) // 2, "t_start": win.t_start,
         "t_end": win.t_end, "score": win.intensity, "label": n_bg + j}
        for j, win in enumerate(spec.anomaly_windows)
    ]
    return SynthResult(obs, np.concatenate(labels) if labels else np.empty(0, np.int64), events, spec.layout)


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray, V: int) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), V - 1)


# -- exact posterior over partitions --------------------------------------

def set_partitions(n: int):
    """Yield every set partition of range(n) as a restricted growth string."""
    if n == 0:
        yield ()
        return
    rgs = [0] * n

    def rec(i, m):
        if i == n:
            yield tuple(rgs)
            return
        for b in range(m + 2):
            rgs[i] = b
            yield from rec(i + 1, max(m, b))

    rgs[0] = 0
    yield from rec(1, 0)


def canonical_partition(labels) -> tuple[int, ...]:
    """Relabel blocks in order of first appearance."""
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(int(k), len(seen)) for k in labels)


def log_joint(partition, words, V: int, hyper: Hyperparams) -> float:
    """Unnormalised log weight of a partition in the one-cell model.

    Seating weight is block size + alpha for an existing block and gamma for a
    new one; words within a block follow a symmetric Dirichlet(beta) multinomial.
    """
    a, b, g = hyper.alpha, hyper.beta, hyper.gamma
    blocks = max(partition) + 1
    total = blocks * math.log(g)
    for blk in range(blocks):
        members = [w for w, p in zip(words, partition) if p == blk]
        size = len(members)
        total += gammaln(size + a) - gammaln(1 + a)
        total += gammaln(V * b) - gammaln(size + V * b)
        for v in range(V):
            c = members.count(v)
            total += gammaln(c + b) - gammaln(b)
    return float(total)


def exact_posterior(words, V: int, hyper: Hyperparams) -> dict[tuple[int, ...], float]:
    words = [int(w) for w in words]
    if len(words) > MAX_EXACT_N or V > MAX_EXACT_V:
        raise ValueError(f"exact enumeration limited to N <= {MAX_EXACT_N}, V <= {MAX_EXACT_V}")
    if any(not 0 <= w < V for w in words):
        raise ValueError("word outside vocabulary")
    if not words:
        return {(): 1.0}
    parts = list(set_partitions(len(words)))
    logs = np.array([log_joint(p, words, V, hyper) for p in parts])
    probs = np.exp(logs - logsumexp(logs))
    return dict(zip(parts, probs.tolist()))
