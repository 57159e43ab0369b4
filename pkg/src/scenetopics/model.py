"""Count tables and the streaming nonparametric topic sampler.

Each observation is a word at a pixel position in a frame. Topic labels are
resampled from

    P(z_i = k | rest) ∝ (n_vk[w_i, k] + beta) / (n_k[k] + V * beta) * (n_k,g_i + alpha)   for active k
    P(z_i = new | rest) ∝ (1 / V) * gamma

where ``n_k,g_i`` counts label ``k`` over the cells neighbouring observation
``i`` and every count excludes ``i`` itself.
"""

from __future__ import annotations

import bisect
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernel
from .cells import CellIndex, GridBounds, NeighborhoodSpec, cell_of, neighbors
from .stream import VocabularyLayout, WordObservation

NEW_TOPIC = -1


class InconsistentCounts(RuntimeError):
    pass


class StreamOrderError(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.1
    beta: float = 10.0
    gamma: float = 1e-5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")


class CountTables:
    """Sufficient statistics of the model.

    Arrays carry spare capacity along the label axis and the frame/grid axes;
    only labels with a non-zero total are active.
    """

    def __init__(self, V: int, k_cap: int = 8, grid: tuple[int, int, int] = (1, 1, 1)):
        self.V = int(V)
        self.n_vk = np.zeros((self.V, k_cap), np.int64)
        self.n_k = np.zeros(k_cap, np.int64)
        self.n_c = np.zeros(grid + (k_cap,), np.int32)
        # [number of active labels, N]
        self.state = np.zeros(2, np.int64)

    @property
    def N(self) -> int:
        return int(self.state[1])

    @property
    def active(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.n_k)]

    @property
    def free_labels(self) -> list[int]:
        """Empty label slots below the highest active label; reused lowest first."""
        act = np.flatnonzero(self.n_k)
        if not len(act):
            return []
        return [int(k) for k in np.flatnonzero(self.n_k[: act[-1]] == 0)]

    @property
    def k_cap(self) -> int:
        return self.n_k.shape[0]

    def grow_topics(self, k_cap: int | None = None) -> None:
        k_cap = k_cap or 2 * self.k_cap
        pad = k_cap - self.k_cap
        if pad <= 0:
            return
        self.n_vk = np.pad(self.n_vk, ((0, 0), (0, pad)))
        self.n_k = np.pad(self.n_k, (0, pad))
        self.n_c = np.pad(self.n_c, ((0, 0), (0, 0), (0, 0), (0, pad)))

    def ensure_grid(self, t: int, cy: int, cx: int) -> None:
        T, ny, nx, _ = self.n_c.shape
        if t < T and cy < ny and cx < nx:
            return
        newT = T if t < T else max(2 * T, t + 1)
        self.n_c = np.pad(self.n_c, ((0, newT - T), (0, max(ny, cy + 1) - ny),
                                     (0, max(nx, cx + 1) - nx), (0, 0)))

    def add(self, v: int, k: int, t: int, cy: int, cx: int, delta: int) -> None:
        was_active = self.n_k[k] > 0
        self.n_vk[v, k] += delta
        self.n_k[k] += delta
        self.n_c[t, cy, cx, k] += delta
        self.state[1] += delta
        self.state[0] += int(self.n_k[k] > 0) - int(was_active)


@dataclass
class _Observations:
    cap: int = 64
    n: int = 0
    words: np.ndarray = field(init=False)
    x: np.ndarray = field(init=False)
    y: np.ndarray = field(init=False)
    t: np.ndarray = field(init=False)
    cx: np.ndarray = field(init=False)
    cy: np.ndarray = field(init=False)
    z: np.ndarray = field(init=False)

    NAMES = ("words", "x", "y", "t", "cx", "cy", "z")

    def __post_init__(self):
        for name in self.NAMES:
            setattr(self, name, np.zeros(self.cap, np.int64))
        self.z[:] = NEW_TOPIC

    def reserve(self, extra: int) -> None:
        need = self.n + extra
        if need <= self.cap:
            return
        cap = max(2 * self.cap, need)
        for name in self.NAMES:
            arr = getattr(self, name)
            grown = np.full(cap, NEW_TOPIC if name == "z" else 0, np.int64)
            grown[: self.n] = arr[: self.n]
            setattr(self, name, grown)
        self.cap = cap


class TopicModel:
    """Streaming topic model over word observations in spatiotemporal cells.

    Observations arrive frame by frame in non-decreasing ``t``. Each new frame is
    labelled with one draw per word and then refined with the Uniform+Now
    schedule: every round resamples the newest frame and one past frame chosen
    uniformly at random.
    """

    def __init__(
        self,
        layout: VocabularyLayout | int,
        hyper: Hyperparams | None = None,
        neighborhood: NeighborhoodSpec | None = None,
        cell_size: int = 128,
        iters_per_step: int = 10,
        seed: int = 0,
        debug: bool = False,
    ):
        if isinstance(layout, int):
            layout = VocabularyLayout.single(layout)
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if iters_per_step < 0:
            raise ValueError("iters_per_step must be non-negative")
        self.layout = layout
        self.V = layout.V
        self.hyper = hyper or Hyperparams()
        self.neighborhood = neighborhood or NeighborhoodSpec()
        self.cell_size = int(cell_size)
        self.iters_per_step = int(iters_per_step)
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self.debug = debug
        self.tables = CountTables(self.V)
        self.obs = _Observations()
        self.frames: list[int] = []
        self._frame_start: dict[int, int] = {}
        self._frame_end: dict[int, int] = {}
        self._order_cache: dict[int, np.ndarray] = {}
        self.cursor = -1  # last frame refined

    # -- ingestion ---------------------------------------------------------

    @property
    def latest_t(self) -> int:
        return self.frames[-1] if self.frames else -1

    @property
    def n_observations(self) -> int:
        return self.obs.n

    def _append(self, observations: Sequence[WordObservation]) -> np.ndarray:
        if not observations:
            return np.empty(0, np.int64)
        t0 = observations[0].t
        if t0 < self.latest_t:
            raise StreamOrderError(f"frame {t0} arrives after frame {self.latest_t}")
        prev = t0
        for o in observations:
            if o.t < prev:
                raise StreamOrderError(f"frame {o.t} arrives after frame {prev}")
            if not 0 <= o.word < self.V:
                raise ValueError(f"word {o.word} outside vocabulary of size {self.V}")
            if o.x < 0 or o.y < 0:
                raise ValueError("pixel coordinates must be non-negative")
            prev = o.t
        ob = self.obs
        ob.reserve(len(observations))
        start = ob.n
        for j, o in enumerate(observations):
            c = cell_of(o.x, o.y, o.t, self.cell_size)
            i = start + j
            ob.words[i], ob.x[i], ob.y[i], ob.t[i] = o.word, o.x, o.y, o.t
            ob.cx[i], ob.cy[i] = c.cx, c.cy
            self.tables.ensure_grid(c.t, c.cy, c.cx)
            if o.t != self.latest_t:
                self.frames.append(o.t)
                self._frame_start[o.t] = i
            self._frame_end[o.t] = i + 1
            self._order_cache.pop(o.t, None)
        ob.n = start + len(observations)
        return np.arange(start, ob.n, dtype=np.int64)

    def add_observation(self, obs: WordObservation) -> int:
        """Append one observation and label it with a single conditional draw."""
        idx = self._append([obs])
        self._run(idx)
        self._check()
        return int(self.obs.z[idx[0]])

    def add_frame(self, observations: Sequence[WordObservation]) -> np.ndarray:
        """Append a batch of observations (one frame, or several in order) and label each in turn.

        Words are drawn cell by cell, each conditioned on the ones drawn before it.
        """
        idx = self._append(list(observations))
        if len(idx):
            self._run(self._cell_sorted(idx))
        self._check()
        return self.obs.z[idx].copy()

    def process_frame(self, observations: Sequence[WordObservation]) -> np.ndarray:
        """Streaming step: add a frame's observations, then refine with Uniform+Now."""
        observations = list(observations)
        if not observations:
            return np.empty(0, np.int64)
        ts = {o.t for o in observations}
        if len(ts) != 1:
            raise ValueError("process_frame takes observations of a single frame")
        labels_idx = self._append(observations)
        self._run(self._cell_sorted(labels_idx))
        self.refine_step(observations[0].t)
        return self.obs.z[labels_idx].copy()

    # -- sampling ----------------------------------------------------------

    def _cell_sorted(self, idx: np.ndarray) -> np.ndarray:
        ob = self.obs
        keys = np.lexsort((idx, ob.cx[idx], ob.cy[idx], ob.t[idx]))
        return idx[keys]

    def _frame_order(self, t: int) -> np.ndarray:
        order = self._order_cache.get(t)
        if order is None:
            idx = np.arange(self._frame_start[t], self._frame_end[t], dtype=np.int64)
            order = self._order_cache[t] = self._cell_sorted(idx)
        return order

    def _run(self, order: np.ndarray) -> None:
        if not len(order):
            return
        uniforms = self.rng.random(len(order))
        ob, tb, h, nb = self.obs, self.tables, self.hyper, self.neighborhood
        pos = 0
        while True:
            pos = _kernel.gibbs_pass(
                order, ob.words, ob.t, ob.cy, ob.cx, ob.z,
                tb.n_vk, tb.n_k, tb.n_c, tb.state,
                h.alpha, h.beta, h.gamma, nb.spatial_radius, nb.temporal_radius,
                uniforms, pos,
            )
            if pos == len(order):
                break
            tb.grow_topics()

    def resample(self, i: int) -> int:
        if not 0 <= i < self.obs.n:
            raise IndexError(i)
        self._run(np.array([i], np.int64))
        self._check()
        return int(self.obs.z[i])

    def set_label(self, i: int, k: int) -> None:
        """Move observation ``i`` to label ``k`` directly, keeping every count consistent."""
        ob = self.obs
        if not 0 <= i < ob.n:
            raise IndexError(i)
        if k < 0:
            raise ValueError("labels are non-negative")
        while k >= self.tables.k_cap:
            self.tables.grow_topics()
        v, t, cy, cx = int(ob.words[i]), int(ob.t[i]), int(ob.cy[i]), int(ob.cx[i])
        if ob.z[i] >= 0:
            self.tables.add(v, int(ob.z[i]), t, cy, cx, -1)
        self.tables.add(v, k, t, cy, cx, +1)
        ob.z[i] = k
        self._check()

    def sweep_frame(self, t: int) -> None:
        self._run(self._frame_order(t))

    def refine_step(self, now: int) -> list[int]:
        """Run ``iters_per_step`` Uniform+Now rounds; returns the past frames visited."""
        if now not in self._frame_start:
            raise KeyError(f"frame {now} has no observations")
        n_past = bisect.bisect_left(self.frames, now)
        visited = []
        for _ in range(self.iters_per_step):
            self.sweep_frame(now)
            if n_past:
                past = self.frames[int(self.rng.integers(n_past))]
                visited.append(past)
                self.sweep_frame(past)
        self.cursor = max(self.cursor, now)
        self._check()
        return visited

    def sweep(self) -> None:
        """One full Gibbs sweep over every frame, oldest first."""
        for t in self.frames:
            self.sweep_frame(t)
        self._check()

    # -- reference conditionals (pure numpy, independent of the kernel) ------

    def word_likelihood(self, v: int, k: int) -> float:
        """(n_vk + beta) / (n_k + V beta); 1/V for an unseen label."""
        beta = self.hyper.beta
        if k == NEW_TOPIC or k >= self.tables.k_cap:
            return 1.0 / self.V
        return float((self.tables.n_vk[v, k] + beta) / (self.tables.n_k[k] + self.V * beta))

    def cell_index(self, i: int) -> CellIndex:
        return CellIndex(int(self.obs.cx[i]), int(self.obs.cy[i]), int(self.obs.t[i]))

    def grid_bounds(self) -> GridBounds:
        T, ny, nx, _ = self.tables.n_c.shape
        return GridBounds(nx=nx, ny=ny, max_t=T - 1)

    def neighborhood_counts(self, i: int) -> np.ndarray:
        g = np.zeros(self.tables.k_cap, np.int64)
        for c in neighbors(self.cell_index(i), self.neighborhood, self.grid_bounds()):
            g += self.tables.n_c[c.t, c.cy, c.cx]
        return g

    def neighborhood_weight(self, i: int, k: int) -> float:
        """n_k,g_i + alpha for an active label, gamma for a new one, 0 otherwise."""
        if k == NEW_TOPIC:
            return self.hyper.gamma
        if k >= self.tables.k_cap or self.tables.n_k[k] == 0:
            return 0.0
        return float(self.neighborhood_counts(i)[k] + self.hyper.alpha)

    @contextmanager
    def _excluded(self, i: int):
        ob = self.obs
        k = int(ob.z[i])
        args = (int(ob.words[i]), k, int(ob.t[i]), int(ob.cy[i]), int(ob.cx[i]))
        if k >= 0:
            self.tables.add(*args, -1)
        try:
            yield
        finally:
            if k >= 0:
                self.tables.add(*args, +1)

    def conditional_distribution(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Labels (active ascending, then ``NEW_TOPIC``) and their probabilities for observation ``i``.

        Observation ``i`` is taken out of the counts for the computation and put back afterwards.
        """
        with self._excluded(i):
            v = int(self.obs.words[i])
            labels = self.tables.active + [NEW_TOPIC]
            mass = np.array([self.word_likelihood(v, k) * self.neighborhood_weight(i, k) for k in labels])
        return np.array(labels, np.int64), mass / mass.sum()

    # -- views -------------------------------------------------------------

    @property
    def assignments(self) -> np.ndarray:
        return self.obs.z[: self.obs.n].copy()

    @property
    def frame_index(self) -> np.ndarray:
        return self.obs.t[: self.obs.n].copy()

    def observation(self, i: int) -> WordObservation:
        ob = self.obs
        return WordObservation(int(ob.t[i]), int(ob.x[i]), int(ob.y[i]), int(ob.words[i]))

    @property
    def active_topics(self) -> list[int]:
        return self.tables.active

    def permute_labels(self, perm: Sequence[int]) -> None:
        """Relabel topic ``k`` as ``perm[k]`` throughout tables and assignments."""
        perm = np.asarray(perm, np.int64)
        K = self.tables.k_cap
        if len(perm) != K or sorted(perm.tolist()) != list(range(K)):
            raise ValueError("perm must be a permutation of all label slots")
        inv = np.argsort(perm)
        tb = self.tables
        tb.n_vk = np.ascontiguousarray(tb.n_vk[:, inv])
        tb.n_k = np.ascontiguousarray(tb.n_k[inv])
        tb.n_c = np.ascontiguousarray(tb.n_c[..., inv])
        z = self.obs.z[: self.obs.n]
        assigned = z >= 0
        z[assigned] = perm[z[assigned]]

    # -- consistency -------------------------------------------------------

    def _check(self) -> None:
        if self.debug:
            self.audit()

    def audit(self) -> None:
        """Recount every table from the assignments and check the count invariants exactly."""
        ob, tb = self.obs, self.tables
        n = ob.n
        z = ob.z[:n]
        if np.any(z < 0):
            raise InconsistentCounts("unassigned observation present")
        K = tb.k_cap
        if np.any(z >= K):
            raise InconsistentCounts("label outside table capacity")
        n_vk = np.zeros_like(tb.n_vk)
        np.add.at(n_vk, (ob.words[:n], z), 1)
        n_c = np.zeros_like(tb.n_c)
        np.add.at(n_c, (ob.t[:n], ob.cy[:n], ob.cx[:n], z), 1)
        if (tb.n_vk < 0).any() or (tb.n_k < 0).any() or (tb.n_c < 0).any():
            raise InconsistentCounts("negative count")
        if not np.array_equal(n_vk, tb.n_vk):
            raise InconsistentCounts("word-topic counts disagree with assignments")
        if not np.array_equal(n_c, tb.n_c):
            raise InconsistentCounts("cell-topic counts disagree with assignments")
        if not np.array_equal(tb.n_vk.sum(axis=0), tb.n_k):
            raise InconsistentCounts("sum_v n_vk != n_k")
        cell_totals = np.zeros(tb.n_c.shape[:3], np.int64)
        np.add.at(cell_totals, (ob.t[:n], ob.cy[:n], ob.cx[:n]), 1)
        if not np.array_equal(tb.n_c.sum(axis=3, dtype=np.int64), cell_totals):
            raise InconsistentCounts("sum_k n_kc != observations per cell")
        if int(tb.n_k.sum()) != tb.N or tb.N != n:
            raise InconsistentCounts("sum_k n_k != N")
        if int((tb.n_k > 0).sum()) != int(tb.state[0]):
            raise InconsistentCounts("active count out of sync")
        if not set(np.unique(z).tolist()) <= set(tb.active):
            raise InconsistentCounts("assignment to an inactive label")


def iter_frames(observations: Iterable[WordObservation]):
    """Group a t-sorted observation sequence into (t, [observations]) frames."""
    batch: list[WordObservation] = []
    for o in observations:
        if batch and o.t != batch[0].t:
            yield batch[0].t, batch
            batch = []
        batch.append(o)
    if batch:
        yield batch[0].t, batch
