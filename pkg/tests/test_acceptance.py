"""Acceptance suite: one test per criterion, each printing a PASS/FAIL verdict line."""

import time
from collections import Counter

import numpy as np
import pytest

from conftest import ACCEPTANCE_LOG
from scenetopics import Hyperparams, NeighborhoodSpec, TopicModel, WordObservation
from scenetopics.cli import main as cli_main
from scenetopics.features.imageio import Frame, write_pnm
from scenetopics.model import iter_frames
from scenetopics.scoring import (
    check_bounds,
    ks_statistic,
    score_timeline,
    timeline_from_model,
)
from scenetopics.synth import canonical_partition, exact_posterior, generate, parse_spec

pytestmark = pytest.mark.slow

PLANTED = """\
V = 60
T = 500
width = 512
height = 512
cell_size = 128
words_per_frame = 200
topic.0 = uniform:0:20
topic.0.weight = 0.5
topic.1 = uniform:20:40
topic.1.weight = 0.5
window.0 = 100:110
window.0.dist = uniform:30:60
window.0.intensity = 0.8
window.1 = 250:260
window.1.dist = uniform:30:60
window.1.intensity = 0.8
window.2 = 400:410
window.2.dist = uniform:30:60
window.2.intensity = 0.8
"""
# Small-vocabulary sampler settings; see configs/synthetic.conf.
SYNTH_HYPER = Hyperparams(alpha=0.1, beta=0.1, gamma=1e-3)
SEEDS = range(20)

# every scored run from criteria 1-4, for the bounds check in criterion 5
SCORED_RUNS: list[tuple[str, TopicModel]] = []


def verdict(n, name, ok, detail):
    line = f"criterion {n} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LOG.append(line)
    return ok


def stream_model(observations, hyper, seed, iters=10, layout=60):
    model = TopicModel(layout, hyper=hyper, iters_per_step=iters, seed=seed)
    for _, frame in iter_frames(observations):
        model.process_frame(frame)
    return model


@pytest.fixture(scope="module")
def planted_runs():
    runs = []
    for seed in SEEDS:
        spec = parse_spec(PLANTED)
        spec.seed = seed
        truth = generate(spec)
        model = stream_model(truth.observations, SYNTH_HYPER, seed)
        runs.append((truth, model))
        SCORED_RUNS.append((f"planted seed {seed}", model))
    return runs


# -- 1 -----------------------------------------------------------------------

ORACLE_WORDS = [
    [0, 0, 1, 1, 2, 2, 0, 1],
    [0, 1, 2, 0, 1, 2],
    [0, 0, 0, 1, 1],
    [2, 1, 0, 2, 1, 0, 2],
    [1, 1, 1, 1, 1, 1, 1, 1],
    [0, 2, 2, 0],
]


def test_criterion_1_oracle_equivalence():
    hyper = Hyperparams(alpha=0.1, beta=1.0, gamma=0.1)
    burn, sweeps = 1_000, 100_000
    tvs = []
    for seed, words in enumerate(ORACLE_WORDS):
        V = 3
        model = TopicModel(V, hyper=hyper, neighborhood=NeighborhoodSpec(0, 0),
                           cell_size=1 << 20, iters_per_step=0, seed=100 + seed)
        model.add_frame([WordObservation(0, 0, 0, w) for w in words])
        for _ in range(burn):
            model.sweep_frame(0)
        raw = Counter()
        z = model.obs.z
        n = len(words)
        for _ in range(sweeps):
            model.sweep_frame(0)
            raw[z[:n].tobytes()] += 1
        empirical = Counter()
        for key, c in raw.items():
            empirical[canonical_partition(np.frombuffer(key, np.int64))] += c
        exact = exact_posterior(words, V, hyper)
        tv = 0.5 * sum(abs(empirical.get(p, 0) / sweeps - q) for p, q in exact.items())
        tv += 0.5 * sum(c / sweeps for p, c in empirical.items() if p not in exact)
        tvs.append(tv)
        model.audit()
        SCORED_RUNS.append((f"oracle instance {seed}", model))
    ok = len(tvs) >= 5 and max(tvs) < 0.05
    verdict(1, "oracle equivalence", ok, "TV per instance " + ", ".join(f"{t:.4f}" for t in tvs) + "; bound 0.05")
    assert ok


# -- 2 -----------------------------------------------------------------------

def test_criterion_2_count_table_audit():
    rng = np.random.default_rng(2024)
    V = 8
    model = TopicModel(V, hyper=Hyperparams(0.1, 0.5, 0.05), cell_size=64, seed=7)
    ops = Counter()
    t = 0
    audits = 0
    for step in range(100_000):
        r = rng.random()
        n = model.n_observations
        if n == 0 or r < 0.15:
            if rng.random() < 0.05:
                t += int(rng.integers(1, 3))
            model.add_observation(WordObservation(t, int(rng.integers(256)), int(rng.integers(256)),
                                                  int(rng.integers(V))))
            ops["add"] += 1
        elif r < 0.75:
            model.resample(int(rng.integers(n)))
            ops["resample"] += 1
        else:
            # forced moves: open fresh topics, and empty the smallest one so it retires
            active = model.active_topics
            before = len(active)
            if r < 0.85 or before < 2:
                i = int(rng.integers(n))
                choices = active + model.tables.free_labels[:1]
                target = int(choices[rng.integers(len(choices))])
            else:
                sizes = model.tables.n_k[active]
                k = active[int(np.argmin(sizes))]
                i = int(np.flatnonzero(model.assignments == k)[0])
                target = int(rng.choice([a for a in active if a != k]))
            model.set_label(i, target)
            ops["retire" if len(model.active_topics) < before else "move"] += 1
        if step % 100 == 99:
            model.audit()
            audits += 1
    model.audit()
    SCORED_RUNS.append(("audit stream", model))
    ok = ops["retire"] >= 1000
    verdict(2, "count-table audit", ok,
            f"{sum(ops.values())} ops {dict(ops)}; {audits + 1} exact audits clean")
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_criterion_3_planted_anomaly_recovery(planted_runs):
    good = 0
    for truth, model in planted_runs:
        report = score_timeline(timeline_from_model(model), max_peaks=3, min_separation=20)
        windows = set()
        for t, _ in report.peaks:
            for j, ev in enumerate(truth.events):
                if ev["t_start"] <= t < ev["t_end"]:
                    windows.add(j)
        good += len(report.peaks) == 3 and len(windows) == 3
    ok = good >= 19
    verdict(3, "planted-anomaly recovery", ok, f"{good}/20 seeds with all 3 peaks in distinct windows; need 19")
    assert ok


# -- 4 -----------------------------------------------------------------------

GAMMA_STREAM = """\
V = 30
T = 60
words_per_frame = 80
seed = 11
topic.0 = uniform:0:10
topic.0.weight = 0.6
topic.1 = uniform:10:20
topic.1.weight = 0.4
window.0 = 30:35
window.0.dist = uniform:20:30
window.0.intensity = 0.7
"""


def test_criterion_4_gamma_monotonicity():
    truth = generate(parse_spec(GAMMA_STREAM))
    means = []
    for gamma in (1e-6, 1e-3, 1.0):
        sizes = []
        for seed in SEEDS:
            model = stream_model(truth.observations, Hyperparams(0.1, 0.1, gamma), seed, iters=4, layout=30)
            sizes.append(len(model.active_topics))
            if seed == 0:
                SCORED_RUNS.append((f"gamma {gamma} seed 0", model))
        means.append(float(np.mean(sizes)))
    ok = means[0] <= means[1] <= means[2]
    verdict(4, "gamma monotonicity", ok, "mean |active| " + " <= ".join(f"{m:.2f}" for m in means))
    assert ok


# -- 5 -----------------------------------------------------------------------

def test_criterion_5_perplexity_bounds(planted_runs):
    rng = np.random.default_rng(5)
    checked = failures = 0
    for name, model in SCORED_RUNS:
        base = score_timeline(timeline_from_model(model))
        try:
            check_bounds(base)
            assert np.all(base.scores >= 1.0)
        except Exception:
            failures += 1
        before = model.assignments.copy()
        perm = rng.permutation(model.tables.k_cap)
        model.permute_labels(perm)
        permuted = score_timeline(timeline_from_model(model))
        model.permute_labels(np.argsort(perm))
        assert np.array_equal(model.assignments, before)
        if not np.array_equal(base.scores, permuted.scores):
            failures += 1
        checked += 1
    ok = checked >= 20 + 6 + 1 and failures == 0
    verdict(5, "perplexity bounds", ok, f"{checked} runs checked, {failures} violations of bounds or permutation invariance")
    assert ok


# -- 6 -----------------------------------------------------------------------

def brute_ks(a, b):
    # two passes: running totals first, then the scan against those totals
    sa = sb = 0.0
    for x, y in zip(a, b):
        sa += x
        sb += y
    ca = cb = 0.0
    best = 0.0
    for x, y in zip(a, b):
        ca += x
        cb += y
        best = max(best, abs(ca / sa - cb / sb))
    return best


def test_criterion_6_ks_oracle():
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        a = rng.random(n) * (rng.random(n) < 0.7)
        b = rng.random(n) * (rng.random(n) < 0.7)
        a[rng.integers(n)] += 0.1
        b[rng.integers(n)] += 0.1
        mismatches += ks_statistic(a, b) != brute_ks(a.tolist(), b.tolist())
    x = rng.random(30)
    same = ks_statistic(x, x)
    disjoint = ks_statistic([1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 1.0])
    ok = mismatches == 0 and same == 0.0 and disjoint == 1.0
    verdict(6, "KS oracle", ok, f"{mismatches}/1000 mismatches; identical -> {same}, disjoint -> {disjoint}")
    assert ok


# -- 7 -----------------------------------------------------------------------

def anomaly_topic(truth, model):
    n_bg = min(ev["label"] for ev in truth.events)
    z = model.assignments[truth.labels >= n_bg]
    return int(np.bincount(z).argmax())


def test_criterion_7_timeline_recovery(planted_runs):
    ds = []
    for truth, model in planted_runs:
        tl = timeline_from_model(model)
        k = anomaly_topic(truth, model)
        col = int(np.searchsorted(tl.labels, k))
        density = truth.event_density(len(tl.frames))[tl.frames]
        ds.append(ks_statistic(tl.dist[:, col], density))
    good = sum(d <= 0.185 for d in ds)
    ok = good >= 15
    verdict(7, "timeline recovery", ok,
            f"{good}/20 seeds with D <= 0.185; median D {np.median(ds):.4f}, worst {max(ds):.4f}")
    assert ok


# -- 8 -----------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    rng = np.random.default_rng(8)
    frames = tmp_path / "frames"
    frames.mkdir()
    for t in range(3):
        write_pnm(frames / f"{t}.ppm", Frame(rng.integers(0, 256, (48, 64, 3), dtype=np.uint8)))
    spec = tmp_path / "planted.spec"
    spec.write_text(PLANTED.replace("T = 500", "T = 120").replace("window.1", "#").replace("window.2", "#"))
    sampler = ["--alpha", "0.1", "--beta", "0.1", "--gamma", "1e-3", "--seed", "9"]
    outputs = []
    for rep in "ab":
        d = tmp_path / rep
        codes = [
            cli_main(["extract", str(frames), "--out", str(d / "extract"), "--texton-codewords", "6", "--seed", "9"]),
            cli_main(["synth", str(spec), "--out", str(d / "synth"), "--seed", "9"]),
            cli_main(["model", str(d / "synth" / "words.txt"), "--out", str(d / "model"), *sampler]),
            cli_main(["score", str(d / "model" / "model.ckpt"), "--out", str(d / "score"), "--max-peaks", "1"]),
            cli_main(["eval", str(d / "score" / "report.csv"), str(d / "synth" / "truth.json"),
                      "--out", str(d / "eval"), "--assignments", str(d / "model" / "assignments.csv")]),
        ]
        assert codes == [0] * 5
        outputs.append({
            cmd: {p.name: p.read_bytes() for p in sorted((d / cmd).iterdir())}
            for cmd in ("extract", "synth", "model", "score", "eval")
        })
    same = [cmd for cmd in outputs[0] if outputs[0][cmd] == outputs[1][cmd]]
    ok = len(same) == 5
    verdict(8, "determinism", ok, f"byte-identical: {', '.join(same)}")
    assert ok


# -- 9 -----------------------------------------------------------------------

def test_criterion_9_throughput():
    rng = np.random.default_rng(9)
    V, topics, T, per_frame = 2000, 15, 60, 1000
    support = [rng.choice(V, 150, replace=False) for _ in range(topics)]
    frames = []
    for t in range(T):
        src = rng.integers(topics, size=per_frame)
        frames.append([WordObservation(t, int(rng.integers(1024)), int(rng.integers(1024)),
                                       int(rng.choice(support[s]))) for s in src])
    model = TopicModel(V, hyper=Hyperparams(0.1, 0.1, 5e-3), iters_per_step=10, seed=9)
    model.process_frame(frames[0])  # warm the compiled kernel
    resamples = 0
    start = time.perf_counter()
    for frame in frames[1:]:
        t = frame[0].t
        model.add_frame(frame)
        visited = model.refine_step(t)
        resamples += per_frame * (1 + model.iters_per_step) + per_frame * len(visited)
    elapsed = time.perf_counter() - start
    rate = resamples / elapsed
    k_active = len(model.active_topics)
    ok = rate >= 50_000 and 5 <= k_active <= 20
    verdict(9, "throughput (soft)", ok, f"{rate:,.0f} resamples/s at V={V}, K_active={k_active}")
    assert ok
