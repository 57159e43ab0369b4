import numpy as np
import pytest

from scenetopics import Hyperparams, TopicModel, WordObservation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_frames(rng, T, per_frame, V, width=512, height=512):
    frames = []
    for t in range(T):
        frames.append([WordObservation(t, int(rng.integers(width)), int(rng.integers(height)), int(rng.integers(V)))
                       for _ in range(per_frame)])
    return frames


@pytest.fixture
def small_model(rng):
    m = TopicModel(6, hyper=Hyperparams(0.1, 0.5, 0.5), seed=3, iters_per_step=2)
    for frame in random_frames(rng, 6, 30, 6, 384, 384):
        m.process_frame(frame)
    return m


# One line per acceptance criterion, echoed after the run so the verdicts are
# visible without -s.
ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
