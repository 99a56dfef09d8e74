"""Shared fixtures.

The expensive piece is the toy memorization run (one per cell kind). It is
trained once per session and shared between the rnn tests and the
acceptance gate.
"""

import contextlib
import io
import time
from dataclasses import dataclass

import numpy as np
import pytest

from melodykit.cli import main as cli_main
from melodykit.core import DatasetVariant, build_corpus
from melodykit.rnn import ModelState, TrainConfig, train

# one 200-note random walk, clamped to a comfortable register
def make_toy_song():
    rng = np.random.default_rng(7)
    song = [60]
    for _ in range(199):
        step = int(rng.choice([-4, -2, -1, 1, 2, 4]))
        song.append(min(84, max(48, song[-1] + step)))
    return song


TOY_KNOBS = dict(
    num_layers=1,
    hidden_size=32,
    embedding_dim=16,
    batch_size=2,
    seq_len=20,
    epochs=500,
    learning_rate=0.01,
    lr_decay=1.0,
    max_iterations=2000,
)


@dataclass
class ToyRun:
    song: list
    model: ModelState
    curve: list
    seconds: float


@pytest.fixture(scope="session")
def toy_runs() -> dict[str, ToyRun]:
    song = make_toy_song()
    corpus = build_corpus([song], DatasetVariant.CONTROL)
    runs = {}
    for cell in ("lstm", "ugrnn"):
        start = time.perf_counter()
        model, curve = train(corpus, TrainConfig(cell=cell, **TOY_KNOBS), seed=0)
        runs[cell] = ToyRun(song, model, curve, time.perf_counter() - start)
    return runs


def random_song(rng, length, lo=0, hi=127):
    return [int(p) for p in rng.integers(lo, hi + 1, size=length)]


def run_cli(argv):
    """Invoke the CLI in-process; returns (exit_code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli_main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()
