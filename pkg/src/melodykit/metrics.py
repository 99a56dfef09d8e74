"""Tonality metrics over sliding 12-note spans.

Three numbers summarise how melodic a note stream is: chromatic melodic
movement (mean absolute step size), local macroharmony (how many distinct
pitches each span uses, penalised outside a comfort band), and centricity
(how dominant each span's most frequent pitch is).  All metrics need at
least one full span, so songs shorter than the span length are rejected.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .core import Song
from .errors import BadSpanLength, EmptyInput, SongTooShort


@dataclass(frozen=True)
class SpanConfig:
    """Span length and the macroharmony comfort band [lb, ub]."""

    n: int = 12
    lb: int = 5
    ub: int = 8

    def __post_init__(self) -> None:
        if not (1 <= self.lb <= self.ub <= self.n):
            raise ValueError(f"need 1 <= lb <= ub <= n, got n={self.n} lb={self.lb} ub={self.ub}")


@dataclass(frozen=True)
class MetricReport:
    cmm: float
    lm: float
    centr: float

    def as_dict(self) -> dict[str, float]:
        return {"cmm": self.cmm, "lm": self.lm, "centr": self.centr}


@dataclass(frozen=True)
class MetricStats:
    """Per-metric mean and population standard deviation over a song set."""

    cmm_mean: float
    cmm_std: float
    lm_mean: float
    lm_std: float
    centr_mean: float
    centr_std: float
    count: int

    def centroid(self) -> MetricReport:
        return MetricReport(cmm=self.cmm_mean, lm=self.lm_mean, centr=self.centr_mean)


def span_count(song_len: int, n: int) -> int:
    """Number of length-n sliding windows (stride 1); 1 when the song fits in one."""
    if song_len <= n:
        return 1
    return song_len - n + 1


def _require_full_span(song: Song, n: int) -> None:
    if len(song) < n:
        raise SongTooShort(f"metrics need at least {n} notes, got {len(song)}")


def cmm(song: Song, cfg: SpanConfig = SpanConfig()) -> float:
    """Mean absolute semitone step between consecutive notes."""
    _require_full_span(song, cfg.n)
    total = sum(abs(song[i + 1] - song[i]) for i in range(len(song) - 1))
    return total / (len(song) - 1)


def llm(span: Song, cfg: SpanConfig = SpanConfig()) -> float:
    """Macroharmony score of one span.

    1 inside the comfort band; outside it the penalty grows linearly with
    the distance to the band, so 1 and n distinct notes score the same.
    Pitches count as distinct per octave (no pitch-class folding).
    """
    if len(span) != cfg.n:
        raise BadSpanLength(f"span must have exactly {cfg.n} notes, got {len(span)}")
    d = len(set(span))
    if cfg.lb <= d <= cfg.ub:
        return 1.0
    if d < cfg.lb:
        return float(cfg.lb - d + 1)
    return float(d - cfg.ub + 1)


def lm(song: Song, cfg: SpanConfig = SpanConfig()) -> float:
    """Mean llm over all sliding spans."""
    _require_full_span(song, cfg.n)
    spans = span_count(len(song), cfg.n)
    return sum(llm(song[j : j + cfg.n], cfg) for j in range(spans)) / spans


def centricity(song: Song, cfg: SpanConfig = SpanConfig()) -> float:
    """Mean over spans of the most frequent pitch's share of the span."""
    _require_full_span(song, cfg.n)
    spans = span_count(len(song), cfg.n)
    total = 0.0
    for j in range(spans):
        counts = Counter(song[j : j + cfg.n])
        total += max(counts.values()) / cfg.n
    return total / spans


def evaluate_song(song: Song, cfg: SpanConfig = SpanConfig()) -> MetricReport:
    return MetricReport(cmm=cmm(song, cfg), lm=lm(song, cfg), centr=centricity(song, cfg))


def dataset_stats(songs: list[Song], cfg: SpanConfig = SpanConfig()) -> MetricStats:
    """Mean and population std of each metric over the songs."""
    if not songs:
        raise EmptyInput("no songs to evaluate")
    reports = []
    for i, song in enumerate(songs):
        try:
            reports.append(evaluate_song(song, cfg))
        except SongTooShort as exc:
            raise SongTooShort(f"song {i}: {exc}") from exc
    return stats_of_reports(reports)


def stats_of_reports(reports: list[MetricReport]) -> MetricStats:
    if not reports:
        raise EmptyInput("no reports to aggregate")

    def mean_std(values: list[float]) -> tuple[float, float]:
        m = sum(values) / len(values)
        var = sum((v - m) ** 2 for v in values) / len(values)
        return m, math.sqrt(var)

    cm, cs = mean_std([r.cmm for r in reports])
    lmn, ls = mean_std([r.lm for r in reports])
    cen, ces = mean_std([r.centr for r in reports])
    return MetricStats(
        cmm_mean=cm, cmm_std=cs, lm_mean=lmn, lm_std=ls,
        centr_mean=cen, centr_std=ces, count=len(reports),
    )


def representative_song(reports: list[MetricReport], centroid: MetricReport) -> int:
    """Index of the report nearest the centroid in raw Euclidean distance.

    Ties resolve to the lowest index.
    """
    if not reports:
        raise EmptyInput("no reports to choose from")
    best_i = 0
    best_d = math.inf
    for i, r in enumerate(reports):
        d = math.sqrt(
            (r.cmm - centroid.cmm) ** 2
            + (r.lm - centroid.lm) ** 2
            + (r.centr - centroid.centr) ** 2
        )
        if d < best_d:
            best_i, best_d = i, d
    return best_i
