import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melodykit.core import (
    DatasetVariant,
    Vocabulary,
    build_corpus,
    build_vocabulary,
    check_song,
    clean_corpus,
    interval_to_song,
    load_songs_jsonl,
    save_songs_jsonl,
    song_to_db12,
    song_to_interval,
    token_stream,
    transpose,
)
from melodykit.errors import EmptyCorpus, PitchOutOfRange, SongTooShort

from .oracles import brute_intervals

# range-safe for db12: 11 semitones of headroom both ways
safe_songs = st.lists(st.integers(11, 116), min_size=1, max_size=40)
valid_songs = st.lists(st.integers(0, 127), min_size=2, max_size=60)


def test_clean_corpus_threshold():
    assert clean_corpus([[60, 62, 64, 65], [60, 62], [60, 61, 62, 63, 64]]) == [
        [60, 62, 64, 65],
        [60, 61, 62, 63, 64],
    ]
    assert clean_corpus([]) == []
    assert clean_corpus([[60, 62, 64]]) == []  # length 3 is still too short


def test_interval_worked_example():
    assert song_to_interval([60, 62, 64, 65, 62, 60, 60]) == [2, 2, 1, -3, -2, 0]
    # the transposed twin shares the series
    assert song_to_interval([67, 69, 71, 72, 69, 67, 67]) == [2, 2, 1, -3, -2, 0]
    assert song_to_interval([60, 60, 60]) == [0, 0]


def test_interval_needs_two_notes():
    with pytest.raises(SongTooShort):
        song_to_interval([60])


def test_interval_to_song_inverse():
    assert interval_to_song(60, [2, 2, 1, -3, -2, 0]) == [60, 62, 64, 65, 62, 60, 60]
    assert interval_to_song(60, []) == [60]


def test_interval_to_song_range_errors():
    with pytest.raises(PitchOutOfRange):
        interval_to_song(1, [-2])
    with pytest.raises(PitchOutOfRange):
        interval_to_song(128, [])
    with pytest.raises(PitchOutOfRange):
        interval_to_song(120, [5, 5])


@given(valid_songs)
def test_interval_roundtrip(song):
    assert interval_to_song(song[0], song_to_interval(song)) == song


@given(valid_songs)
def test_interval_matches_oracle(song):
    assert song_to_interval(song) == brute_intervals(song)


def test_transpose_checks_range():
    assert transpose([60, 62], 7) == [67, 69]
    with pytest.raises(PitchOutOfRange):
        transpose([125], 7)


def test_check_song_rejects():
    with pytest.raises(SongTooShort):
        check_song([])
    with pytest.raises(PitchOutOfRange):
        check_song([60, 200])


def db12_shifts(song, outputs):
    return [out[0] - song[0] for out in outputs]


def test_db12_hand_anchor_centred():
    # midpoint 62, two below middle C: budget 9 splits 5 up / 4 down,
    # then the gap moves 2 more down
    outs = song_to_db12([60, 62, 64])
    assert len(outs) == 12
    assert outs[0] == [60, 62, 64]
    shifts = db12_shifts([60, 62, 64], outs)
    assert shifts == [0, -1, -2, -3, -4, -5, -6, 1, 2, 3, 4, 5]


def test_db12_hand_anchor_single_note():
    outs = song_to_db12([60])
    shifts = db12_shifts([60], outs)
    assert shifts == [0, -1, -2, -3, -4, -5, 1, 2, 3, 4, 5, 6]


def test_db12_far_off_centre():
    # midpoint 100 is 40 above middle C: every copy moves down
    outs = song_to_db12([95, 100, 105])
    shifts = db12_shifts([95, 100, 105], outs)
    assert shifts == [0] + [-k for k in range(1, 12)]
    outs = song_to_db12([15, 20])
    shifts = db12_shifts([15, 20], outs)
    assert shifts == [0] + list(range(1, 12))


@given(safe_songs)
@settings(max_examples=300)
def test_db12_cardinality_and_invariance(song):
    outs = song_to_db12(song)
    assert len(outs) == 12
    assert outs[0] == song
    shifts = db12_shifts(song, outs)
    up, down = max(shifts), -min(shifts)
    assert up + down == 11
    assert sorted(shifts) == list(range(-down, up + 1))
    if len(song) >= 2:
        base = brute_intervals(song)
        for out in outs:
            assert brute_intervals(out) == base


def test_vocabulary_examples():
    assert build_vocabulary([[60, 62, 60]]).size == 2
    assert build_vocabulary([[0], [127]]).size == 2
    v = build_vocabulary([[-3, 0, 2, 2]])
    assert v.size == 3
    assert v.tokens == (-3, 0, 2)


def test_vocabulary_roundtrip_and_lookup():
    v = Vocabulary(tokens=(-3, 0, 2))
    assert [v.token_to_id(t) for t in (-3, 0, 2)] == [0, 1, 2]
    assert v.decode(v.encode([2, -3, 0])) == [2, -3, 0]
    assert 0 in v and 1 not in v
    with pytest.raises(KeyError):
        v.token_to_id(1)


def test_build_vocabulary_empty():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([[]])


def test_build_corpus_control():
    c = build_corpus([[60, 62, 64, 65]], DatasetVariant.CONTROL)
    vocab = c.vocabulary
    assert vocab.decode(c.x) == [60, 62, 64]
    assert vocab.decode(c.y) == [62, 64, 65]
    assert c.x.dtype == np.int64


def test_build_corpus_interval():
    c = build_corpus([[60, 62, 64, 65]], DatasetVariant.INTERVAL)
    assert c.vocabulary.decode(c.x) == [2, 2]
    assert c.vocabulary.decode(c.y) == [2, 1]


def test_build_corpus_db12_length():
    song = [60, 62, 64, 65]
    c = build_corpus([song], DatasetVariant.DB12)
    assert c.x.size == 12 * len(song) - 1


def test_token_stream_variants():
    songs = [[60, 62, 64, 65], [70, 71, 72, 73]]
    assert token_stream(songs, DatasetVariant.CONTROL) == [60, 62, 64, 65, 70, 71, 72, 73]
    assert token_stream(songs, DatasetVariant.INTERVAL) == [2, 2, 1, 1, 1, 1]
    assert len(token_stream(songs, DatasetVariant.DB12)) == 12 * 8


def test_build_corpus_y_is_x_shifted():
    c = build_corpus([[60, 62, 64, 65, 67]], DatasetVariant.CONTROL)
    np.testing.assert_array_equal(c.x[1:], c.y[:-1])


def test_songs_jsonl_roundtrip(tmp_path):
    songs = [[60, 62, 64], [11, 116]]
    path = tmp_path / "songs.jsonl"
    save_songs_jsonl(songs, path)
    assert load_songs_jsonl(path) == songs


@pytest.mark.parametrize(
    "line",
    ['{"not": "a list"}', "[60, 61.5]", "[60, true]", "not json", '[60, "x"]'],
)
def test_songs_jsonl_rejects_bad_lines(tmp_path, line):
    path = tmp_path / "bad.jsonl"
    path.write_text("[60, 62]\n" + line + "\n")
    with pytest.raises(ValueError) as exc_info:
        load_songs_jsonl(path)
    assert ":2:" in str(exc_info.value)  # offending line is named
