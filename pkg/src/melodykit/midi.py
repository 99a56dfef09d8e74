"""Standard MIDI file reading and writing for monophonic quarter-note songs.

The parser accepts format 0 and 1 files, walks every track with running
status, and collects note-on events (velocity 0 counts as note-off).
Notes merge across tracks ordered by absolute tick, then track order.
Overlapping notes are a hard error: this package only models one voice.

The writer emits a fixed shape: format 0, one track, 480 ticks per
quarter note, a 120 BPM tempo event, then each note as a velocity-90
note-on lasting exactly 480 ticks.  parse_midi(write_midi(song)) == song.
"""

from __future__ import annotations

from .core import Song, check_song
from .errors import MalformedFile, PolyphonyDetected

TICKS_PER_QUARTER = 480
TEMPO_USEC_PER_QUARTER = 500_000  # 120 BPM
NOTE_VELOCITY = 90


def _read_u16(data: bytes, pos: int) -> int:
    return int.from_bytes(data[pos : pos + 2], "big")


def _read_u32(data: bytes, pos: int) -> int:
    return int.from_bytes(data[pos : pos + 4], "big")


def _read_vlq(data: bytes, pos: int) -> tuple[int, int]:
    """Variable-length quantity: 7 bits per byte, high bit continues, max 4 bytes."""
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise MalformedFile("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MalformedFile("variable-length quantity longer than 4 bytes")


def _vlq_bytes(value: int) -> bytes:
    if value < 0:
        raise ValueError("delta time must be >= 0")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(chunks))


class _NoteSpan:
    __slots__ = ("start", "end", "pitch", "track", "order")

    def __init__(self, start: int, pitch: int, track: int, order: int) -> None:
        self.start = start
        self.end: int | None = None
        self.pitch = pitch
        self.track = track
        self.order = order


def _parse_track(data: bytes, track_index: int) -> list[_NoteSpan]:
    """Walk one MTrk payload and return the completed note spans."""
    spans: list[_NoteSpan] = []
    open_notes: dict[tuple[int, int], list[_NoteSpan]] = {}
    pos = 0
    tick = 0
    order = 0
    running_status: int | None = None
    while pos < len(data):
        delta, pos = _read_vlq(data, pos)
        tick += delta
        if pos >= len(data):
            raise MalformedFile(f"track {track_index}: truncated event")
        status = data[pos]
        if status & 0x80:
            pos += 1
            if status < 0xF0:
                running_status = status
            else:
                running_status = None  # meta and sysex cancel running status
        else:
            if running_status is None:
                raise MalformedFile(f"track {track_index}: data byte with no running status")
            status = running_status

        if status == 0xFF:  # meta event
            if pos >= len(data):
                raise MalformedFile(f"track {track_index}: truncated meta event")
            meta_type = data[pos]
            pos += 1
            length, pos = _read_vlq(data, pos)
            if pos + length > len(data):
                raise MalformedFile(f"track {track_index}: meta event overruns track")
            pos += length
            if meta_type == 0x2F:  # end of track
                break
            continue
        if status in (0xF0, 0xF7):  # sysex
            length, pos = _read_vlq(data, pos)
            if pos + length > len(data):
                raise MalformedFile(f"track {track_index}: sysex overruns track")
            pos += length
            continue
        if status < 0x80:
            raise MalformedFile(f"track {track_index}: bad status byte {status:#x}")

        kind = status & 0xF0
        channel = status & 0x0F
        n_data = 1 if kind in (0xC0, 0xD0) else 2
        if pos + n_data > len(data):
            raise MalformedFile(f"track {track_index}: truncated channel event")
        d1 = data[pos]
        d2 = data[pos + 1] if n_data == 2 else 0
        pos += n_data

        if kind == 0x90 and d2 > 0:  # note on
            span = _NoteSpan(tick, d1, track_index, order)
            order += 1
            open_notes.setdefault((channel, d1), []).append(span)
            spans.append(span)
        elif kind == 0x80 or (kind == 0x90 and d2 == 0):  # note off
            stack = open_notes.get((channel, d1))
            if stack:
                stack.pop(0).end = tick
        # other channel events carry no note information
    for span in spans:
        if span.end is None:
            span.end = tick  # close dangling notes at the track's final tick
    return spans


def parse_midi(data: bytes) -> Song:
    """Extract the monophonic note sequence from a format 0 or 1 file."""
    if len(data) < 14 or data[0:4] != b"MThd":
        raise MalformedFile("missing MThd header")
    header_len = _read_u32(data, 4)
    if header_len < 6 or 8 + header_len > len(data):
        raise MalformedFile("bad MThd length")
    fmt = _read_u16(data, 8)
    ntracks = _read_u16(data, 10)
    if fmt not in (0, 1):
        raise MalformedFile(f"unsupported format {fmt}; only 0 and 1")
    if fmt == 0 and ntracks != 1:
        raise MalformedFile(f"format 0 must have exactly 1 track, declares {ntracks}")

    spans: list[_NoteSpan] = []
    pos = 8 + header_len
    track_index = 0
    while track_index < ntracks:
        if pos + 8 > len(data):
            raise MalformedFile(f"expected {ntracks} tracks, found {track_index}")
        chunk_id = data[pos : pos + 4]
        chunk_len = _read_u32(data, pos + 4)
        payload_start = pos + 8
        if payload_start + chunk_len > len(data):
            raise MalformedFile("chunk overruns file")
        if chunk_id == b"MTrk":
            spans.extend(_parse_track(data[payload_start : payload_start + chunk_len], track_index))
            track_index += 1
        # unknown chunk ids are skipped per the format
        pos = payload_start + chunk_len

    spans.sort(key=lambda s: (s.start, s.track, s.order))
    latest_end = None
    for span in spans:
        if latest_end is not None and span.start < latest_end:
            raise PolyphonyDetected(
                f"note {span.pitch} at tick {span.start} overlaps a note ending at tick {latest_end}"
            )
        if latest_end is None or span.end > latest_end:
            latest_end = span.end
    return [span.pitch for span in spans]


def write_midi(song: Song) -> bytes:
    """Serialise a song as format 0: 480-tick quarter notes at 120 BPM."""
    check_song(song)
    track = bytearray()
    track += _vlq_bytes(0) + bytes([0xFF, 0x51, 0x03]) + TEMPO_USEC_PER_QUARTER.to_bytes(3, "big")
    for note in song:
        track += _vlq_bytes(0) + bytes([0x90, note, NOTE_VELOCITY])
        track += _vlq_bytes(TICKS_PER_QUARTER) + bytes([0x80, note, 0])
    track += _vlq_bytes(0) + bytes([0xFF, 0x2F, 0x00])

    out = bytearray()
    out += b"MThd" + (6).to_bytes(4, "big")
    out += (0).to_bytes(2, "big") + (1).to_bytes(2, "big") + TICKS_PER_QUARTER.to_bytes(2, "big")
    out += b"MTrk" + len(track).to_bytes(4, "big") + track
    return bytes(out)
