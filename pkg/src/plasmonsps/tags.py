"""Time-tag streams and the NTG1 file format.

A :class:`TagStream` holds photon detection events as two parallel arrays,
``channels`` (``uint8``) and ``timestamps`` (``uint64`` ticks, 1 tick = 1 ps
by default), kept in non-decreasing time order.  Channel numbers follow a
fixed convention:

====  ==========================
0     detector A
1     detector B
2     laser sync
3     emission truth (simulation only)
====  ==========================

The binary layout is little-endian throughout::

    magic         4 bytes   b"NTG1"
    version       u16
    tick_ps       u64
    channel_count u8
    record_count  u64
    records       record_count x (channel u8, timestamp u64)

The header does not carry the acquisition duration.  Readers take the last
timestamp as the duration unless one is supplied (the command line tools keep
it in a JSON sidecar).
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from .errors import (BadMagic, InvalidChannel, ResolutionMismatch,
                     TruncatedFile, UnsortedTimestamps)

CH_A = 0
CH_B = 1
CH_SYNC = 2
CH_EMISSION = 3

MAGIC = b"NTG1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHQBQ")
HEADER_SIZE = HEADER.size  # 23 bytes
RECORD_DTYPE = np.dtype([("channel", "<u1"), ("timestamp", "<u8")])
RECORD_SIZE = RECORD_DTYPE.itemsize  # 9 bytes, packed


def _first_decrease(timestamps: np.ndarray) -> int | None:
    if timestamps.size < 2:
        return None
    bad = np.flatnonzero(timestamps[1:] < timestamps[:-1])
    return int(bad[0]) + 1 if bad.size else None


@dataclass(frozen=True, eq=False)
class TagStream:
    """Time-ordered multi-channel detection events.

    Parameters
    ----------
    channels : array_like of uint8
        Channel number of each event.
    timestamps : array_like of uint64
        Event times in ticks, non-decreasing.
    tick_ps : int
        Tick length in picoseconds.
    channel_count : int
        Number of declared channels; every channel number must be smaller.
    duration : int, optional
        Acquisition length in ticks.  Defaults to the last timestamp.
    version : int
        Format version written to the header.
    """

    channels: np.ndarray
    timestamps: np.ndarray
    tick_ps: int = 1
    channel_count: int = 4
    duration: int | None = None
    version: int = FORMAT_VERSION
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        ts = np.ascontiguousarray(self.timestamps, dtype=np.uint64)
        if ch.shape != ts.shape or ch.ndim != 1:
            raise ValueError("channels and timestamps must be 1-d arrays of equal length")
        ch.flags.writeable = False
        ts.flags.writeable = False
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps", ts)
        if not 0 < self.channel_count < 256:
            raise ValueError("channel_count must be in 1..255")
        if self.tick_ps <= 0:
            raise ValueError("tick_ps must be positive")
        last = int(ts[-1]) if ts.size else 0
        duration = last if self.duration is None else int(self.duration)
        object.__setattr__(self, "duration", duration)
        if self.validate:
            bad = _first_decrease(ts)
            if bad is not None:
                raise UnsortedTimestamps(bad)
            if ch.size and int(ch.max()) >= self.channel_count:
                raise InvalidChannel(
                    f"channel {int(ch.max())} not below declared count {self.channel_count}")
            if duration < last:
                raise ValueError("duration is shorter than the last timestamp")

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (self.tick_ps == other.tick_ps
                and self.channel_count == other.channel_count
                and self.version == other.version
                and self.duration == other.duration
                and np.array_equal(self.channels, other.channels)
                and np.array_equal(self.timestamps, other.timestamps))

    @property
    def duration_s(self) -> float:
        """Acquisition length in seconds."""
        return self.duration * self.tick_ps * 1e-12

    def times(self, channel: int) -> np.ndarray:
        """Timestamps of one channel."""
        return self.timestamps[self.channels == channel]

    def count(self, channel: int) -> int:
        return int(np.count_nonzero(self.channels == channel))

    def select(self, channels: Iterable[int]) -> "TagStream":
        """Sub-stream restricted to the given channels."""
        mask = np.isin(self.channels, np.fromiter(channels, dtype=np.uint8))
        return TagStream(self.channels[mask], self.timestamps[mask], self.tick_ps,
                         self.channel_count, self.duration, self.version, validate=False)

    @classmethod
    def empty(cls, duration: int = 0, tick_ps: int = 1, channel_count: int = 4) -> "TagStream":
        return cls(np.empty(0, np.uint8), np.empty(0, np.uint64), tick_ps,
                   channel_count, duration)

    @classmethod
    def from_unsorted(cls, channels, timestamps, **kwargs) -> "TagStream":
        """Build a stream from events in arbitrary order (stable time sort)."""
        ts = np.asarray(timestamps, dtype=np.uint64)
        order = np.argsort(ts, kind="stable")
        return cls(np.asarray(channels, dtype=np.uint8)[order], ts[order], **kwargs)


# ----------------------------------------------------------------------------
# binary I/O

def encode_header(stream: TagStream) -> bytes:
    return HEADER.pack(MAGIC, stream.version, stream.tick_ps, stream.channel_count,
                       len(stream))


def write_stream(stream: TagStream, sink: str | os.PathLike | BinaryIO) -> int:
    """Write a stream in NTG1 format.

    Parameters
    ----------
    stream : TagStream
        Stream to serialize.
    sink : path or binary file object
        Destination.

    Returns
    -------
    int
        Number of bytes written.
    """
    records = np.empty(len(stream), dtype=RECORD_DTYPE)
    records["channel"] = stream.channels
    records["timestamp"] = stream.timestamps
    payload = encode_header(stream) + records.tobytes()
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            fh.write(payload)
    else:
        sink.write(payload)
    return len(payload)


def to_bytes(stream: TagStream) -> bytes:
    buf = io.BytesIO()
    write_stream(stream, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class Header:
    version: int
    tick_ps: int
    channel_count: int
    record_count: int


def _read_header(fh: BinaryIO) -> Header:
    raw = fh.read(HEADER_SIZE)
    if len(raw) >= 4 and raw[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < HEADER_SIZE:
        if len(raw) < 4:
            raise TruncatedFile(f"file holds {len(raw)} bytes, shorter than the magic")
        raise TruncatedFile(f"header holds {len(raw)} of {HEADER_SIZE} bytes")
    _, version, tick_ps, channel_count, record_count = HEADER.unpack(raw)
    return Header(version, tick_ps, channel_count, record_count)


def iter_records(source: str | os.PathLike | BinaryIO,
                 chunk_records: int = 1 << 20) -> Iterator[tuple[Header, np.ndarray, np.ndarray]]:
    """Iterate over an NTG1 file in bounded memory.

    Yields ``(header, channels, timestamps)`` chunks of at most
    ``chunk_records`` records.  Ordering and channel range are checked across
    chunk boundaries, and :class:`UnsortedTimestamps` reports the global
    record index.
    """
    own = isinstance(source, (str, os.PathLike))
    fh = open(source, "rb") if own else source
    try:
        header = _read_header(fh)
        remaining = header.record_count
        offset = 0
        previous = None
        while remaining > 0:
            n = min(remaining, chunk_records)
            raw = fh.read(n * RECORD_SIZE)
            if len(raw) < n * RECORD_SIZE:
                got = offset + len(raw) // RECORD_SIZE
                raise TruncatedFile(
                    f"header declares {header.record_count} records, file holds {got}")
            rec = np.frombuffer(raw, dtype=RECORD_DTYPE)
            ch = rec["channel"].copy()
            ts = rec["timestamp"].copy()
            if previous is not None and ts[0] < previous:
                raise UnsortedTimestamps(offset)
            bad = _first_decrease(ts)
            if bad is not None:
                raise UnsortedTimestamps(offset + bad)
            if int(ch.max()) >= header.channel_count:
                idx = int(np.flatnonzero(ch >= header.channel_count)[0])
                raise InvalidChannel(f"record {offset + idx} uses channel {int(ch[idx])}")
            previous = ts[-1]
            offset += n
            remaining -= n
            yield header, ch, ts
        if remaining == 0 and header.record_count == 0:
            yield header, np.empty(0, np.uint8), np.empty(0, np.uint64)
    finally:
        if own:
            fh.close()


def read_stream(source: str | os.PathLike | BinaryIO | bytes,
                duration: int | None = None) -> TagStream:
    """Read a whole NTG1 file.

    Parameters
    ----------
    source : path, binary file object or bytes
        Input data.
    duration : int, optional
        Acquisition length in ticks.  The format does not store it, so by
        default the last timestamp is used.

    Raises
    ------
    BadMagic, TruncatedFile, UnsortedTimestamps, InvalidChannel
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = io.BytesIO(bytes(source))
    header = None
    chans, times = [], []
    for header, ch, ts in iter_records(source):
        chans.append(ch)
        times.append(ts)
    ch = np.concatenate(chans) if chans else np.empty(0, np.uint8)
    ts = np.concatenate(times) if times else np.empty(0, np.uint64)
    return TagStream(ch, ts, header.tick_ps, header.channel_count, duration,
                     header.version, validate=False)


def write_csv(stream: TagStream, sink: str | os.PathLike | io.TextIOBase) -> None:
    """Export ``channel,timestamp_ps`` rows."""
    ts_ps = stream.timestamps * np.uint64(stream.tick_ps)
    own = isinstance(sink, (str, os.PathLike))
    fh = open(sink, "w") if own else sink
    try:
        fh.write("channel,timestamp_ps\n")
        for start in range(0, len(stream), 1 << 18):
            block = np.column_stack([stream.channels[start:start + (1 << 18)].astype(np.uint64),
                                     ts_ps[start:start + (1 << 18)]])
            np.savetxt(fh, block, fmt="%d", delimiter=",")
    finally:
        if own:
            fh.close()


# ----------------------------------------------------------------------------
# operations

def intensity_trace(stream: TagStream, bin_width_ms: float,
                    channels: Sequence[int] = (CH_A, CH_B)) -> tuple[np.ndarray, np.ndarray]:
    """Bin selected events into a count trace.

    Bins start at time zero and cover the acquisition, extended if needed so
    that every selected event falls in a bin.

    Parameters
    ----------
    stream : TagStream
    bin_width_ms : float
        Bin width in milliseconds.
    channels : sequence of int
        Channels to count.

    Returns
    -------
    bin_start : ndarray
        Bin start times in seconds.
    counts : ndarray of int64
        Events per bin; sums to the number of selected events.
    """
    if bin_width_ms <= 0:
        raise ValueError("bin_width_ms must be positive")
    width = int(round(bin_width_ms * 1e9 / stream.tick_ps))
    if width <= 0:
        raise ValueError("bin width is shorter than one tick")
    ts = stream.timestamps[np.isin(stream.channels, np.asarray(channels, np.uint8))]
    end = max(stream.duration, int(ts[-1]) + 1 if ts.size else 0)
    nbins = max(1, -(-end // width))
    counts = np.bincount((ts // np.uint64(width)).astype(np.int64), minlength=nbins)
    starts = np.arange(counts.size) * width * stream.tick_ps * 1e-12
    return starts, counts


def merge_streams(a: TagStream, b: TagStream) -> TagStream:
    """Time-ordered merge; events of ``a`` precede those of ``b`` at equal times."""
    if a.tick_ps != b.tick_ps:
        raise ResolutionMismatch(f"tick {a.tick_ps} ps vs {b.tick_ps} ps")
    ts = np.concatenate([a.timestamps, b.timestamps])
    ch = np.concatenate([a.channels, b.channels])
    order = np.argsort(ts, kind="stable")
    return TagStream(ch[order], ts[order], a.tick_ps,
                     max(a.channel_count, b.channel_count),
                     max(a.duration, b.duration), a.version, validate=False)
