"""CSI trace container, the CSITRC binary format, and synthetic traces.

File layout (little-endian)::

    offset  size  field
    0       8     magic, ASCII "CSITRC" followed by a two-digit version
    8       4     t  (u32, timestamps)
    12      4     m  (u32, antennas)
    16      4     k  (u32, subcarriers)
    20      4     meta_len (u32)
    24      meta_len   UTF-8 JSON object of string -> string
    ...     8*t*m*k    (re, im) float32 pairs, timestamp-major, then antenna,
                       subcarrier fastest

Traces are held in memory as complex128; values are rounded to float32 only
when written.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .channel import TapChannel, gen_rayleigh_channel
from .rng import TAP_TRACE_DOMAIN, TRACE_DOMAIN, RandomStream

MAGIC_PREFIX = b"CSITRC"
VERSION = 1
MAGIC = MAGIC_PREFIX + b"%02d" % VERSION
HEADER = struct.Struct("<8s4I")
EXCLUDED_KEY = "excluded_antennas"


class TraceFormatError(ValueError):
    pass


class BadMagicError(TraceFormatError):
    pass


class VersionMismatchError(TraceFormatError):
    pass


class TruncatedTraceError(TraceFormatError):
    pass


class TrailingDataError(TraceFormatError):
    pass


class NonFiniteTraceError(TraceFormatError):
    pass


@dataclass
class CsiTrace:
    """Frequency-domain channel ``H[t, m, k]`` with string metadata."""

    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 3 or 0 in data.shape:
            raise ValueError(f"trace data must be a non-empty T x M x K array, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteTraceError("trace contains non-finite values")
        self.data = data
        self.meta = {str(k): str(v) for k, v in self.meta.items()}

    @property
    def t(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    @property
    def k(self) -> int:
        return self.data.shape[2]

    def scaled(self, factor: float) -> "CsiTrace":
        return CsiTrace(self.data * factor, dict(self.meta))

    def quantized(self) -> "CsiTrace":
        """Copy rounded to the float32 storage precision."""
        return CsiTrace(self.data.astype(np.complex64), dict(self.meta))

    @property
    def excluded_antennas(self) -> list[int]:
        raw = self.meta.get(EXCLUDED_KEY, "").strip()
        return [int(tok) for tok in raw.split(",") if tok.strip()]

    def without_excluded(self) -> "CsiTrace":
        """Drop antennas listed under the ``excluded_antennas`` meta key."""
        drop = set(self.excluded_antennas)
        if not drop:
            return self
        keep = [i for i in range(self.m) if i not in drop]
        meta = {k: v for k, v in self.meta.items() if k != EXCLUDED_KEY}
        return CsiTrace(self.data[:, keep, :], meta)


def write_trace(trace: CsiTrace, sink) -> int:
    """Serialize ``trace`` to a binary stream or path; returns bytes written."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            return write_trace(trace, fh)
    meta = json.dumps(trace.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if trace.meta == {}:
        meta = b""
    payload = np.empty(trace.data.shape + (2,), dtype="<f4")
    payload[..., 0] = trace.data.real
    payload[..., 1] = trace.data.imag
    if not np.all(np.isfinite(payload)):
        raise NonFiniteTraceError("trace values overflow float32 storage")
    n = 0
    n += sink.write(HEADER.pack(MAGIC, trace.t, trace.m, trace.k, len(meta)))
    n += sink.write(meta)
    n += sink.write(payload.tobytes())
    return n


def _read_exact(source, size, what):
    buf = source.read(size)
    if len(buf) != size:
        raise TruncatedTraceError(f"truncated {what}: expected {size} bytes, got {len(buf)}")
    return buf


def read_trace(source) -> CsiTrace:
    """Parse a CSITRC stream or path."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_trace(fh)
    head = source.read(HEADER.size)
    if len(head) >= 8 and not head[:8].startswith(MAGIC_PREFIX):
        raise BadMagicError(f"not a CSI trace (magic {head[:8]!r})")
    if len(head) < HEADER.size:
        if len(head) < 8:
            raise BadMagicError("stream too short for a CSI trace header")
        raise TruncatedTraceError("truncated header")
    magic, t, m, k, meta_len = HEADER.unpack(head)
    if magic != MAGIC:
        try:
            version = int(magic[6:].decode("ascii"))
        except ValueError:
            raise BadMagicError(f"not a CSI trace (magic {magic!r})") from None
        raise VersionMismatchError(f"unsupported trace version {version}, expected {VERSION}")
    if min(t, m, k) < 1:
        raise TraceFormatError(f"invalid dimensions t={t}, m={m}, k={k}")
    meta_raw = _read_exact(source, meta_len, "metadata")
    try:
        meta = json.loads(meta_raw.decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TraceFormatError(f"invalid metadata: {exc}") from None
    if not isinstance(meta, dict):
        raise TraceFormatError("metadata must be a JSON object")
    payload = _read_exact(source, 8 * t * m * k, "payload")
    if source.read(1):
        raise TrailingDataError("unexpected bytes after payload")
    pairs = np.frombuffer(payload, dtype="<f4").reshape(t, m, k, 2)
    if not np.all(np.isfinite(pairs)):
        raise NonFiniteTraceError("trace payload contains non-finite values")
    data = pairs[..., 0].astype(np.float64) + 1j * pairs[..., 1].astype(np.float64)
    return CsiTrace(data, meta)


def trace_to_bytes(trace: CsiTrace) -> bytes:
    buf = io.BytesIO()
    write_trace(trace, buf)
    return buf.getvalue()


def trace_from_bytes(raw: bytes) -> CsiTrace:
    return read_trace(io.BytesIO(raw))


def read_trace_csv(source, meta: dict | None = None) -> CsiTrace:
    """Import a trace from CSV with columns ``t,m,k,re,im`` (header required).

    Dimensions are inferred from the largest indices; every cell must appear.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_trace_csv(fh, meta)
    rows = list(csv.DictReader(source))
    if not rows:
        raise TraceFormatError("CSV trace is empty")
    try:
        idx = np.array([[int(r["t"]), int(r["m"]), int(r["k"])] for r in rows])
        vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"bad CSV trace row: {exc}") from None
    if idx.min() < 0:
        raise TraceFormatError("negative index in CSV trace")
    shape = tuple(int(s) + 1 for s in idx.max(axis=0))
    data = np.full(shape, np.nan + 0j)
    data[idx[:, 0], idx[:, 1], idx[:, 2]] = vals
    if np.isnan(data.real).any() or len(rows) != np.prod(shape):
        raise TraceFormatError("CSV trace has missing or duplicate cells")
    return CsiTrace(data, meta or {})


def synth_iid_trace(t: int, m: int, k: int, power: float = 1.0, seed: int = 0,
                    meta: dict | None = None) -> CsiTrace:
    """I.i.d. CN(0, power) entries; timestamp ``i`` is its own random item."""
    for name, v in (("t", t), ("m", m), ("k", k)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer")
    if not power > 0:
        raise ValueError("power must be positive")
    z = RandomStream(seed, TRACE_DOMAIN).complex_normal(0, t, m * k)
    return CsiTrace(z.reshape(t, m, k) * np.sqrt(power), dict(meta or {}))


def rayleigh_taps(m: int, n: int, power: float = 1.0) -> Callable[[RandomStream, int], TapChannel]:
    """Tap generator for :func:`synth_from_taps`: CN(0, power/n) per tap."""
    scale = np.sqrt(power)

    def gen(stream, index):
        return TapChannel(gen_rayleigh_channel(m, n, stream, index).taps * scale)

    return gen


def synth_from_taps(
    t: int,
    taps: Callable[[RandomStream, int], TapChannel] | Sequence[TapChannel],
    k: int,
    seed: int = 0,
    meta: dict | None = None,
) -> CsiTrace:
    """Frequency response of known tap-domain channels on ``k`` subcarriers.

    ``taps`` is either a sequence of ``t`` channels or a callable
    ``taps(stream, index)`` producing the channel for timestamp ``index``.
    ``H[t, m, j] = sum_n h_m[n] exp(-2j*pi*j*n/k)``, so the mean of ``|H|**2``
    over subcarriers equals the tap energy of each antenna.
    """
    if callable(taps):
        stream = RandomStream(seed, TAP_TRACE_DOMAIN)
        channels = [taps(stream, i) for i in range(t)]
    else:
        channels = list(taps)
        if len(channels) != t:
            raise ValueError(f"expected {t} channels, got {len(channels)}")
    stack = np.stack([c.taps for c in channels])
    if stack.shape[2] > k:
        raise ValueError(f"{stack.shape[2]} taps cannot be represented on {k} subcarriers")
    return CsiTrace(np.fft.fft(stack, n=k, axis=2), dict(meta or {}))
