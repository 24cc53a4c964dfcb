"""Shared domain types, event CSV serialization and RNG plumbing.

Events are stored per shot as a read-only ``(n, 3)`` float64 array of
``(x_mm, y_mm, t_ns)`` rows kept in canonical ``(t, x, y)`` order.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence, TypeVar

import numpy as np

CSV_HEADER = "shot_id,x_mm,y_mm,t_ns"

T = TypeVar("T")


class ValidationError(ValueError):
    """Raised when data violates a domain invariant."""


class DetectionEvent(NamedTuple):
    x: float
    y: float
    t: float


def canonical_order(xyt: np.ndarray) -> np.ndarray:
    """Indices sorting rows by (t, x, y)."""
    return np.lexsort((xyt[:, 1], xyt[:, 0], xyt[:, 2]))


@dataclass(frozen=True, eq=False)
class Shot:
    """All detections from one realization (one cloud, one exposure)."""

    shot_id: int
    xyt: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.xyt, dtype=np.float64, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"shot {self.shot_id}: non-finite event coordinate")
        if np.any(arr[:, 2] < 0):
            raise ValidationError(f"shot {self.shot_id}: negative event time")
        arr = arr[canonical_order(arr)]
        arr.flags.writeable = False
        object.__setattr__(self, "shot_id", int(self.shot_id))
        object.__setattr__(self, "xyt", arr)

    @classmethod
    def from_events(cls, shot_id: int, events: Iterable[DetectionEvent]) -> "Shot":
        return cls(shot_id, np.array([tuple(e) for e in events], dtype=np.float64).reshape(-1, 3))

    @property
    def events(self) -> list[DetectionEvent]:
        return [DetectionEvent(*map(float, row)) for row in self.xyt]

    def __len__(self) -> int:
        return self.xyt.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Shot):
            return NotImplemented
        return self.shot_id == other.shot_id and np.array_equal(self.xyt, other.xyt)

    def __hash__(self):
        return hash((self.shot_id, self.xyt.tobytes()))


@dataclass(frozen=True)
class Detector:
    """Micro-channel-plate style detector.

    ``psf_sigma`` is ``(sigma_x_mm, sigma_y_mm, sigma_t_ns)``.  ``dead_radius``
    is the minimum in-plane separation at which two hits in one shot are
    both resolved.
    """

    radius: float = 35.0
    psf_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    dead_radius: float = 0.0

    def __post_init__(self):
        sig = tuple(float(s) for s in self.psf_sigma)
        if len(sig) != 3:
            raise ValidationError("psf_sigma must be (sigma_x, sigma_y, sigma_t)")
        object.__setattr__(self, "psf_sigma", sig)
        vals = (self.radius, *sig, self.dead_radius)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValidationError(f"detector fields must be finite and >= 0, got {self}")

    def contains(self, xyt: np.ndarray) -> np.ndarray:
        return xyt[:, 0] ** 2 + xyt[:, 1] ** 2 <= self.radius**2


# Key prefixes separating independent uses of one RngSpec.
STREAM_REALIZATION = 0
STREAM_EVENTS = 1
STREAM_GEOMETRY = 2
STREAM_PSF = 3
STREAM_SAMPLING = 4


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream id; every random draw in the package derives from one.

    Generators are Philox (counter based) keyed by a SeedSequence whose spawn
    key is ``(stream_id, *key)``, so each shot or realization owns an
    independent stream regardless of the order in which they are generated.
    """

    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise ValidationError("stream_id must be >= 0")

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *map(int, key)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "RngSpec":
        return RngSpec(self.seed, stream_id)


def thread_count() -> int:
    """Worker cap from ``QCORR_THREADS`` (defaults to the CPU count)."""
    env = os.environ.get("QCORR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"QCORR_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[int], T], items: Sequence[int]) -> list[T]:
    """Order-preserving map over shot indices, threaded when allowed."""
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# --- event CSV ---------------------------------------------------------------


def _fmt(v: float) -> str:
    # shortest repr that round-trips a float64 exactly
    return repr(float(v))


def encode_shots(shots: Sequence[Shot]) -> bytes:
    """Serialize shots to the canonical event CSV."""
    seen: set[int] = set()
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for shot in shots:
        if shot.shot_id in seen:
            raise ValidationError(f"duplicate shot_id {shot.shot_id}")
        seen.add(shot.shot_id)
        xyt = shot.xyt
        if not np.all(np.isfinite(xyt)):
            raise ValidationError(f"shot {shot.shot_id}: non-finite coordinate")
        sid = str(shot.shot_id)
        out.writelines(f"{sid},{_fmt(x)},{_fmt(y)},{_fmt(t)}\n" for x, y, t in xyt.tolist())
    return out.getvalue().encode("utf-8")


def decode_shots(data: bytes | str, detector: Detector | None = None) -> list[Shot]:
    """Parse the event CSV back into shots ordered by shot_id.

    Raises ValidationError naming the 1-based line of the first bad row.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValidationError(f"line 1: expected header {CSV_HEADER!r}")
    rows: dict[int, list[tuple[float, float, float]]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise ValidationError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            sid = int(parts[0])
            x, y, t = (float(p) for p in parts[1:])
        except ValueError:
            raise ValidationError(f"line {lineno}: malformed row {line!r}") from None
        if not all(math.isfinite(v) for v in (x, y, t)):
            raise ValidationError(f"line {lineno}: non-finite coordinate")
        if t < 0:
            raise ValidationError(f"line {lineno}: negative time {t}")
        if detector is not None and x * x + y * y > detector.radius**2:
            raise ValidationError(f"line {lineno}: event outside detector radius {detector.radius} mm")
        rows.setdefault(sid, []).append((x, y, t))
    return [Shot(sid, np.array(rows[sid])) for sid in sorted(rows)]


def write_events(path, shots: Sequence[Shot]) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_shots(shots))


def read_events(path, detector: Detector | None = None) -> list[Shot]:
    with open(path, "rb") as fh:
        return decode_shots(fh.read(), detector)


def stack_shots(shots: Sequence[Shot]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate events; returns ``(xyt, offsets)`` with shot s at ``offsets[s]:offsets[s+1]``."""
    counts = np.array([len(s) for s in shots], dtype=np.int64)
    offsets = np.zeros(len(shots) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    if offsets[-1] == 0:
        return np.empty((0, 3)), offsets
    return np.ascontiguousarray(np.concatenate([s.xyt for s in shots])), offsets
