"""Incoherent (speckle) source built from many independent random-phase emitters.

Geometry is in metres and seconds; detection events use the detector-plane
convention of the rest of the package (mm relative to the plate centre, ns).

Field phases are split into a large per-emitter constant, reduced mod 2 pi
once per realization, plus a small geometric and detuning correction, so the
phase of every term stays accurate to ~1e-9 rad even though ``k |M_j P|`` is
of order 1e7.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import (
    STREAM_EVENTS,
    STREAM_GEOMETRY,
    STREAM_REALIZATION,
    Detector,
    RngSpec,
    Shot,
    ValidationError,
    parallel_map,
)

C_LIGHT = 299_792_458.0
MIN_EMITTERS = 100
ENVELOPE_FACTOR = 1.2
PRESCAN_DIVISIONS = 6
MM = 1e-3
NS = 1e-9


class EnvelopeError(RuntimeError):
    """The thinning envelope was exceeded; the pre-scan underestimated the peak intensity."""


def coherence_length(wavelength: float, alpha: float) -> float:
    """Transverse coherence length ``lambda / alpha`` (same unit as the wavelength)."""
    if not wavelength > 0:
        raise ValidationError("wavelength must be > 0")
    if alpha == 0:
        raise ValidationError("alpha = 0 is a plane wave: coherence length is infinite")
    if not alpha > 0:
        raise ValidationError("angular diameter must be > 0")
    return wavelength / alpha


@dataclass(frozen=True, eq=False)
class SpeckleSource:
    """Emitters ``M_j`` with amplitudes ``a_j`` and angular frequencies ``omega_j``.

    The detection plane is ``z = detector_distance`` and its centre is
    ``(0, 0, detector_distance)``.  Phases are not stored; each realization
    draws them afresh.
    """

    positions: np.ndarray
    amplitudes: np.ndarray
    frequencies: np.ndarray
    wavelength: float
    angular_diameter: float
    detector_distance: float
    center_frequency: float
    gaussian_regime: bool = True

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        amp = np.ascontiguousarray(self.amplitudes, dtype=np.float64).ravel()
        freq = np.ascontiguousarray(self.frequencies, dtype=np.float64).ravel()
        n = len(pos)
        if len(amp) != n or len(freq) != n:
            raise ValidationError("positions, amplitudes and frequencies must have equal length")
        if self.gaussian_regime and n < MIN_EMITTERS:
            raise ValidationError(f"n_emitters must be >= {MIN_EMITTERS} for the Gaussian regime, got {n}")
        if n == 0 or np.any(amp < 0) or not np.all(np.isfinite(pos)) or not np.all(np.isfinite(freq)):
            raise ValidationError("invalid emitter table")
        if not (self.wavelength > 0 and self.detector_distance > 0):
            raise ValidationError("wavelength and detector_distance must be > 0")
        for name, arr in (("positions", pos), ("amplitudes", amp), ("frequencies", freq)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def disk(
        cls,
        rng: RngSpec,
        n_emitters: int = 1000,
        wavelength: float = 1.08e-6,
        source_diameter: float = 2e-3,
        detector_distance: float = 1.0,
        delta_omega: float = 1e7,
    ) -> "SpeckleSource":
        """Emitters uniform on a disk in the ``z = 0`` plane.

        ``delta_omega`` is the rms of the Gaussian frequency band; the
        coherence time is ``1 / delta_omega``.
        """
        if n_emitters < MIN_EMITTERS:
            raise ValidationError(f"n_emitters must be >= {MIN_EMITTERS}, got {n_emitters}")
        g = rng.generator(STREAM_GEOMETRY)
        a = source_diameter / 2
        r = a * np.sqrt(g.uniform(size=n_emitters))
        th = g.uniform(0, 2 * np.pi, n_emitters)
        pos = np.c_[r * np.cos(th), r * np.sin(th), np.zeros(n_emitters)]
        w0 = 2 * np.pi * C_LIGHT / wavelength
        freq = w0 + delta_omega * g.standard_normal(n_emitters)
        amp = np.full(n_emitters, 1 / math.sqrt(n_emitters))
        return cls(pos, amp, freq, wavelength, source_diameter / detector_distance, detector_distance, w0)

    @classmethod
    def single_emitter(cls, position=(0.0, 0.0, 0.0), wavelength: float = 1.08e-6, detector_distance: float = 1.0, amplitude: float = 1.0):
        """A lone monochromatic emitter: fully coherent, constant intensity modulus."""
        w0 = 2 * np.pi * C_LIGHT / wavelength
        return cls([position], [amplitude], [w0], wavelength, 0.0, detector_distance, w0, gaussian_regime=False)

    @property
    def n_emitters(self) -> int:
        return len(self.amplitudes)

    @property
    def coherence_length(self) -> float:
        return coherence_length(self.wavelength, self.angular_diameter)

    @property
    def mean_intensity(self) -> float:
        return float(np.sum(self.amplitudes**2))

    @property
    def detector_center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.detector_distance])

    def wavenumbers(self) -> np.ndarray:
        return self.frequencies / C_LIGHT

    def center_distances(self) -> np.ndarray:
        return np.linalg.norm(self.positions - self.detector_center, axis=1)

    def phases(self, rng: RngSpec, realization_id: int) -> np.ndarray:
        return rng.generator(STREAM_REALIZATION, realization_id).uniform(0.0, 2 * np.pi, self.n_emitters)

    def reduced_phases(self, rng: RngSpec, realization_id: int) -> np.ndarray:
        """``(phi_j + k_j d0_j) mod 2 pi`` with ``d0_j`` the distance to the plate centre."""
        return np.mod(self.phases(rng, realization_id) + self.wavenumbers() * self.center_distances(), 2 * np.pi)


# fastmath without reassociation: lets LLVM vectorize the loops below while
# keeping the Cody-Waite reduction and the emitter sum in program order
_FLAGS = {"nnan", "ninf", "nsz", "contract"}
_TWO_OVER_PI = 2.0 / math.pi
_PIO2_1 = 1.5707963267341256e00
_PIO2_2 = 6.0771005065061922e-11
_PIO2_3 = 2.0222662487959506e-21


@numba.njit(cache=True, nogil=True, fastmath=_FLAGS)
def _sincos_into(x, s_out, c_out):
    """Branch-free sin/cos (|error| < 2e-16 for |x| < 1e5); vectorizes without SVML."""
    for i in range(x.shape[0]):
        v = x[i]
        n = math.floor(v * _TWO_OVER_PI + 0.5)
        r = ((v - n * _PIO2_1) - n * _PIO2_2) - n * _PIO2_3
        z = r * r
        s = r + r * z * (
            -1 / 6 + z * (1 / 120 + z * (-1 / 5040 + z * (1 / 362880 + z * (-1 / 39916800 + z * (1 / 6227020800 + z * (-1 / 1307674368000 + z / 355687428096000))))))
        )
        c = 1.0 + z * (
            -0.5 + z * (1 / 24 + z * (-1 / 720 + z * (1 / 40320 + z * (-1 / 3628800 + z * (1 / 479001600 + z * (-1 / 87178291200 + z / 20922789888000))))))
        )
        q = np.int64(n)
        odd = (q & 1) == 1
        sb = c if odd else s
        cb = s if odd else c
        s_out[i] = sb * (1.0 - 2.0 * ((q >> 1) & 1))
        c_out[i] = cb * (1.0 - 2.0 * (((q + 1) >> 1) & 1))


@numba.njit(cache=True, nogil=True, fastmath=_FLAGS)
def _field_kernel(points, times, em, amp, k, dw, theta, p0, w0):
    """Field at each point.  ``em`` rows: m_x, m_y, m_z, q_x, q_y, q_z, d0 with q = P0 - 2M."""
    m = points.shape[0]
    n = amp.shape[0]
    out = np.empty(m, dtype=np.complex128)
    ph = np.empty(n)
    sn = np.empty(n)
    cs = np.empty(n)
    mx, my, mz = em[0], em[1], em[2]
    qx, qy, qz = em[3], em[4], em[5]
    d0 = em[6]
    bad = -1
    for i in range(m):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        ux, uy, uz = px - p0[0], py - p0[1], pz - p0[2]
        t = times[i]
        for j in range(n):
            dx = px - mx[j]
            dy = py - my[j]
            dz = pz - mz[j]
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            if d == 0.0:
                bad = j
                ph[j] = 0.0
                continue
            # d^2 - d0^2 = (P - P0) . (P + P0 - 2M), free of cancellation
            num = ux * (px + qx[j]) + uy * (py + qy[j]) + uz * (pz + qz[j])
            ph[j] = theta[j] + k[j] * (num / (d + d0[j])) - dw[j] * t
        if bad >= 0:
            return out, bad
        _sincos_into(ph, sn, cs)
        re = 0.0
        im = 0.0
        for j in range(n):
            re += amp[j] * cs[j]
            im += amp[j] * sn[j]
        # global carrier exp(-i w0 t)
        c = -w0 * t
        cr = math.cos(c)
        ci = math.sin(c)
        out[i] = complex(re * cr - im * ci, re * ci + im * cr)
    return out, -1


def _emitter_table(source: "SpeckleSource") -> np.ndarray:
    q = source.detector_center - 2 * source.positions
    return np.ascontiguousarray(np.vstack([source.positions.T, q.T, source.center_distances()]))


def _field(source: SpeckleSource, points_m: np.ndarray, times_s: np.ndarray, theta: np.ndarray) -> np.ndarray:
    pts = np.ascontiguousarray(points_m, dtype=np.float64).reshape(-1, 3)
    ts = np.ascontiguousarray(np.broadcast_to(np.asarray(times_s, dtype=np.float64), (len(pts),)))
    out, bad = _field_kernel(
        pts,
        ts,
        _emitter_table(source),
        source.amplitudes,
        source.wavenumbers(),
        source.frequencies - source.center_frequency,
        np.ascontiguousarray(theta, dtype=np.float64),
        source.detector_center,
        source.center_frequency,
    )
    if bad >= 0:
        raise ValidationError(f"sampling point coincides with emitter {bad}: singular geometry")
    return out


def field_at(source: SpeckleSource, points_m, times_s, rng: RngSpec, realization_id: int) -> np.ndarray:
    """Vectorized ``sample_field`` over ``(M, 3)`` points and ``M`` (or scalar) times."""
    return _field(source, points_m, times_s, source.reduced_phases(rng, realization_id))


def sample_field(source: SpeckleSource, point, time: float, rng: RngSpec, realization_id: int) -> complex:
    """Complex field ``sum_j a_j exp[i(phi_j + k_j |M_j P| - omega_j t)]`` at one point."""
    return complex(field_at(source, np.asarray(point, dtype=float).reshape(1, 3), time, rng, realization_id)[0])


def plane_points(xy_mm: np.ndarray, source: SpeckleSource) -> np.ndarray:
    """Detector-plane coordinates (mm) to 3D points (m)."""
    xy = np.asarray(xy_mm, dtype=np.float64).reshape(-1, 2)
    return np.c_[xy * MM, np.full(len(xy), source.detector_distance)]


def _propagators(source: SpeckleSource, points_m: np.ndarray, times_s: np.ndarray) -> np.ndarray:
    """Matrix ``A[j, m]`` with ``E_m = carrier_m * sum_j a_j e^{i theta_j} A[j, m]``."""
    p0 = source.detector_center
    pos = source.positions
    u = points_m - p0
    d = np.linalg.norm(points_m[None, :, :] - pos[:, None, :], axis=2)
    if np.any(d == 0):
        raise ValidationError("sampling point coincides with an emitter: singular geometry")
    d0 = source.center_distances()[:, None]
    num = np.einsum("mc,jmc->jm", u, points_m[None, :, :] + p0 - 2 * pos[:, None, :])
    ph = source.wavenumbers()[:, None] * (num / (d + d0)) - (source.frequencies - source.center_frequency)[:, None] * times_s[None, :]
    return np.exp(1j * ph)


def field_records(source: SpeckleSource, points_m, times_s, rng: RngSpec, realization_ids) -> np.ndarray:
    """Fields at fixed sampling points for many realizations, shape ``(R, M)``."""
    pts = np.asarray(points_m, dtype=np.float64).reshape(-1, 3)
    ts = np.broadcast_to(np.asarray(times_s, dtype=np.float64), (len(pts),)).copy()
    prop = _propagators(source, pts, ts)
    carrier = np.exp(-1j * source.center_frequency * ts)
    coeff = np.array([source.amplitudes * np.exp(1j * source.reduced_phases(rng, r)) for r in realization_ids])
    return (coeff @ prop) * carrier


# --- intensity maps ------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Square grid in the detector plane, ``n x n`` pixels of ``pitch_mm`` centred on the plate."""

    n: int
    pitch_mm: float

    def __post_init__(self):
        if self.n < 1 or not self.pitch_mm > 0:
            raise ValidationError("grid needs n >= 1 and pitch > 0")

    def coords(self) -> np.ndarray:
        return (np.arange(self.n) - (self.n - 1) / 2) * self.pitch_mm


@dataclass(frozen=True)
class IntensityMap:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return "\n".join(",".join(repr(float(v)) for v in row) for row in self.values) + "\n"

    def metadata_json(self) -> str:
        return json.dumps(self.metadata, indent=2, sort_keys=True)


def generate_intensity_map(source: SpeckleSource, grid: GridSpec, time_ns: float, rng: RngSpec, realization_id: int) -> IntensityMap:
    """``|E|^2`` on a detector-plane grid; rows are y, columns are x."""
    c = grid.coords()
    xx, yy = np.meshgrid(c, c)
    pts = plane_points(np.c_[xx.ravel(), yy.ravel()], source)
    inten = np.abs(field_at(source, pts, time_ns * NS, rng, realization_id)) ** 2
    meta = {
        "grid_pitch_mm": grid.pitch_mm,
        "grid_n": grid.n,
        "wavelength_m": source.wavelength,
        "alpha_rad": source.angular_diameter,
        "realization_id": int(realization_id),
        "time_ns": float(time_ns),
    }
    if source.angular_diameter > 0:
        lc_mm = source.coherence_length / MM
        meta["coherence_length_mm"] = lc_mm
        meta["pitch_too_coarse"] = bool(grid.pitch_mm >= lc_mm / 4)
    return IntensityMap(inten.reshape(grid.n, grid.n), meta)


# --- detection events ------------------------------------------------------------------


@dataclass(frozen=True)
class Exposure:
    """Detection window ``[0, duration_ns)`` per shot."""

    duration_ns: float = 1.0

    def __post_init__(self):
        if not self.duration_ns > 0:
            raise ValidationError("exposure duration must be > 0")


def _prescan_grid(source: SpeckleSource, detector: Detector, exposure: Exposure):
    lc_mm = source.coherence_length / MM if source.angular_diameter > 0 else detector.radius
    step = min(lc_mm, 2 * detector.radius) / PRESCAN_DIVISIONS
    n = int(math.ceil(detector.radius / step)) + 1
    c = np.arange(-n, n + 1) * step
    xx, yy = np.meshgrid(c, c)
    keep = xx**2 + yy**2 <= (detector.radius + step) ** 2
    xy = np.c_[xx[keep], yy[keep]]
    dw = np.abs(source.frequencies - source.center_frequency).max()
    tau_ns = (1.0 / dw / NS) if dw > 0 else math.inf
    nt = max(2, int(math.ceil(exposure.duration_ns / (tau_ns / PRESCAN_DIVISIONS))) + 1) if math.isfinite(tau_ns) else 2
    ts = np.linspace(0.0, exposure.duration_ns, nt)
    pts = np.repeat(plane_points(xy, source), nt, axis=0)
    tt = np.tile(ts, len(xy)) * NS
    return pts, tt


def sample_detection_events(
    source: SpeckleSource,
    detector: Detector,
    n_shots: int,
    mean_events_per_shot: float,
    exposure: Exposure,
    rng: RngSpec,
    batch: int = 256,
) -> list[Shot]:
    """Inhomogeneous Poisson events with rate proportional to ``|E(x, y, t)|^2``.

    Shot ``s`` uses field realization ``s``.  Candidates are drawn
    homogeneously under an envelope of 1.2x the pre-scanned peak intensity and
    kept with probability ``I / envelope``.
    """
    if not mean_events_per_shot > 0:
        raise ValidationError("mean_events_per_shot must be > 0")
    if n_shots < 1:
        raise ValidationError("n_shots must be >= 1")
    pts, tt = _prescan_grid(source, detector, exposure)
    prop = _propagators(source, pts, tt)
    area = math.pi * detector.radius**2
    scale = mean_events_per_shot / (source.mean_intensity * area * exposure.duration_ns)

    def run_batch(b0: int) -> list[Shot]:
        ids = range(b0, min(n_shots, b0 + batch))
        thetas = [source.reduced_phases(rng, s) for s in ids]
        coeff = np.array([source.amplitudes * np.exp(1j * th) for th in thetas])
        peaks = (np.abs(coeff @ prop) ** 2).max(axis=1)
        return [_thin_shot(source, detector, exposure, rng, s, th, ENVELOPE_FACTOR * pk, scale, area) for s, th, pk in zip(ids, thetas, peaks)]

    batches = parallel_map(run_batch, list(range(0, n_shots, batch)))
    return [shot for b in batches for shot in b]


def _thin_shot(source, detector, exposure, rng, shot_id, theta, envelope, scale, area) -> Shot:
    g = rng.generator(STREAM_EVENTS, shot_id)
    n_cand = g.poisson(envelope * scale * area * exposure.duration_ns)
    r = detector.radius * np.sqrt(g.uniform(size=n_cand))
    phi = g.uniform(0, 2 * np.pi, n_cand)
    t = g.uniform(0, exposure.duration_ns, n_cand)
    u = g.uniform(size=n_cand)
    xy = np.c_[r * np.cos(phi), r * np.sin(phi)]
    if n_cand == 0:
        return Shot(shot_id, np.empty((0, 3)))
    inten = np.abs(_field(source, plane_points(xy, source), t * NS, theta)) ** 2
    if np.any(inten > envelope):
        raise EnvelopeError(f"shot {shot_id}: intensity {inten.max():.4g} exceeds envelope {envelope:.4g}")
    keep = u * envelope < inten
    return Shot(shot_id, np.c_[xy[keep], t[keep]])
