"""Correlation estimators: g1 from field records, g2 from detection events.

``g2_from_events`` counts same-shot pairs per separation bin and normalizes
them either by pairs taken between different shots (``"mixed"``, the
default) or by the product of the mean single-event densities on a pixel
grid (``"singles"``).  Errors are delete-one-shot jackknife estimates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import _pairs
from .core import STREAM_PSF, Detector, RngSpec, Shot, ValidationError, stack_shots

NORMALIZATIONS = ("mixed", "singles")
AXES = ("dx", "dy", "dt", "r")
CURVE_HEADER = "bin_lo,bin_hi,g2,stderr,pair_count"
MAX_PIXELS = 1 << 24


@dataclass(frozen=True)
class BinningSpec:
    """Separation bins along one axis plus optional gates ``|d_other| < w``.

    ``axis`` is one of ``dx``, ``dy``, ``dt`` (absolute differences) or ``r``
    (in-plane distance).  Bins are half open, ``[lo, hi)``.
    """

    axis: str
    edges: tuple[float, ...]
    gates: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValidationError(f"axis must be one of {AXES}, got {self.axis!r}")
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2 or not all(b > a for a, b in zip(edges, edges[1:])):
            raise ValidationError("bin edges must be strictly increasing with at least two entries")
        if edges[0] < 0 or not all(math.isfinite(e) for e in edges):
            raise ValidationError("bin edges must be finite and non-negative")
        gates = dict(self.gates or {})
        used = ("dx", "dy") if self.axis == "r" else (self.axis,)
        for ax, w in gates.items():
            if ax not in ("dx", "dy", "dt"):
                raise ValidationError(f"unknown gate axis {ax!r}")
            if ax in used:
                raise ValidationError(f"cannot gate {ax!r} while binning along {self.axis!r}")
            if not (w >= 0):
                raise ValidationError(f"gate width for {ax!r} must be >= 0")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "gates", {k: float(v) for k, v in sorted(gates.items())})

    @classmethod
    def linear(cls, axis: str, stop: float, n_bins: int, start: float = 0.0, **gates) -> "BinningSpec":
        return cls(axis, tuple(np.linspace(start, stop, n_bins + 1)), gates)

    @property
    def axis_code(self) -> int:
        return _pairs.AXIS_CODES[self.axis]

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def centers(self) -> np.ndarray:
        e = np.asarray(self.edges)
        return 0.5 * (e[1:] + e[:-1])


@dataclass(frozen=True)
class CorrelationCurve:
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    g2: np.ndarray
    stderr: np.ndarray
    pair_count: np.ndarray
    normalization: str = "mixed"
    flagged: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.bin_lo)
        for name in ("bin_hi", "g2", "stderr", "pair_count"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"{name} length mismatch")
        if self.flagged is None:
            object.__setattr__(self, "flagged", ~np.isfinite(np.asarray(self.g2, dtype=float)))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.bin_lo) + np.asarray(self.bin_hi))

    def zero_bin(self) -> int:
        hits = np.flatnonzero((np.asarray(self.bin_lo) <= 0.0) & (np.asarray(self.bin_hi) >= 0.0))
        if len(hits) == 0:
            raise ValidationError("curve has no zero-separation bin")
        return int(hits[0])

    def to_csv(self) -> str:
        lines = [CURVE_HEADER]
        for lo, hi, g, e, c in zip(self.bin_lo, self.bin_hi, self.g2, self.stderr, self.pair_count):
            lines.append(f"{float(lo)!r},{float(hi)!r},{float(g)!r},{float(e)!r},{int(c)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, normalization: str = "mixed") -> "CorrelationCurve":
        rows = [ln.split(",") for ln in text.strip().split("\n")[1:]]
        a = np.array([[float(v) for v in r] for r in rows]).reshape(-1, 5)
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4].astype(np.int64), normalization)


@dataclass(frozen=True)
class G1Curve:
    separations: np.ndarray
    g1: np.ndarray  # complex
    stderr: np.ndarray  # of |g1|

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.g1)


def _jackknife_se(loo: np.ndarray) -> np.ndarray:
    """Jackknife standard error from leave-one-out estimates (axis 0)."""
    n = loo.shape[0]
    mean = np.nanmean(loo, axis=0)
    return np.sqrt((n - 1) / n * np.nansum((loo - mean) ** 2, axis=0))


def _grouped_loo(n: int, groups: int) -> list[np.ndarray]:
    bounds = np.linspace(0, n, min(groups, n) + 1).astype(int)
    return [np.r_[0 : bounds[k], bounds[k + 1] : n] for k in range(len(bounds) - 1)]


# --- g1 from field records ---------------------------------------------------------


def g1_estimate(records: np.ndarray, pairs: Sequence[tuple[int, int]], separations=None, groups: int = 100) -> G1Curve:
    """Normalized first-order coherence for each point pair.

    ``records`` has shape ``(n_realizations, n_points)``; pair ``(i, j)``
    gives ``<E_i* E_j> / sqrt(<|E_i|^2><|E_j|^2>)``.
    """
    rec = np.asarray(records)
    if rec.ndim != 2 or rec.shape[0] < 2:
        raise ValidationError("need at least 2 realizations of field records")
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    inten = np.abs(rec) ** 2

    def est(rows):
        mi = inten[rows].mean(axis=0)
        if np.any(mi[pairs].ravel() <= 0):
            raise ValidationError("zero mean intensity at a sampling point: g1 undefined")
        cross = (np.conj(rec[rows][:, pairs[:, 0]]) * rec[rows][:, pairs[:, 1]]).mean(axis=0)
        return cross / np.sqrt(mi[pairs[:, 0]] * mi[pairs[:, 1]])

    g1 = est(slice(None))
    loo = np.array([np.abs(est(rows)) for rows in _grouped_loo(rec.shape[0], groups)])
    seps = np.arange(len(pairs), dtype=float) if separations is None else np.asarray(separations, dtype=float)
    return G1Curve(seps, g1, _jackknife_se(loo))


def intensity_g2(records: np.ndarray, pairs: Sequence[tuple[int, int]], separations=None, groups: int = 100) -> CorrelationCurve:
    """``<I_i I_j> / (<I_i><I_j>)`` from field records, one degenerate bin per pair."""
    rec = np.asarray(records)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    inten = np.abs(rec) ** 2

    def est(rows):
        x = inten[rows]
        m = x.mean(axis=0)
        return (x[:, pairs[:, 0]] * x[:, pairs[:, 1]]).mean(axis=0) / (m[pairs[:, 0]] * m[pairs[:, 1]])

    g2 = est(slice(None))
    loo = np.array([est(rows) for rows in _grouped_loo(rec.shape[0], groups)])
    seps = np.arange(len(pairs), dtype=float) if separations is None else np.asarray(separations, dtype=float)
    return CorrelationCurve(seps, seps.copy(), g2, _jackknife_se(loo), np.full(len(pairs), rec.shape[0], dtype=np.int64), "field")


# --- g2 from events -----------------------------------------------------------------


def _mixed_shifts(n_shots: int, max_shifts: int) -> int:
    return max(1, min(max_shifts, (n_shots - 1) // 2))


def g2_from_events(
    shots: Sequence[Shot],
    binning: BinningSpec,
    normalization: str = "mixed",
    *,
    max_shifts: int = 8,
    pixels_per_bin: int = 4,
) -> CorrelationCurve:
    """Pair-correlation function of same-shot event pairs.

    ``mixed``: each shot is paired with the next ``max_shifts`` shots
    (cyclically) to count uncorrelated pairs; g2 = 2 K sum(C) / sum(X).
    ``singles``: events are snapped to pixels and the denominator is the
    autocorrelation of the mean occupancy map (self pairs removed).
    """
    if normalization not in NORMALIZATIONS:
        raise ValidationError(f"normalization must be one of {NORMALIZATIONS}")
    if len(shots) == 0 or all(len(s) == 0 for s in shots):
        raise ValidationError("no events in any shot")
    xyt, offsets = stack_shots(shots)
    if normalization == "mixed":
        if len(shots) < 3:
            raise ValidationError("shot-mixed normalization needs at least 3 shots")
        return _g2_mixed(xyt, offsets, binning, _mixed_shifts(len(shots), max_shifts))
    return _g2_singles(xyt, offsets, binning, pixels_per_bin)


def _finish(binning, g2, loo, pairs, norm, flagged):
    se = _jackknife_se(loo)
    # a single contributing shot gives a degenerate jackknife; fall back to Poisson
    poisson = np.where(pairs > 0, g2 / np.sqrt(np.maximum(pairs, 1)), 0.0)
    se = np.where((pairs > 0) & ~(se > 0), poisson, se)
    se = np.where(flagged, np.nan, se)
    e = np.asarray(binning.edges)
    return CorrelationCurve(e[:-1].copy(), e[1:].copy(), g2, se, pairs, norm, flagged)


def _g2_mixed(xyt, offsets, binning, k_shifts):
    edges, axis, gates = np.asarray(binning.edges), binning.axis_code, binning.gates
    n_shots = len(offsets) - 1
    same = _pairs.sweep_same(xyt, offsets, edges, axis, gates)
    cross = np.stack([_pairs.sweep_cross_shift(xyt, offsets, edges, axis, gates, k) for k in range(1, k_shifts + 1)])
    c_tot = same.sum(axis=0)
    x_tot = cross.sum(axis=(0, 1))
    flagged = x_tot == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = np.where(flagged, np.nan, 2.0 * k_shifts * c_tot / x_tot)
        # shot s leaves the pairs (s, s+k) and (s-k, s)
        removed = cross.sum(axis=0) + sum(np.roll(cross[k - 1], k, axis=0) for k in range(1, k_shifts + 1))
        num = (c_tot - same) / (n_shots - 1)
        den = (x_tot - removed) / (k_shifts * (n_shots - 2))
        loo = np.where(den > 0, 2.0 * num / den, np.nan)
    return _finish(binning, g2, loo, c_tot, "mixed", flagged)


def _pixel_grid(xyt, binning, pixels_per_bin):
    """Pitch per axis and integer pixel indices; unused axes are collapsed."""
    widths = np.diff(binning.edges)
    base = float(widths.min()) / pixels_per_bin
    used = {"r": (0, 1), "dx": (0,), "dy": (1,), "dt": (2,)}[binning.axis]
    pitch = np.ones(3)
    idx = np.zeros((len(xyt), 3), dtype=np.int64)
    for ax in range(3):
        name = ("dx", "dy", "dt")[ax]
        if ax in used:
            p = base
        elif name in binning.gates:
            p = max(binning.gates[name], 1e-300) / pixels_per_bin
        else:
            continue
        pitch[ax] = p
        if len(xyt):
            # absolute grid so the pixelization does not depend on which shots are present
            cell = np.floor(xyt[:, ax] / p).astype(np.int64)
            idx[:, ax] = cell - cell.min()
    return pitch, idx


def _g2_singles(xyt, offsets, binning, pixels_per_bin):
    edges, axis, gates = np.asarray(binning.edges), binning.axis_code, binning.gates
    n_shots = len(offsets) - 1
    nb = binning.n_bins
    pitch, idx = _pixel_grid(xyt, binning, pixels_per_bin)
    shape = tuple(int(idx[:, a].max()) + 1 for a in range(3))
    fshape = tuple(2 * s for s in shape)
    if np.prod(fshape, dtype=float) > MAX_PIXELS:
        raise ValidationError("pixel grid too large for product-of-singles normalization; use mixed")
    shot_of = np.repeat(np.arange(n_shots), np.diff(offsets))
    counts = np.zeros(shape)
    np.add.at(counts, tuple(idx.T), 1.0)

    # lag kernel per bin on the zero-padded grid (lags -s+1..s-1 wrap cleanly)
    lag_axes = [np.fft.fftfreq(n, 1.0 / n).astype(np.int64) for n in fshape]
    lags = np.stack(np.meshgrid(*lag_axes, indexing="ij"), axis=-1).reshape(-1, 3)
    lag_bin = _pairs.lag_bins(lags, pitch, edges, axis, gates).reshape(fshape)
    f_zero = _pairs.lag_bins(np.zeros((1, 3), np.int64), pitch, edges, axis, gates)[0]

    fc = np.fft.rfftn(counts, fshape, axes=(0, 1, 2))
    auto = np.fft.irfftn(fc * np.conj(fc), fshape, axes=(0, 1, 2))
    auto_bins = np.zeros(nb)
    valid = lag_bin >= 0
    np.add.at(auto_bins, lag_bin[valid], auto[valid])
    auto_bins = np.round(auto_bins)  # integer-valued sums of count products

    n_total = len(xyt)
    same = _pairs.lag_same(idx, offsets, pitch, edges, axis, gates)
    ordered = 2 * same
    self_bin = np.zeros(nb)
    if f_zero >= 0:
        self_bin[f_zero] = 1.0
    den = (auto_bins - n_total * self_bin) / n_shots**2
    num = ordered.sum(axis=0) / n_shots
    flagged = ~(den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = np.where(flagged, np.nan, num / den)

    # B[s, b] = sum_{j in s} (N conv f_b)(pixel_j)
    b_term = np.zeros((n_shots, nb))
    for b in range(nb):
        kern = (lag_bin == b).astype(float)
        if not kern.any():
            continue
        conv = np.fft.irfftn(fc * np.fft.rfftn(kern), fshape, axes=(0, 1, 2))
        vals = np.round(conv[tuple(idx.T)])
        np.add.at(b_term[:, b], shot_of, vals)
    n_s = np.diff(offsets).astype(float)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        den_loo = (auto_bins - 2 * b_term + ordered + n_s * self_bin - (n_total - n_s) * self_bin) / (n_shots - 1) ** 2
        num_loo = (ordered.sum(axis=0) - ordered) / (n_shots - 1)
        loo = np.where(den_loo > 0, num_loo / den_loo, np.nan)
    return _finish(binning, g2, loo, same.sum(axis=0), "singles", flagged)


def shuffle_shots(shots: Sequence[Shot], rng: RngSpec) -> list[Shot]:
    """Redistribute all events at random across shots, keeping shot sizes."""
    xyt, offsets = stack_shots(shots)
    perm = rng.generator(STREAM_PSF, 1).permutation(len(xyt))
    mixed = xyt[perm]
    return [Shot(s.shot_id, mixed[offsets[i] : offsets[i + 1]]) for i, s in enumerate(shots)]


# --- detector model -------------------------------------------------------------------


def apply_detector_psf(shots: Sequence[Shot], detector: Detector, rng: RngSpec) -> list[Shot]:
    """Blur, clip and saturate events as the detector would.

    Each event is displaced by an independent Gaussian per axis, events
    leaving the plate (or landing at negative time) are dropped, and within
    a shot any event closer than ``dead_radius`` in the plane to an earlier
    kept event is lost.
    """
    sig = np.asarray(detector.psf_sigma)
    out = []
    for shot in shots:
        xyt = shot.xyt
        if np.any(sig > 0) and len(xyt):
            g = rng.generator(STREAM_PSF, 0, shot.shot_id)
            xyt = xyt + g.standard_normal(xyt.shape) * sig
        keep = detector.contains(xyt) & (xyt[:, 2] >= 0)
        xyt = xyt[keep]
        if detector.dead_radius > 0 and len(xyt) > 1:
            xyt = _dead_zone(Shot(shot.shot_id, xyt).xyt, detector.dead_radius)
        out.append(Shot(shot.shot_id, xyt))
    return out


def _dead_zone(xyt: np.ndarray, radius: float) -> np.ndarray:
    kept: list[int] = []
    r2 = radius * radius
    for i in range(len(xyt)):
        if kept:
            k = xyt[kept]
            d2 = (k[:, 0] - xyt[i, 0]) ** 2 + (k[:, 1] - xyt[i, 1]) ** 2
            if np.any(d2 < r2):
                continue
        kept.append(i)
    return xyt[kept]


# --- checks ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SiegertReport:
    passed: bool
    tolerance: float
    failing_bins: list
    deviation_sigma: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "passed": self.passed,
                "tolerance_stderr": self.tolerance,
                "failing_bins": self.failing_bins,
                "deviation_sigma": [round(float(v), 6) for v in self.deviation_sigma],
            },
            indent=2,
            sort_keys=True,
        )


def siegert_check(g1: G1Curve, g2: CorrelationCurve, tolerance: float = 3.0) -> SiegertReport:
    """Pointwise test of g2 = 1 + |g1|^2 within ``tolerance`` combined standard errors."""
    if len(g1.separations) != len(g2.g2) or not np.allclose(g1.separations, g2.centers, rtol=0, atol=0):
        raise ValidationError("g1 and g2 curves are not on identical bins")
    rhs = 1.0 + np.abs(g1.g1) ** 2
    rhs_se = 2.0 * np.abs(g1.g1) * np.asarray(g1.stderr)
    comb = np.sqrt(np.asarray(g2.stderr) ** 2 + rhs_se**2)
    dev = np.abs(np.asarray(g2.g2) - rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        sig = np.where(comb > 0, dev / comb, np.where(dev == 0, 0.0, np.inf))
    failing = [int(i) for i in np.flatnonzero(~(sig <= tolerance))]
    return SiegertReport(not failing, float(tolerance), failing, list(sig))


CLASSICAL = "CLASSICAL-COMPATIBLE"
NONCLASSICAL = "NONCLASSICAL"


@dataclass(frozen=True)
class ClassicalityVerdict:
    verdict: str
    g2_zero: float
    stderr: float
    threshold: float

    def to_json(self) -> str:
        return json.dumps(
            {"verdict": self.verdict, "g2_zero": self.g2_zero, "stderr": self.stderr, "threshold": self.threshold},
            indent=2,
            sort_keys=True,
        )


def classicality_check(curve: CorrelationCurve, n_sigma: float = 3.0) -> ClassicalityVerdict:
    """Cauchy-Schwarz test on the zero-separation bin.

    A classical density obeys <n^2> >= <n>^2, i.e. g2(0) >= 1; a value more
    than ``n_sigma`` standard errors below 1 has no classical explanation.
    """
    k = curve.zero_bin()
    g, se = float(curve.g2[k]), float(curve.stderr[k])
    if not math.isfinite(g):
        raise ValidationError("zero bin is flagged (no normalization pairs)")
    threshold = 1.0 - n_sigma * se
    return ClassicalityVerdict(NONCLASSICAL if g < threshold else CLASSICAL, g, se, threshold)


# --- fitting ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PeakFit:
    amplitude: float
    width: float
    amplitude_err: float
    width_err: float

    @property
    def g2_zero(self) -> float:
        return 1.0 + self.amplitude


def fit_gaussian_peak(curve: CorrelationCurve, max_sep: float | None = None, radial: bool = False, sub: int = 16) -> PeakFit:
    """Fit ``1 + A exp(-d^2 / w^2)`` averaged over each bin.

    With ``radial=True`` the in-bin average is weighted by ``d`` (the pair
    density of an in-plane radius).  A negative ``A`` describes a dip.
    """
    lo, hi = np.asarray(curve.bin_lo), np.asarray(curve.bin_hi)
    sel = np.isfinite(curve.g2) & (np.asarray(curve.stderr) > 0)
    if max_sep is not None:
        sel &= hi <= max_sep + 1e-12
    lo, hi = lo[sel], hi[sel]
    y, s = np.asarray(curve.g2)[sel], np.asarray(curve.stderr)[sel]
    u = (np.arange(sub) + 0.5) / sub
    d = lo[:, None] + (hi - lo)[:, None] * u[None, :]
    wts = d if radial else np.ones_like(d)
    wts = wts / wts.sum(axis=1, keepdims=True)

    def model(_, a, w):
        return 1.0 + a * (wts * np.exp(-(d**2) / w**2)).sum(axis=1)

    a0 = float(y[0] - 1.0)
    w0 = float(hi[-1]) / 2
    popt, pcov = optimize.curve_fit(model, None, y, p0=(a0, w0), sigma=s, absolute_sigma=True, maxfev=20000)
    err = np.sqrt(np.diag(pcov))
    return PeakFit(float(popt[0]), abs(float(popt[1])), float(err[0]), float(err[1]))
