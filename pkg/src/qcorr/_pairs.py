"""Pair-counting kernels.

Two independent enumerations of the same pair histogram:

* ``bruteforce_*``: numpy, every pair ``i < j`` of a shot, O(n^2).
* ``sweep_*``: numba, events sorted along a primary coordinate and only
  pairs within the largest bin edge along it are visited.

Both evaluate the separation with identical float operations so their
integer histograms agree exactly.  Axis codes: 0 = |dx|, 1 = |dy|, 2 = |dt|,
3 = in-plane radius sqrt(dx^2 + dy^2).
"""

from __future__ import annotations

import math

import numba
import numpy as np

AXIS_CODES = {"dx": 0, "dy": 1, "dt": 2, "r": 3}
# primary sort coordinate for each axis code
PRIMARY = (0, 1, 2, 0)
_MARGIN = 1e-12
PRIMARY_NB = np.array(PRIMARY, dtype=np.int64)
_MARGIN_NB = _MARGIN


def _gate_array(gates) -> np.ndarray:
    g = np.full(3, np.inf)
    for ax, w in (gates or {}).items():
        g[AXIS_CODES[ax]] = w
    return g


# --- numpy brute force ---------------------------------------------------------


def _separations_np(a: np.ndarray, b: np.ndarray, axis: int, gates: np.ndarray):
    dx = b[:, 0] - a[:, 0]
    dy = b[:, 1] - a[:, 1]
    dt = b[:, 2] - a[:, 2]
    if axis == 3:
        s = np.sqrt(dx * dx + dy * dy)
    else:
        s = np.abs((dx, dy, dt)[axis])
    ok = (np.abs(dx) < gates[0]) & (np.abs(dy) < gates[1]) & (np.abs(dt) < gates[2])
    return s[ok]


def _hist_np(s: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, s, side="right") - 1
    idx = idx[(idx >= 0) & (idx < len(edges) - 1)]
    return np.bincount(idx, minlength=len(edges) - 1).astype(np.int64)


def bruteforce_same(xyt, offsets, edges, axis, gates, chunk=2_000_000):
    """Per-shot histogram of all unordered same-shot pairs (numpy oracle)."""
    edges = np.asarray(edges, dtype=np.float64)
    g = _gate_array(gates)
    n_shots = len(offsets) - 1
    out = np.zeros((n_shots, len(edges) - 1), dtype=np.int64)
    for s in range(n_shots):
        ev = xyt[offsets[s] : offsets[s + 1]]
        n = len(ev)
        if n < 2:
            continue
        rows = max(1, chunk // n)
        for start in range(0, n - 1, rows):
            stop = min(n - 1, start + rows)
            ii, jj = [], []
            for i in range(start, stop):
                ii.append(np.full(n - i - 1, i))
                jj.append(np.arange(i + 1, n))
            ii = np.concatenate(ii)
            jj = np.concatenate(jj)
            out[s] += _hist_np(_separations_np(ev[ii], ev[jj], axis, g), edges)
    return out


def bruteforce_cross(xyt_a, xyt_b, edges, axis, gates):
    """Histogram of all pairs (i in a, j in b)."""
    edges = np.asarray(edges, dtype=np.float64)
    g = _gate_array(gates)
    if len(xyt_a) == 0 or len(xyt_b) == 0:
        return np.zeros(len(edges) - 1, dtype=np.int64)
    ii, jj = np.meshgrid(np.arange(len(xyt_a)), np.arange(len(xyt_b)), indexing="ij")
    return _hist_np(_separations_np(xyt_a[ii.ravel()], xyt_b[jj.ravel()], axis, g), edges)


# --- numba sweep ---------------------------------------------------------------


@numba.njit(cache=True, nogil=True, inline="always")
def _bin_of(dx, dy, dt, axis, g0, g1, g2, edges, e0, e_n, scale, nb):
    """Bin of one pair, or -1.  Scalars are hoisted by the caller (see ``_binner``)."""
    if not (abs(dx) < g0 and abs(dy) < g1 and abs(dt) < g2):
        return -1
    if axis == 3:
        s = math.sqrt(dx * dx + dy * dy)
    elif axis == 0:
        s = abs(dx)
    elif axis == 1:
        s = abs(dy)
    else:
        s = abs(dt)
    # half-open bins: largest k with edges[k] <= s
    if not (s >= e0) or s >= e_n:
        return -1
    # guess assuming uniform edges, then confirm with exact comparisons
    k = min(max(int((s - e0) * scale), 0), nb - 1)
    if edges[k] <= s and s < edges[k + 1]:
        return k
    lo = 0
    hi = nb
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if edges[mid] <= s:
            lo = mid
        else:
            hi = mid
    return lo


@numba.njit(cache=True, nogil=True, inline="always")
def _binner(edges, gates):
    nb = edges.shape[0] - 1
    return gates[0], gates[1], gates[2], edges[0], edges[nb], nb / (edges[nb] - edges[0]), nb


@numba.njit(cache=True, nogil=True)
def _sweep_one(ev, edges, axis, gates, out_row):
    n = ev.shape[0]
    if n < 2:
        return
    g0, g1, g2, e0, e_n, sc, nb = _binner(edges, gates)
    p = PRIMARY_NB[axis]
    sv = np.ascontiguousarray(ev[np.argsort(ev[:, p], kind="mergesort")])
    bound = min(e_n * (1.0 + _MARGIN_NB), gates[p])
    for i in range(n - 1):
        xi, yi, ti = sv[i, 0], sv[i, 1], sv[i, 2]
        pi = sv[i, p]
        for j in range(i + 1, n):
            if sv[j, p] - pi > bound:
                break
            k = _bin_of(sv[j, 0] - xi, sv[j, 1] - yi, sv[j, 2] - ti, axis, g0, g1, g2, edges, e0, e_n, sc, nb)
            if k >= 0:
                out_row[k] += 1


@numba.njit(cache=True, nogil=True)
def _sweep_cross_one(a, b, edges, axis, gates, out_row):
    na = a.shape[0]
    nbv = b.shape[0]
    if na == 0 or nbv == 0:
        return
    g0, g1, g2, e0, e_n, sc, nb = _binner(edges, gates)
    p = PRIMARY_NB[axis]
    sa = np.ascontiguousarray(a[np.argsort(a[:, p], kind="mergesort")])
    sb = np.ascontiguousarray(b[np.argsort(b[:, p], kind="mergesort")])
    bound = min(e_n * (1.0 + _MARGIN_NB), gates[p])
    lo = 0
    for i in range(na):
        xi, yi, ti = sa[i, 0], sa[i, 1], sa[i, 2]
        pa = sa[i, p]
        while lo < nbv and pa - sb[lo, p] > bound:
            lo += 1
        for j in range(lo, nbv):
            if sb[j, p] - pa > bound:
                break
            k = _bin_of(sb[j, 0] - xi, sb[j, 1] - yi, sb[j, 2] - ti, axis, g0, g1, g2, edges, e0, e_n, sc, nb)
            if k >= 0:
                out_row[k] += 1


@numba.njit(cache=True, nogil=True)
def _sweep_same_all(xyt, offsets, edges, axis, gates):
    n_shots = offsets.shape[0] - 1
    out = np.zeros((n_shots, edges.shape[0] - 1), dtype=np.int64)
    for s in range(n_shots):
        _sweep_one(xyt[offsets[s] : offsets[s + 1]], edges, axis, gates, out[s])
    return out


@numba.njit(cache=True, nogil=True)
def _sweep_cross_shift(xyt, offsets, edges, axis, gates, shift):
    n_shots = offsets.shape[0] - 1
    out = np.zeros((n_shots, edges.shape[0] - 1), dtype=np.int64)
    for s in range(n_shots):
        t = (s + shift) % n_shots
        _sweep_cross_one(xyt[offsets[s] : offsets[s + 1]], xyt[offsets[t] : offsets[t + 1]], edges, axis, gates, out[s])
    return out


def sweep_same(xyt, offsets, edges, axis, gates):
    """Per-shot histogram of unordered same-shot pairs (sorted sweep)."""
    return _sweep_same_all(
        np.ascontiguousarray(xyt, dtype=np.float64),
        np.asarray(offsets, dtype=np.int64),
        np.asarray(edges, dtype=np.float64),
        int(axis),
        _gate_array(gates),
    )


def sweep_cross(xyt_a, xyt_b, edges, axis, gates):
    out = np.zeros(len(edges) - 1, dtype=np.int64)
    _sweep_cross_one(
        np.ascontiguousarray(xyt_a, dtype=np.float64).reshape(-1, 3),
        np.ascontiguousarray(xyt_b, dtype=np.float64).reshape(-1, 3),
        np.asarray(edges, dtype=np.float64),
        int(axis),
        _gate_array(gates),
        out,
    )
    return out


def sweep_cross_shift(xyt, offsets, edges, axis, gates, shift):
    """Row s holds pairs between shot s and shot (s + shift) mod S."""
    return _sweep_cross_shift(
        np.ascontiguousarray(xyt, dtype=np.float64),
        np.asarray(offsets, dtype=np.int64),
        np.asarray(edges, dtype=np.float64),
        int(axis),
        _gate_array(gates),
        int(shift),
    )


# --- integer pixel lags (product-of-singles mode) --------------------------------


@numba.njit(cache=True, nogil=True)
def _lag_same_all(idx, offsets, pitch, edges, axis, gates):
    n_shots = offsets.shape[0] - 1
    out = np.zeros((n_shots, edges.shape[0] - 1), dtype=np.int64)
    g0, g1, g2, e0, e_n, sc, nb = _binner(edges, gates)
    for s in range(n_shots):
        lo = offsets[s]
        hi = offsets[s + 1]
        for i in range(lo, hi - 1):
            for j in range(i + 1, hi):
                k = _bin_of(
                    (idx[j, 0] - idx[i, 0]) * pitch[0],
                    (idx[j, 1] - idx[i, 1]) * pitch[1],
                    (idx[j, 2] - idx[i, 2]) * pitch[2],
                    axis,
                    g0,
                    g1,
                    g2,
                    edges,
                    e0,
                    e_n,
                    sc,
                    nb,
                )
                if k >= 0:
                    out[s, k] += 1
    return out


def lag_same(idx, offsets, pitch, edges, axis, gates):
    """Per-shot unordered pair histogram with separations taken from integer pixel lags."""
    return _lag_same_all(
        np.ascontiguousarray(idx, dtype=np.int64),
        np.asarray(offsets, dtype=np.int64),
        np.asarray(pitch, dtype=np.float64),
        np.asarray(edges, dtype=np.float64),
        int(axis),
        _gate_array(gates),
    )


@numba.njit(cache=True, nogil=True)
def _lag_bins(lags, pitch, edges, axis, gates):
    out = np.empty(lags.shape[0], dtype=np.int64)
    g0, g1, g2, e0, e_n, sc, nb = _binner(edges, gates)
    for i in range(lags.shape[0]):
        out[i] = _bin_of(lags[i, 0] * pitch[0], lags[i, 1] * pitch[1], lags[i, 2] * pitch[2], axis, g0, g1, g2, edges, e0, e_n, sc, nb)
    return out


def lag_bins(lags, pitch, edges, axis, gates):
    """Bin index (or -1) of each integer lag vector, same arithmetic as ``lag_same``."""
    return _lag_bins(
        np.ascontiguousarray(lags, dtype=np.int64),
        np.asarray(pitch, dtype=np.float64),
        np.asarray(edges, dtype=np.float64),
        int(axis),
        _gate_array(gates),
    )
