import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from pair_oracle import cross_counts, same_shot_counts
from qcorr.core import Detector, RngSpec, Shot, ValidationError
from qcorr.correlator import (
    CLASSICAL,
    NONCLASSICAL,
    BinningSpec,
    CorrelationCurve,
    apply_detector_psf,
    classicality_check,
    fit_gaussian_peak,
    g1_estimate,
    g2_from_events,
    intensity_g2,
    shuffle_shots,
    siegert_check,
)

from conftest import random_shots


def _mixed_oracle(shots, edges, axis, gates, K):
    S = len(shots)
    C = np.array([same_shot_counts(s.xyt, edges, axis, gates) for s in shots])
    X = np.array([[cross_counts(shots[s].xyt, shots[(s + k) % S].xyt, edges, axis, gates) for s in range(S)] for k in range(1, K + 1)])
    g2 = 2 * K * C.sum(0) / X.sum((0, 1))
    loo = []
    for r in range(S):
        keep = [s for s in range(S) if s != r]
        num = C[keep].sum(0) / (S - 1)
        den = sum(X[k - 1, s] for k in range(1, K + 1) for s in range(S) if s != r and (s + k) % S != r) / (K * (S - 2))
        loo.append(2 * num / den)
    loo = np.array(loo)
    se = np.sqrt((S - 1) / S * ((loo - loo.mean(0)) ** 2).sum(0))
    return g2, se


def test_mixed_estimator_matches_pair_oracle():
    shots = random_shots(7, 12, 25)
    edges = np.array([0.0, 0.1, 0.25, 0.5])
    curve = g2_from_events(shots, BinningSpec("r", edges, {"dt": 0.6}), max_shifts=3)
    g2, se = _mixed_oracle(shots, edges, "r", {"dt": 0.6}, 3)
    np.testing.assert_allclose(curve.g2, g2, rtol=1e-12)
    np.testing.assert_allclose(curve.stderr, se, rtol=1e-9)


def _singles_plain(shots, edges, axis, pitch):
    """Product-of-singles g2 from pixel-snapped events by explicit pair counting."""
    snapped = [Shot(s.shot_id, np.floor(s.xyt / pitch) * pitch) for s in shots]
    S = len(snapped)
    pooled = np.concatenate([s.xyt for s in snapped])
    den = 2 * same_shot_counts(pooled, edges, axis, {}) / S**2
    num = 2 * sum(same_shot_counts(s.xyt, edges, axis, {}) for s in snapped) / S
    return num / den


def test_singles_estimator_and_exact_jackknife():
    # dyadic bin widths make the pixel arithmetic exact
    shots = random_shots(3, 8, 20, box=(4.0, 4.0, 1.0))
    edges = np.array([0.0, 0.5, 1.0, 1.5])
    spec = BinningSpec("dx", edges)
    curve = g2_from_events(shots, spec, "singles", pixels_per_bin=4)
    pitch = np.array([0.125, 1.0, 1.0])
    # the estimator collapses unused axes; mimic by zeroing them
    flat = [Shot(s.shot_id, np.c_[s.xyt[:, 0], np.zeros((len(s), 2))]) for s in shots]
    np.testing.assert_allclose(curve.g2, _singles_plain(flat, edges, "dx", pitch), rtol=1e-12)
    loo = np.array([_singles_plain(flat[:r] + flat[r + 1 :], edges, "dx", pitch) for r in range(len(flat))])
    se = np.sqrt((len(flat) - 1) / len(flat) * ((loo - loo.mean(0)) ** 2).sum(0))
    np.testing.assert_allclose(curve.stderr, se, rtol=1e-9)


@pytest.mark.parametrize("norm", ["mixed", "singles"])
def test_poisson_events_are_uncorrelated(norm):
    shots = random_shots(21, 400, 30, box=(2.0, 2.0, 1.0))
    curve = g2_from_events(shots, BinningSpec.linear("r", 0.8, 8), norm)
    z = (curve.g2 - 1) / curve.stderr
    assert np.all(np.abs(z) < 4), z


def _clustered(seed, n_shots):
    g = np.random.default_rng(seed)
    shots = []
    for s in range(n_shots):
        centers = g.uniform(0, 2, (10, 3))
        pts = np.concatenate([centers, centers + g.normal(0, 0.02, centers.shape)])
        pts[:, 2] = np.abs(pts[:, 2])
        shots.append(Shot(s, pts))
    return shots


def test_shuffle_removes_same_shot_correlation():
    shots = _clustered(0, 300)
    spec = BinningSpec.linear("r", 0.4, 4)
    assert g2_from_events(shots, spec).g2[0] > 5
    flat = g2_from_events(shuffle_shots(shots, RngSpec(1)), spec)
    assert abs(flat.g2[0] - 1) < 4 * flat.stderr[0]
    assert [len(s) for s in shuffle_shots(shots, RngSpec(1))] == [len(s) for s in shots]


def test_binning_validation():
    with pytest.raises(ValidationError):
        BinningSpec("dz", (0, 1))
    with pytest.raises(ValidationError):
        BinningSpec("dx", (0, 1, 1))
    with pytest.raises(ValidationError):
        BinningSpec("r", (0, 1), {"dx": 0.1})
    with pytest.raises(ValidationError):
        g2_from_events([Shot(0, [[0, 0, 0]])] * 2, BinningSpec("dx", (0, 1)))
    with pytest.raises(ValidationError):
        g2_from_events([Shot(0, np.zeros((0, 3)))], BinningSpec("dx", (0, 1)))


def test_curve_csv_round_trip():
    c = CorrelationCurve(np.array([0.0, 0.1]), np.array([0.1, 0.2]), np.array([1 / 3, np.nan]), np.array([0.01, np.nan]), np.array([5, 0]))
    back = CorrelationCurve.from_csv(c.to_csv())
    assert back.to_csv() == c.to_csv()
    assert back.flagged.tolist() == [False, True]


def test_psf_blur_statistics_and_determinism():
    shots = [Shot(i, [[0.0, 0.0, 10.0]]) for i in range(4000)]
    det = Detector(radius=35.0, psf_sigma=(0.2, 0.1, 0.5))
    out = apply_detector_psf(shots, det, RngSpec(2))
    xyt = np.concatenate([s.xyt for s in out])
    np.testing.assert_allclose(xyt.std(0), [0.2, 0.1, 0.5], rtol=0.05)
    assert out == apply_detector_psf(shots, det, RngSpec(2))


def test_detector_clips_and_saturates():
    det = Detector(radius=1.0, dead_radius=0.1)
    shot = Shot(0, [[0.0, 0, 0], [0.05, 0, 1], [0.5, 0, 2], [2.0, 0, 3]])
    (out,) = apply_detector_psf([shot], det, RngSpec(0))
    assert out.xyt[:, 0].tolist() == [0.0, 0.5]


def _gaussian_records(n, rho, seed):
    """Complex Gaussian fields at 3 points with coherence (1, rho, rho^2)."""
    g = np.random.default_rng(seed)
    cov = np.array([[1, rho, rho**2], [rho, 1, rho], [rho**2, rho, 1]])
    L = np.linalg.cholesky(cov)
    z = (g.standard_normal((n, 3)) + 1j * g.standard_normal((n, 3))) / math.sqrt(2)
    return z @ L.T


def test_g1_estimate_recovers_known_coherence():
    rec = _gaussian_records(40_000, 0.6, 0)
    g1 = g1_estimate(rec, [(0, 0), (0, 1), (0, 2)])
    np.testing.assert_allclose(g1.modulus, [1, 0.6, 0.36], atol=5 * g1.stderr.max() + 1e-12)


def test_siegert_holds_for_gaussian_and_fails_for_phase_only_field():
    pairs = [(0, 0), (0, 1), (0, 2)]
    rec = _gaussian_records(40_000, 0.6, 1)
    assert siegert_check(g1_estimate(rec, pairs), intensity_g2(rec, pairs)).passed
    ph = np.exp(1j * np.angle(rec))  # unit modulus: g2 = 1 everywhere
    assert not siegert_check(g1_estimate(ph, pairs), intensity_g2(ph, pairs)).passed


def _curve(g0, se):
    return CorrelationCurve(np.array([0.0, 0.1]), np.array([0.1, 0.2]), np.array([g0, 1.0]), np.array([se, se]), np.array([100, 100]))


def test_classicality_verdict():
    assert classicality_check(_curve(0.5, 0.1)).verdict == NONCLASSICAL
    assert classicality_check(_curve(0.8, 0.1)).verdict == CLASSICAL
    assert classicality_check(_curve(2.0, 0.1)).verdict == CLASSICAL


@given(a=st.floats(0.05, 1.5) | st.floats(-0.99, -0.05), w=st.floats(0.15, 0.6), radial=st.booleans())
def test_peak_fit_recovers_bin_averaged_gaussian(a, w, radial):
    edges = np.linspace(0, 1.2, 13)

    def avg(lo, hi):
        wt = (lambda d: d) if radial else (lambda d: 1.0)
        num = integrate.quad(lambda d: wt(d) * (1 + a * math.exp(-d * d / w / w)), lo, hi)[0]
        return num / integrate.quad(wt, lo, hi)[0]

    y = np.array([avg(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])
    c = CorrelationCurve(edges[:-1], edges[1:], y, np.full(12, 1e-3), np.full(12, 10))
    fit = fit_gaussian_peak(c, radial=radial, sub=64)
    assert fit.amplitude == pytest.approx(a, abs=2e-3)
    assert fit.width == pytest.approx(w, rel=2e-3)
