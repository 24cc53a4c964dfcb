"""Named scenarios: parameter blocks, runners and acceptance checks.

Every runner receives validated parameters and an :class:`RngSpec`, and
returns ``(files, checks)`` where ``files`` maps output names to bytes and
``checks`` lists :class:`Check` results evaluated at the acceptance tolerances.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import atom_hom, correlator, fock_optics, speckle, two_particle
from .core import Detector, RngSpec, encode_shots

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# --- parameter blocks ----------------------------------------------------------------------


@dataclass(frozen=True)
class SpeckleParams:
    n_emitters: int = 150
    wavelength_m: float = 1.08e-6
    coherence_length_mm: float = 0.5
    detector_distance_m: float = 1.0
    coherence_time_ns: float = 100.0
    exposure_ns: float = 1.0
    detector_radius_mm: float = 2.0
    n_shots: int = 10_000
    mean_events: float = 50.0
    bin_width_mm: float = 0.05
    max_sep_mm: float = 3.0
    fit_max_mm: float = 0.2
    far_min_mm: float = 2.0
    siegert_realizations: int = 10_000
    siegert_points: int = 15
    siegert_max_lc: float = 3.0
    normalization: str = "mixed"
    map_pixels: int = 64


@dataclass(frozen=True)
class BosonParams:
    correlation_lengths_mm: tuple = (0.1, 0.1, 0.1)
    extent_mm: tuple = (2.0, 2.0, 0.01)
    mean_atoms: float = 100.0
    mass_ratios: tuple = (1.0, 0.75)
    n_shots: int = 10_000
    bin_width_mm: float = 0.02
    max_sep_mm: float = 0.6
    fit_max_mm: float = 0.4
    psf_sigma: tuple = (0.0, 0.0, 0.0)
    zero_box_mm: float = 0.1


@dataclass(frozen=True)
class FermionParams:
    correlation_lengths_mm: tuple = (0.2, 0.2, 0.2)
    extent_mm: tuple = (2.8, 2.8, 0.02)
    mean_atoms: float = 30.0
    n_shots: int = 10_000
    bin_width_mm: float = 0.05
    max_sep_mm: float = 0.8
    fit_max_mm: float = 0.6


@dataclass(frozen=True)
class FlatParams:
    extent_mm: tuple = (2.0, 2.0, 0.01)
    mean_atoms: float = 50.0
    n_shots: int = 10_000
    bin_width_mm: float = 0.1
    max_sep_mm: float = 1.0
    normalization: str = "mixed"


@dataclass(frozen=True)
class HomPhotonParams:
    packet_sigma_ns: float = 2.5e-5
    delays_sigma: tuple = (-10.0, -6.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 6.0, 10.0)
    n_shots: int = 100_000
    tmsv_nbar: float = 0.2


@dataclass(frozen=True)
class HomAtomParams:
    t0_ms: float = 0.0
    t1_ms: float = 0.25
    v_mm_per_ms: float = 0.03
    v_prime_mm_per_ms: float = -0.03
    packet_sigma_ns: float = 500.0
    t2_offsets_us: tuple = (-5.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 5.0)
    n_shots: int = 100_000
    source: str = "ideal_pair"
    tmsv_nbar: float = 0.1
    contamination_nbars: tuple = (0.05, 0.1, 0.2)
    contamination_shots: int = 100_000


@dataclass(frozen=True)
class BaselineParams:
    n_phase_samples: int = 1_000_000
    packet_sigma_ns: float = 1.0
    delays_sigma: tuple = (-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0)
    n_shots: int = 100_000


@dataclass(frozen=True)
class ChshParams:
    settings: tuple = fock_optics.OPTIMAL_SETTINGS
    n_shots: int = 100_000
    scan_points: int = 13


@dataclass(frozen=True)
class LhvParams:
    n_shots: int = 100_000


# --- runners ---------------------------------------------------------------------------------


def _curve_files(prefix: str, curve: correlator.CorrelationCurve) -> dict:
    return {f"{prefix}.csv": curve.to_csv().encode("utf-8")}


def run_hbt_speckle(p: SpeckleParams, rng: RngSpec):
    lam = p.wavelength_m
    alpha = lam / (p.coherence_length_mm * 1e-3)
    src = speckle.SpeckleSource.disk(
        rng,
        n_emitters=p.n_emitters,
        wavelength=lam,
        source_diameter=alpha * p.detector_distance_m,
        detector_distance=p.detector_distance_m,
        delta_omega=1.0 / (p.coherence_time_ns * 1e-9),
    )
    det = Detector(radius=p.detector_radius_mm)
    shots = speckle.sample_detection_events(src, det, p.n_shots, p.mean_events, speckle.Exposure(p.exposure_ns), rng)
    n_bins = int(round(p.max_sep_mm / p.bin_width_mm))
    curve = correlator.g2_from_events(shots, correlator.BinningSpec.linear("r", n_bins * p.bin_width_mm, n_bins), p.normalization)
    fit = correlator.fit_gaussian_peak(curve, max_sep=p.fit_max_mm, radial=True)
    far = curve.bin_lo >= p.far_min_mm
    g_far = float(np.mean(curve.g2[far]))
    se_far = float(np.sqrt(np.sum(curve.stderr[far] ** 2)) / far.sum())

    # field-level Siegert test on points along x
    lc = p.coherence_length_mm
    seps = np.linspace(0.0, p.siegert_max_lc * lc, p.siegert_points)
    pts = speckle.plane_points(np.c_[seps, np.zeros_like(seps)], src)
    rec = speckle.field_records(src, pts, 0.0, rng.child(rng.stream_id + 1), range(p.siegert_realizations))
    pairs = [(0, i) for i in range(len(seps))]
    g1 = correlator.g1_estimate(rec, pairs, seps)
    g2f = correlator.intensity_g2(rec, pairs, seps)
    sieg = correlator.siegert_check(g1, g2f)
    verdict = correlator.classicality_check(curve)

    imap = speckle.generate_intensity_map(src, speckle.GridSpec(p.map_pixels, lc / 8), 0.0, rng, 0)
    files = {
        "events.csv": encode_shots(shots),
        **_curve_files("g2", curve),
        "fit.json": _json({"g2_zero": fit.g2_zero, "g2_zero_err": fit.amplitude_err, "width_mm": fit.width, "g2_far": g_far, "g2_far_err": se_far}),
        "siegert.json": sieg.to_json().encode("utf-8") + b"\n",
        "classicality.json": verdict.to_json().encode("utf-8") + b"\n",
        "intensity_map.csv": imap.to_csv().encode("utf-8"),
        "intensity_map.json": imap.metadata_json().encode("utf-8") + b"\n",
    }
    checks = [
        Check("g2_zero", abs(fit.g2_zero - 2.0) <= 0.05, f"fitted g2(0) = {_fmt(fit.g2_zero)} (target 2.00 +/- 0.05)"),
        Check("g2_far", abs(g_far - 1.0) <= 0.02, f"g2(far) = {_fmt(g_far)} (target 1.00 +/- 0.02)"),
        Check("siegert", sieg.passed, f"failing bins: {sieg.failing_bins}"),
    ]
    return files, checks


def _boson_spec(p: BosonParams, mass_ratio: float) -> two_particle.CloudSpec:
    return two_particle.CloudSpec(tuple(p.correlation_lengths_mm), p.mean_atoms, "boson", mass_ratio, tuple(p.extent_mm))


def psf_oracle_g2_zero(lengths, sigma, box, extent, n_quad: int = 4001, n_box: int = 201) -> float:
    """Zero-box g2 of a uniform thermal cloud seen through a Gaussian PSF.

    Per axis, true pair separations ``u`` have the triangular density
    ``w(u) = (L - |u|)+`` of a uniform box and carry the exchange term
    ``E(u) = exp(-u^2 / l^2)``; the detector blurs each separation by
    N(0, 2 sigma^2).  Same-shot pairs then have density
    ``(w (1 + E)) * K`` and mixed pairs ``w * K``, so the box estimate is
    ``1 + prod_a (int_box (wE * K)) / (int_box (w * K))``, evaluated here by
    direct quadrature.  Axes with ``box = inf`` are ungated and reduce to
    ``int w E / int w``.
    """
    factor = 1.0
    for l_, s, b, L in zip(lengths, sigma, box, extent):
        u = np.linspace(-L, L, n_quad)
        du = u[1] - u[0]
        w = np.clip(L - np.abs(u), 0, None)
        e = np.exp(-(u**2) / l_**2)
        if not math.isfinite(b):
            factor *= float(np.sum(w * e) / np.sum(w))
            continue
        d = np.linspace(-b, b, n_box)
        if s > 0:
            kern = np.exp(-((d[:, None] - u[None, :]) ** 2) / (4 * s * s)) / math.sqrt(4 * math.pi * s * s)
            num = kern @ (w * e) * du
            den = kern @ w * du
        else:
            num = np.interp(d, u, w * e)
            den = np.interp(d, u, w)
        factor *= float(np.trapezoid(num, d) / np.trapezoid(den, d))
    return 1.0 + factor


def run_hbt_boson_cloud(p: BosonParams, rng: RngSpec):
    files, checks, widths = {}, [], []
    psf = tuple(float(s) for s in p.psf_sigma)
    for k, mr in enumerate(p.mass_ratios):
        spec = _boson_spec(p, mr)
        shots = two_particle.sample_boson_cloud(spec, p.n_shots, rng.child(rng.stream_id + k))
        tag = f"m{mr:g}"
        if any(psf):
            det = Detector(radius=1e6, psf_sigma=psf)
            shots = correlator.apply_detector_psf(shots, det, rng.child(rng.stream_id + k))
            box = correlator.BinningSpec("dx", (0.0, p.zero_box_mm), {"dy": p.zero_box_mm})
            zero = correlator.g2_from_events(shots, box)
            oracle = psf_oracle_g2_zero(spec.effective_lengths, psf, (p.zero_box_mm, p.zero_box_mm, math.inf), spec.extent)
            g0, se0 = float(zero.g2[0]), float(zero.stderr[0])
            files[f"psf_{tag}.json"] = _json({"g2_zero_box": g0, "stderr": se0, "oracle": oracle, "psf_sigma": list(psf)})
            checks.append(Check(f"psf_oracle_{tag}", abs(g0 - oracle) <= 0.01 * oracle, f"g2(0) = {_fmt(g0)} +/- {_fmt(se0)}, oracle {_fmt(oracle)} (1%)"))
            checks.append(Check(f"psf_contrast_{tag}", 1.0 < g0 < 2.0, f"g2(0) = {_fmt(g0)} strictly inside (1, 2)"))
        n_bins = int(round(p.max_sep_mm / p.bin_width_mm))
        curve = correlator.g2_from_events(shots, correlator.BinningSpec.linear("r", n_bins * p.bin_width_mm, n_bins))
        fit = correlator.fit_gaussian_peak(curve, max_sep=p.fit_max_mm, radial=True)
        widths.append((fit.width, fit.width_err))
        files[f"events_{tag}.csv"] = encode_shots(shots)
        files[f"g2_{tag}.csv"] = curve.to_csv().encode("utf-8")
        files[f"fit_{tag}.json"] = _json({"mass_ratio": mr, "g2_zero": fit.g2_zero, "width_mm": fit.width, "width_err": fit.width_err})
        files[f"classicality_{tag}.json"] = correlator.classicality_check(curve).to_json().encode("utf-8") + b"\n"
    if len(p.mass_ratios) == 2 and not any(psf):
        (w0, e0), (w1, e1) = widths
        ratio = w1 / w0
        expected = p.mass_ratios[0] / p.mass_ratios[1]
        files["width_ratio.json"] = _json({"ratio": ratio, "stderr": ratio * math.hypot(e0 / w0, e1 / w1), "expected": expected})
        checks.append(Check("width_ratio", abs(ratio / expected - 1) <= 0.05, f"ratio {_fmt(ratio)} vs {_fmt(expected)} (5%)"))
    return files, checks


def run_hbt_fermion_cloud(p: FermionParams, rng: RngSpec):
    spec = two_particle.CloudSpec(tuple(p.correlation_lengths_mm), p.mean_atoms, "fermion", 1.0, tuple(p.extent_mm))
    shots = two_particle.sample_fermion_cloud(spec, p.n_shots, rng)
    n_bins = int(round(p.max_sep_mm / p.bin_width_mm))
    curve = correlator.g2_from_events(shots, correlator.BinningSpec.linear("r", n_bins * p.bin_width_mm, n_bins))
    fit = correlator.fit_gaussian_peak(curve, max_sep=p.fit_max_mm, radial=True)
    verdict = correlator.classicality_check(curve)
    files = {
        "events.csv": encode_shots(shots),
        "g2.csv": curve.to_csv().encode("utf-8"),
        "fit.json": _json({"g2_zero": fit.g2_zero, "g2_zero_err": fit.amplitude_err, "width_mm": fit.width}),
        "classicality.json": verdict.to_json().encode("utf-8") + b"\n",
    }
    checks = [
        Check("g2_zero", fit.g2_zero <= 0.05, f"fitted g2(0) = {_fmt(fit.g2_zero)} (<= 0.05)"),
        Check("nonclassical", verdict.verdict == correlator.NONCLASSICAL, verdict.verdict),
    ]
    return files, checks


def run_hbt_bec_flat(p: FlatParams, rng: RngSpec):
    spec = two_particle.CloudSpec((1.0, 1.0, 1.0), p.mean_atoms, "coherent", 1.0, tuple(p.extent_mm))
    shots = two_particle.sample_coherent_cloud(spec, p.n_shots, rng)
    n_bins = int(round(p.max_sep_mm / p.bin_width_mm))
    curve = correlator.g2_from_events(shots, correlator.BinningSpec.linear("r", n_bins * p.bin_width_mm, n_bins), p.normalization)
    dev = float(np.max(np.abs(curve.g2 - 1)))
    files = {
        "events.csv": encode_shots(shots),
        "g2.csv": curve.to_csv().encode("utf-8"),
        "classicality.json": correlator.classicality_check(curve).to_json().encode("utf-8") + b"\n",
    }
    return files, [Check("flat", dev <= 0.02, f"max |g2 - 1| = {_fmt(dev)} (<= 0.02)")]


def run_hom_photon(p: HomPhotonParams, rng: RngSpec):
    sig = p.packet_sigma_ns
    delays = np.asarray(p.delays_sigma) * sig
    tm_src = fock_optics.PairSourceSpec(p.tmsv_nbar)
    tm = fock_optics.hom_dip_scan(delays, tm_src, p.n_shots, rng.child(rng.stream_id + 1), packet_sigma=sig)
    cl = fock_optics.hom_dip_scan(delays, "classical", p.n_shots, rng.child(rng.stream_id + 2), packet_sigma=sig)
    ideal = fock_optics.hom_dip_scan(delays, "ideal_pair", p.n_shots, rng.child(rng.stream_id), packet_sigma=sig)
    p0_exact = fock_optics.hom_coincidence(0.0, sig)
    far = np.abs(delays) >= fock_optics.FAR_SIGMAS * sig
    pf = np.mean([fock_optics.hom_coincidence(d, sig, tm_src) for d in delays[far]])
    v_oracle = (pf - fock_optics.hom_coincidence(0.0, sig, tm_src)) / pf
    i0 = int(np.flatnonzero(delays == 0)[0])
    files = {
        "dip_ideal.csv": ideal.to_csv().encode(),
        "dip_tmsv.csv": tm.to_csv().encode(),
        "dip_classical.csv": cl.to_csv().encode(),
        "witness.json": _json(
            {
                "ideal": json.loads(ideal.verdict_json()),
                "tmsv": {**json.loads(tm.verdict_json()), "oracle_visibility": v_oracle},
                "classical": json.loads(cl.verdict_json()),
                "p_joint_zero_exact": p0_exact,
            }
        ),
    }
    checks = [
        Check("exact_zero", p0_exact == 0.0, f"amplitude-level P(0) = {p0_exact!r}"),
        Check("sampled_zero", ideal.p_joint[i0] <= 3 * max(ideal.stderr[i0], 1.0 / p.n_shots), f"sampled P(0) = {_fmt(ideal.p_joint[i0])}"),
        Check("tmsv_visibility", 0.5 < tm.visibility < 1.0, f"V = {_fmt(tm.visibility)}"),
        Check("tmsv_oracle", abs(tm.visibility - v_oracle) <= 3 * tm.visibility_stderr, f"V = {_fmt(tm.visibility)} +/- {_fmt(tm.visibility_stderr)}, oracle {_fmt(v_oracle)}"),
        Check("tmsv_witness", tm.verdict == fock_optics.QUANTUM_WITNESS, tm.verdict),
        Check("classical_no_witness", cl.verdict != fock_optics.QUANTUM_WITNESS, cl.verdict),
    ]
    return files, checks


def run_hom_atom(p: HomAtomParams, rng: RngSpec):
    t2_center = 2 * p.t1_ms - p.t0_ms
    spec = atom_hom.TrajectorySpec(p.t0_ms, p.t1_ms, t2_center, p.v_mm_per_ms, p.v_prime_mm_per_ms)
    t2 = t2_center + np.asarray(p.t2_offsets_us) * 1e-3
    if p.source not in ("ideal_pair", "tmsv", "classical"):
        raise ConfigError(f"source must be ideal_pair, tmsv or classical, got {p.source!r}")
    source = fock_optics.PairSourceSpec(p.tmsv_nbar) if p.source == "tmsv" else p.source
    scan = atom_hom.t2_scan(spec, t2, p.packet_sigma_ns, source, p.n_shots, rng)
    direct = fock_optics.hom_dip_scan(scan.dip.delays, source, p.n_shots, rng, packet_sigma=p.packet_sigma_ns)
    same = bool(np.array_equal(direct.p_joint, scan.dip.p_joint))
    rows, checks = [], []
    for k, nb in enumerate(p.contamination_nbars):
        samples = fock_optics.tmsv_sample(fock_optics.PairSourceSpec(nb, p.contamination_shots), rng.child(rng.stream_id + 1 + k))
        est = fock_optics.infer_contamination(samples[:, 0])
        rows.append({"nbar": nb, "nbar_estimate": est.nbar, "local_g2": est.local_g2, "pair_fraction": est.pair_fraction})
        checks.append(Check(f"contamination_{nb:g}", abs(est.nbar / nb - 1) <= 0.10, f"recovered {_fmt(est.nbar)} for nbar {nb:g} (10%)"))
    i0 = int(np.flatnonzero(scan.dip.delays == 0)[0])
    files = {
        "t2_scan.csv": scan.to_csv().encode(),
        "witness.json": scan.dip.verdict_json().encode() + b"\n",
        "contamination.json": _json(rows),
    }
    checks = [
        Check("dip_zero", scan.dip.p_joint[i0] <= 3 * max(scan.dip.stderr[i0], 1.0 / p.n_shots), f"P(0) = {_fmt(scan.dip.p_joint[i0])}"),
        Check("scan_matches_direct", same, "t2 scan equals direct dip scan over the same delays"),
        *checks,
    ]
    return files, checks


def run_hom_classical_baseline(p: BaselineParams, rng: RngSpec):
    rates = fock_optics.classical_hom_baseline(p.n_phase_samples, rng)
    delays = np.asarray(p.delays_sigma) * p.packet_sigma_ns
    dip = fock_optics.hom_dip_scan(delays, "classical", p.n_shots, rng, packet_sigma=p.packet_sigma_ns)
    files = {
        "rates.json": _json(dataclasses.asdict(rates)),
        "dip_classical.csv": dip.to_csv().encode(),
        "witness.json": dip.verdict_json().encode() + b"\n",
    }
    checks = [
        Check("ratio", abs(rates.ratio - 0.5) <= 0.01, f"ratio {_fmt(rates.ratio)} (0.500 +/- 0.01)"),
        Check("joint", abs(rates.w2_joint - 0.125) <= 0.003, f"<w2> = {_fmt(rates.w2_joint)} (0.125 +/- 0.003)"),
        Check("no_witness", dip.verdict != fock_optics.QUANTUM_WITNESS, dip.verdict),
    ]
    return files, checks


def run_bell_chsh(p: ChshParams, rng: RngSpec):
    a, ap, b, bp = p.settings
    s_exact = fock_optics.chsh(a, ap, b, bp)
    sampled = fock_optics.chsh_sampled(a, ap, b, bp, p.n_shots, rng)
    phis = np.linspace(0, 2 * np.pi, p.scan_points, endpoint=False)
    target = 2 * math.sqrt(2)
    files = {
        "chsh.json": _json({"S_exact": s_exact, "S_sampled": sampled.s, "S_sampled_stderr": sampled.stderr, "settings": list(p.settings)}),
        "chsh_scan.csv": fock_optics.chsh_scan_csv(phis, phis).encode(),
    }
    checks = [
        Check("analytic", abs(s_exact - target) <= 1e-10, f"S = {s_exact!r}"),
        Check("sampled", abs(sampled.s - target) <= 3 * sampled.stderr, f"S = {_fmt(sampled.s)} +/- {_fmt(sampled.stderr)}"),
    ]
    return files, checks


def run_bell_lhv(p: LhvParams, rng: RngSpec):
    s_max, best = fock_optics.max_deterministic_chsh()
    strategies = {
        "best_deterministic": fock_optics.LHVStrategy.deterministic(best),
        "random_outcomes": fock_optics.LHVStrategy.random_outcomes(),
        "hom_mimic": fock_optics.LHVStrategy.hom_mimic(),
    }
    res = {name: fock_optics.lhv_simulation(st, p.n_shots, rng.child(rng.stream_id + k)) for k, (name, st) in enumerate(strategies.items())}
    mimic = fock_optics.hom_mimic_outcomes(p.n_shots, rng)
    files = {
        "lhv.json": _json(
            {
                "max_deterministic_S": s_max,
                "best_assignment": best.tolist(),
                "simulated": {k: {"S": v.s, "stderr": v.stderr} for k, v in res.items()},
                "hom_mimic_outcomes": {f"{a},{b}": pr for (a, b), pr in mimic.items()},
            }
        )
    }
    checks = [Check("enumeration", s_max == 2.0, f"max S = {s_max!r}")]
    checks += [Check(f"bound_{k}", v.s <= 2 + 3 * v.stderr, f"S = {_fmt(v.s)} +/- {_fmt(v.stderr)}") for k, v in res.items()]
    checks.append(Check("hom_mimic_no_coincidence", mimic[(1, 1)] == 0.0, "shared coin never splits the pair"))
    return files, checks


@dataclass(frozen=True)
class Scenario:
    params: type
    runner: Callable


SCENARIOS: dict[str, Scenario] = {
    "hbt-speckle": Scenario(SpeckleParams, run_hbt_speckle),
    "hbt-boson-cloud": Scenario(BosonParams, run_hbt_boson_cloud),
    "hbt-fermion-cloud": Scenario(FermionParams, run_hbt_fermion_cloud),
    "hbt-bec-flat": Scenario(FlatParams, run_hbt_bec_flat),
    "hom-photon": Scenario(HomPhotonParams, run_hom_photon),
    "hom-atom": Scenario(HomAtomParams, run_hom_atom),
    "hom-classical-baseline": Scenario(BaselineParams, run_hom_classical_baseline),
    "bell-chsh": Scenario(ChshParams, run_bell_chsh),
    "bell-lhv": Scenario(LhvParams, run_bell_lhv),
}


class ConfigError(ValueError):
    """Invalid scenario configuration (exit code 2)."""


def _coerce(name: str, default, value):
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"params.{name}: expected a list")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"params.{name}: expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"params.{name}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"params.{name}: expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"params.{name}: expected a string")
        return value
    return value


TOP_KEYS = {"schema_version", "scenario", "seed", "stream_id", "output_dir", "params"}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: object
    rng: RngSpec
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, compare=False)

    def canonical(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "seed": self.rng.seed,
            "stream_id": self.rng.stream_id,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self.params).items()},
        }


def parse_config(doc: dict, seed: int | None = None, output_dir: str | None = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    name = doc.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {sorted(SCENARIOS)}, got {name!r}")
    cls = SCENARIOS[name].params
    defaults = cls()
    raw_params = doc.get("params", {})
    if not isinstance(raw_params, dict):
        raise ConfigError("params must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    bad = set(raw_params) - names
    if bad:
        raise ConfigError(f"unknown params for {name}: {sorted(bad)}")
    kwargs = {k: _coerce(k, getattr(defaults, k), v) for k, v in raw_params.items()}
    params = cls(**kwargs)
    s = doc.get("seed", 0) if seed is None else seed
    sid = doc.get("stream_id", 0)
    for key, val in (("seed", s), ("stream_id", sid)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise ConfigError(f"{key} must be a non-negative integer")
    try:
        rng = RngSpec(s, sid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = output_dir or doc.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("output_dir must be a string")
    return ScenarioConfig(name, params, rng, out, doc)


def run(config: ScenarioConfig):
    return SCENARIOS[config.scenario].runner(config.params, config.rng)
