"""Small Fock-space optics: beam splitters, HOM dips, pair sources and a four-mode Bell test.

States are immutable maps from occupation tuples to complex amplitudes over
a fixed, ordered list of mode labels.  Splitters use real coefficients with
the minus sign on one reflection::

    a+ -> t a+ + r b+,      b+ -> t b+ - r a+
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import STREAM_SAMPLING, RngSpec, ValidationError

NORM_TOL = 1e-12
DEFAULT_CAP = 8
TAIL_TOL = 1e-4
FAR_SIGMAS = 5.0
MIN_WITNESS_SHOTS = 100

QUANTUM_WITNESS = "QUANTUM-WITNESS"
NO_WITNESS = "NO-WITNESS"
INCONCLUSIVE = "INCONCLUSIVE"


# --- states -----------------------------------------------------------------------------


def _clean(terms: Mapping[tuple, complex], tol: float = 1e-15) -> dict:
    return {k: complex(v) for k, v in sorted(terms.items()) if abs(v) > tol}


@dataclass(frozen=True)
class FockState:
    """Normalized superposition of occupation vectors."""

    modes: tuple
    terms: tuple  # sorted ((occupation, amplitude), ...)
    max_particles: int = DEFAULT_CAP

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(set(modes)) != len(modes):
            raise ValidationError("mode labels must be unique")
        items = dict(self.terms)
        for occ, amp in items.items():
            if len(occ) != len(modes) or any((not isinstance(n, (int, np.integer))) or n < 0 for n in occ):
                raise ValidationError(f"bad occupation vector {occ}")
            if sum(occ) > self.max_particles:
                raise ValidationError(f"particle number {sum(occ)} exceeds cap {self.max_particles}")
            if not np.isfinite(amp):
                raise ValidationError("non-finite amplitude")
        norm = sum(abs(a) ** 2 for a in items.values())
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "terms", tuple((tuple(int(n) for n in k), complex(v)) for k, v in _clean(items).items()))

    @classmethod
    def from_terms(cls, modes: Sequence, terms: Mapping[tuple, complex], normalize: bool = False, max_particles: int = DEFAULT_CAP) -> "FockState":
        terms = dict(terms)
        if normalize:
            n = math.sqrt(sum(abs(a) ** 2 for a in terms.values()))
            if n == 0:
                raise ValidationError("cannot normalize the zero vector")
            terms = {k: v / n for k, v in terms.items()}
        return cls(tuple(modes), tuple(terms.items()), max_particles)

    @classmethod
    def basis(cls, modes: Sequence, occupation: Sequence[int], max_particles: int = DEFAULT_CAP) -> "FockState":
        return cls.from_terms(modes, {tuple(occupation): 1.0}, max_particles=max_particles)

    def as_dict(self) -> dict:
        return dict(self.terms)

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.as_dict().get(tuple(occupation), 0j)

    def probabilities(self) -> dict:
        return {k: abs(v) ** 2 for k, v in self.terms}

    def index(self, mode) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ValidationError(f"mode {mode!r} not in state {self.modes}") from None

    def particle_numbers(self) -> set:
        return {sum(k) for k, _ in self.terms}

    def norm(self) -> float:
        return math.sqrt(sum(abs(v) ** 2 for _, v in self.terms))


@dataclass(frozen=True)
class SplitterSpec:
    """Real two-mode splitter; ``r = sign * sqrt(1 - t^2)``."""

    t: float
    sign: int = 1

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0):
            raise ValidationError("transmission amplitude must lie in [0, 1]")
        if self.sign not in (1, -1):
            raise ValidationError("sign must be +1 or -1")

    @classmethod
    def balanced(cls) -> "SplitterSpec":
        return cls(1 / math.sqrt(2))

    @property
    def r(self) -> float:
        return self.sign * math.sqrt(max(0.0, 1.0 - self.t * self.t))

    def inverse(self) -> "SplitterSpec":
        return SplitterSpec(self.t, -self.sign)


def _mix_terms(terms: dict, i: int, j: int, t: float, r: float) -> dict:
    out: dict = {}
    for occ, amp in terms.items():
        na, nb = occ[i], occ[j]
        pref = amp / math.sqrt(math.factorial(na) * math.factorial(nb))
        for ka in range(na + 1):
            ca = math.comb(na, ka) * t**ka * r ** (na - ka)
            if ca == 0:
                continue
            for kb in range(nb + 1):
                cb = math.comb(nb, kb) * t**kb * (-r) ** (nb - kb)
                if cb == 0:
                    continue
                p = ka + nb - kb  # a+ power
                q = na - ka + kb  # b+ power
                new = list(occ)
                new[i], new[j] = p, q
                key = tuple(new)
                out[key] = out.get(key, 0j) + pref * ca * cb * math.sqrt(math.factorial(p) * math.factorial(q))
    return out


def splitter_transform(state: FockState, splitter: SplitterSpec, mode_pair: tuple) -> FockState:
    """Apply ``a+ -> t a+ + r b+, b+ -> t b+ - r a+`` on the named pair of modes."""
    a, b = mode_pair
    i, j = state.index(a), state.index(b)
    if i == j:
        raise ValidationError("splitter needs two distinct modes")
    out = _mix_terms(state.as_dict(), i, j, splitter.t, splitter.r)
    if any(sum(k) > state.max_particles for k in out):
        raise ValidationError("particle number exceeds cap")
    return FockState.from_terms(state.modes, out, max_particles=state.max_particles)


def phase_shift(state: FockState, mode, phi: float) -> FockState:
    """Multiply each term by ``exp(i n phi)`` for the occupation ``n`` of ``mode``."""
    i = state.index(mode)
    return FockState.from_terms(state.modes, {k: v * np.exp(1j * phi * k[i]) for k, v in state.terms}, max_particles=state.max_particles)


def create(modes: Sequence, operators: Iterable[Mapping], max_particles: int = DEFAULT_CAP) -> FockState:
    """``prod_k (sum_m c_km a_m+) |0>``, normalized.  Each operator maps mode -> coefficient."""
    modes = tuple(modes)
    terms = {tuple([0] * len(modes)): 1.0 + 0j}
    for op in operators:
        new: dict = {}
        for occ, amp in terms.items():
            for mode, c in op.items():
                i = modes.index(mode)
                o = list(occ)
                o[i] += 1
                key = tuple(o)
                new[key] = new.get(key, 0j) + amp * c * math.sqrt(o[i])
        terms = new
    return FockState.from_terms(modes, _clean(terms), normalize=True, max_particles=max_particles)


# --- HOM ----------------------------------------------------------------------------------

HOM_MODES = ("a_m", "a_o", "b_m", "b_o")


def mode_overlap(delay: float, packet_sigma: float) -> float:
    """Overlap of two identical Gaussian packets of rms duration ``sigma`` offset by ``delay``."""
    if not packet_sigma > 0:
        raise ValidationError("packet_sigma must be > 0")
    return math.exp(-(delay**2) / (4 * packet_sigma**2))


def _n_pair_state(n: int, v: float, cap: int) -> FockState:
    """n particles in port a (reference packet) and n in port b (delayed packet)."""
    w = math.sqrt(max(0.0, 1 - v * v))
    ops = [{"a_m": 1.0}] * n + [{"b_m": v, "b_o": w}] * n
    return create(HOM_MODES, ops, max_particles=cap)


def _joint_after_splitter(state: FockState) -> float:
    bs = SplitterSpec.balanced()
    out = splitter_transform(splitter_transform(state, bs, ("a_m", "b_m")), bs, ("a_o", "b_o"))
    return sum(p for k, p in out.probabilities().items() if k[0] + k[1] >= 1 and k[2] + k[3] >= 1)


@dataclass(frozen=True)
class PairSourceSpec:
    """Two-mode squeezed vacuum with mean occupation ``nbar`` per mode."""

    nbar: float
    n_shots: int = 0

    def __post_init__(self):
        if not (0.0 <= self.nbar < 1.0):
            raise ValidationError("nbar must lie in [0, 1)")
        if self.n_shots < 0:
            raise ValidationError("n_shots must be >= 0")

    @property
    def x(self) -> float:
        return self.nbar / (1 + self.nbar)

    def pair_probability(self, n: int) -> float:
        return (1 - self.x) * self.x**n

    def truncation(self, tol: float = TAIL_TOL) -> int:
        """Smallest n_max with tail ``P(n > n_max) = x^(n_max + 1) < tol``."""
        n_max = 1
        while self.x ** (n_max + 1) >= tol:
            n_max += 1
        return n_max


def _tmsv_joint(delay: float, sigma: float, src: PairSourceSpec) -> float:
    v = mode_overlap(delay, sigma)
    n_max = src.truncation()
    cap = max(DEFAULT_CAP, 2 * n_max)
    num = sum(src.pair_probability(n) * _joint_after_splitter(_n_pair_state(n, v, cap)) for n in range(1, n_max + 1))
    den = sum(src.pair_probability(n) for n in range(1, n_max + 1))
    return num / den


def hom_coincidence(delay: float, packet_sigma: float, source="ideal_pair") -> float:
    """Probability of detections on both output sides.

    ``source`` is ``"ideal_pair"`` or a :class:`PairSourceSpec` (tmsv); the
    tmsv value is conditioned on at least one pair and truncated where the
    geometric tail drops below 1e-4.
    """
    v = mode_overlap(delay, packet_sigma)
    if isinstance(source, PairSourceSpec):
        return _tmsv_joint(delay, packet_sigma, source)
    if source != "ideal_pair":
        raise ValidationError(f"unknown source {source!r}")
    return _joint_after_splitter(_n_pair_state(1, v, DEFAULT_CAP))


def classical_coincidence(delay: float, packet_sigma: float, phi: float | np.ndarray) -> float | np.ndarray:
    """Normalized joint rate of two classical pulses with relative phase ``phi``."""
    v = mode_overlap(delay, packet_sigma)
    return 0.5 * (1 - v * v * np.cos(phi) ** 2)


@dataclass(frozen=True)
class BaselineRates:
    w1_d3: float
    w1_d4: float
    w2_joint: float
    ratio: float
    w2_stderr: float
    ratio_stderr: float


def classical_hom_baseline(n_phase_samples: int, rng: RngSpec, phi: float | None = None) -> BaselineRates:
    """Classical fields on a splitter with uniform random relative phase.

    Singles go as sin^2 and cos^2, the joint rate as their product; the
    suppression ratio ``<w2> / (<w1_3><w1_4>)`` tends to 1/2.  Passing
    ``phi`` evaluates a single fixed phase instead.
    """
    if phi is not None:
        s, c = math.sin(phi) ** 2, math.cos(phi) ** 2
        return BaselineRates(s, c, s * c, 1.0 if s * c else float("nan"), 0.0, 0.0)
    if n_phase_samples < 10_000:
        raise ValidationError("need at least 1e4 phase samples")
    ph = rng.generator(STREAM_SAMPLING, 0).uniform(0, 2 * np.pi, n_phase_samples)
    w3 = np.sin(ph) ** 2
    w4 = np.cos(ph) ** 2
    w2 = w3 * w4
    m3, m4, m2 = w3.mean(), w4.mean(), w2.mean()
    ratio = m2 / (m3 * m4)
    # delta method on log ratio
    cov = np.cov(np.vstack([w2, w3, w4])) / n_phase_samples
    grad = np.array([1 / m2, -1 / m3, -1 / m4]) * ratio
    return BaselineRates(float(m3), float(m4), float(m2), float(ratio), float(w2.std(ddof=1) / math.sqrt(n_phase_samples)), float(math.sqrt(grad @ cov @ grad)))


@dataclass(frozen=True)
class DipScan:
    delays: np.ndarray
    p_joint: np.ndarray
    stderr: np.ndarray
    visibility: float
    visibility_stderr: float
    verdict: str

    def to_csv(self) -> str:
        rows = ["delay_ns,p_joint,stderr"]
        rows += [f"{float(d)!r},{float(p)!r},{float(s)!r}" for d, p, s in zip(self.delays, self.p_joint, self.stderr)]
        return "\n".join(rows) + "\n"

    def verdict_json(self) -> str:
        return json.dumps(
            {"verdict": self.verdict, "visibility": self.visibility, "visibility_stderr": self.visibility_stderr},
            indent=2,
            sort_keys=True,
        )

    def to_curve(self):
        from .correlator import CorrelationCurve

        d = np.asarray(self.delays, dtype=float)
        return CorrelationCurve(d, d.copy(), self.p_joint, self.stderr, np.zeros(len(d), dtype=np.int64), "dip")


def hom_dip_scan(delays: Sequence[float], source, n_shots: int, rng: RngSpec, packet_sigma: float = 1.0) -> DipScan:
    """Sampled coincidence fraction versus delay, with the V > 1/2 witness.

    ``source`` is ``"ideal_pair"``, a :class:`PairSourceSpec`, or
    ``"classical"`` (random-phase classical pulses; each shot draws a phase).
    """
    d = np.asarray(delays, dtype=float)
    if not np.any(d == 0):
        raise ValidationError("delays must include 0")
    far = np.abs(d) >= FAR_SIGMAS * packet_sigma
    if not far.any():
        raise ValidationError(f"delays must include points with |delay| >= {FAR_SIGMAS} sigma")
    if n_shots < 1:
        raise ValidationError("n_shots must be >= 1")
    p_hat = np.empty(len(d))
    for i, delay in enumerate(d):
        g = rng.generator(STREAM_SAMPLING, i)
        if isinstance(source, str) and source == "classical":
            p = classical_coincidence(delay, packet_sigma, g.uniform(0, 2 * np.pi, n_shots))
            p_hat[i] = np.count_nonzero(g.uniform(size=n_shots) < p) / n_shots
        else:
            p_hat[i] = g.binomial(n_shots, hom_coincidence(delay, packet_sigma, source)) / n_shots
    se = np.sqrt(p_hat * (1 - p_hat) / n_shots)
    p0 = float(p_hat[d == 0].mean())
    se0 = float(np.sqrt((se[d == 0] ** 2).sum()) / np.count_nonzero(d == 0))
    pf = float(p_hat[far].mean())
    sef = float(np.sqrt((se[far] ** 2).sum()) / np.count_nonzero(far))
    if pf <= 0 or n_shots < MIN_WITNESS_SHOTS:
        return DipScan(d, p_hat, se, float("nan"), float("nan"), INCONCLUSIVE)
    vis = (pf - p0) / pf
    vis_se = math.sqrt((se0 / pf) ** 2 + (p0 * sef / pf**2) ** 2)
    if vis_se == 0 and vis < 1:
        verdict = INCONCLUSIVE
    else:
        verdict = QUANTUM_WITNESS if vis - 0.5 >= 3 * vis_se else NO_WITNESS
    return DipScan(d, p_hat, se, float(vis), float(vis_se), verdict)


# --- pair source ----------------------------------------------------------------------------


def tmsv_sample(source: PairSourceSpec, rng: RngSpec) -> np.ndarray:
    """Per-shot occupations ``(n, n)`` with ``P(n) = (1 - x) x^n``; shape ``(n_shots, 2)``."""
    g = rng.generator(STREAM_SAMPLING, 0)
    n = g.geometric(1 - source.x, size=source.n_shots) - 1
    return np.stack([n, n], axis=1)


@dataclass(frozen=True)
class Contamination:
    local_g2: float
    nbar: float
    pair_fraction: float
    mean_occupation: float
    local_g2_stderr: float


def infer_contamination(samples: Sequence[int]) -> Contamination:
    """Infer multi-pair contamination from single-mode occupation samples.

    ``local_g2 = <n(n-1)> / <n>^2`` is 2 for the thermal marginal of a pair
    source and 0 for strictly single particles; ``nbar = sqrt(<n(n-1)>/2)``
    inverts the thermal relation; ``pair_fraction`` is ``P(n>=2) / P(n>=1)``.
    """
    n = np.asarray(samples, dtype=np.int64).ravel()
    if n.size == 0 or n.sum() == 0:
        raise ValidationError("zero occupancy: nothing to infer")
    if np.any(n < 0):
        raise ValidationError("occupations must be >= 0")
    m1 = n.mean()
    f2 = n * (n - 1)
    m2 = f2.mean()
    g2 = m2 / m1**2
    # delta method for a ratio
    cov = np.cov(np.vstack([f2, n])) / n.size if n.size > 1 else np.zeros((2, 2))
    grad = np.array([1 / m1**2, -2 * m2 / m1**3])
    se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    frac = np.count_nonzero(n >= 2) / np.count_nonzero(n >= 1)
    return Contamination(float(g2), float(math.sqrt(m2 / 2)), float(frac), float(m1), se)


# --- four-mode Bell test ------------------------------------------------------------------------

RT_MODES = ("p3", "p3p", "p4", "p4p")


def rarity_tapster_state(phi_a: float, phi_b: float) -> FockState:
    """Output state for ``(|p3, p4> + |p3', p4'>)/sqrt(2)`` after phases and splitters."""
    s = 1 / math.sqrt(2)
    st = FockState.from_terms(RT_MODES, {(1, 0, 1, 0): s, (0, 1, 0, 1): s})
    st = phase_shift(phase_shift(st, "p3p", phi_a), "p4p", phi_b)
    bs = SplitterSpec.balanced()
    return splitter_transform(splitter_transform(st, bs, ("p3", "p3p")), bs, ("p4", "p4p"))


@dataclass(frozen=True)
class OutcomeTable:
    """Joint probabilities keyed by occupation tuple over the detector modes."""

    modes: tuple
    probabilities: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.probabilities.values())
        if any(p < -1e-15 for p in self.probabilities.values()) or abs(total - 1) > 1e-12:
            raise ValidationError(f"outcome probabilities must be >= 0 and sum to 1 (sum={total!r})")

    def correlation(self) -> float:
        """``E = P(same) - P(different)`` with outcome +1 on p3/p4 and -1 on p3'/p4'."""
        e = 0.0
        for occ, p in self.probabilities.items():
            a = 1 if occ[0] == 1 else -1
            b = 1 if occ[2] == 1 else -1
            e += a * b * p
        return e

    def marginal(self, mode) -> float:
        i = self.modes.index(mode)
        return sum(p for occ, p in self.probabilities.items() if occ[i] >= 1)


def rarity_tapster(phi_a: float, phi_b: float) -> OutcomeTable:
    st = rarity_tapster_state(phi_a, phi_b)
    probs = {k: p for k, p in st.probabilities().items() if p > 0}
    # rounding in the splitters leaves the sum within ~1e-16 of 1
    total = sum(probs.values())
    return OutcomeTable(RT_MODES, {k: p / total for k, p in probs.items()})


OPTIMAL_SETTINGS = (0.0, math.pi / 2, -math.pi / 4, math.pi / 4)


def chsh_from_correlations(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> float:
    return abs(e_ab + e_abp + e_apb - e_apbp)


def chsh(a: float, a_prime: float, b: float, b_prime: float) -> float:
    """``S = |E(a,b) + E(a,b') + E(a',b) - E(a',b')|`` from the exact outcome tables."""
    e = [rarity_tapster(x, y).correlation() for x, y in ((a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime))]
    return chsh_from_correlations(*e)


@dataclass(frozen=True)
class SampledCHSH:
    s: float
    stderr: float
    correlations: tuple
    correlation_stderr: tuple


def chsh_sampled(a: float, a_prime: float, b: float, b_prime: float, n_shots: int, rng: RngSpec) -> SampledCHSH:
    """CHSH from ``n_shots`` sampled detections per setting pair."""
    es, ses = [], []
    for i, (x, y) in enumerate(((a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime))):
        tab = rarity_tapster(x, y)
        keys = sorted(tab.probabilities)
        probs = np.array([tab.probabilities[k] for k in keys])
        vals = np.array([(1 if k[0] == 1 else -1) * (1 if k[2] == 1 else -1) for k in keys], dtype=float)
        draws = rng.generator(STREAM_SAMPLING, i).choice(len(keys), size=n_shots, p=probs)
        prod = vals[draws]
        es.append(float(prod.mean()))
        ses.append(float(prod.std(ddof=1) / math.sqrt(n_shots)))
    return SampledCHSH(chsh_from_correlations(*es), float(math.sqrt(sum(s * s for s in ses))), tuple(es), tuple(ses))


def chsh_scan_csv(phis_a: Sequence[float], phis_b: Sequence[float], n_shots: int = 0, rng: RngSpec | None = None) -> str:
    """``phi_a,phi_b,E,stderr`` grid; exact when ``n_shots == 0``."""
    rows = ["phi_a,phi_b,E,stderr"]
    for i, pa in enumerate(phis_a):
        for j, pb in enumerate(phis_b):
            tab = rarity_tapster(pa, pb)
            e = tab.correlation()
            se = 0.0
            if n_shots:
                g = rng.generator(STREAM_SAMPLING, 1000 + i, j)
                p_same = (1 + e) / 2
                k = g.binomial(n_shots, min(max(p_same, 0.0), 1.0))
                e = 2 * k / n_shots - 1
                se = math.sqrt(max(1 - e * e, 0.0) / n_shots)
            rows.append(f"{float(pa)!r},{float(pb)!r},{float(e)!r},{float(se)!r}")
    return "\n".join(rows) + "\n"


# --- local hidden variables --------------------------------------------------------------------


@dataclass(frozen=True)
class LHVStrategy:
    """Mixture of deterministic strategies.

    Each row of ``assignments`` gives the +/-1 outcomes ``(A(a), A(a'), B(b), B(b'))``;
    ``weights`` is the hidden-variable distribution over rows.
    """

    assignments: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64).reshape(-1, 4)
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(a) != len(w) or len(a) == 0:
            raise ValidationError("one weight per assignment row is required")
        if not np.all(np.isin(a, (-1, 1))):
            raise ValidationError("outcomes must be +1 or -1")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValidationError("weights must be a probability distribution")
        object.__setattr__(self, "assignments", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def deterministic(cls, outcomes: Sequence[int]) -> "LHVStrategy":
        return cls(np.asarray([outcomes]), np.ones(1))

    @classmethod
    def random_outcomes(cls) -> "LHVStrategy":
        rows = all_deterministic_strategies()
        return cls(rows, np.full(len(rows), 1 / len(rows)))

    @classmethod
    def hom_mimic(cls) -> "LHVStrategy":
        """A shared coin sends both particles to the same side whatever the settings."""
        return cls(np.array([[1, 1, 1, 1], [-1, -1, -1, -1]]), np.array([0.5, 0.5]))

    def exact_s(self) -> float:
        a, w = self.assignments, self.weights
        e = [float(w @ (a[:, i] * a[:, j])) for i, j in ((0, 2), (0, 3), (1, 2), (1, 3))]
        return chsh_from_correlations(*e)


def all_deterministic_strategies() -> np.ndarray:
    """The 16 assignments of +/-1 to (A(a), A(a'), B(b), B(b'))."""
    bits = (np.arange(16)[:, None] >> np.arange(4)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int64)


def max_deterministic_chsh() -> tuple[float, np.ndarray]:
    rows = all_deterministic_strategies()
    s = np.array([LHVStrategy.deterministic(r).exact_s() for r in rows])
    return float(s.max()), rows[int(np.argmax(s))]


@dataclass(frozen=True)
class LHVResult:
    s: float
    stderr: float


def lhv_simulation(strategy: LHVStrategy, n_shots: int, rng: RngSpec) -> LHVResult:
    """Monte-Carlo CHSH of a local strategy: per setting pair, draw the hidden variable each shot."""
    es, ses = [], []
    for k, (i, j) in enumerate(((0, 2), (0, 3), (1, 2), (1, 3))):
        lam = rng.generator(STREAM_SAMPLING, k).choice(len(strategy.weights), size=n_shots, p=strategy.weights)
        prod = (strategy.assignments[lam, i] * strategy.assignments[lam, j]).astype(float)
        es.append(prod.mean())
        ses.append(prod.std(ddof=1) / math.sqrt(n_shots) if n_shots > 1 else 0.0)
    return LHVResult(chsh_from_correlations(*es), float(math.sqrt(sum(s * s for s in ses))))


def hom_mimic_outcomes(n_shots: int, rng: RngSpec) -> dict:
    """Empirical (n_left, n_right) table for the shared-coin strategy on a two-particle input."""
    coin = rng.generator(STREAM_SAMPLING, 99).integers(0, 2, size=n_shots)
    left = np.count_nonzero(coin == 0)
    return {(2, 0): left / n_shots, (1, 1): 0.0, (0, 2): (n_shots - left) / n_shots}


def hom_outcomes() -> dict:
    """Exact (n_left, n_right) table of two identical particles at zero delay."""
    st = _n_pair_state(1, 1.0, DEFAULT_CAP)
    bs = SplitterSpec.balanced()
    out = splitter_transform(splitter_transform(st, bs, ("a_m", "b_m")), bs, ("a_o", "b_o"))
    table = {(2, 0): 0.0, (1, 1): 0.0, (0, 2): 0.0}
    for k, p in out.probabilities().items():
        table[(k[0] + k[1], k[2] + k[3])] += p
    return table
