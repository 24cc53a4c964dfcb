"""Two-particle amplitude interference and synthetic quantum-gas clouds.

Joint detection probabilities of n identical particles are ``|perm M|^2``
(bosons) or ``|det M|^2`` (fermions) for the emitter-to-detector amplitude
matrix ``M``.  The cloud samplers produce detection events with a Gaussian
pair correlation ``g2 = 1 +/- exp(-sum_a d_a^2 / l_a^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import STREAM_EVENTS, STREAM_REALIZATION, RngSpec, Shot, ValidationError, parallel_map

STATISTICS = ("boson", "fermion", "distinguishable")
MAX_N = 6
EIG_TOL = 1e-9
KL_CUTOFF = 1e-10
MAX_FERMIONS = 64
DEFAULT_FALL_VELOCITY = 3e-6  # mm/ns, i.e. 3 m/s


# --- permanents and joint probabilities ----------------------------------------------


def permanent(m: np.ndarray) -> complex:
    """Ryser's formula with Gray-code updates, O(2^n n)."""
    a = np.asarray(m, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValidationError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    sign = -1.0 if n % 2 else 1.0  # (-1)^(n - |S|) starts at |S| = 0
    prev_gray = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        col = (gray ^ prev_gray).bit_length() - 1
        if gray & (1 << col):
            row_sums += a[:, col]
        else:
            row_sums -= a[:, col]
        prev_gray = gray
        sign = -sign
        total += sign * np.prod(row_sums)
    return complex(total)


def _distinguishable(m: np.ndarray) -> float:
    # sum over permutations of prod |m_{i, sigma(i)}|^2 is the permanent of |m|^2
    return float(permanent(np.abs(m) ** 2).real)


@dataclass(frozen=True, eq=False)
class AmplitudeMatrix:
    """``entries[i, j]`` is the amplitude from emitter ``i`` to detector ``j``."""

    entries: np.ndarray
    statistics: str = "boson"

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not (2 <= m.shape[0] <= MAX_N):
            raise ValidationError(f"amplitude matrix must be square with 2 <= n <= {MAX_N}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("amplitude matrix has non-finite entries")
        if self.statistics not in STATISTICS:
            raise ValidationError(f"statistics must be one of {STATISTICS}")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def joint_weight(matrix: AmplitudeMatrix) -> float:
    """Unnormalized joint detection probability for the matrix's statistics."""
    m = matrix.entries
    if matrix.statistics == "boson":
        return abs(permanent(m)) ** 2
    if matrix.statistics == "fermion":
        return abs(np.linalg.det(m)) ** 2
    return _distinguishable(m)


def joint_probability(matrix: AmplitudeMatrix) -> float:
    """Enhancement factor: joint weight divided by the distinguishable-particle weight."""
    norm = _distinguishable(matrix.entries)
    if norm == 0:
        raise ValidationError("distinguishable normalizer is zero: no joint detection possible")
    return joint_weight(matrix) / norm


# --- emitter/detector toy model --------------------------------------------------------


@dataclass(frozen=True)
class ToyModelGeometry:
    """Two emitters and two detectors (metres) and a wavenumber (rad/m).

    ``source_jitter`` is the edge of a cube within which each emitter is
    redrawn per realization (defaults to the emitter separation): a thermal
    source whose emitters are not pinned.
    """

    emitters: tuple
    detectors: tuple
    k: float
    source_jitter: float | None = None

    def __post_init__(self):
        e = np.asarray(self.emitters, dtype=float).reshape(-1, 3)
        d = np.asarray(self.detectors, dtype=float).reshape(-1, 3)
        if e.shape != (2, 3) or d.shape != (2, 3):
            raise ValidationError("toy model needs exactly two emitters and two detectors")
        if not self.k > 0:
            raise ValidationError("wavenumber must be > 0")
        if np.linalg.norm(e[0] - e[1]) == 0:
            raise ValidationError("coincident emitters: degenerate geometry")
        if np.any(np.linalg.norm(e[:, None] - d[None], axis=2) == 0):
            raise ValidationError("emitter coincides with a detector")
        object.__setattr__(self, "emitters", tuple(map(tuple, e)))
        object.__setattr__(self, "detectors", tuple(map(tuple, d)))

    @property
    def jitter(self) -> float:
        if self.source_jitter is not None:
            return float(self.source_jitter)
        e = np.asarray(self.emitters)
        return float(np.linalg.norm(e[0] - e[1]))

    def amplitudes(self, emitters: np.ndarray, phases: np.ndarray) -> np.ndarray:
        d = np.asarray(self.detectors)
        r = np.linalg.norm(emitters[:, :, None, :] - d[None, None, :, :], axis=3)
        return np.exp(1j * phases[:, :, None]) * np.exp(1j * self.k * r) / r


@dataclass(frozen=True)
class ToyResult:
    g2: float
    stderr: float


def toy_model_g2(geometry: ToyModelGeometry, statistics: str, n_phase_realizations: int, rng: RngSpec) -> ToyResult:
    """Realization-averaged enhancement ``<joint weight> / <distinguishable weight>``.

    Each realization draws uniform emitter phases (which cancel in every
    joint weight) and emitter positions within the jitter cube (which
    scramble the exchange phase once the detectors are far apart).
    """
    if statistics not in STATISTICS:
        raise ValidationError(f"statistics must be one of {STATISTICS}")
    n = int(n_phase_realizations)
    if n < 2:
        raise ValidationError("need at least 2 realizations")
    g = rng.generator(STREAM_REALIZATION, 0)
    base = np.asarray(geometry.emitters)
    em = base[None] + geometry.jitter * (g.uniform(size=(n, 2, 3)) - 0.5)
    phases = g.uniform(0, 2 * np.pi, size=(n, 2))
    m = geometry.amplitudes(em, phases)
    direct = m[:, 0, 0] * m[:, 1, 1]
    exch = m[:, 0, 1] * m[:, 1, 0]
    dist = np.abs(direct) ** 2 + np.abs(exch) ** 2
    if statistics == "boson":
        w = np.abs(direct + exch) ** 2
    elif statistics == "fermion":
        w = np.abs(direct - exch) ** 2
    else:
        w = dist
    ratio = w.sum() / dist.sum()
    # delta-method error of a ratio of means
    resid = w - ratio * dist
    se = math.sqrt(np.var(resid, ddof=1) / n) / dist.mean()
    return ToyResult(float(ratio), float(se))


# --- clouds -----------------------------------------------------------------------------


@dataclass(frozen=True)
class CloudSpec:
    """Synthetic cloud in detector units (mm).  The vertical axis z maps to arrival time.

    ``correlation_lengths`` refer to the reference species; the effective
    lengths are divided by ``mass_ratio`` (de Broglie scaling at fixed
    velocity), so ``mass_ratio = 3/4`` lengthens them by 4/3.
    ``extent`` is the box sampled; ``envelope_sigma`` (optional) adds a
    Gaussian density profile on top of the box.
    """

    correlation_lengths: tuple[float, float, float]
    mean_atoms: float
    statistics: str = "boson"
    mass_ratio: float = 1.0
    extent: tuple[float, float, float] = (1.0, 1.0, 1.0)
    envelope_sigma: tuple[float, float, float] | None = None
    fall_velocity: float = DEFAULT_FALL_VELOCITY
    grid_divisions: float = 6.0

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.correlation_lengths)
        extent = tuple(float(v) for v in self.extent)
        if len(lengths) != 3 or not all(v > 0 for v in lengths):
            raise ValidationError("correlation lengths must be three positive values")
        if len(extent) != 3 or not all(v > 0 for v in extent):
            raise ValidationError("extent must be three positive values")
        if not self.mean_atoms >= 1:
            raise ValidationError("mean atom number must be >= 1")
        if self.statistics not in ("boson", "fermion", "coherent"):
            raise ValidationError("cloud statistics must be boson, fermion or coherent")
        if not (self.mass_ratio > 0 and self.fall_velocity > 0):
            raise ValidationError("mass_ratio and fall_velocity must be > 0")
        if self.grid_divisions < 4:
            raise ValidationError("grid resolution coarser than l/4")
        object.__setattr__(self, "correlation_lengths", lengths)
        object.__setattr__(self, "extent", extent)
        if self.envelope_sigma is not None:
            sig = tuple(float(v) for v in self.envelope_sigma)
            if len(sig) != 3 or not all(v > 0 for v in sig):
                raise ValidationError("envelope_sigma must be three positive values")
            object.__setattr__(self, "envelope_sigma", sig)

    @property
    def effective_lengths(self) -> np.ndarray:
        return np.asarray(self.correlation_lengths) / self.mass_ratio

    def time_length(self) -> float:
        """Correlation length along the time axis (ns)."""
        return float(self.effective_lengths[2] / self.fall_velocity)


@dataclass(frozen=True)
class _Axis:
    centers: np.ndarray
    pitch: float
    modes: np.ndarray  # (n, r) eigenvectors scaled by sqrt(eigenvalue), or raw eigenvectors
    eigvals: np.ndarray


def _axis_grid(length: float, extent: float, divisions: float) -> tuple[np.ndarray, float]:
    n = max(1, int(math.ceil(extent / (length / divisions))))
    pitch = extent / n
    if pitch > length / 4:
        raise ValidationError(f"grid pitch {pitch:.4g} coarser than l/4 = {length / 4:.4g}")
    return (np.arange(n) + 0.5) * pitch - extent / 2, pitch


def _gauss_cov(c: np.ndarray, length: float) -> np.ndarray:
    # field covariance exp(-d^2 / (2 l^2)) gives |g1|^2 = exp(-d^2 / l^2)
    d = c[:, None] - c[None, :]
    return np.exp(-(d**2) / (2 * length**2))


def _axes(spec: CloudSpec, truncate: bool) -> list[_Axis]:
    out = []
    for length, ext in zip(spec.effective_lengths, spec.extent):
        c, h = _axis_grid(float(length), ext, spec.grid_divisions)
        w, u = np.linalg.eigh(_gauss_cov(c, float(length)))
        if truncate:
            keep = w > KL_CUTOFF * w.max()
            w, u = w[keep], u[:, keep]
        out.append(_Axis(c, h, u, w))
    return out


def _envelope(spec: CloudSpec, axes: list[_Axis]) -> list[np.ndarray]:
    if spec.envelope_sigma is None:
        return [np.ones(len(a.centers)) for a in axes]
    return [np.exp(-(a.centers**2) / (2 * s**2)) for a, s in zip(axes, spec.envelope_sigma)]


def _to_events(spec: CloudSpec, axes: list[_Axis], cells: np.ndarray, g: np.random.Generator) -> np.ndarray:
    """Cell multi-indices ``(n, 3)`` to ``(x, y, t)`` with uniform in-cell jitter."""
    pos = np.empty((len(cells), 3))
    for a, ax in enumerate(axes):
        pos[:, a] = ax.centers[cells[:, a]] + ax.pitch * (g.uniform(size=len(cells)) - 0.5)
    pos[:, 2] = (pos[:, 2] + spec.extent[2] / 2) / spec.fall_velocity
    return pos


def sample_boson_cloud(spec: CloudSpec, n_shots: int, rng: RngSpec, first_shot: int = 0) -> list[Shot]:
    """Thermal bosons: Poisson events driven by a Gaussian random field.

    The complex field has covariance ``prod_a exp(-d_a^2 / (2 l_a^2))`` and is
    synthesized exactly on the grid from per-axis Karhunen-Loeve modes; cell
    counts are Poisson with mean proportional to the cell intensity.
    """
    if spec.statistics != "boson":
        raise ValidationError("sample_boson_cloud needs statistics = boson")
    axes = _axes(spec, truncate=True)
    scaled = [ax.modes * np.sqrt(ax.eigvals) for ax in axes]
    env = _envelope(spec, axes)
    env3 = env[0][:, None, None] * env[1][None, :, None] * env[2][None, None, :]
    env_flat = env3.ravel()
    norm = spec.mean_atoms / env_flat.sum()
    shape = tuple(len(ax.centers) for ax in axes)
    ranks = tuple(s.shape[1] for s in scaled)

    def one(s: int) -> Shot:
        g = rng.generator(STREAM_REALIZATION, s)
        z = (g.standard_normal(ranks) + 1j * g.standard_normal(ranks)) / math.sqrt(2)
        # separable synthesis; matmul dispatches to BLAS
        f = (scaled[0] @ z.reshape(ranks[0], -1)).reshape(shape[0], ranks[1], ranks[2])
        f = np.matmul(scaled[1], f) @ scaled[2].T
        w = (f.real**2 + f.imag**2).ravel() * env_flat
        cum = np.cumsum(w)
        ge = rng.generator(STREAM_EVENTS, s)
        n = ge.poisson(norm * cum[-1])
        flat = np.minimum(np.searchsorted(cum, ge.uniform(size=n) * cum[-1], side="right"), len(cum) - 1)
        cells = np.stack(np.unravel_index(flat, shape), axis=1)
        return Shot(s, _to_events(spec, axes, cells, ge))

    return parallel_map(one, list(range(first_shot, first_shot + n_shots)))


def sample_coherent_cloud(spec: CloudSpec, n_shots: int, rng: RngSpec, first_shot: int = 0) -> list[Shot]:
    """Coherent matter wave (BEC-like): independent Poisson events, no correlations.

    Positions are uniform in the box, or Gaussian (truncated to the box) when
    ``envelope_sigma`` is set.
    """
    half = np.asarray(spec.extent) / 2

    def draw(g: np.random.Generator, n: int) -> np.ndarray:
        if spec.envelope_sigma is None:
            return g.uniform(-half, half, size=(n, 3))
        out = np.empty((0, 3))
        while len(out) < n:
            p = g.standard_normal((2 * (n - len(out)) + 8, 3)) * np.asarray(spec.envelope_sigma)
            out = np.vstack([out, p[np.all(np.abs(p) <= half, axis=1)]])
        return out[:n]

    def one(s: int) -> Shot:
        g = rng.generator(STREAM_EVENTS, s)
        pos = draw(g, g.poisson(spec.mean_atoms))
        pos[:, 2] = (pos[:, 2] + half[2]) / spec.fall_velocity
        return Shot(s, pos)

    return parallel_map(one, list(range(first_shot, first_shot + n_shots)))


@dataclass(frozen=True)
class FermionKernel:
    """Product-grid DPP kernel ``K = rho dV prod_a C_a`` in factored form."""

    axes: list
    scale: float
    eigenvalues: np.ndarray  # (r0, r1, r2) product eigenvalues

    @property
    def expected_count(self) -> float:
        return float(self.eigenvalues.sum())


def fermion_kernel(spec: CloudSpec) -> FermionKernel:
    """Discretize the Gaussian kernel and check its spectrum lies in [0, 1]."""
    if spec.envelope_sigma is not None:
        raise ValidationError("fermion sampler supports uniform boxes only")
    axes = _axes(spec, truncate=False)
    volume = float(np.prod(spec.extent))
    dv = float(np.prod([ax.pitch for ax in axes]))
    scale = spec.mean_atoms / volume * dv
    lam = scale * np.einsum("a,b,c->abc", axes[0].eigvals, axes[1].eigvals, axes[2].eigvals)
    top = float(lam.max())
    low = float(lam.min())
    if top > 1 + EIG_TOL:
        raise ValidationError(f"kernel not a valid DPP: max eigenvalue {top:.6g} > 1 (density too high for the correlation volume)")
    if low < -EIG_TOL:
        raise ValidationError(f"kernel not positive semidefinite: most negative eigenvalue {low:.3g}")
    trace = float(lam.sum())
    if abs(trace - spec.mean_atoms) > 1e-6 * spec.mean_atoms:
        raise ValidationError(f"kernel trace {trace:.6g} differs from mean atoms {spec.mean_atoms}")
    return FermionKernel(axes, scale, np.clip(lam, 0.0, 1.0))


@numba.njit(cache=True, nogil=True)
def _dpp_sample(u0, u1, u2, cdf0, cdf1, cdf2, sel, uniforms):
    """Spectral DPP sampling restricted to the selected product eigenvectors.

    ``sel`` rows are (a, b, c) indices of the chosen eigenvectors.  Cells are
    proposed from the mixture ``(1/k) sum_j |v_j|^2`` (separable per vector)
    and accepted with ``|row of current basis|^2 / |row of v|^2``; the basis,
    stored as coefficient rows ``q`` over the selected vectors, is then
    conditioned on the accepted cell.  Returns ``ok = False`` if the supplied
    uniforms run out.
    """
    k = sel.shape[0]
    out = np.empty((k, 3), dtype=np.int64)
    q = np.eye(k)
    m = k
    pos = 0
    row = np.empty(k)
    wrow = np.empty(k)
    for step in range(k):
        while True:
            if pos + 5 > uniforms.shape[0]:
                return out[:step], False
            j = min(int(uniforms[pos] * k), k - 1)
            a0, a1, a2 = sel[j, 0], sel[j, 1], sel[j, 2]
            i0 = min(np.searchsorted(cdf0[a0], uniforms[pos + 1] * cdf0[a0, -1]), u0.shape[0] - 1)
            i1 = min(np.searchsorted(cdf1[a1], uniforms[pos + 2] * cdf1[a1, -1]), u1.shape[0] - 1)
            i2 = min(np.searchsorted(cdf2[a2], uniforms[pos + 3] * cdf2[a2, -1]), u2.shape[0] - 1)
            acc = uniforms[pos + 4]
            pos += 5
            vn = 0.0
            for a in range(k):
                row[a] = u0[i0, sel[a, 0]] * u1[i1, sel[a, 1]] * u2[i2, sel[a, 2]]
                vn += row[a] * row[a]
            wn = 0.0
            for c in range(m):
                acc_c = 0.0
                for a in range(k):
                    acc_c += q[c, a] * row[a]
                wrow[c] = acc_c
                wn += acc_c * acc_c
            if vn > 0 and acc * vn < wn:
                break
        out[step, 0] = i0
        out[step, 1] = i1
        out[step, 2] = i2
        # eliminate the basis direction with the largest entry at this cell,
        # then re-orthonormalize (modified Gram-Schmidt)
        piv = 0
        for c in range(1, m):
            if abs(wrow[c]) > abs(wrow[piv]):
                piv = c
        prow = q[piv].copy()
        r = 0
        for c in range(m):
            if c == piv:
                continue
            f = wrow[c] / wrow[piv]
            for a in range(k):
                q[r, a] = q[c, a] - f * prow[a]
            r += 1
        m -= 1
        for c in range(m):
            for d in range(c):
                dot = 0.0
                for a in range(k):
                    dot += q[d, a] * q[c, a]
                for a in range(k):
                    q[c, a] -= dot * q[d, a]
            nrm = 0.0
            for a in range(k):
                nrm += q[c, a] * q[c, a]
            nrm = math.sqrt(nrm)
            for a in range(k):
                q[c, a] /= nrm
    return out, True


def sample_fermion_cloud(spec: CloudSpec, n_shots: int, rng: RngSpec, first_shot: int = 0) -> list[Shot]:
    """Free fermions: determinantal point process with Gaussian kernel."""
    if spec.statistics != "fermion":
        raise ValidationError("sample_fermion_cloud needs statistics = fermion")
    if spec.mean_atoms > MAX_FERMIONS:
        raise ValidationError(f"mean atom number must be <= {MAX_FERMIONS} for the fermion sampler")
    kern = fermion_kernel(spec)
    u = [np.ascontiguousarray(ax.modes) for ax in kern.axes]
    cdf = [np.ascontiguousarray(np.cumsum(x**2, axis=0).T) for x in u]
    lam = kern.eigenvalues.ravel()
    idx = np.stack(np.unravel_index(np.arange(lam.size), kern.eigenvalues.shape), axis=1)
    cand = np.flatnonzero(lam > 0)

    def one(s: int) -> Shot:
        g = rng.generator(STREAM_REALIZATION, s)
        chosen = cand[g.uniform(size=cand.size) < lam[cand]]
        sel = np.ascontiguousarray(idx[chosen])
        k = len(sel)
        cells = np.empty((0, 3), dtype=np.int64)
        # expected proposals are about k * H_k; start with a generous multiple
        budget = int(8 * k * (math.log(k + 1) + 2)) + 64
        while k:
            cells, ok = _dpp_sample(u[0], u[1], u[2], cdf[0], cdf[1], cdf[2], sel, g.uniform(size=5 * budget))
            if ok:
                break
            budget *= 4
        ge = rng.generator(STREAM_EVENTS, s)
        return Shot(s, _to_events(spec, kern.axes, cells, ge))

    return parallel_map(one, list(range(first_shot, first_shot + n_shots)))


def sample_cloud(spec: CloudSpec, n_shots: int, rng: RngSpec) -> list[Shot]:
    return {"boson": sample_boson_cloud, "fermion": sample_fermion_cloud, "coherent": sample_coherent_cloud}[spec.statistics](spec, n_shots, rng)
