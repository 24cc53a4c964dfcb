"""Independent Fock-space oracles: labeled-particle path sums and dense expm evolution."""

import itertools
import math

import numpy as np
from scipy.linalg import expm


def path_sum_two_modes(na: int, nb: int, t: float, r: float) -> dict:
    """Output amplitudes of |na, nb> by expanding each creation operator separately.

    a+ -> t c+ + r d+, b+ -> t d+ - r c+; every labeled particle picks a
    path, and a term with k particles in c contributes sqrt(k! (n-k)!).
    """
    choices = [[("c", t), ("d", r)]] * na + [[("d", t), ("c", -r)]] * nb
    coeff: dict = {}
    for path in itertools.product(*choices):
        k = sum(1 for m, _ in path if m == "c")
        coeff[k] = coeff.get(k, 0.0) + math.prod(w for _, w in path)
    n = na + nb
    pre = 1 / math.sqrt(math.factorial(na) * math.factorial(nb))
    return {(k, n - k): pre * c * math.sqrt(math.factorial(k) * math.factorial(n - k)) for k, c in coeff.items() if abs(c) > 1e-15}


def _annihilator(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1)


def splitter_unitary(dim: int, theta: float = math.pi / 4) -> np.ndarray:
    """exp(theta (a+ b - a b+)) on two modes truncated at ``dim`` levels each."""
    a = np.kron(_annihilator(dim), np.eye(dim))
    b = np.kron(np.eye(dim), _annihilator(dim))
    gen = a.T @ b - a @ b.T
    return expm(theta * gen).reshape(dim, dim, dim, dim)


def tmsv_hom_joint(v: float, x: float, n_max: int) -> float:
    """Coincidence probability of a TMSV (conditioned on >= 1 pair, truncated at n_max pairs).

    Modes (a_m, a_o, b_m, b_o); the b packet is v b_m + sqrt(1 - v^2) b_o.
    """
    dim = 2 * n_max + 1
    w = math.sqrt(max(0.0, 1 - v * v))
    u = splitter_unitary(dim)
    num = den = 0.0
    for n in range(1, n_max + 1):
        psi = np.zeros((dim,) * 4)
        for k in range(n + 1):
            psi[n, 0, k, n - k] = math.sqrt(math.comb(n, k)) * v**k * w ** (n - k)
        # u[i_a, i_b, j_a, j_b] = <i_a i_b| U |j_a j_b>
        out = np.einsum("ijkl,kbld->ibjd", u, psi)  # matched modes (a_m, b_m)
        out = np.einsum("mnkl,akcl->amcn", u, out)  # other modes (a_o, b_o)
        prob = np.abs(out) ** 2
        occ = np.indices(prob.shape)
        both = ((occ[0] + occ[1]) >= 1) & ((occ[2] + occ[3]) >= 1)
        p_n = (1 - x) * x**n
        num += p_n * prob[both].sum()
        den += p_n
    return num / den


def bell_correlation(phi_a: float, phi_b: float, t: float = 1 / math.sqrt(2)) -> float:
    """E for (|3,4> + e^{i(pa+pb)} |3',4'>)/sqrt(2) through one splitter per side."""
    r = math.sqrt(1 - t * t)
    U = np.array([[t, -r], [r, t]])  # column = input mode (unprimed, primed)
    ph = np.exp(1j * (phi_a + phi_b))
    e = 0.0
    for oa in range(2):
        for ob in range(2):
            amp = (U[oa, 0] * U[ob, 0] + ph * U[oa, 1] * U[ob, 1]) / math.sqrt(2)
            e += (1 if oa == ob else -1) * abs(amp) ** 2
    return e
