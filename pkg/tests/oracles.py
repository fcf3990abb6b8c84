"""Independent reference computations used by the tests.

Nothing here imports the package under test; each oracle recomputes a
quantity from first principles (explicit matrices, enumeration, textbook
formulas) so the tests compare two separate routes.
"""
import itertools
import math

import numpy as np


def ket(theta):
    return np.array([math.cos(theta), math.sin(theta)], dtype=complex)


def projector(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def basis_projectors(angle):
    """Projectors onto the two eigenstates of a basis rotated by ``angle``."""
    return projector(ket(angle)), projector(ket(angle + math.pi / 2))


def born(psi, angle):
    p0, p1 = basis_projectors(angle)
    psi = np.asarray(psi, dtype=complex)
    return float(np.real(psi.conj() @ p0 @ psi)), float(np.real(psi.conj() @ p1 @ psi))


BB84_KETS = {
    (0, "Z"): np.array([1, 0], dtype=complex),
    (1, "Z"): np.array([0, 1], dtype=complex),
    (0, "X"): np.array([1, 1], dtype=complex) / math.sqrt(2),
    (1, "X"): np.array([1, -1], dtype=complex) / math.sqrt(2),
}
BASIS_ANGLE = {"Z": 0.0, "X": math.pi / 4}


def intercept_error(eve_angle, bit=0, basis="Z"):
    """P(Babe's bit != Adam's) when Eve measures at ``eve_angle`` and resends,
    and Babe measures in Adam's basis.  Enumerates Eve's outcomes."""
    psi = BB84_KETS[(bit, basis)]
    total = 0.0
    for eve_out, p_eve in enumerate(born(psi, eve_angle)):
        resent = ket(eve_angle + eve_out * math.pi / 2)
        p_babe = born(resent, BASIS_ANGLE[basis])
        total += p_eve * p_babe[1 - bit]
    return total


def no_postselection_optimum(angles):
    """max over angles of sum_o max_b P(o, b) for the uniform BB84 ensemble."""
    best = 0.0
    for a in angles:
        joint = np.zeros((2, 2))
        for (bit, basis), psi in BB84_KETS.items():
            p = born(psi, a)
            joint[0, bit] += 0.25 * p[0]
            joint[1, bit] += 0.25 * p[1]
        best = max(best, joint.max(axis=1).sum())
    return best


def prs_session_expectation(f, eta, breidbart_c=math.cos(math.pi / 8) ** 2):
    """Closed-form sifted-key statistics for Breidbart intercept with delete-bit-one.

    Kept attacked qubits: Eve saw 0 (prob 1/2) and forwards a Breidbart-0
    state; Babe reads 0 with prob c in either BB84 basis, and errs with
    probability 2c(1-c).  Returns (g, qber, zero_fraction, arrival_rate).
    """
    kept = f * 0.5
    clean = (1 - f) * eta
    g = kept / (kept + clean)
    c = breidbart_c
    return g, g * 2 * c * (1 - c), 0.5 * (1 - g) + g * c, kept + clean


def enumerate_session(f, eta, eve_angle, keep=(1.0, 1.0), eps=0.0):
    """Brute-force enumeration over Adam (bit, basis), attack, Eve outcome,
    Babe basis, Babe outcome, intrinsic flip.  Returns (qber, zero_fraction)
    on the sifted positions."""
    w_sift = w_err = w_zero = 0.0
    for bit, basis, babe_basis in itertools.product((0, 1), ("Z", "X"), ("Z", "X")):
        if babe_basis != basis:
            continue
        psi = BB84_KETS[(bit, basis)]
        pre = 0.25 * 0.5
        branches = [((1 - f) * eta, psi)]
        for eve_out, p_eve in enumerate(born(psi, eve_angle)):
            branches.append((f * p_eve * keep[eve_out], ket(eve_angle + eve_out * math.pi / 2)))
        for w, state in branches:
            p_babe = born(state, BASIS_ANGLE[babe_basis])
            for raw, p_raw in enumerate(p_babe):
                for flip, p_flip in ((0, 1 - eps), (1, eps)):
                    out = raw ^ flip
                    ww = pre * w * p_raw * p_flip
                    w_sift += ww
                    w_err += ww * (out != bit)
                    w_zero += ww * (out == 0)
    return w_err / w_sift, w_zero / w_sift


def poisson_pmf(k, mu):
    return math.exp(-mu) * mu**k / math.factorial(k)


def binary_entropy(p):
    from scipy.stats import entropy

    return float(entropy([p, 1 - p], base=2))
