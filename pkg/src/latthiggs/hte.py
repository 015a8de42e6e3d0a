"""High-temperature (character) expansion of the coupled partition sum.

Expanding each local Boltzmann factor e^{a rho(x)} in characters of Z_q gives
coefficient families

    phi_{a,q}(i)    = sum_j a^{qj+i} / (qj+i)!            (i in Z_q)
    barphi_{a,q}(j) = sum_i phi_{a,q}(i) phi_{a,q}(i-j)   (orientation pairing)

and the partition sum with a Wilson insertion becomes a constrained double sum
over 2-forms: one mod m for the plaquette coupling, one mod lcm(m,n) for the
edge coupling, tied together by a mod-m coclosedness indicator.  Only ratios
of these sums are observable, so the gamma-independent prefactors are never
materialized.

For m = n = 2 the expansion collapses to a single Z_2 2-form with per-cell
weights hatphi_a(j) = barphi_{a,2}(j)/barphi_{a,2}(0), i.e. 1 and tanh(2a).
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from latthiggs import dec
from latthiggs.dec import Chain, Form
from latthiggs.errors import BudgetExceededError
from latthiggs.gaugemodel import ModelParams

_SERIES_RTOL = 1e-18


def phi(q: int, a: float, i: int) -> float:
    """phi_{a,q}(i): the i-th mod-q slice of the exponential series of a."""
    if a < 0:
        raise ValueError(f"coupling must be nonnegative, got {a}")
    if q < 2:
        raise ValueError(f"modulus must be >= 2, got {q}")
    i = i % q
    term = a**i / math.factorial(i)
    total = term
    k = i
    while term != 0.0:
        for _ in range(q):
            k += 1
            term *= a / k
        if term < _SERIES_RTOL * total:
            total += term
            break
        total += term
    return total


def barphi(q: int, a: float, j: int) -> float:
    """Convolution sum_i phi(i) phi(i-j); symmetric under j -> q-j."""
    j = j % q
    phis = [phi(q, a, i) for i in range(q)]
    return math.fsum(phis[i] * phis[(i - j) % q] for i in range(q))


def hatphi(a: float, j: int) -> float:
    """Normalized q=2 weight: hatphi(0) = 1, hatphi(1) = tanh(2a)."""
    return 1.0 if j % 2 == 0 else math.tanh(2.0 * a)


def _gamma_on_edges(gamma: Chain, n_edges: int) -> np.ndarray:
    out = np.zeros(n_edges, dtype=np.int64)
    idx = gamma.geometry.index(1)
    for key, v in gamma.coeffs.items():
        out[idx[key]] = v
    return out


def z_gamma_hte(gamma: Chain, params: ModelParams,
                budget: int | None = None) -> float:
    """The expanded partition double sum with insertion ``gamma``.

    Returns the sum over all pairs of 2-forms (omega' mod lcm(m,n), omega
    mod m) of the product plaquette and edge weights, restricted to pairs
    whose mod-m reduction is coclosed.  The value equals Z[gamma] up to a
    gamma-independent positive constant, so ratios against gamma = 0
    reproduce Wilson expectations exactly.
    """
    from latthiggs.oracle import enumeration_budget

    g = params.geometry
    m, n = params.m, params.n
    ell = math.lcm(m, n)
    P = g.n_cells(2)
    E = g.n_cells(1)
    states = (ell**P) * (m**P)
    limit = enumeration_budget() if budget is None else budget
    if states > limit:
        raise BudgetExceededError(
            f"{states} expansion states exceed the budget of {limit}")

    gamma_e = _gamma_on_edges(gamma, E)
    corows = g.coboundary_rows(1)

    # plaquette weights barphi_{beta,m}(w) and edge weights barphi_{kappa,lcm}(x)
    bp = [barphi(m, params.beta, w) for w in range(m)]
    be = [barphi(ell, params.kappa, x) for x in range(ell)]

    terms = []
    for omega_p in product(range(ell), repeat=P):
        # coderivative of omega' on each edge, as an integer before reduction
        delta_wp = [
            sum(sign * omega_p[j] for j, sign in corows[e]) for e in range(E)
        ]
        edge_w = 1.0
        for e in range(E):
            edge_w *= be[(delta_wp[e] - gamma_e[e]) % ell]
        if edge_w == 0.0:
            continue
        for omega in product(range(m), repeat=P):
            ok = True
            for e in range(E):
                s = delta_wp[e] + sum(sign * omega[j] for j, sign in corows[e])
                if s % m != 0:
                    ok = False
                    break
            if not ok:
                continue
            plaq_w = 1.0
            for j in range(P):
                plaq_w *= bp[omega[j] % m]
            terms.append(plaq_w * edge_w)
    return math.fsum(terms)


def hte_expectation(gamma: Chain, params: ModelParams,
                    budget: int | None = None) -> float:
    """Wilson expectation as the ratio of expanded sums with and without gamma."""
    zero = Chain(gamma.geometry, 1)
    return z_gamma_hte(gamma, params, budget) / z_gamma_hte(zero, params, budget)


# -- the Z_2 specialization ----------------------------------------------------


def z2_hte_weight(omega: Form, gamma: Chain, beta: float, kappa: float) -> float:
    """Weight of a Z_2 plaquette configuration relative to the path gamma.

    Every plaquette contributes hatphi_beta(omega(p)); every edge contributes
    hatphi_kappa(delta omega(e) + gamma[e]) / hatphi_kappa(gamma[e]), so the
    empty configuration has weight one.
    """
    if omega.q != 2 or omega.degree != 2:
        raise ValueError("omega must be a 2-form mod 2")
    gamma_e = _gamma_on_edges(gamma, omega.geometry.n_cells(1))
    if kappa <= 0 and np.any(gamma_e % 2 != 0):
        raise ValueError("relative weights against a nonempty path need kappa > 0")
    delta = dec.coderivative(omega)
    tb = math.tanh(2.0 * beta)
    w = tb ** int(np.count_nonzero(omega.values))
    tk = math.tanh(2.0 * kappa)
    for e, dv in enumerate(delta.values):
        num = hatphi(kappa, int(dv) + int(gamma_e[e]))
        den = tk if gamma_e[e] % 2 else 1.0
        w *= num / den
    return w


def z2_hat_z(gamma: Chain, params: ModelParams) -> float:
    """hatphi_kappa(1)^{|gamma|} * sum_omega z2_hte_weight(omega, gamma).

    Computed in the unnormalized per-edge form, which stays finite at
    kappa = 0 as well.
    """
    if params.m != 2 or params.n != 2:
        raise ValueError("the single-form expansion needs m = n = 2")
    g = params.geometry
    P = g.n_cells(2)
    E = g.n_cells(1)
    gamma_e = _gamma_on_edges(gamma, E) % 2
    corows = g.coboundary_rows(1)
    tb = math.tanh(2.0 * params.beta)
    tk = math.tanh(2.0 * params.kappa)
    terms = []
    for bits in range(1 << P):
        plaq_w = tb ** bin(bits).count("1")
        if plaq_w == 0.0 and bits:
            continue
        w = plaq_w
        for e in range(E):
            dv = sum(sign * ((bits >> j) & 1) for j, sign in corows[e])
            if (dv + gamma_e[e]) % 2:
                w *= tk
        terms.append(w)
    return math.fsum(terms)


def z2_hte_expectation(gamma: Chain, params: ModelParams) -> float:
    """Wilson expectation from the Z_2 single-form expansion."""
    zero = Chain(gamma.geometry, 1)
    return z2_hat_z(gamma, params) / z2_hat_z(zero, params)
