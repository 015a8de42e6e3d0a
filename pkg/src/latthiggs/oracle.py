"""Ground-truth engines for small boxes.

Three exact evaluators, in increasing order of reach:

* full enumeration of the coupled (sigma, phi) measure, exactly as written,
  with no gauge fixing;
* enumeration of the single-field unitary-gauge measure (m = n);
* a d = 2 transfer matrix over column states of vertical edges, with the
  horizontal edges summed into an XOR-convolution kernel, good up to N = 12.

For m = n = 2 the enumerations are reduced to integer histograms over
(excited plaquette count, excited edge count, insertion parity), so sweeping
couplings over a grid costs almost nothing beyond the first pass.  Weighted
sums are accumulated blockwise in fixed order and combined with ``math.fsum``,
so results are deterministic and good to near machine precision.

The module also hosts numeric checks of the monotonicity (in beta and kappa)
and second-Griffiths correlation inequalities on exact data.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from latthiggs import dec
from latthiggs.dec import BoxGeometry, Chain, Form
from latthiggs.errors import BudgetExceededError
from latthiggs.gaugemodel import ModelParams, character

DEFAULT_BUDGET = 2**28
_BLOCK = 1 << 20


def enumeration_budget() -> int:
    """State-count cap for exact enumeration (env LATTHIGGS_BUDGET overrides)."""
    raw = os.environ.get("LATTHIGGS_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    value = int(raw)
    if value < 1:
        raise ValueError(f"LATTHIGGS_BUDGET must be positive, got {value}")
    return value


@dataclass(frozen=True)
class ExactResult:
    """Summary of one exact run: normalized log Z, expectations per path, states."""

    log_z: float
    wilson_expectations: dict[str, complex]
    config_count: int


def path_margin(gamma: Chain, geometry: BoxGeometry) -> int:
    """Min lattice distance from the support of gamma to the box boundary."""
    if not gamma.coeffs:
        return geometry.N
    lo = [geometry.N] * geometry.d
    hi = [0] * geometry.d
    for (anchor, axes), _ in gamma.coeffs.items():
        for i in range(geometry.d):
            top = anchor[i] + (1 if i in axes else 0)
            lo[i] = min(lo[i], anchor[i])
            hi[i] = max(hi[i], top)
    return min(min(lo[i], geometry.N - hi[i]) for i in range(geometry.d))


# -- bitmask tooling for m = n = 2 ---------------------------------------------


def _edge_masks(geometry: BoxGeometry) -> np.ndarray:
    """Per-plaquette bitmask over edge indices (d sigma parity = masked popcount)."""
    masks = []
    for faces in geometry.boundary_rows(2):
        m = 0
        for i, _sign in faces:
            m ^= 1 << i
        masks.append(m)
    return np.array(masks, dtype=np.uint64)


def _odd_mask(gamma: Chain) -> int:
    """Bitmask of edges carrying an odd coefficient of gamma."""
    idx = gamma.geometry.index(1)
    m = 0
    for key, v in gamma.coeffs.items():
        if v % 2:
            m ^= 1 << idx[key]
    return m


def _boundary_parity_mask(gamma: Chain) -> int:
    """Bitmask of vertices where the boundary of gamma is odd."""
    b = dec.boundary(gamma)
    idx = gamma.geometry.index(0)
    m = 0
    for key, v in b.coeffs.items():
        if v % 2:
            m ^= 1 << idx[key]
    return m


_hist_cache: dict[tuple, np.ndarray] = {}


def _unitary_z2_histogram(geometry: BoxGeometry, gamma_mask: int) -> np.ndarray:
    """Counts[pl, ed, w] over all Z_2 edge configs of the box.

    pl = number of frustrated plaquettes, ed = number of excited edges,
    w = parity of the configuration on the masked edges.
    """
    key = ("u", geometry.d, geometry.N, gamma_mask)
    if key in _hist_cache:
        return _hist_cache[key]
    E = geometry.n_cells(1)
    P = geometry.n_cells(2)
    states = 1 << E
    if states > enumeration_budget():
        raise BudgetExceededError(
            f"2^{E} = {states} configurations exceed the budget of {enumeration_budget()}")
    pmask = _edge_masks(geometry)
    gmask = np.uint64(gamma_mask)
    counts = np.zeros((P + 1) * (E + 1) * 2, dtype=np.int64)
    for start in range(0, states, _BLOCK):
        s = np.arange(start, min(start + _BLOCK, states), dtype=np.uint64)
        ed = np.bitwise_count(s)
        pl = np.zeros(len(s), dtype=np.int64)
        for m in pmask:
            pl += (np.bitwise_count(s & m) & np.uint8(1)).astype(np.int64)
        w = (np.bitwise_count(s & gmask) & np.uint8(1)).astype(np.int64)
        flat = (pl * (E + 1) + ed.astype(np.int64)) * 2 + w
        counts += np.bincount(flat, minlength=len(counts))
    out = counts.reshape(P + 1, E + 1, 2)
    _hist_cache[key] = out
    return out


def _coupled_z2_histogram(geometry: BoxGeometry, gamma: Chain) -> np.ndarray:
    """Counts[pl, cross, w] over joint (sigma, phi) Z_2 configurations.

    cross counts edges where sigma and d phi disagree; w is the joint
    insertion parity sigma(gamma) + phi(boundary gamma).
    """
    gamma_mask = _odd_mask(gamma)
    bnd_mask = _boundary_parity_mask(gamma)
    key = ("c", geometry.d, geometry.N, gamma_mask, bnd_mask)
    if key in _hist_cache:
        return _hist_cache[key]
    E = geometry.n_cells(1)
    P = geometry.n_cells(2)
    V = geometry.n_cells(0)
    states = (1 << E) * (1 << V)
    if states > enumeration_budget():
        raise BudgetExceededError(
            f"2^{E + V} = {states} configurations exceed the budget of {enumeration_budget()}")

    pmask = _edge_masks(geometry)
    vindex = geometry.index(0)
    tails = np.empty(E, dtype=np.int64)
    heads = np.empty(E, dtype=np.int64)
    for e, cell in enumerate(geometry.cells(1)):
        a = cell.axes[0]
        head = tuple(v + 1 if i == a else v for i, v in enumerate(cell.anchor))
        tails[e] = vindex[(cell.anchor, ())]
        heads[e] = vindex[(head, ())]

    s = np.arange(1 << E, dtype=np.uint64)
    ed_pos = np.arange(E, dtype=np.uint64)
    pl = np.zeros(len(s), dtype=np.int64)
    for m in pmask:
        pl += (np.bitwise_count(s & m) & np.uint8(1)).astype(np.int64)
    sig_par = (np.bitwise_count(s & np.uint64(gamma_mask)) & np.uint8(1)).astype(np.int64)

    counts = np.zeros((P + 1) * (E + 1) * 2, dtype=np.int64)
    for phi_bits in range(1 << V):
        phi = np.uint64(phi_bits)
        dphi_bits = (phi >> tails.astype(np.uint64)) ^ (phi >> heads.astype(np.uint64))
        dphi_mask = np.uint64(np.sum(((dphi_bits & np.uint64(1)) << ed_pos)))
        cross = np.bitwise_count(s ^ dphi_mask).astype(np.int64)
        phi_par = int(np.bitwise_count(phi & np.uint64(bnd_mask)) & np.uint64(1))
        w = sig_par ^ phi_par
        flat = (pl * (E + 1) + cross) * 2 + w
        counts += np.bincount(flat, minlength=len(counts))
    out = counts.reshape(P + 1, E + 1, 2)
    _hist_cache[key] = out
    return out


def _histogram_expectation(counts: np.ndarray, beta: float, kappa: float) -> float:
    """Ratio of sign-weighted to plain sums over an exact (pl, ed, w) histogram."""
    P1, E1, _ = counts.shape
    num_terms = []
    den_terms = []
    for pl in range(P1):
        for ed in range(E1):
            c0, c1 = counts[pl, ed, 0], counts[pl, ed, 1]
            if c0 == 0 and c1 == 0:
                continue
            weight = math.exp(-4.0 * beta * pl - 4.0 * kappa * ed)
            num_terms.append((int(c0) - int(c1)) * weight)
            den_terms.append((int(c0) + int(c1)) * weight)
    return math.fsum(num_terms) / math.fsum(den_terms)


def _histogram_log_z(counts: np.ndarray, beta: float, kappa: float) -> float:
    """log sum of vacuum-normalized weights over the histogram."""
    P1, E1, _ = counts.shape
    terms = []
    for pl in range(P1):
        for ed in range(E1):
            c = int(counts[pl, ed, 0] + counts[pl, ed, 1])
            if c:
                terms.append(c * math.exp(-4.0 * beta * pl - 4.0 * kappa * ed))
    return math.log(math.fsum(terms))


# -- exact expectations ---------------------------------------------------------


def exact_coupled_expectation(gamma: Chain, params: ModelParams,
                              budget: int | None = None) -> complex:
    """E[W_gamma] by full enumeration of both fields under the coupled measure."""
    g = params.geometry
    limit = enumeration_budget() if budget is None else budget
    states = params.m ** g.n_cells(1) * params.n ** g.n_cells(0)
    if states > limit:
        raise BudgetExceededError(
            f"{states} coupled configurations exceed the budget of {limit}")
    if params.m == 2 and params.n == 2:
        counts = _coupled_z2_histogram(g, gamma)
        return complex(_histogram_expectation(counts, params.beta, params.kappa))
    return _coupled_general(gamma, params)


def _coupled_general(gamma: Chain, params: ModelParams) -> complex:
    """Plain-loop enumeration for general (m, n); small boxes only."""
    g = params.geometry
    m, n = params.m, params.n
    E, V, P = g.n_cells(1), g.n_cells(0), g.n_cells(2)
    rows2 = g.boundary_rows(2)
    vindex = g.index(0)
    ends = []
    for cell in g.cells(1):
        a = cell.axes[0]
        head = tuple(v + 1 if i == a else v for i, v in enumerate(cell.anchor))
        ends.append((vindex[(cell.anchor, ())], vindex[(head, ())]))
    gamma_e = np.zeros(E, dtype=np.int64)
    idx1 = g.index(1)
    for key, v in gamma.coeffs.items():
        gamma_e[idx1[key]] = v
    bnd = dec.boundary(gamma)
    bnd_v = np.zeros(V, dtype=np.int64)
    for key, v in bnd.coeffs.items():
        bnd_v[g.index(0)[key]] = v

    cos_m = [math.cos(2 * math.pi * k / m) for k in range(m)]
    num: list[complex] = []
    den: list[float] = []
    for sigma in product(range(m), repeat=E):
        dsig = [sum(sign * sigma[i] for i, sign in rows2[p]) % m for p in range(P)]
        plaq = sum(cos_m[v] for v in dsig)
        s_gamma = sum(int(gamma_e[e]) * sigma[e] for e in range(E))
        ins_sig = character(m, s_gamma)
        for phi in product(range(n), repeat=V):
            edge = sum(
                math.cos(2 * math.pi * (sigma[e] / m - (phi[h] - phi[t]) / n))
                for e, (t, h) in enumerate(ends)
            )
            w = math.exp(2 * params.beta * plaq + 2 * params.kappa * edge)
            p_gamma = sum(int(bnd_v[v]) * phi[v] for v in range(V))
            num.append(w * ins_sig * character(n, p_gamma).conjugate())
            den.append(w)
    total = complex(math.fsum(z.real for z in num), math.fsum(z.imag for z in num))
    return total / math.fsum(den)


def exact_unitary_expectation(gamma: Chain, params: ModelParams,
                              budget: int | None = None) -> complex:
    """E^(U)[rho(sigma(gamma))] by enumeration over the gauge field alone."""
    if params.m != params.n:
        raise ValueError(f"unitary gauge needs m = n, got m={params.m}, n={params.n}")
    g = params.geometry
    limit = enumeration_budget() if budget is None else budget
    states = params.m ** g.n_cells(1)
    if states > limit:
        raise BudgetExceededError(
            f"{states} gauge configurations exceed the budget of {limit}")
    if params.m == 2:
        counts = _unitary_z2_histogram(g, _odd_mask(gamma))
        return complex(_histogram_expectation(counts, params.beta, params.kappa))
    return _unitary_general(gamma, params)


def _unitary_general(gamma: Chain, params: ModelParams) -> complex:
    g = params.geometry
    m = params.m
    E, P = g.n_cells(1), g.n_cells(2)
    rows2 = g.boundary_rows(2)
    gamma_e = np.zeros(E, dtype=np.int64)
    for key, v in gamma.coeffs.items():
        gamma_e[g.index(1)[key]] = v
    cos_m = [math.cos(2 * math.pi * k / m) for k in range(m)]
    num: list[complex] = []
    den: list[float] = []
    for sigma in product(range(m), repeat=E):
        dsig = [sum(sign * sigma[i] for i, sign in rows2[p]) % m for p in range(P)]
        plaq = sum(cos_m[v] for v in dsig)
        edge = sum(cos_m[v % m] for v in sigma)
        w = math.exp(2 * params.beta * plaq + 2 * params.kappa * edge)
        s_gamma = sum(int(gamma_e[e]) * sigma[e] for e in range(E))
        num.append(w * character(m, s_gamma))
        den.append(w)
    total = complex(math.fsum(z.real for z in num), math.fsum(z.imag for z in num))
    return total / math.fsum(den)


def unitary_log_z_activity(params: ModelParams, budget: int | None = None) -> float:
    """log of the vacuum-normalized partition sum: log sum_sigma activity(sigma).

    This is the quantity the cluster series for the log partition function
    converges to (the unnormalized log Z differs by the energy of the empty
    configuration).
    """
    if params.m != 2 or params.n != 2:
        raise ValueError("activity-normalized log Z is defined for m = n = 2")
    g = params.geometry
    limit = enumeration_budget() if budget is None else budget
    if 2 ** g.n_cells(1) > limit:
        raise BudgetExceededError("box too large for exact log Z")
    counts = _unitary_z2_histogram(g, 0)
    return _histogram_log_z(counts, params.beta, params.kappa)


def exact_summary(params: ModelParams, gammas: dict[str, Chain],
                  method: str = "unitary") -> ExactResult:
    """Bundle log Z and Wilson expectations for a set of named paths."""
    g = params.geometry
    if method == "unitary":
        count = params.m ** g.n_cells(1)
        expectations = {k: exact_unitary_expectation(c, params) for k, c in gammas.items()}
        log_z = unitary_log_z_activity(params) if params.m == params.n == 2 else math.nan
    elif method == "coupled":
        count = params.m ** g.n_cells(1) * params.n ** g.n_cells(0)
        expectations = {k: exact_coupled_expectation(c, params) for k, c in gammas.items()}
        log_z = math.nan
    else:
        raise ValueError(f"unknown method {method!r}")
    return ExactResult(log_z=log_z, wilson_expectations=expectations, config_count=count)


# -- d = 2 transfer matrix -------------------------------------------------------


def _fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform."""
    a = a.copy()
    h = 1
    n = len(a)
    while h < n:
        a = a.reshape(-1, 2, h)
        top = a[:, 0, :] + a[:, 1, :]
        bot = a[:, 0, :] - a[:, 1, :]
        a = np.stack([top, bot], axis=1).reshape(n)
        h *= 2
    return a


def _xor_convolve(kernel_hat: np.ndarray, psi: np.ndarray) -> np.ndarray:
    n = len(psi)
    return _fwht(kernel_hat * _fwht(psi)) / n


def _slab_kernel(N: int, beta: float, kappa: float, insert_row: int | None) -> np.ndarray:
    """K(a) = sum over horizontal-edge configs of one slab, as a function of
    a = XOR of the two adjacent vertical-edge column states.

    Row weights use vacuum-normalized activities (excited plaquette e^{-4 beta},
    excited edge e^{-4 kappa}); ``insert_row`` flips the sign of the horizontal
    edge at that row, which is how a Wilson insertion enters.
    """
    size = 1 << N
    a = np.arange(size, dtype=np.uint64)
    abits = [((a >> np.uint64(y)) & np.uint64(1)).astype(np.float64) for y in range(N)]
    wb = math.exp(-4.0 * beta)
    wk = math.exp(-4.0 * kappa)

    def emission(y: int, h: int) -> float:
        w = wk if h else 1.0
        if insert_row is not None and y == insert_row and h:
            w = -w
        return w

    amp = [np.full(size, emission(0, h)) for h in (0, 1)]
    for y in range(1, N + 1):
        pa = abits[y - 1]
        # plaquette between rows y-1 and y: weight wb when a_(y-1) ^ h' ^ h = 1
        pw = [1.0 * (1.0 - pa) + wb * pa,   # h' ^ h = 0
              wb * (1.0 - pa) + 1.0 * pa]   # h' ^ h = 1
        new0 = (amp[0] * pw[0] + amp[1] * pw[1]) * emission(y, 0)
        new1 = (amp[0] * pw[1] + amp[1] * pw[0]) * emission(y, 1)
        amp = [new0, new1]
    return amp[0] + amp[1]


def transfer_matrix_expectation(gamma: Chain, params: ModelParams) -> float:
    """Exact E^(U)[W_gamma] for a straight axis-0 path in d = 2, m = n = 2.

    Column states are the N vertical edges at fixed x; slabs between columns
    carry the N+1 horizontal edges and N plaquettes, summed into a kernel that
    depends only on the XOR of the neighboring column states.
    """
    if params.d != 2 or params.m != 2 or params.n != 2:
        raise ValueError("transfer matrix supports d = 2, m = n = 2 only")
    N = params.N
    if N > 12:
        raise ValueError(f"transfer matrix limited to N <= 12, got N={N}")
    x0, y0, length = _straight_axis0_span(gamma)
    if length > N or not 0 < y0 < N:
        raise ValueError("path must lie strictly inside the box rows")

    size = 1 << N
    counts = np.bitwise_count(np.arange(size, dtype=np.uint64)).astype(np.float64)
    D = np.exp(-4.0 * params.kappa * counts)
    k_plain = _fwht(_slab_kernel(N, params.beta, params.kappa, None))
    k_ins = _fwht(_slab_kernel(N, params.beta, params.kappa, y0))

    def run(insert: bool) -> float:
        psi = D.copy()
        for x in range(N):
            hat = k_ins if insert and x0 <= x < x0 + length else k_plain
            psi = _xor_convolve(hat, psi) * D
        return float(np.sum(psi))

    return run(True) / run(False)


def transfer_matrix_expectation_hp(gamma: Chain, params: ModelParams,
                                   dps: int = 40) -> float:
    """Arbitrary-precision variant of ``transfer_matrix_expectation``.

    Same kernel construction, carried out in mpmath arithmetic, so residuals
    far below the float64 noise floor can be resolved.  Returns an mpmath
    float.
    """
    import mpmath

    if params.d != 2 or params.m != 2 or params.n != 2:
        raise ValueError("transfer matrix supports d = 2, m = n = 2 only")
    N = params.N
    if N > 12:
        raise ValueError(f"transfer matrix limited to N <= 12, got N={N}")
    x0, y0, length = _straight_axis0_span(gamma)
    if length > N or not 0 < y0 < N:
        raise ValueError("path must lie strictly inside the box rows")

    with mpmath.workdps(dps):
        size = 1 << N
        wb = mpmath.exp(-4 * mpmath.mpf(params.beta))
        wk = mpmath.exp(-4 * mpmath.mpf(params.kappa))
        one = mpmath.mpf(1)

        def fwht(vec: list) -> list:
            vec = list(vec)
            h = 1
            while h < size:
                for i in range(0, size, h * 2):
                    for j in range(i, i + h):
                        x, y = vec[j], vec[j + h]
                        vec[j], vec[j + h] = x + y, x - y
                h *= 2
            return vec

        def kernel(insert_row) -> list:
            def emission(y: int, h: int):
                w = wk if h else one
                if insert_row is not None and y == insert_row and h:
                    w = -w
                return w

            amp0 = [emission(0, 0)] * size
            amp1 = [emission(0, 1)] * size
            for y in range(1, N + 1):
                bit = 1 << (y - 1)
                e0, e1 = emission(y, 0), emission(y, 1)
                n0, n1 = [], []
                for a in range(size):
                    same, flip = (wb, one) if a & bit else (one, wb)
                    n0.append((amp0[a] * same + amp1[a] * flip) * e0)
                    n1.append((amp0[a] * flip + amp1[a] * same) * e1)
                amp0, amp1 = n0, n1
            return [amp0[a] + amp1[a] for a in range(size)]

        d_vec = [wk ** bin(v).count("1") for v in range(size)]
        k_plain = fwht(kernel(None))
        k_ins = fwht(kernel(y0))
        inv = one / size

        def run(insert: bool):
            psi = list(d_vec)
            for x in range(N):
                hat = k_ins if insert and x0 <= x < x0 + length else k_plain
                psi = fwht(psi)
                psi = [hat[a] * psi[a] for a in range(size)]
                psi = fwht(psi)
                psi = [psi[a] * inv * d_vec[a] for a in range(size)]
            return mpmath.fsum(psi)

        return run(True) / run(False)


def _straight_axis0_span(gamma: Chain) -> tuple[int, int, int]:
    """(x0, y0, length) of a straight, unit-coefficient axis-0 path."""
    if not gamma.coeffs:
        raise ValueError("empty path")
    ys = set()
    xs = []
    for (anchor, axes), v in gamma.coeffs.items():
        if axes != (0,) or abs(v) != 1:
            raise ValueError("path must consist of axis-0 edges with unit coefficients")
        xs.append(anchor[0])
        ys.add(anchor[1])
    if len(ys) != 1:
        raise ValueError("path must stay in a single row")
    xs.sort()
    if xs != list(range(xs[0], xs[0] + len(xs))):
        raise ValueError("path edges must be consecutive")
    return xs[0], ys.pop(), len(xs)


def centered_line(params: ModelParams, length: int) -> Chain:
    """Straight axis-0 path of the given length, centered in the box."""
    if length < 1 or length > params.N:
        raise ValueError(f"length must be in [1, N] = [1, {params.N}]")
    g = params.geometry
    x0 = (params.N - length) // 2
    rest = tuple([params.N // 2] * (params.d - 1))
    return dec.straight_path(g, (x0, *rest), 0, length)


# -- correlation-inequality checks ----------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a numeric inequality sweep."""

    checks: int
    max_violation: float
    worst_case: tuple | None

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-12


def check_monotonicity(params: ModelParams, gamma: Chain,
                       betas: list[float], kappas: list[float],
                       method: str = "unitary") -> CheckReport:
    """Verify E[W_gamma] is nondecreasing along the beta and kappa grids."""
    evaluate = {
        "unitary": exact_unitary_expectation,
        "coupled": exact_coupled_expectation,
    }[method]
    values = np.empty((len(betas), len(kappas)))
    for i, b in enumerate(betas):
        for j, k in enumerate(kappas):
            values[i, j] = evaluate(gamma, params.replace(beta=b, kappa=k)).real
    worst = 0.0
    worst_case = None
    checks = 0
    for i in range(len(betas)):
        for j in range(len(kappas)):
            for di, dj in ((1, 0), (0, 1)):
                ii, jj = i + di, j + dj
                if ii >= len(betas) or jj >= len(kappas):
                    continue
                checks += 1
                drop = values[i, j] - values[ii, jj]
                if drop > worst:
                    worst = drop
                    worst_case = (betas[i], kappas[j], betas[ii], kappas[jj])
    return CheckReport(checks=checks, max_violation=max(worst, 0.0), worst_case=worst_case)


def check_griffiths(params: ModelParams, gamma: Chain, gamma2: Chain,
                    method: str = "unitary") -> CheckReport:
    """Verify the product inequality E[W_(c+c')] >= E[W_c] E[W_c']."""
    evaluate = {
        "unitary": exact_unitary_expectation,
        "coupled": exact_coupled_expectation,
    }[method]
    joint = evaluate(gamma + gamma2, params).real
    lhs = evaluate(gamma, params).real
    rhs = evaluate(gamma2, params).real
    violation = lhs * rhs - joint
    return CheckReport(checks=1, max_violation=max(violation, 0.0),
                       worst_case=(params.beta, params.kappa) if violation > 0 else None)
