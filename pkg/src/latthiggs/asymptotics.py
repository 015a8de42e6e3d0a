"""Per-edge decay constant and constant term of the pure perimeter law.

For a straight Wilson line, -log <W_n> = a n + C + (exponentially small), and
both a and C are cluster series:

* a sums, over clusters touching one fixed bulk edge of the line, the
  per-edge interaction weight of the cluster with the bi-infinite line;
* C sums, over positions j along the half line, the difference between the
  half-line and full-line weights; only clusters at least as large as their
  distance j to the endpoint contribute, which makes the position sum finite
  at any truncation.

Infinite-line sums are realized by translation invariance: a single catalog of
clusters anchored at a window-centered edge is enumerated once, and the line
predicates are shifted across it.  Window margins exceed the maximal reach of
any cluster in the catalog, so the finite window is exact.

Truncation tails come from the per-cell cluster bounds in ``clusters``; error
envelopes for the residual at length n are evaluated from the explicit
three-term (edge phase) and endpoint-pair (plaquette phase) expressions, and
are also condensed into (D, D') with envelope(n) <= D exp(-D' n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from latthiggs import clusters as cl
from latthiggs import hte
from latthiggs.dec import box_geometry
from latthiggs.errors import OutsideRegimeError
from latthiggs.gaugemodel import ModelParams


@dataclass(frozen=True)
class DecaySummary:
    """Truncated decay constants with their tail and envelope bounds."""

    phase: str
    a: float
    C: float
    a_tail: float
    C_tail: float
    envelope_D: float
    envelope_Dprime: float
    eps: float
    max_weight: int
    d: int
    beta: float
    kappa: float

    def envelope(self, n: int) -> float:
        """Exponential majorant D e^{-D' n} of the residual at length n."""
        return self.envelope_D * math.exp(-self.envelope_Dprime * n)

    def residual_budget(self, n: int) -> float:
        """Everything the residual at length n may legitimately contain."""
        return self.a_tail * n + self.C_tail + self.envelope(n)

    def to_mapping(self) -> dict:
        return {
            "phase": self.phase, "a": self.a, "C": self.C,
            "a_tail": self.a_tail, "C_tail": self.C_tail,
            "envelope_D": self.envelope_D, "envelope_Dprime": self.envelope_Dprime,
            "eps": self.eps, "max_weight": self.max_weight, "d": self.d,
            "beta": self.beta, "kappa": self.kappa,
        }


# -- line-window catalogs ------------------------------------------------------


class _LineWindow:
    """Clusters anchored at a centered axis-0 edge, with line bookkeeping.

    Edge offsets are x-coordinates relative to the anchor edge: the line edge
    at offset t covers [t, t+1] on the axis through the anchor.  The half line
    with endpoint j steps left of the anchor keeps offsets >= -j.
    """

    def __init__(self, phase: str, d: int, max_weight: int):
        if max_weight < 1:
            raise ValueError("max_weight must be >= 1")
        self.phase = phase
        self.d = d
        self.max_weight = max_weight
        Nw = 4 * max_weight + 8
        self.geometry = box_geometry(d, Nw)
        self.space = cl.PolymerSpace(phase, self.geometry)
        center = tuple([Nw // 2] * d)
        self.anchor_edge = self.geometry.index(1)[(center, (0,))]
        self._c0 = Nw // 2
        self._row = center[1:]
        if phase == "higgs":
            raw = self.space.anchored_clusters(self.anchor_edge, max_weight)
        else:
            raw = self.space.coboundary_anchored_clusters(self.anchor_edge,
                                                          max_weight)
        self.entries = [self._prepare(c) for c in raw]

    def _line_offset(self, edge_id: int) -> int | None:
        cell = self.geometry.cells(1)[edge_id]
        if cell.axes != (0,) or cell.anchor[1:] != self._row:
            return None
        return cell.anchor[0] - self._c0

    def _prepare(self, cluster: cl.Cluster):
        if self.phase == "higgs":
            n1, n2 = cl.higgs_norms(cluster, self.space)
            polys = []
            for p, m in cluster.items:
                offs = frozenset(
                    t for t in (self._line_offset(e) for e in p.cells)
                    if t is not None)
                polys.append((m, offs))
            return _HiggsEntry(cluster.ursell / cluster.multiplicity_factor,
                               n1, n2, tuple(polys))
        polys = []
        for p, m in cluster.items:
            dsup = self.space.dsupport(p.cells)
            offs = frozenset(
                t for t in (self._line_offset(e) for e in dsup)
                if t is not None)
            polys.append((m, p.size, len(dsup) - len(offs), offs))
        total = cluster.total_cells
        return _ConfEntry(cluster.ursell / cluster.multiplicity_factor,
                          total, tuple(polys))


@dataclass(frozen=True)
class _HiggsEntry:
    u_norm: float              # Ursell / multiplicity factorials
    n1: int                    # multiplicity-weighted edge count
    n2: int                    # multiplicity-weighted frustrated-plaquette count
    polys: tuple               # (mult, line offsets of the support) per polymer

    def f_weight(self, cut: int | None, beta: float, kappa: float) -> float:
        """F against the full line (cut None) or the half line with offsets >= cut."""
        parity = 0
        covered: set[int] = set()
        for m, offs in self.polys:
            kept = offs if cut is None else {t for t in offs if t >= cut}
            parity += m * len(kept)
            covered.update(kept)
        if parity % 2 == 0 or not covered:
            return 0.0
        psi = self.u_norm * math.exp(-4.0 * beta * self.n2 - 4.0 * kappa * self.n1)
        return 2.0 * psi / len(covered)


@dataclass(frozen=True)
class _ConfEntry:
    u_norm: float
    total_cells: int           # multiplicity-weighted plaquette count
    polys: tuple               # (mult, size, off-line odd edges, line offsets)

    def h_weight(self, cut: int | None, beta: float, kappa: float) -> float:
        """(Psi^0 - Psi^gamma) / |line cap odd boundary| for the cut line."""
        tb = math.tanh(2.0 * beta)
        tk = math.tanh(2.0 * kappa)
        if tb == 0.0:
            return 0.0
        w0 = wg = self.u_norm
        covered: set[int] = set()
        for m, size, off_line, offs in self.polys:
            kept = offs if cut is None else {t for t in offs if t >= cut}
            covered.update(kept)
            on = len(kept)
            base = tb**size * tk ** (off_line + len(offs))
            w0 *= base**m
            wg *= (base * tk ** (-2 * on)) ** m
        if not covered:
            return 0.0
        return (w0 - wg) / len(covered)


# -- spec-level weights ----------------------------------------------------------


def f_weight(cluster: cl.Cluster, space: cl.PolymerSpace, gamma_edges: frozenset,
             beta: float, kappa: float) -> float:
    """Edge-phase interaction weight of a cluster with a path.

    Psi(S) (1 - rho(S(gamma))) / |supp S cap supp gamma|; zero when the
    cluster meets the path an even number of times per multiplicity.
    """
    covered = cluster.support() & gamma_edges
    if not covered:
        raise ValueError("cluster support does not meet the path")
    parity = sum(m * len(gamma_edges.intersection(p.cells))
                 for p, m in cluster.items)
    if parity % 2 == 0:
        return 0.0
    return 2.0 * cl.psi_higgs(cluster, space, beta, kappa) / len(covered)


def g_weight(cluster: cl.Cluster, space: cl.PolymerSpace, gamma_edges: frozenset,
             beta: float, kappa: float) -> float:
    """Plaquette-phase weight difference (Psi^gamma - Psi^0) / |gamma cap supp dS|."""
    dsup: set[int] = set()
    for p, _ in cluster.items:
        dsup |= space.dsupport(p.cells)
    covered = dsup & gamma_edges
    if not covered:
        raise ValueError("odd boundary of the cluster does not meet the path")
    psi0 = cl.psi_conf(cluster, space, frozenset(), beta, kappa)
    psig = cl.psi_conf(cluster, space, gamma_edges, beta, kappa)
    return (psig - psi0) / len(covered)


# -- decay constants --------------------------------------------------------------


_window_cache: dict[tuple, _LineWindow] = {}


def _window(phase: str, d: int, max_weight: int) -> _LineWindow:
    key = (phase, d, max_weight)
    if key not in _window_cache:
        _window_cache[key] = _LineWindow(phase, d, max_weight)
    return _window_cache[key]


def decay_constants_higgs(beta: float, kappa: float, max_weight: int = 4,
                          d: int = 2, eps: float | None = None) -> DecaySummary:
    """Edge-phase decay constants from the truncated anchored cluster series."""
    kap0 = cl.kappa0_higgs(d)
    if kappa <= kap0:
        raise OutsideRegimeError(
            f"kappa={kappa} is not above the edge-phase threshold {kap0:.6f}")
    if eps is None:
        eps = cl.best_eps_higgs(d, kappa, max_weight + 1)
    win = _window("higgs", d, max_weight)
    J = max_weight

    a = math.fsum(e.f_weight(None, beta, kappa) for e in win.entries)
    c_terms = []
    for j in range(0, J + 1):
        for e in win.entries:
            if e.n1 < j:
                continue
            c_terms.append(e.f_weight(-j, beta, kappa)
                           - e.f_weight(None, beta, kappa))
    C = 2.0 * math.fsum(c_terms)

    r = kappa - kap0 - eps
    q = math.exp(-4.0 * r)
    per_edge = cl.higgs_tail_per_edge(d, kappa, J + 1, eps)
    a_tail = 2.0 * per_edge
    # dropped C terms: positions j <= J lose clusters above the cutoff,
    # positions j > J are lost entirely; |F(half) - F(full)| <= 4 |Psi|
    c_eps = cl.c_eps_higgs(d, eps)
    C_tail = 2.0 * c_eps * ((J + 1) * q ** (J + 1) + q ** (J + 1) / (1.0 - q))

    D, Dp = _condense_envelope(0.75 * c_eps, c_eps / (2.0 * (1.0 - q)), q)
    return DecaySummary("higgs", a, C, a_tail, C_tail, D, Dp, eps, J, d,
                        beta, kappa)


def decay_constants_conf(beta: float, kappa: float, max_weight: int = 4,
                         d: int = 2, eps: float | None = None) -> DecaySummary:
    """Plaquette-phase decay constants; the per-edge term is -log tanh(2 kappa)
    and the cluster series corrects it."""
    b0 = cl.beta0_conf(d)
    if not 0 <= beta < b0:
        raise OutsideRegimeError(
            f"beta={beta} is not below the plaquette-phase threshold {b0:.6g}")
    if kappa <= 0:
        raise OutsideRegimeError("the plaquette phase needs kappa > 0")
    tk = math.tanh(2.0 * kappa)
    J = max_weight
    if beta == 0.0:
        return DecaySummary("conf", -math.log(tk), 0.0, 0.0, 0.0, 0.0,
                            math.inf, 0.0, J, d, beta, kappa)
    if eps is None:
        eps = cl.best_eps_conf(d, beta, max_weight + 1)
    win = _window("conf", d, max_weight)

    a = -math.log(tk) + math.fsum(e.h_weight(None, beta, kappa)
                                  for e in win.entries)
    c_terms = []
    for j in range(0, J + 1):
        for e in win.entries:
            if e.total_cells < j:
                continue
            c_terms.append(e.h_weight(-j, beta, kappa)
                           - e.h_weight(None, beta, kappa))
    C = 2.0 * math.fsum(c_terms)

    per_edge = cl.conf_tail_per_edge(d, beta, J + 1, eps)
    a_tail = 2.0 * per_edge
    ratio = math.tanh(2.0 * beta) / math.tanh(2.0 * (beta + eps))
    c2 = cl.c2_conf(d, beta + eps)
    base = 4.0 * 2.0 * (d - 1) * c2      # |H(half)-H(full)| <= 4 per-edge bound
    C_tail = 2.0 * base * ((J + 1) * ratio ** (J + 1)
                           + ratio ** (J + 1) / (1.0 - ratio))

    A = 4.0 * c2 * (d - 1) + 16.0 * (d - 1) * c2
    B = 16.0 * (d - 1) * c2 / (1.0 - ratio)
    D, Dp = _condense_envelope(A, B, ratio)
    return DecaySummary("conf", a, C, a_tail, C_tail, D, Dp, eps, J, d,
                        beta, kappa)


def _condense_envelope(A: float, B: float, q: float) -> tuple[float, float]:
    """(D, D') with A n q^n + B q^n <= D e^{-D' n} for all n >= 1."""
    if q <= 0.0:
        return 0.0, math.inf
    rate = -math.log(q)
    # n q^(n/2) is maximized at n = 2/rate
    D = A * 2.0 / (math.e * rate) + B
    return D, rate / 2.0


def higgs_envelope_exact(n: int, d: int, kappa: float, eps: float) -> float:
    """Three-term residual bound of the edge phase at length n."""
    c_eps = cl.c_eps_higgs(d, eps)
    r = kappa - cl.kappa0_higgs(d) - eps
    if r <= 0:
        raise ValueError("eps must leave a positive margin to the threshold")
    q = math.exp(-4.0 * n * r)
    return (0.25 * c_eps * n * q + 0.5 * c_eps * n * q
            + 0.5 * c_eps * q / (1.0 - math.exp(-4.0 * r)))


def conf_envelope_exact(n: int, d: int, beta: float, eps: float) -> float:
    """Endpoint-pair residual bound of the plaquette phase at length n."""
    if beta == 0.0:
        return 0.0
    c2 = cl.c2_conf(d, beta + eps)
    ratio = math.tanh(2.0 * beta) / math.tanh(2.0 * (beta + eps))
    rn = ratio**n
    return (4.0 * c2 * (d - 1) * n * rn
            + 16.0 * (d - 1) * c2 * n * rn
            + 16.0 * (d - 1) * c2 * rn / (1.0 - ratio))


# -- perimeter-law fitting ----------------------------------------------------------


@dataclass(frozen=True)
class PerimeterFit:
    """Fekete-style decay estimate with sandwich and superadditivity reports."""

    a_hat: float
    lower_rate: float          # b: from the expansion-coefficient ratio bound
    upper_rate: float          # b' = -log E[W_(length 1)]
    superadditivity_ok: bool
    superadditivity_worst: float
    sandwich_ok: bool
    sandwich_worst: float

    def to_mapping(self) -> dict:
        return {
            "a_hat": self.a_hat, "lower_rate": self.lower_rate,
            "upper_rate": self.upper_rate,
            "superadditivity_ok": self.superadditivity_ok,
            "superadditivity_worst": self.superadditivity_worst,
            "sandwich_ok": self.sandwich_ok, "sandwich_worst": self.sandwich_worst,
        }


def coefficient_ratio_rate(kappa: float, m: int, n: int) -> float:
    """Per-edge lower-bound rate b = -log(min_j barphi / max_j barphi) over
    the joint modulus lcm(m, n)."""
    if kappa <= 0:
        raise ValueError("the ratio bound needs kappa > 0")
    ell = math.lcm(m, n)
    vals = [hte.barphi(ell, kappa, j) for j in range(ell)]
    return -math.log(min(vals) / max(vals))


def perimeter_fit(expectations: dict[int, float],
                  params: ModelParams, tol: float = 1e-12) -> PerimeterFit:
    """Estimate the per-edge decay rate and check the perimeter sandwich.

    ``expectations`` maps straight-line lengths to exact (or sampled) Wilson
    expectations.  Needs at least three lengths including length 1.
    """
    if len(expectations) < 3:
        raise ValueError("need at least three lengths to fit a decay rate")
    lengths = sorted(expectations)
    rates = {n: -math.log(expectations[n]) / n for n in lengths}
    a_hat = min(rates.values())

    if 1 not in expectations:
        raise ValueError("the sandwich upper rate needs the length-1 expectation")
    upper_rate = -math.log(expectations[1])
    lower_rate = coefficient_ratio_rate(params.kappa, params.m, params.n)

    super_worst = 0.0
    for i in lengths:
        for j in lengths:
            if i + j in expectations:
                gap = (math.log(expectations[i]) + math.log(expectations[j])
                       - math.log(expectations[i + j]))
                super_worst = max(super_worst, gap)
    sandwich_worst = 0.0
    for n in lengths:
        e = expectations[n]
        sandwich_worst = max(sandwich_worst,
                             math.exp(-lower_rate * n) - e,
                             e - math.exp(-upper_rate * n))
    return PerimeterFit(
        a_hat=a_hat,
        lower_rate=lower_rate,
        upper_rate=upper_rate,
        superadditivity_ok=super_worst <= tol,
        superadditivity_worst=super_worst,
        sandwich_ok=sandwich_worst <= tol,
        sandwich_worst=sandwich_worst,
    )
