"""Polymer and cluster machinery for the two convergent expansion regimes.

A polymer is a Z_2 spin configuration whose support induces a single
connected component in the relevant adjacency graph:

* edge phase ("higgs"): supports are edge sets, adjacency is sharing a
  plaquette, max degree 6(d-1);
* plaquette phase ("conf"): supports are plaquette sets, adjacency is sharing
  a boundary edge, max degree 8d-12.

Two polymers are linked (written eta ~ eta') when the induced subgraph on the
union of their supports is connected, i.e. the supports overlap or are
adjacent.  A cluster is a multiset of polymers whose linkage multigraph is
connected; its series weight is the signed connected-graph (Ursell) count
times the product of polymer activities, divided by the product of
multiplicity factorials.  The division is what makes the cluster series sum
to the log of the polymer partition function; it is verified against exact
enumeration in the tests.

Enumeration is exactly-once throughout: connected cell sets are grown with
the classic skip-and-ban recursion ordered by smallest cell, and clusters are
grown the same way one level up, ordered by polymer support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.optimize import minimize_scalar

from latthiggs.dec import BoxGeometry, Chain, Form
from latthiggs.errors import OutsideRegimeError
from latthiggs.gaugemodel import ModelParams

PHASES = ("higgs", "conf")
MAX_POLYMER_CELLS = 8


def degree_bound(which: str, d: int) -> int:
    """Max graph degree: 6(d-1) for the edge graph, 8d-12 for the plaquette graph."""
    if which == "higgs":
        return 6 * (d - 1)
    if which == "conf":
        return 8 * d - 12
    raise ValueError(f"unknown graph {which!r}")


@dataclass(frozen=True)
class AdjacencyGraph:
    """Adjacency over positive cells of one degree (edges or plaquettes)."""

    which: str
    geometry: BoxGeometry
    neighbors: tuple[frozenset, ...]

    def max_degree(self) -> int:
        return max((len(nb) for nb in self.neighbors), default=0)

    def degree_bound(self) -> int:
        return degree_bound(self.which, self.geometry.d)


def build_graph(which: str, geometry: BoxGeometry) -> AdjacencyGraph:
    """Build the polymer adjacency graph of the requested phase on a box."""
    if which == "higgs":
        n = geometry.n_cells(1)
        groups = geometry.boundary_rows(2)       # plaquette -> its edges
    elif which == "conf":
        n = geometry.n_cells(2)
        groups = geometry.coboundary_rows(1)     # edge -> the plaquettes sharing it
    else:
        raise ValueError(f"unknown graph {which!r}")
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for group in groups:
        ids = [i for i, _ in group]
        for a in ids:
            for b in ids:
                if a != b:
                    neighbors[a].add(b)
    return AdjacencyGraph(which, geometry, tuple(frozenset(s) for s in neighbors))


# -- connected-set enumeration ---------------------------------------------------


def _connected_supersets(base: tuple[int, ...], banned: frozenset,
                         neighbors, max_size: int):
    """Yield every connected superset of ``base`` (as a sorted tuple) that avoids
    ``banned``, up to ``max_size`` cells, exactly once.

    Candidates at each node are scanned in increasing order; choosing the i-th
    bans the earlier ones in the whole subtree, which is what makes the
    emission unique.
    """
    yield base
    if len(base) >= max_size:
        return
    frontier = set()
    bs = set(base)
    for c in base:
        frontier |= neighbors[c]
    cand = sorted(frontier - bs - banned)
    for i, v in enumerate(cand):
        yield from _connected_supersets(
            tuple(sorted(base + (v,))), banned | frozenset(cand[:i]),
            neighbors, max_size)


def enumerate_polymers(graph: AdjacencyGraph, anchor: int,
                       size_cutoff: int):
    """All connected supports containing ``anchor`` with at most ``size_cutoff``
    positive cells, each exactly once, as sorted index tuples."""
    if size_cutoff > MAX_POLYMER_CELLS:
        raise ValueError(
            f"size cutoff {size_cutoff} exceeds the configured max {MAX_POLYMER_CELLS}")
    if size_cutoff < 1:
        return
    yield from _connected_supersets((anchor,), frozenset(), graph.neighbors,
                                    size_cutoff)


def enumerate_polymers_all(graph: AdjacencyGraph, size_cutoff: int,
                           cells=None):
    """All polymers of the graph (optionally restricted to supports within
    ``cells``) with at most ``size_cutoff`` cells, each exactly once."""
    if size_cutoff > MAX_POLYMER_CELLS:
        raise ValueError(
            f"size cutoff {size_cutoff} exceeds the configured max {MAX_POLYMER_CELLS}")
    universe = sorted(cells) if cells is not None else range(len(graph.neighbors))
    allowed = set(universe)
    banned: set[int] = set()
    for root in universe:
        outside = frozenset(banned) | frozenset(
            i for i in range(len(graph.neighbors)) if i not in allowed)
        yield from _connected_supersets((root,), outside, graph.neighbors,
                                        size_cutoff)
        banned.add(root)


# -- polymers and clusters --------------------------------------------------------


@dataclass(frozen=True)
class Polymer:
    """A connected Z_2 spin support: edge indices (higgs) or plaquette indices (conf)."""

    phase: str
    cells: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.cells)

    def form(self, geometry: BoxGeometry) -> Form:
        degree = 1 if self.phase == "higgs" else 2
        import numpy as np
        values = np.zeros(geometry.n_cells(degree), dtype=np.int64)
        values[list(self.cells)] = 1
        return Form(geometry, degree, 2, values)


@dataclass(frozen=True)
class Cluster:
    """A multiset of polymers with a connected linkage multigraph.

    ``items`` is sorted by polymer support; ``ursell`` is the signed
    connected-graph count over the instance compatibility graph.
    """

    items: tuple[tuple[Polymer, int], ...]
    ursell: int

    @property
    def n(self) -> int:
        return sum(m for _, m in self.items)

    @property
    def total_cells(self) -> int:
        return sum(m * p.size for p, m in self.items)

    @property
    def multiplicity_factor(self) -> int:
        out = 1
        for _, m in self.items:
            out *= math.factorial(m)
        return out

    def support(self) -> frozenset:
        cells: set[int] = set()
        for p, _ in self.items:
            cells.update(p.cells)
        return frozenset(cells)


class PolymerSpace:
    """Geometry-bound context: adjacency, incidence and polymer linkage caches."""

    def __init__(self, phase: str, geometry: BoxGeometry):
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        self.phase = phase
        self.geometry = geometry
        self.graph = build_graph(phase, geometry)
        self._closed_nbhd_cache: dict[tuple[int, ...], frozenset] = {}
        self._dsupport_cache: dict[tuple[int, ...], frozenset] = {}

    # incidence of a support with the complementary degree ------------------

    def dsupport(self, cells: tuple[int, ...]) -> frozenset:
        """Cells of the complementary degree with odd incidence.

        For an edge support this is the support of d of its indicator (the
        frustrated plaquettes); for a plaquette support, the support of delta
        (the odd boundary edges).
        """
        if cells in self._dsupport_cache:
            return self._dsupport_cache[cells]
        g = self.geometry
        count: dict[int, int] = {}
        if self.phase == "higgs":
            rows = g.coboundary_rows(1)
            for c in cells:
                for j, _sign in rows[c]:
                    count[j] = count.get(j, 0) + 1
        else:
            rows = g.boundary_rows(2)
            for c in cells:
                for j, _sign in rows[c]:
                    count[j] = count.get(j, 0) + 1
        out = frozenset(j for j, v in count.items() if v % 2)
        self._dsupport_cache[cells] = out
        return out

    def closed_nbhd(self, cells: tuple[int, ...]) -> frozenset:
        """Support together with all graph neighbors; linkage test region."""
        if cells in self._closed_nbhd_cache:
            return self._closed_nbhd_cache[cells]
        region = set(cells)
        for c in cells:
            region |= self.graph.neighbors[c]
        out = frozenset(region)
        self._closed_nbhd_cache[cells] = out
        return out

    def linked(self, a: tuple[int, ...], b: tuple[int, ...]) -> bool:
        """eta ~ eta': supports overlap or are adjacent in the graph."""
        return not self.closed_nbhd(a).isdisjoint(b)

    def polymer(self, cells) -> Polymer:
        return Polymer(self.phase, tuple(sorted(cells)))

    # polymers linked to a region --------------------------------------------

    def _polymers_touching(self, region: frozenset, max_size: int,
                           skip: frozenset):
        """All polymer supports of size <= max_size intersecting ``region``,
        exactly once (each is rooted at its smallest region cell)."""
        ordered = sorted(region)
        for pos, c in enumerate(ordered):
            banned = frozenset(ordered[:pos])
            for cells in _connected_supersets((c,), banned,
                                              self.graph.neighbors, max_size):
                if cells not in skip:
                    yield cells

    # cluster enumeration ------------------------------------------------------

    def clusters_from_seeds(self, seeds: list[tuple[int, ...]],
                            max_weight: int) -> list[Cluster]:
        """All clusters of total support weight <= max_weight containing at
        least one seed polymer, each exactly once.

        The distinct-support set of a cluster is grown over the (implicit)
        linkage graph with the same skip-and-ban scheme used for cell sets;
        multiplicity vectors are then enumerated within the remaining budget.
        """
        seeds = sorted(set(seeds))
        out: list[Cluster] = []
        for pos, seed in enumerate(seeds):
            skip = frozenset(seeds[:pos])
            if len(seed) > max_weight:
                continue
            self._grow(( seed,), skip, max_weight, out)
        return out

    def all_clusters(self, max_weight: int, cells=None) -> list[Cluster]:
        """Every cluster of the box with total support weight <= max_weight."""
        seeds = [tuple(p) for p in enumerate_polymers_all(
            self.graph, min(max_weight, MAX_POLYMER_CELLS), cells)]
        return self.clusters_from_seeds(seeds, max_weight)

    def anchored_clusters(self, anchor: int, max_weight: int) -> list[Cluster]:
        """Clusters whose support contains the anchor cell."""
        seeds = [tuple(p) for p in enumerate_polymers(
            self.graph, anchor, min(max_weight, MAX_POLYMER_CELLS))]
        return self.clusters_from_seeds(seeds, max_weight)

    def coboundary_anchored_clusters(self, anchor_edge: int,
                                     max_weight: int) -> list[Cluster]:
        """Plaquette-phase clusters with some polymer whose odd boundary
        contains the given edge."""
        if self.phase != "conf":
            raise ValueError("coboundary anchoring applies to the plaquette phase")
        plaqs = sorted(j for j, _ in self.geometry.coboundary_rows(1)[anchor_edge])
        seen: set[tuple[int, ...]] = set()
        seeds = []
        for pos, p in enumerate(plaqs):
            banned = frozenset(plaqs[:pos])
            for cells in _connected_supersets((p,), banned, self.graph.neighbors,
                                              min(max_weight, MAX_POLYMER_CELLS)):
                if cells not in seen:
                    seen.add(cells)
                    if anchor_edge in self.dsupport(cells):
                        seeds.append(cells)
        return self.clusters_from_seeds(seeds, max_weight)

    def _grow(self, members: tuple[tuple[int, ...], ...], banned: frozenset,
              max_weight: int, out: list[Cluster]) -> None:
        weight = sum(len(m) for m in members)
        self._emit_multiplicities(members, max_weight, out)
        remaining = max_weight - weight - 1
        if remaining < 0:
            return
        region: set[int] = set()
        for m in members:
            region |= self.closed_nbhd(m)
        member_set = frozenset(members)
        cand = sorted(
            c for c in self._polymers_touching(frozenset(region), remaining + 1,
                                               member_set)
            if c not in banned
        )
        for i, cells in enumerate(cand):
            self._grow(tuple(sorted(members + (cells,))),
                       banned | frozenset(cand[:i]), max_weight, out)

    def _emit_multiplicities(self, members, max_weight: int,
                             out: list[Cluster]) -> None:
        sizes = [len(m) for m in members]
        base = sum(sizes)
        polys = [self.polymer(m) for m in members]
        compat = [
            [i == j or self.linked(members[i], members[j])
             for j in range(len(members))]
            for i in range(len(members))
        ]

        def assign(idx: int, mults: list[int], used: int) -> None:
            if idx == len(members):
                instances = []
                for i, m in enumerate(mults):
                    instances.extend([i] * m)
                masks = []
                for a in instances:
                    mask = 0
                    for bpos, b in enumerate(instances):
                        if compat[a][b]:
                            mask |= 1 << bpos
                    masks.append(mask)
                u = ursell_signed_sum(masks)
                out.append(Cluster(tuple(zip(polys, tuple(mults))), u))
                return
            lo = 1
            hi = (max_weight - used - sum(sizes[idx + 1:])) // sizes[idx]
            for m in range(lo, hi + 1):
                assign(idx + 1, mults + [m], used + m * sizes[idx])

        assign(0, [], 0)


# -- Ursell functions ---------------------------------------------------------------


def ursell_signed_sum(adj_masks: list[int]) -> int:
    """Signed count of connected spanning subgraphs of a compatibility graph.

    ``adj_masks[i]`` holds, as bits, the vertices compatible with instance i.
    The value is sum over connected graphs on all k labeled vertices, using
    only compatible pairs as edges, of (-1)^(edge count): the factor the
    cluster series attaches to each multiset.
    """
    k = len(adj_masks)
    if k == 0:
        raise ValueError("empty instance list")
    full = (1 << k) - 1

    def no_internal_edges(s: int) -> bool:
        t = s
        while t:
            i = (t & -t).bit_length() - 1
            t &= t - 1
            if adj_masks[i] & s & ~(1 << i):
                return False
        return True

    memo: dict[int, int] = {}

    def connected_sum(s: int) -> int:
        if s in memo:
            return memo[s]
        low = s & -s
        total = 1 if no_internal_edges(s) else 0
        # subtract contributions whose component containing the lowest vertex
        # is a proper subset
        rest = s & ~low
        sub = rest
        while True:
            b = sub | low
            if b != s:
                comp = s & ~b
                if no_internal_edges(comp):
                    total -= connected_sum(b)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        memo[s] = total
        return total

    return connected_sum(full)


def ursell(compat: list[list[bool]]) -> int:
    """Ursell value of a multiset given its instance compatibility matrix."""
    k = len(compat)
    masks = []
    for i in range(k):
        mask = 0
        for j in range(k):
            if compat[i][j] and i != j:
                mask |= 1 << j
        masks.append(mask)
    return ursell_signed_sum(masks)


# -- activities -----------------------------------------------------------------------


def higgs_norms(cluster: Cluster, space: PolymerSpace) -> tuple[int, int]:
    """(sum of multiplicity-weighted edge counts, same for frustrated plaquettes)."""
    n1 = n2 = 0
    for p, m in cluster.items:
        n1 += m * p.size
        n2 += m * len(space.dsupport(p.cells))
    return n1, n2


def psi_higgs(cluster: Cluster, space: PolymerSpace,
              beta: float, kappa: float) -> float:
    """Series weight of an edge-phase cluster.

    Ursell count times exp(-4 beta ||S||_2 - 4 kappa ||S||_1), divided by the
    product of multiplicity factorials (the multiset normalization that makes
    the cluster series equal the log partition function).
    """
    n1, n2 = higgs_norms(cluster, space)
    return (cluster.ursell / cluster.multiplicity_factor
            * math.exp(-4.0 * beta * n2 - 4.0 * kappa * n1))


def conf_polymer_weight(cells: tuple[int, ...], space: PolymerSpace,
                        gamma_edges: frozenset, beta: float, kappa: float) -> float:
    """Plaquette-phase polymer activity relative to the path.

    tanh(2 beta) per plaquette; tanh(2 kappa) per odd boundary edge off the
    path and 1/tanh(2 kappa) per odd boundary edge on it.
    """
    tb = math.tanh(2.0 * beta)
    tk = math.tanh(2.0 * kappa)
    dsup = space.dsupport(cells)
    on = len(dsup & gamma_edges)
    off = len(dsup) - on
    if on and tk == 0.0:
        raise ValueError("path-relative weights need kappa > 0")
    return tb ** len(cells) * tk ** off * (tk ** -on if on else 1.0)


def psi_conf(cluster: Cluster, space: PolymerSpace, gamma_edges: frozenset,
             beta: float, kappa: float) -> float:
    """Series weight of a plaquette-phase cluster against a (possibly empty) path."""
    w = 1.0
    for p, m in cluster.items:
        w *= conf_polymer_weight(p.cells, space, gamma_edges, beta, kappa) ** m
    return cluster.ursell / cluster.multiplicity_factor * w


# -- convergence thresholds and tail bounds ----------------------------------------


@lru_cache(maxsize=None)
def kappa0_higgs(d: int) -> float:
    """Edge-phase convergence threshold: min over alpha in (0,1) of
    log(M1^2 + 1/alpha) / (4 (1 - alpha))."""
    m1 = degree_bound("higgs", d)

    def f(a: float) -> float:
        return math.log(m1 * m1 + 1.0 / a) / (4.0 * (1.0 - a))

    res = minimize_scalar(f, bounds=(1e-9, 1 - 1e-9), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun)


@lru_cache(maxsize=None)
def alpha_higgs(d: int) -> float:
    """The minimizing alpha behind ``kappa0_higgs``."""
    m1 = degree_bound("higgs", d)

    def f(a: float) -> float:
        return math.log(m1 * m1 + 1.0 / a) / (4.0 * (1.0 - a))

    res = minimize_scalar(f, bounds=(1e-9, 1 - 1e-9), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def c_eps_higgs(d: int, eps: float) -> float:
    """Closed-form majorant of the per-edge cluster sum at coupling kappa0 + eps.

    4 x / (1 - 4 M1^2 x) with x = exp(-2(2 kappa - alpha)) at kappa = kappa0 + eps;
    returns +inf when the geometric series in the derivation does not close.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    m1 = degree_bound("higgs", d)
    kap = kappa0_higgs(d) + eps
    x = math.exp(-2.0 * (2.0 * kap - alpha_higgs(d)))
    den = 1.0 - 4.0 * m1 * m1 * x
    if den <= 0:
        return math.inf
    return 4.0 * x / den


def higgs_tail_per_edge(d: int, kappa: float, k: int, eps: float) -> float:
    """Bound on the absolute cluster sum over clusters containing a fixed edge
    with ||S||_1 >= k: C_eps e^{-4k(kappa - kappa0 - eps)} / 4."""
    kap0 = kappa0_higgs(d)
    if kappa <= kap0:
        raise OutsideRegimeError(
            f"kappa={kappa} is not above the edge-phase threshold {kap0:.6f}")
    if not 0 < eps < kappa - kap0:
        raise ValueError(f"eps must lie in (0, kappa - kappa0) = (0, {kappa - kap0:.6f})")
    return 0.25 * c_eps_higgs(d, eps) * math.exp(-4.0 * k * (kappa - kap0 - eps))


def best_eps_higgs(d: int, kappa: float, k: int) -> float:
    """eps minimizing the per-edge tail bound at size k (grid + local refine)."""
    kap0 = kappa0_higgs(d)
    if kappa <= kap0:
        raise OutsideRegimeError(
            f"kappa={kappa} is not above the edge-phase threshold {kap0:.6f}")
    span = kappa - kap0

    def bound(e: float) -> float:
        try:
            return higgs_tail_per_edge(d, kappa, k, e)
        except (ValueError, OutsideRegimeError):
            return math.inf
    grid = [span * i / 400 for i in range(1, 400)]
    best = min(grid, key=bound)
    if not math.isfinite(bound(best)):
        raise OutsideRegimeError(
            f"no eps in (0, {span:.6f}) gives a finite tail constant")
    res = minimize_scalar(bound, bounds=(max(best - span / 400, 1e-12),
                                         min(best + span / 400, span - 1e-12)),
                          method="bounded", options={"xatol": 1e-10})
    return float(res.x) if res.fun <= bound(best) else best


def _conf_alpha_condition(x: float, alpha: float, m2: int) -> bool:
    """Feasibility of alpha for plaquette-phase convergence at weight x."""
    if not 0 < alpha < 1:
        return False
    y = x ** (1.0 - alpha)
    if m2 * m2 * y >= 1.0:
        return False
    return m2**3 * y / (1.0 - m2 * m2 * y) < 2.0 * alpha


@lru_cache(maxsize=None)
def _conf_weight_threshold(d: int) -> float:
    """Largest per-plaquette weight x = tanh(2 beta) with a feasible alpha."""
    m2 = degree_bound("conf", d)

    def neg_threshold(a: float) -> float:
        # largest x feasible at this alpha: x^(1-a) = 2a / (M2^3 + 2a M2^2)
        base = 2.0 * a / (m2**3 + 2.0 * a * m2 * m2)
        return -(base ** (1.0 / (1.0 - a)))

    res = minimize_scalar(neg_threshold, bounds=(1e-9, 1 - 1e-9), method="bounded",
                          options={"xatol": 1e-12})
    return -float(res.fun)


@lru_cache(maxsize=None)
def beta0_conf(d: int) -> float:
    """Plaquette-phase convergence threshold: the beta whose per-plaquette
    weight tanh(2 beta) sits at the edge of alpha feasibility, by bisection."""
    x0 = _conf_weight_threshold(d)
    lo, hi = 0.0, 1.0
    while math.tanh(2.0 * hi) < x0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.tanh(2.0 * mid) < x0:
            lo = mid
        else:
            hi = mid
    return lo


def alpha_conf(d: int, beta: float) -> float:
    """Smallest feasible alpha for the plaquette phase at the given beta."""
    m2 = degree_bound("conf", d)
    x = math.tanh(2.0 * beta)
    if x == 0.0:
        return 0.0
    feas = [a / 4096.0 for a in range(1, 4096)
            if _conf_alpha_condition(x, a / 4096.0, m2)]
    if not feas:
        raise OutsideRegimeError(
            f"beta={beta} admits no feasible alpha (threshold {beta0_conf(d):.6g})")
    lo, hi = feas[0] - 1 / 4096.0, feas[0]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if _conf_alpha_condition(x, mid, m2):
            hi = mid
        else:
            lo = mid
    return hi


def c2_conf(d: int, beta: float) -> float:
    """Per-plaquette cluster-sum constant x^(1-alpha) / (1 - M2^2 x^(1-alpha))
    at x = tanh(2 beta), for straight paths (no shape correction)."""
    m2 = degree_bound("conf", d)
    x = math.tanh(2.0 * beta)
    if x == 0.0:
        return 0.0
    a = alpha_conf(d, beta)
    y = x ** (1.0 - a)
    den = 1.0 - m2 * m2 * y
    if den <= 0:
        raise OutsideRegimeError(f"beta={beta} outside the plaquette-phase regime")
    return y / den


def conf_tail_per_plaquette(d: int, beta: float, k: int, eps: float) -> float:
    """Bound on the absolute cluster sum over clusters containing a fixed
    plaquette with total support >= k: C2(beta+eps) (tanh 2beta / tanh 2(beta+eps))^k."""
    b0 = beta0_conf(d)
    if not 0 <= beta < b0:
        raise OutsideRegimeError(
            f"beta={beta} is not below the plaquette-phase threshold {b0:.6g}")
    if beta == 0.0:
        return 0.0
    if not 0 < eps < b0 - beta:
        raise ValueError(f"eps must lie in (0, beta0 - beta) = (0, {b0 - beta:.6g})")
    ratio = math.tanh(2.0 * beta) / math.tanh(2.0 * (beta + eps))
    return c2_conf(d, beta + eps) * ratio**k


def conf_tail_per_edge(d: int, beta: float, k: int, eps: float) -> float:
    """Edge-anchored version: an edge lies in at most 2(d-1) plaquettes."""
    return 2.0 * (d - 1) * conf_tail_per_plaquette(d, beta, k, eps)


def best_eps_conf(d: int, beta: float, k: int) -> float:
    """eps minimizing the plaquette-anchored tail bound at size k."""
    b0 = beta0_conf(d)
    if not 0 <= beta < b0:
        raise OutsideRegimeError(
            f"beta={beta} is not below the plaquette-phase threshold {b0:.6g}")
    if beta == 0.0:
        return 0.5 * b0
    span = b0 - beta

    def bound(e: float) -> float:
        try:
            return conf_tail_per_plaquette(d, beta, k, e)
        except (ValueError, OutsideRegimeError):
            return math.inf

    grid = [span * i / 400 for i in range(1, 400)]
    best = min(grid, key=bound)
    res = minimize_scalar(bound, bounds=(max(best - span / 400, 1e-15),
                                         min(best + span / 400, span * (1 - 1e-9))),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.x) if res.fun <= bound(best) else best


def convergence_constants(phase: str, d: int, coupling: float | None = None,
                          eps: float | None = None) -> dict:
    """Thresholds and constants of the requested phase, as a plain dict."""
    if phase == "higgs":
        out = {"M1": degree_bound("higgs", d), "kappa0": kappa0_higgs(d),
               "alpha": alpha_higgs(d)}
        if eps is not None:
            out["C_eps"] = c_eps_higgs(d, eps)
        return out
    if phase == "conf":
        out = {"M2": degree_bound("conf", d), "beta0": beta0_conf(d)}
        if coupling is not None and coupling > 0:
            out["alpha"] = alpha_conf(d, coupling)
            out["C2"] = c2_conf(d, coupling)
        return out
    raise ValueError(f"unknown phase {phase!r}")


# -- truncated log-partition sums ---------------------------------------------------


def log_z_cluster(phase: str, gamma: Chain | None, params: ModelParams,
                  max_weight: int, eps: float | None = None) -> tuple[float, float]:
    """Truncated cluster series for the log of the vacuum-normalized partition
    sum of the box, with a rigorous bound on the dropped part.

    Edge phase: sums Psi over all clusters with ||S||_1 <= max_weight (the
    optional ``gamma`` inserts the character weight rho(S(gamma))).  Plaquette
    phase: sums Psi^gamma over clusters of total plaquette support <=
    max_weight.  Raises OutsideRegimeError outside the proven windows.
    """
    g = params.geometry
    if phase == "higgs":
        kap0 = kappa0_higgs(params.d)
        if params.kappa <= kap0:
            raise OutsideRegimeError(
                f"kappa={params.kappa} is not above the edge-phase threshold {kap0:.6f}")
        e = eps if eps is not None else best_eps_higgs(params.d, params.kappa,
                                                       max_weight + 1)
        space = PolymerSpace("higgs", g)
        gamma_odd = _odd_edge_set(gamma) if gamma is not None else frozenset()
        terms = []
        for cl in space.all_clusters(max_weight):
            w = psi_higgs(cl, space, params.beta, params.kappa)
            if gamma_odd:
                parity = sum(m * len(gamma_odd.intersection(p.cells))
                             for p, m in cl.items)
                w *= (1.0 if parity % 2 == 0 else -1.0)
            terms.append(w)
        value = math.fsum(terms)
        tail = g.n_cells(1) * higgs_tail_per_edge(params.d, params.kappa,
                                                  max_weight + 1, e)
        return value, tail
    if phase == "conf":
        b0 = beta0_conf(params.d)
        if not 0 <= params.beta < b0:
            raise OutsideRegimeError(
                f"beta={params.beta} is not below the plaquette-phase threshold {b0:.6g}")
        space = PolymerSpace("conf", g)
        gamma_odd = _odd_edge_set(gamma) if gamma is not None else frozenset()
        terms = []
        for cl in space.all_clusters(max_weight):
            terms.append(psi_conf(cl, space, gamma_odd, params.beta, params.kappa))
        value = math.fsum(terms)
        if params.beta == 0.0:
            tail = 0.0
        else:
            e = eps if eps is not None else best_eps_conf(params.d, params.beta,
                                                          max_weight + 1)
            tail = g.n_cells(2) * conf_tail_per_plaquette(params.d, params.beta,
                                                          max_weight + 1, e)
        return value, tail
    raise ValueError(f"unknown phase {phase!r}")


def _odd_edge_set(gamma: Chain) -> frozenset:
    idx = gamma.geometry.index(1)
    return frozenset(idx[key] for key, v in gamma.coeffs.items() if v % 2)


def cluster_record(cluster: Cluster, space: PolymerSpace, beta: float,
                   kappa: float, gamma_edges: frozenset = frozenset()) -> dict:
    """JSON-ready dump of one cluster (for debugging and cross-tool diffing)."""
    n1, n2 = (higgs_norms(cluster, space) if space.phase == "higgs"
              else (cluster.total_cells, None))
    if space.phase == "higgs":
        psi = psi_higgs(cluster, space, beta, kappa)
        norm_gamma = None
    else:
        psi = psi_conf(cluster, space, gamma_edges, beta, kappa)
        norm_gamma = sum(m * len(space.dsupport(p.cells) & gamma_edges)
                         for p, m in cluster.items)
    return {
        "phase": space.phase,
        "polymers": [{"cells": list(p.cells), "mult": m} for p, m in cluster.items],
        "n": cluster.n,
        "norm1": n1,
        "norm2_or_gamma": n2 if space.phase == "higgs" else norm_gamma,
        "ursell": cluster.ursell,
        "psi": psi,
    }
