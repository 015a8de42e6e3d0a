"""Hypercubic-box geometry and discrete calculus.

Cells of the box are unit k-cubes with vertex set {0,..,N}^d.  A positively
oriented k-cell is identified by its anchor vertex (the lexicographically
smallest corner) and the sorted tuple of axes it spans; the opposite
orientation carries sign -1.  Forms assign Z_q values to positive cells and
extend to negative cells by negation; chains carry integer coefficients.

The four operators provided here are the mod-q exterior derivative ``d``, its
adjoint coderivative ``delta`` (the signed incidence transpose, with cells
outside the box simply absent), the oriented chain boundary, and the chain
coboundary (the "cells having this one in their boundary" sum).  All of them
are plain linear maps over the incidence structure, precomputed once per box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from math import comb

import numpy as np

Vertex = tuple[int, ...]
Axes = tuple[int, ...]
CellKey = tuple[Vertex, Axes]


@dataclass(frozen=True)
class Cell:
    """An oriented k-cell: anchor vertex, sorted axis tuple, orientation sign."""

    anchor: Vertex
    axes: Axes
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError(f"orientation sign must be +-1, got {self.sign}")
        if tuple(sorted(set(self.axes))) != self.axes:
            raise ValueError(f"axes must be sorted and distinct, got {self.axes}")

    @property
    def degree(self) -> int:
        return len(self.axes)

    @property
    def key(self) -> CellKey:
        return (self.anchor, self.axes)

    def __neg__(self) -> "Cell":
        return Cell(self.anchor, self.axes, -self.sign)


class BoxGeometry:
    """Cell complex of the box with vertices {0,..,N}^d.

    Positive k-cells are enumerated in lexicographic (axes, anchor) order and
    addressed by dense indices, which is what the vectorized enumeration and
    series code works with.  ``cells(k)[i]`` recovers the Cell for index i.
    """

    def __init__(self, d: int, N: int):
        if d < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {d}")
        if N < 1:
            raise ValueError(f"side length must be >= 1, got {N}")
        self.d = d
        self.N = N
        self._cells: dict[int, list[Cell]] = {}
        self._index: dict[int, dict[CellKey, int]] = {}
        self._boundary: dict[int, list[tuple[tuple[int, int], ...]]] = {}
        self._coboundary: dict[int, list[tuple[tuple[int, int], ...]]] = {}

    # -- cell enumeration --------------------------------------------------

    def n_cells(self, k: int) -> int:
        """Number of positive k-cells: binom(d,k) * N^k * (N+1)^(d-k)."""
        self._check_degree(k)
        return comb(self.d, k) * self.N**k * (self.N + 1) ** (self.d - k)

    def cells(self, k: int) -> list[Cell]:
        self._check_degree(k)
        if k not in self._cells:
            out: list[Cell] = []
            for axes in combinations(range(self.d), k):
                ranges = [
                    range(self.N) if i in axes else range(self.N + 1)
                    for i in range(self.d)
                ]
                for anchor in product(*ranges):
                    out.append(Cell(anchor, axes))
            self._cells[k] = out
        return self._cells[k]

    def index(self, k: int) -> dict[CellKey, int]:
        if k not in self._index:
            self._index[k] = {c.key: i for i, c in enumerate(self.cells(k))}
        return self._index[k]

    def cell_id(self, cell: Cell) -> int:
        return self.index(cell.degree)[cell.key]

    def contains(self, cell: Cell) -> bool:
        return cell.key in self.index(cell.degree)

    # -- incidence ---------------------------------------------------------

    def boundary_rows(self, k: int) -> list[tuple[tuple[int, int], ...]]:
        """For each positive k-cell, the (face index, sign) pairs of its boundary."""
        self._check_degree(k)
        if k == 0:
            raise ValueError("0-cells have no boundary")
        if k not in self._boundary:
            face_index = self.index(k - 1)
            rows = []
            for cell in self.cells(k):
                rows.append(tuple(
                    (face_index[(anchor, axes)], sign)
                    for anchor, axes, sign in _cube_faces(cell.anchor, cell.axes)
                ))
            self._boundary[k] = rows
        return self._boundary[k]

    def coboundary_rows(self, k: int) -> list[tuple[tuple[int, int], ...]]:
        """For each positive k-cell, the (cocell index, sign) pairs over (k+1)-cells.

        This is the transpose of ``boundary_rows(k+1)``; cells whose cofaces
        would leave the box contribute nothing (free boundary).
        """
        self._check_degree(k)
        if k == self.d:
            raise ValueError(f"{k}-cells have no cofaces in dimension {self.d}")
        if k not in self._coboundary:
            rows: list[list[tuple[int, int]]] = [[] for _ in range(self.n_cells(k))]
            for j, faces in enumerate(self.boundary_rows(k + 1)):
                for i, sign in faces:
                    rows[i].append((j, sign))
            self._coboundary[k] = [tuple(r) for r in rows]
        return self._coboundary[k]

    def _check_degree(self, k: int) -> None:
        if not 0 <= k <= self.d:
            raise ValueError(f"degree {k} out of range [0, {self.d}]")

    def __repr__(self) -> str:
        return f"BoxGeometry(d={self.d}, N={self.N})"


def _cube_faces(anchor: Vertex, axes: Axes):
    """Oriented faces of the cube spanned by ``axes`` at ``anchor``.

    The boundary of (v; a_1<..<a_k) is sum_i (-1)^(i-1) [top_i - bottom_i],
    where top_i/bottom_i drop axis a_i at v + e_{a_i} and v respectively.
    """
    for i, a in enumerate(axes):
        rest = axes[:i] + axes[i + 1 :]
        sign = 1 if i % 2 == 0 else -1
        shifted = tuple(v + 1 if j == a else v for j, v in enumerate(anchor))
        yield shifted, rest, sign
        yield anchor, rest, -sign


@lru_cache(maxsize=None)
def box_geometry(d: int, N: int) -> BoxGeometry:
    """Shared geometry instance for the given box (cells are cached lazily)."""
    return BoxGeometry(d, N)


# -- forms and chains -------------------------------------------------------


class Form:
    """A Z_q-valued k-form: dense values over positive k-cells.

    Values on negative cells are the mod-q negations of the positive ones.
    Instances are treated as immutable; operations return fresh forms.
    """

    __slots__ = ("geometry", "degree", "q", "values")

    def __init__(self, geometry: BoxGeometry, degree: int, q: int,
                 values: np.ndarray | None = None):
        if q < 2:
            raise ValueError(f"modulus must be >= 2, got {q}")
        geometry._check_degree(degree)
        n = geometry.n_cells(degree)
        if values is None:
            values = np.zeros(n, dtype=np.int64)
        else:
            values = np.asarray(values, dtype=np.int64) % q
            if values.shape != (n,):
                raise ValueError(f"expected {n} values, got shape {values.shape}")
        self.geometry = geometry
        self.degree = degree
        self.q = q
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_entries(cls, geometry: BoxGeometry, degree: int, q: int,
                     entries: dict[CellKey, int]) -> "Form":
        idx = geometry.index(degree)
        values = np.zeros(geometry.n_cells(degree), dtype=np.int64)
        for key, v in entries.items():
            values[idx[key]] = v % q
        return cls(geometry, degree, q, values)

    def at(self, cell: Cell) -> int:
        """Value on an oriented cell (negated mod q for sign -1)."""
        v = int(self.values[self.geometry.cell_id(cell)])
        return v if cell.sign == 1 else (-v) % self.q

    def support(self) -> list[int]:
        """Indices of positive cells carrying a nonzero value."""
        return np.nonzero(self.values)[0].tolist()

    def support_size(self) -> int:
        return int(np.count_nonzero(self.values))

    def __add__(self, other: "Form") -> "Form":
        self._check_compatible(other)
        return Form(self.geometry, self.degree, self.q,
                    (self.values + other.values) % self.q)

    def __sub__(self, other: "Form") -> "Form":
        self._check_compatible(other)
        return Form(self.geometry, self.degree, self.q,
                    (self.values - other.values) % self.q)

    def __neg__(self) -> "Form":
        return Form(self.geometry, self.degree, self.q, (-self.values) % self.q)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Form):
            return NotImplemented
        return (self.geometry is other.geometry and self.degree == other.degree
                and self.q == other.q and np.array_equal(self.values, other.values))

    def _check_compatible(self, other: "Form") -> None:
        if (self.geometry is not other.geometry or self.degree != other.degree
                or self.q != other.q):
            raise ValueError("forms live on different spaces")


class Chain:
    """An integer-valued k-chain with finite support over positive cells."""

    __slots__ = ("geometry", "degree", "coeffs")

    def __init__(self, geometry: BoxGeometry, degree: int,
                 coeffs: dict[CellKey, int] | None = None):
        geometry._check_degree(degree)
        self.geometry = geometry
        self.degree = degree
        self.coeffs = {k: int(v) for k, v in (coeffs or {}).items() if v != 0}
        idx = geometry.index(degree)
        for key in self.coeffs:
            if key not in idx:
                raise ValueError(f"cell {key} not in {geometry}")

    @classmethod
    def from_cells(cls, geometry: BoxGeometry, cells: list[Cell]) -> "Chain":
        if not cells:
            raise ValueError("empty cell list; pass an explicit degree instead")
        coeffs: dict[CellKey, int] = {}
        for c in cells:
            coeffs[c.key] = coeffs.get(c.key, 0) + c.sign
        return cls(geometry, cells[0].degree, coeffs)

    def __add__(self, other: "Chain") -> "Chain":
        if self.geometry is not other.geometry or self.degree != other.degree:
            raise ValueError("chains live on different spaces")
        coeffs = dict(self.coeffs)
        for key, v in other.coeffs.items():
            coeffs[key] = coeffs.get(key, 0) + v
        return Chain(self.geometry, self.degree, coeffs)

    def __neg__(self) -> "Chain":
        return Chain(self.geometry, self.degree,
                     {k: -v for k, v in self.coeffs.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Chain):
            return NotImplemented
        return (self.geometry is other.geometry and self.degree == other.degree
                and self.coeffs == other.coeffs)

    def support_size(self) -> int:
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs


# -- operators ---------------------------------------------------------------


def exterior_derivative(omega: Form) -> Form:
    """(d omega)(p) = omega(boundary p) for every (k+1)-cell p, mod q."""
    g = omega.geometry
    k = omega.degree
    if k >= g.d:
        raise ValueError(f"no exterior derivative for degree {k} in dimension {g.d}")
    out = np.zeros(g.n_cells(k + 1), dtype=np.int64)
    vals = omega.values
    for j, faces in enumerate(g.boundary_rows(k + 1)):
        s = 0
        for i, sign in faces:
            s += sign * vals[i]
        out[j] = s
    return Form(g, k + 1, omega.q, out)


def coderivative(omega: Form) -> Form:
    """(delta omega)(e) = signed sum of omega over cells having e in their boundary."""
    g = omega.geometry
    k = omega.degree
    if k < 1:
        raise ValueError("no coderivative for 0-forms")
    out = np.zeros(g.n_cells(k - 1), dtype=np.int64)
    vals = omega.values
    for i, cofaces in enumerate(g.coboundary_rows(k - 1)):
        s = 0
        for j, sign in cofaces:
            s += sign * vals[j]
        out[i] = s
    return Form(g, k - 1, omega.q, out)


def boundary(chain: Chain) -> Chain:
    """Linear extension of the oriented cell boundary."""
    g = chain.geometry
    k = chain.degree
    if k < 1:
        raise ValueError("no boundary for 0-chains")
    face_cells = g.cells(k - 1)
    rows = g.boundary_rows(k)
    idx = g.index(k)
    coeffs: dict[CellKey, int] = {}
    for key, v in chain.coeffs.items():
        for i, sign in rows[idx[key]]:
            fkey = face_cells[i].key
            coeffs[fkey] = coeffs.get(fkey, 0) + sign * v
    return Chain(g, k - 1, coeffs)


def coboundary_chain(chain: Chain) -> Chain:
    """The chain whose coefficient on each (k+1)-cell is its incidence with ``chain``.

    For a single positive k-cell e this is the sum, with boundary signs, of all
    (k+1)-cells of the box whose boundary contains e.
    """
    g = chain.geometry
    k = chain.degree
    if k >= g.d:
        raise ValueError(f"no coboundary for degree {k} in dimension {g.d}")
    cocells = g.cells(k + 1)
    rows = g.coboundary_rows(k)
    idx = g.index(k)
    coeffs: dict[CellKey, int] = {}
    for key, v in chain.coeffs.items():
        for j, sign in rows[idx[key]]:
            ckey = cocells[j].key
            coeffs[ckey] = coeffs.get(ckey, 0) + sign * v
    return Chain(g, k + 1, coeffs)


def evaluate(omega: Form, chain: Chain) -> int:
    """omega(chain) = sum_p chain(p) * omega(p) mod q."""
    if omega.degree != chain.degree:
        raise ValueError(
            f"degree mismatch: form has {omega.degree}, chain has {chain.degree}")
    if omega.geometry is not chain.geometry:
        raise ValueError("form and chain live on different boxes")
    idx = omega.geometry.index(omega.degree)
    s = 0
    for key, v in chain.coeffs.items():
        s += v * int(omega.values[idx[key]])
    return s % omega.q


# -- paths --------------------------------------------------------------------


def straight_path(geometry: BoxGeometry, start: Vertex, axis: int,
                  length: int) -> Chain:
    """Straight 1-chain of ``length`` unit edges from ``start`` along ``axis``."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    coeffs: dict[CellKey, int] = {}
    v = list(start)
    for _ in range(length):
        coeffs[(tuple(v), (axis,))] = 1
        v[axis] += 1
    return Chain(geometry, 1, coeffs)


def is_path(chain: Chain) -> bool:
    """True if the chain is a simple path: +-1 coefficients, connected edge walk
    with at most two odd-degree endpoints (a closed loop has none)."""
    if not chain.coeffs:
        return True
    if chain.degree != 1:
        return False
    if any(abs(v) != 1 for v in chain.coeffs.values()):
        return False
    bnd = boundary(chain)
    if any(abs(v) > 1 for v in bnd.coeffs.values()) or len(bnd.coeffs) > 2:
        return False
    # connectivity of the covered edges
    adj: dict[Vertex, list[Vertex]] = {}
    for (anchor, axes), _ in chain.coeffs.items():
        head = tuple(v + 1 if j == axes[0] else v for j, v in enumerate(anchor))
        adj.setdefault(anchor, []).append(head)
        adj.setdefault(head, []).append(anchor)
    seen = set()
    stack = [next(iter(adj))]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(adj[v])
    return len(seen) == len(adj)


# -- serialization ------------------------------------------------------------


def form_to_json(omega: Form) -> str:
    """JSON encoding over positive cells: {degree, q, entries:[{anchor, axes, value}]}."""
    cells = omega.geometry.cells(omega.degree)
    entries = [
        {"anchor": list(cells[i].anchor), "axes": list(cells[i].axes),
         "value": int(omega.values[i])}
        for i in omega.support()
    ]
    return json.dumps({"degree": omega.degree, "q": omega.q, "entries": entries})


def form_from_json(geometry: BoxGeometry, text: str) -> Form:
    doc = json.loads(text)
    entries = {
        (tuple(e["anchor"]), tuple(e["axes"])): int(e["value"])
        for e in doc["entries"]
    }
    return Form.from_entries(geometry, int(doc["degree"]), int(doc["q"]), entries)


def chain_to_json(chain: Chain) -> str:
    entries = [
        {"anchor": list(anchor), "axes": list(axes), "value": v}
        for (anchor, axes), v in sorted(chain.coeffs.items())
    ]
    return json.dumps({"degree": chain.degree, "entries": entries})


def chain_from_json(geometry: BoxGeometry, text: str) -> Chain:
    doc = json.loads(text)
    coeffs = {
        (tuple(e["anchor"]), tuple(e["axes"])): int(e["value"])
        for e in doc["entries"]
    }
    return Chain(geometry, int(doc["degree"]), coeffs)
