"""The Z_m x Z_n lattice Higgs model on a box.

A configuration is a pair (sigma, phi): a Z_m gauge field on edges and a Z_n
matter field on vertices.  The energy couples the plaquette holonomy of sigma
at strength beta and the covariant edge difference sigma - d phi at strength
kappa, summed over *all oriented* cells, so both terms are real: the two
orientations of a cell contribute a conjugate pair.

The one-dimensional character rho(j) = exp(2 pi i j / q) is used throughout;
for q = 2 it is the real sign character, and single-cell weights reduce to
e^{+-2 beta}, e^{+-2 kappa}.

Wilson observables insert rho(sigma(gamma)) rho(phi(boundary gamma))^{-1};
for a closed loop the matter factor drops.  The inverse on the matter factor
follows the partition-sum convention; for m = n = 2 the two sign choices
coincide.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from latthiggs import dec
from latthiggs.dec import BoxGeometry, Chain, Form, box_geometry


@dataclass(frozen=True)
class ModelParams:
    """Geometry and couplings: box (d, N), groups Z_m / Z_n, couplings beta, kappa."""

    d: int
    N: int
    m: int
    n: int
    beta: float
    kappa: float

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"need spatial dimension >= 2, got d={self.d}")
        if self.N < 1:
            raise ValueError(f"need side length >= 1, got N={self.N}")
        if self.m < 2 or self.n < 2:
            raise ValueError(f"cyclic group orders must be >= 2, got m={self.m}, n={self.n}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be a finite nonnegative real, got {self.beta}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be a finite nonnegative real, got {self.kappa}")

    @property
    def geometry(self) -> BoxGeometry:
        return box_geometry(self.d, self.N)

    @classmethod
    def from_mapping(cls, doc: dict) -> "ModelParams":
        """Build from a config block {d, N, m, n, beta, kappa}."""
        try:
            return cls(d=int(doc["d"]), N=int(doc["N"]), m=int(doc["m"]),
                       n=int(doc["n"]), beta=float(doc["beta"]),
                       kappa=float(doc["kappa"]))
        except KeyError as missing:
            raise ValueError(f"model config is missing key {missing}") from None

    def to_mapping(self) -> dict:
        return {"d": self.d, "N": self.N, "m": self.m, "n": self.n,
                "beta": self.beta, "kappa": self.kappa}

    def replace(self, **kw) -> "ModelParams":
        doc = self.to_mapping()
        doc.update(kw)
        return ModelParams.from_mapping(doc)


@dataclass(frozen=True)
class GaugeConfig:
    """A joint field configuration: sigma on edges (mod m), phi on vertices (mod n)."""

    sigma: Form
    phi: Form

    def __post_init__(self) -> None:
        if self.sigma.degree != 1:
            raise ValueError("sigma must be a 1-form")
        if self.phi.degree != 0:
            raise ValueError("phi must be a 0-form")
        if self.sigma.geometry is not self.phi.geometry:
            raise ValueError("sigma and phi must live on the same box")


def zero_config(params: ModelParams) -> GaugeConfig:
    g = params.geometry
    return GaugeConfig(Form(g, 1, params.m), Form(g, 0, params.n))


def character(q: int, value: int) -> complex:
    """The faithful one-dimensional character rho(j) = exp(2 pi i j / q)."""
    return cmath.exp(2j * math.pi * (value % q) / q)


def hamiltonian(cfg: GaugeConfig, params: ModelParams) -> float:
    """Energy of a configuration, summed over all oriented cells (hence real).

    Equals 2 beta sum_{p+} cos(2 pi d sigma(p)/m)
         + 2 kappa sum_{e+} cos(2 pi (sigma(e)/m - d phi(e)/n)).
    """
    m, n = params.m, params.n
    dsigma = dec.exterior_derivative(cfg.sigma)
    dphi = dec.exterior_derivative(cfg.phi)
    plaq = sum(math.cos(2 * math.pi * v / m) for v in dsigma.values)
    edge = sum(
        math.cos(2 * math.pi * (sv / m - pv / n))
        for sv, pv in zip(cfg.sigma.values, dphi.values)
    )
    return 2 * params.beta * plaq + 2 * params.kappa * edge


def activity(sigma: Form, beta: float, kappa: float) -> float:
    """Boltzmann weight of a Z_2 gauge configuration relative to the vacuum.

    Counting oriented cells (two per positive cell), this is
    e^{-2 beta |supp d sigma|} e^{-2 kappa |supp sigma|}.
    """
    if sigma.q != 2:
        raise ValueError(f"activity in this normalized form needs modulus 2, got {sigma.q}")
    dsup = dec.exterior_derivative(sigma).support_size()
    ssup = sigma.support_size()
    return math.exp(-4.0 * beta * dsup - 4.0 * kappa * ssup)


def wilson(cfg: GaugeConfig, gamma: Chain) -> complex:
    """rho(sigma(gamma)) rho(phi(boundary gamma))^{-1} for a path gamma."""
    if not dec.is_path(gamma):
        raise ValueError("gamma is not a path")
    s = dec.evaluate(cfg.sigma, gamma)
    p = dec.evaluate(cfg.phi, dec.boundary(gamma))
    return character(cfg.sigma.q, s) * character(cfg.phi.q, p).conjugate()


def gauge_transform(cfg: GaugeConfig, eta: Form) -> GaugeConfig:
    """sigma -> sigma - d eta, phi -> phi + eta (requires m = n)."""
    if cfg.sigma.q != cfg.phi.q:
        raise ValueError(
            f"gauge transforms need matching groups, got m={cfg.sigma.q}, n={cfg.phi.q}")
    if eta.degree != 0 or eta.q != cfg.sigma.q:
        raise ValueError("eta must be a 0-form with the gauge modulus")
    return GaugeConfig(cfg.sigma - dec.exterior_derivative(eta), cfg.phi + eta)


def to_unitary_gauge(cfg: GaugeConfig) -> GaugeConfig:
    """Apply the transform with eta = -phi, which zeroes the matter field."""
    return gauge_transform(cfg, -cfg.phi)


def unitary_weight(sigma: Form, params: ModelParams) -> float:
    """Single-field weight exp(beta sum_p rho(d sigma) + kappa sum_e rho(sigma)),
    oriented-cell sums (requires m = n)."""
    if params.m != params.n:
        raise ValueError(f"unitary gauge needs m = n, got m={params.m}, n={params.n}")
    if sigma.q != params.m:
        raise ValueError(f"sigma has modulus {sigma.q}, params have m={params.m}")
    return math.exp(unitary_log_weight(sigma, params))


def unitary_log_weight(sigma: Form, params: ModelParams) -> float:
    m = params.m
    dsigma = dec.exterior_derivative(sigma)
    plaq = sum(math.cos(2 * math.pi * v / m) for v in dsigma.values)
    edge = sum(math.cos(2 * math.pi * v / m) for v in sigma.values)
    return 2 * params.beta * plaq + 2 * params.kappa * edge
