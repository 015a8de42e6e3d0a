"""Single-flip Metropolis sampler for the Z_2 unitary-gauge model.

Mid-scale cross-check for boxes too large to enumerate: edges are visited in
a fixed sequential order, each flip is accepted with min(1, e^{Delta H})
against the unitary weight, and Wilson observables are measured on a fixed
stride.  Randomness is counter-based: one Philox stream keyed by the seed
with the sweep index as counter, so the uniform used at (sweep, site) is
reproducible bit-for-bit regardless of how sweeps are scheduled.

Error bars are leave-one-batch-out jackknife over contiguous batches; the
integrated autocorrelation time of the measurement series is reported so
undersized batches are visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from latthiggs.dec import Chain
from latthiggs.gaugemodel import ModelParams


@dataclass(frozen=True)
class McConfig:
    """Sampler schedule: seed, sweep counts, measurement stride, batch count."""

    seed: int
    sweeps: int
    burn_in: int = 0
    stride: int = 1
    batches: int = 32

    def __post_init__(self) -> None:
        if self.sweeps < 1 or self.burn_in < 0:
            raise ValueError("sweeps must be positive and burn_in nonnegative")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.batches < 2:
            raise ValueError(f"need at least 2 batches, got {self.batches}")


@dataclass(frozen=True)
class McResult:
    """Measured mean with jackknife standard error and mixing diagnostic."""

    mean: float
    stderr: float
    tau_int: float
    samples: int


def _sweep_uniforms(seed: int, sweep: int, count: int) -> np.ndarray:
    """The uniforms consumed during one sweep, addressed by (seed, sweep)."""
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, sweep]))
    return gen.random(count)


class _Chain:
    """Mutable sampler state over the positive edges of the box."""

    def __init__(self, params: ModelParams):
        if params.m != 2 or params.n != 2:
            raise ValueError("the sampler targets the Z_2 unitary-gauge model")
        g = params.geometry
        self.params = params
        self.E = g.n_cells(1)
        self.sigma = np.zeros(self.E, dtype=np.int8)
        self.plaq = np.zeros(g.n_cells(2), dtype=np.int8)
        self.cofaces = [np.array([j for j, _ in row], dtype=np.int64)
                        for row in g.coboundary_rows(1)]

    def delta_h(self, e: int) -> float:
        """Energy change of flipping edge e under the unitary weight exponent."""
        p = self.params
        dh = 4.0 * p.kappa * (2.0 * self.sigma[e] - 1.0)
        frustrated = self.plaq[self.cofaces[e]]
        dh += 4.0 * p.beta * float(np.sum(2 * frustrated - 1))
        return dh

    def flip(self, e: int) -> None:
        self.sigma[e] ^= 1
        self.plaq[self.cofaces[e]] ^= 1

    def sweep(self, uniforms: np.ndarray) -> None:
        for e in range(self.E):
            dh = self.delta_h(e)
            if dh >= 0.0 or uniforms[e] < math.exp(dh):
                self.flip(e)


def _gamma_indices(gamma: Chain) -> np.ndarray:
    idx = gamma.geometry.index(1)
    return np.array(sorted(idx[key] for key, v in gamma.coeffs.items() if v % 2),
                    dtype=np.int64)


def integrated_autocorrelation(series: np.ndarray, window_factor: float = 6.0) -> float:
    """Sokal-windowed integrated autocorrelation time of a scalar series."""
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var == 0.0 or n < 4:
        return 0.5
    tau = 0.5
    for t in range(1, n // 2):
        rho = float(np.dot(x[:-t], x[t:])) / ((n - t) * var)
        tau += rho
        if t >= window_factor * tau:
            break
    return max(tau, 0.5)


def sample_expectation(gamma: Chain, params: ModelParams,
                       mc: McConfig) -> McResult:
    """Metropolis estimate of E^(U)[W_gamma] with jackknife error bars."""
    results = sample_expectations([gamma], params, mc)
    return results[0]


def sample_expectations(gammas: list[Chain], params: ModelParams,
                        mc: McConfig) -> list[McResult]:
    """Measure several Wilson observables on one chain (shared randomness)."""
    chain = _Chain(params)
    masks = [_gamma_indices(g) for g in gammas]
    n_meas = mc.sweeps // mc.stride
    if n_meas < mc.batches:
        raise ValueError(
            f"{mc.sweeps} sweeps at stride {mc.stride} give {n_meas} measurements,"
            f" fewer than {mc.batches} batches")
    series = np.empty((len(gammas), n_meas))
    done = 0
    for sweep in range(mc.burn_in + mc.sweeps):
        chain.sweep(_sweep_uniforms(mc.seed, sweep, chain.E))
        live = sweep - mc.burn_in
        if live >= 0 and (live + 1) % mc.stride == 0 and done < n_meas:
            for i, mask in enumerate(masks):
                parity = int(np.sum(chain.sigma[mask])) & 1
                series[i, done] = 1.0 - 2.0 * parity
            done += 1
    out = []
    for i in range(len(gammas)):
        mean, err = _jackknife(series[i], mc.batches)
        out.append(McResult(mean=mean, stderr=err,
                            tau_int=integrated_autocorrelation(series[i]),
                            samples=n_meas))
    return out


def _jackknife(series: np.ndarray, batches: int) -> tuple[float, float]:
    """Leave-one-batch-out jackknife mean and standard error."""
    usable = (len(series) // batches) * batches
    blocks = series[:usable].reshape(batches, -1).mean(axis=1)
    mean = float(blocks.mean())
    loo = (blocks.sum() - blocks) / (batches - 1)
    var = (batches - 1) / batches * float(np.sum((loo - loo.mean()) ** 2))
    return mean, math.sqrt(var)


def detailed_balance_gap(params: ModelParams, seed: int = 0,
                         trials: int = 64) -> float:
    """Max log-scale deviation of acceptance ratios from weight ratios.

    For a frozen random configuration and a random edge, the ratio of forward
    to backward acceptance, min(1, e^{dH}) / min(1, e^{-dH}) = e^{dH}, must
    equal the unitary-weight ratio; the comparison is made between dH and the
    log-weight difference, since the ratios themselves span many decades.
    """
    from latthiggs.dec import Form
    from latthiggs.gaugemodel import unitary_log_weight

    rng = np.random.default_rng(seed)
    chain = _Chain(params)
    g = params.geometry
    worst = 0.0
    for _ in range(trials):
        chain.sigma = rng.integers(0, 2, chain.E).astype(np.int8)
        chain.plaq = np.zeros(g.n_cells(2), dtype=np.int8)
        for e in np.nonzero(chain.sigma)[0]:
            chain.plaq[chain.cofaces[e]] ^= 1
        e = int(rng.integers(0, chain.E))
        dh = chain.delta_h(e)
        w_old = unitary_log_weight(Form(g, 1, 2, chain.sigma.astype(np.int64)),
                                   params)
        chain.flip(e)
        w_new = unitary_log_weight(Form(g, 1, 2, chain.sigma.astype(np.int64)),
                                   params)
        chain.flip(e)
        worst = max(worst, abs(dh - (w_new - w_old)))
    return worst
