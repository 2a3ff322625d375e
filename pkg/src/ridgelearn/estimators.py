"""Monte-Carlo estimators of windowed Fourier mass and pointwise Fourier
values from black-box queries, plus the accuracy-targeted oracle wrappers
that pick sample budgets from the concentration bounds.

Randomness is counter-derived: work is split into fixed-size chunks and each
chunk uses its own Philox substream keyed by (seed, stage, call, chunk), so a
given (seed, m) always produces bit-identical output no matter how many
worker threads process the chunks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import CHUNK, chunk_sizes, substream
from .reference import GaussianWeight, _as_weight

__all__ = [
    "SmoothingScale",
    "Estimate",
    "BudgetExceededError",
    "est_weight",
    "est_val",
    "fourier_mass_oracle",
    "fourier_value_oracle",
    "mass_required_samples",
    "value_required_samples",
    "mass_radius",
    "value_radius",
]

_STAGE_WEIGHT = 0x57454947
_STAGE_VALUE = 0x56414C55


@dataclass(frozen=True)
class SmoothingScale:
    """A damping width ell with its pipeline role."""

    ell: float
    role: str = "direction-search"

    def __post_init__(self):
        if self.ell <= 0:
            raise ValueError("ell must be > 0")
        if self.role not in ("direction-search", "function-recovery"):
            raise ValueError(f"unknown role {self.role!r}")


def _ell_value(ell):
    if isinstance(ell, SmoothingScale):
        return float(ell.ell)
    ell = float(ell)
    if ell <= 0:
        raise ValueError("ell must be > 0")
    return ell


class BudgetExceededError(RuntimeError):
    """The accuracy target needs more samples than the configured cap."""

    def __init__(self, required, cap, context=""):
        self.required = required
        self.cap = cap
        super().__init__(
            f"required {required} samples exceeds the cap {cap} {context}")


# ---------------------------------------------------------------------------
# Concentration radii and budget solvers
# ---------------------------------------------------------------------------

def mass_radius(ell, dim, eps, m, delta):
    """High-probability error radius of the two-point mass estimator."""
    c = (math.pi * ell * ell) ** (dim / 2.0)
    return 8.0 * c * (eps + math.sqrt(2.0 * math.log(8.0 / delta) / m))


def value_radius(ell, dim, eps, m, delta):
    """High-probability error radius of the pointwise value estimator."""
    return 4.0 * ell ** dim * (eps + math.sqrt(2.0 * math.log(8.0 / delta) / m))


def _required_samples(tau, delta, eps, scale):
    margin = tau / scale - eps
    if margin <= 0.0:
        raise BudgetExceededError(
            float("inf"), None,
            context=f"(tau={tau:g} is not achievable at eps={eps:g})")
    return int(math.ceil(2.0 * math.log(8.0 / delta) / margin ** 2))


def mass_required_samples(tau, delta, eps, ell, dim):
    c = (math.pi * ell * ell) ** (dim / 2.0)
    return _required_samples(tau, delta, eps, 8.0 * c)


def value_required_samples(tau, delta, eps, ell, dim):
    return _required_samples(tau, delta, eps, 4.0 * ell ** dim)


@dataclass(frozen=True)
class Estimate:
    """An estimator output with its concentration bookkeeping."""

    value: complex
    samples: int
    radius: float
    delta: float
    kind: str  # "mass" | "value"
    ell: float
    dim: int
    eps: float

    def recomputed_radius(self):
        if self.kind == "mass":
            return mass_radius(self.ell, self.dim, self.eps, self.samples,
                               self.delta)
        return value_radius(self.ell, self.dim, self.eps, self.samples,
                            self.delta)


# ---------------------------------------------------------------------------
# Core estimators
# ---------------------------------------------------------------------------

def _seed_of(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def _sqrt_cov_rows(weight):
    """Rows U * sqrt(2 lambda) so that xi @ rows.T ~ N(0, 2A); singular
    directions get exactly zero variance."""
    lam = np.clip(weight.eigvals, 0.0, None)
    return weight.eigvecs * np.sqrt(2.0 * lam)


def _weight_chunk(oracle, ell, center, sqrt_rows, n, gen):
    d = center.size
    xi = gen.standard_normal((n, d))
    zeta = gen.standard_normal((n, d))
    delta = xi @ sqrt_rows.T
    z = zeta * (ell / math.sqrt(2.0))
    u = oracle.query_many(z - 0.5 * delta)
    w = oracle.query_many(z + 0.5 * delta)
    norm2 = np.einsum("ij,ij->i", delta, delta)
    phase = np.exp(-norm2 / (4.0 * ell * ell) - 1j * (delta @ center))
    return complex(np.sum(phase * (u * w)))


def est_weight(oracle, ell, weight, m, rng, delta=0.05, threads=1,
               call_index=0, matrix=None):
    """Two-point correlation estimate of the windowed Fourier mass.

    Draws pair offsets from N(0, 2A) and midpoints from N(0, (ell^2/2) I),
    queries the black box at both ends, and averages the phased products.
    """
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    ell = _ell_value(ell)
    w = _as_weight(weight, matrix)
    if w.dim != oracle.dim:
        raise ValueError("weight dimension mismatch")
    seed = _seed_of(rng)
    sqrt_rows = _sqrt_cov_rows(w)
    sizes = chunk_sizes(m)

    def work(idx_n):
        idx, n = idx_n
        gen = substream(seed, _STAGE_WEIGHT, call_index, idx)
        return _weight_chunk(oracle, ell, w.center, sqrt_rows, n, gen)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, enumerate(sizes)))
    else:
        parts = [work(t) for t in enumerate(sizes)]
    total = complex(sum(parts))  # fixed chunk order: thread-count invariant
    c = (math.pi * ell * ell) ** (oracle.dim / 2.0)
    eps = oracle.noise.eps
    return Estimate(value=c * total / m, samples=m,
                    radius=mass_radius(ell, oracle.dim, eps, m, delta),
                    delta=delta, kind="mass", ell=ell, dim=oracle.dim, eps=eps)


def _value_chunk(oracle, ell, y, n, gen):
    d = y.size
    x = gen.standard_normal((n, d)) * ell
    vals = oracle.query_many(x)
    return complex(np.sum(vals * np.exp(-1j * (x @ y))))


def est_val(oracle, ell, y, m, rng, delta=0.05, threads=1, call_index=0):
    """Plain Monte-Carlo estimate of the damped model's Fourier transform at
    a point y: damped-Gaussian draws, phased average, times ell^d."""
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    ell = _ell_value(ell)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != oracle.dim:
        raise ValueError("point dimension mismatch")
    seed = _seed_of(rng)
    sizes = chunk_sizes(m)

    def work(idx_n):
        idx, n = idx_n
        gen = substream(seed, _STAGE_VALUE, call_index, idx)
        return _value_chunk(oracle, ell, y, n, gen)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, enumerate(sizes)))
    else:
        parts = [work(t) for t in enumerate(sizes)]
    total = complex(sum(parts))
    eps = oracle.noise.eps
    return Estimate(value=ell ** oracle.dim * total / m, samples=m,
                    radius=value_radius(ell, oracle.dim, eps, m, delta),
                    delta=delta, kind="value", ell=ell, dim=oracle.dim,
                    eps=eps)


# ---------------------------------------------------------------------------
# Accuracy-targeted oracle wrappers
# ---------------------------------------------------------------------------

def fourier_mass_oracle(oracle, ell, weight, tau, delta, rng, budget_cap=10**7,
                        threads=1, call_index=0, matrix=None, trace=None):
    """tau-accurate windowed-mass estimate: picks m so the concentration
    radius is <= tau at confidence 1 - delta, runs the estimator, returns the
    real part.

    Emits a warning when tau is below the noise floor the theory budgets for
    (10 eps (pi ell^2)^{d/2}); raises BudgetExceededError when the required
    m exceeds ``budget_cap``.
    """
    ell = _ell_value(ell)
    eps = oracle.noise.eps
    floor = 10.0 * eps * (math.pi * ell * ell) ** (oracle.dim / 2.0)
    if tau <= floor and eps > 0:
        warnings.warn(
            f"mass-oracle accuracy tau={tau:g} is at or below the query-noise "
            f"floor {floor:g}; the estimate cannot be trusted to tau",
            stacklevel=2)
    m = mass_required_samples(tau, delta, eps, ell, oracle.dim)
    if m > budget_cap:
        raise BudgetExceededError(m, budget_cap,
                                  context=f"(mass oracle at tau={tau:g})")
    est = est_weight(oracle, ell, weight, m, rng, delta=delta, threads=threads,
                     call_index=call_index, matrix=matrix)
    if trace is not None:
        w = _as_weight(weight, matrix)
        trace({"kind": "mass", "v": w.center.tolist(),
               "eigvals": w.eigvals.tolist(), "m": m,
               "value": [est.value.real, est.value.imag],
               "radius": est.radius})
    return est.value.real


def fourier_value_oracle(oracle, ell, y, tau, delta, rng, budget_cap=10**7,
                         threads=1, call_index=0, trace=None):
    """tau-accurate pointwise transform estimate (complex)."""
    ell = _ell_value(ell)
    eps = oracle.noise.eps
    floor = 10.0 * eps * ell ** oracle.dim
    if tau <= floor and eps > 0:
        warnings.warn(
            f"value-oracle accuracy tau={tau:g} is at or below the query-noise "
            f"floor {floor:g}; the estimate cannot be trusted to tau",
            stacklevel=2)
    m = value_required_samples(tau, delta, eps, ell, oracle.dim)
    if m > budget_cap:
        raise BudgetExceededError(m, budget_cap,
                                  context=f"(value oracle at tau={tau:g})")
    est = est_val(oracle, ell, y, m, rng, delta=delta, threads=threads,
                  call_index=call_index)
    if trace is not None:
        trace({"kind": "value", "y": np.asarray(y, dtype=float).tolist(),
               "m": m, "value": [est.value.real, est.value.imag],
               "radius": est.radius})
    return est.value
