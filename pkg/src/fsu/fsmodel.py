"""Frequency-selective sparse approximation of scattered 2D samples.

A signal known at scattered positions ``(m, n)`` is approximated by a sparse
sum of separable half-cosine functions over a rectangular extent. Each
iteration picks the basis function whose optimal weighted least-squares
coefficient removes the most spatially weighted residual energy, after
scaling that energy decrease by a spectral prior that favours low
frequencies. Coefficients of re-selected functions accumulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

# Candidates whose weighted energy on the sample set falls below this are
# never selected.
MIN_BASIS_ENERGY = 1e-12
# Estimation stops once the weighted residual energy falls below this
# fraction of the signal's own weighted energy (floating-point noise floor).
RELATIVE_ENERGY_FLOOR = 1e-24


@dataclass(frozen=True)
class BasisSpec:
    """Half-cosine basis ``cos(pi*k*u) * cos(pi*l*v)`` on a rectangle.

    ``u`` and ``v`` are the positions rescaled so that the extent maps to
    [0, 1]^2. Candidates are ``(k, l)`` in ``{0..K-1}^2``.
    """

    extent: Tuple[float, float, float, float]
    max_freq: int = 8

    def __post_init__(self):
        m0, m1, n0, n1 = self.extent
        if not (m1 > m0 and n1 > n0):
            raise ValueError(f"degenerate basis extent {self.extent}")
        if self.max_freq < 1:
            raise ValueError("max_freq must be positive")

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Candidate ``(k, l)`` pairs in tie-break order: by k^2 + l^2, then k, then l."""
        K = self.max_freq
        pairs = [(k, l) for k in range(K) for l in range(K)]
        pairs.sort(key=lambda kl: (kl[0] ** 2 + kl[1] ** 2, kl[0], kl[1]))
        return np.asarray(pairs, dtype=np.int64)

    def unit_coordinates(self, positions) -> Tuple[np.ndarray, np.ndarray]:
        pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        m0, m1, n0, n1 = self.extent
        return (pos[:, 0] - m0) / (m1 - m0), (pos[:, 1] - n0) / (n1 - n0)

    def contains(self, positions, slack: float = 1e-9) -> np.ndarray:
        u, v = self.unit_coordinates(positions)
        return (u >= -slack) & (u <= 1 + slack) & (v >= -slack) & (v <= 1 + slack)

    def design(self, positions) -> np.ndarray:
        """Matrix of all candidate functions at ``positions``, shape (n, K*K),
        columns in the order of :attr:`frequencies`."""
        u, v = self.unit_coordinates(positions)
        k = np.arange(self.max_freq)
        cu = np.cos(np.pi * np.outer(u, k))
        cv = np.cos(np.pi * np.outer(v, k))
        f = self.frequencies
        return cu[:, f[:, 0]] * cv[:, f[:, 1]]


def basis_value(spec: BasisSpec, k: int, l: int, m: float, n: float) -> float:
    u, v = spec.unit_coordinates([m, n])
    return float(np.cos(np.pi * k * u[0]) * np.cos(np.pi * l * v[0]))


@dataclass(frozen=True)
class WeightingSpec:
    """Isotropic spatial window ``rho ** (d / unit_radius)`` around ``center``
    and spectral prior ``sigma ** sqrt(k^2 + l^2)``."""

    spatial_decay: float
    spectral_decay: float
    center: Tuple[float, float]
    unit_radius: float

    def __post_init__(self):
        if not 0 < self.spatial_decay <= 1:
            raise ValueError("spatial_decay must lie in (0, 1]")
        if not 0 < self.spectral_decay <= 1:
            raise ValueError("spectral_decay must lie in (0, 1]")
        if not self.unit_radius > 0:
            raise ValueError("unit_radius must be positive")

    @classmethod
    def for_extent(cls, extent, spatial_decay=0.7, spectral_decay=0.8):
        """Window centred on ``extent``; weight equals ``spatial_decay`` at half
        the extent diagonal."""
        m0, m1, n0, n1 = extent
        center = (0.5 * (m0 + m1), 0.5 * (n0 + n1))
        radius = 0.5 * math.hypot(m1 - m0, n1 - n0)
        return cls(spatial_decay, spectral_decay, center, radius)

    def spatial(self, positions) -> np.ndarray:
        pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        d = np.hypot(pos[:, 0] - self.center[0], pos[:, 1] - self.center[1])
        return np.power(self.spatial_decay, d / self.unit_radius)

    def spectral(self, frequencies) -> np.ndarray:
        f = np.asarray(frequencies, dtype=np.float64).reshape(-1, 2)
        return np.power(self.spectral_decay, np.hypot(f[:, 0], f[:, 1]))


def spatial_weight(spec: WeightingSpec, m: float, n: float) -> float:
    return float(spec.spatial([m, n])[0])


def spectral_weight(spec: WeightingSpec, k: int, l: int) -> float:
    return float(spec.spectral_decay ** math.sqrt(k * k + l * l))


@dataclass
class SparseModel:
    """Accumulated coefficients per selected ``(k, l)``.

    ``selections`` lists the chosen pair of every iteration and
    ``energy_history`` the weighted residual energy before the first and
    after every iteration.
    """

    terms: Dict[Tuple[int, int], float] = field(default_factory=dict)
    iterations_used: int = 0
    final_residual_energy: float = 0.0
    selections: List[Tuple[int, int]] = field(default_factory=list)
    energy_history: List[float] = field(default_factory=list)


def estimate_many(positions, values, basis: BasisSpec, weights: WeightingSpec,
                  max_iterations: int = 32, residual_threshold: float = 0.0,
                  design: np.ndarray | None = None) -> List[SparseModel]:
    """Fit one sparse model per column of ``values`` (shape (n, c)).

    The columns share the sample positions, so the design matrix and the
    weights are computed once. Each column runs its own selection loop.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 1:
        vals = vals[:, None]
    n, nch = vals.shape
    if n == 0:
        raise ValueError("no samples to estimate from")
    phi = basis.design(positions) if design is None else design
    w = weights.spatial(positions)
    freqs = basis.frequencies
    prior = weights.spectral(freqs)
    wphi = phi * w[:, None]
    denom = np.einsum("ij,ij->j", wphi, phi)
    usable = denom >= MIN_BASIS_ENERGY
    safe_denom = np.where(usable, denom, 1.0)

    resid = vals.copy()
    energy = w @ (resid * resid)
    floor = np.maximum(residual_threshold, RELATIVE_ENERGY_FLOOR * energy)
    models = [SparseModel(energy_history=[float(e)]) for e in energy]
    active = np.ones(nch, dtype=bool)
    coeffs = np.zeros((len(freqs), nch))

    for _ in range(max_iterations):
        active &= (energy > floor) & (energy > 0)
        if not active.any():
            break
        cols = np.flatnonzero(active)
        # per-column products keep each channel bit-identical to a solo fit
        num = np.column_stack([wphi.T @ resid[:, ch] for ch in cols])
        c = num / safe_denom[:, None]
        gain = c * c * denom[:, None]
        score = np.where(usable[:, None], gain * prior[:, None], -np.inf)
        best = np.argmax(score, axis=0)
        for j, ch in enumerate(cols):
            b = best[j]
            if not (usable[b] and gain[b, j] > 0):
                active[ch] = False
                continue
            cb = c[b, j]
            coeffs[b, ch] += cb
            resid[:, ch] -= cb * phi[:, b]
            energy[ch] = w @ (resid[:, ch] ** 2)
            m = models[ch]
            m.selections.append((int(freqs[b, 0]), int(freqs[b, 1])))
            m.energy_history.append(float(energy[ch]))
            m.iterations_used += 1

    for ch, m in enumerate(models):
        m.final_residual_energy = float(energy[ch])
        for b in np.flatnonzero(coeffs[:, ch] != 0):
            m.terms[(int(freqs[b, 0]), int(freqs[b, 1]))] = float(coeffs[b, ch])
    return models


def estimate(positions, values, basis: BasisSpec, weights: WeightingSpec,
             max_iterations: int = 32, residual_threshold: float = 0.0) -> SparseModel:
    """Fit a sparse model to scalar samples ``values`` at ``positions`` (n, 2).

    Stops when the iteration budget is spent, the weighted residual energy
    drops to ``residual_threshold`` (or to numerical zero), or no candidate
    decreases the energy.
    """
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise ValueError("sample values must be finite")
    return estimate_many(positions, vals, basis, weights, max_iterations,
                         residual_threshold)[0]


def evaluate(model: SparseModel, basis: BasisSpec, positions) -> np.ndarray:
    """Model values at ``positions``; all positions must lie in the basis extent."""
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    if not np.all(basis.contains(pos)):
        raise ValueError("evaluation position outside the basis extent")
    out = np.zeros(len(pos))
    if not model.terms or len(pos) == 0:
        return out
    u, v = basis.unit_coordinates(pos)
    for (k, l), c in model.terms.items():
        out += c * np.cos(np.pi * k * u) * np.cos(np.pi * l * v)
    return out
