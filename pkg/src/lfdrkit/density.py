"""Average-density estimators: monotone MLE, exponential-family fit, grid NPMLE.

All three maximize the same objective, the mean log-likelihood
``(1/m) * sum_i log f(z_i)``, over different candidate families:

* :func:`grenander_fit` -- nonincreasing densities on [0, 1],
* :func:`lindsey_fit` -- exp(polynomial) densities fitted through a binned
  Poisson regression,
* :func:`npmle_mixture_fit` -- Gaussian location mixtures over a fixed
  atom grid, fitted by EM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate

from .core import (
    Density,
    DegeneracyError,
    ExpFamilyPoly,
    FitError,
    LocationMixture,
    Scale,
    StatVector,
    _as_float_array,
    _scalar_like,
)


# ---------------------------------------------------------------------------
# Grenander: monotone maximum likelihood on [0, 1]
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotoneDensityFit(Density):
    """Nonincreasing step density from the least concave majorant of the ECDF.

    ``heights[j]`` is the density on ``(breakpoints[j], breakpoints[j+1]]``;
    the value at 0 is the first height (left-derivative convention), and the
    value past the last breakpoint, up to 1, is 0.
    """

    breakpoints: Tuple[float, ...]
    heights: Tuple[float, ...]
    loglik: float
    support = (0.0, 1.0)

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        hts = tuple(float(h) for h in self.heights)
        if len(bp) != len(hts) + 1 or len(hts) < 1 or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0 and bound each height")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if min(hts) < 0 or np.any(np.diff(hts) > 0):
            raise ValueError("heights must be nonnegative and nonincreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "heights", hts)

    def pdf(self, t):
        arr, scalar = _as_float_array(t)
        self._check_support(arr)
        bp = np.asarray(self.breakpoints)
        hts = np.asarray(self.heights)
        # piece ending at each knot: value on (bp[j], bp[j+1]], and h[0] at 0
        idx = np.searchsorted(bp[1:], arr, side="left")
        out = np.where(idx < len(hts), hts[np.minimum(idx, len(hts) - 1)], 0.0)
        return _scalar_like(out, scalar)

    def cdf(self, t):
        arr, scalar = _as_float_array(t)
        bp = np.asarray(self.breakpoints)
        hts = np.asarray(self.heights)
        cum = np.concatenate([[0.0], np.cumsum(hts * np.diff(bp))])
        clipped = np.clip(arr, 0.0, bp[-1])
        idx = np.clip(np.searchsorted(bp, clipped, side="right") - 1, 0, len(hts) - 1)
        out = cum[idx] + hts[idx] * (clipped - bp[idx])
        return _scalar_like(np.minimum(out, cum[-1]), scalar)

    def total_mass(self):
        return float(np.sum(np.asarray(self.heights) * np.diff(self.breakpoints)))


def grenander_fit(stats: StatVector) -> MonotoneDensityFit:
    """Maximum likelihood nonincreasing density on [0, 1].

    Computed as the left derivative of the least concave majorant of the
    empirical CDF, via a stack scan over the ECDF vertices (tied order
    statistics collapse to a single jump).  O(m log m) including the sort.
    """
    if stats.scale is not Scale.P_VALUE:
        raise ValueError("grenander_fit expects p-scale statistics")
    p = np.sort(stats.values)
    m = p.size
    if p[0] <= 0.0:
        raise DegeneracyError(
            "monotone MLE undefined with an observation at exactly 0; "
            "perturb grid p-values first")
    u, counts = np.unique(p, return_counts=True)
    ys = np.cumsum(counts) / m
    xs = np.concatenate([[0.0], u])
    ys = np.concatenate([[0.0], ys])

    # least concave majorant: keep vertices with strictly decreasing chords
    hull = [0]
    for j in range(1, xs.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            s_prev = (ys[b] - ys[a]) / (xs[b] - xs[a])
            s_new = (ys[j] - ys[b]) / (xs[j] - xs[b])
            if s_prev <= s_new:
                hull.pop()
            else:
                break
        hull.append(j)
    hx = xs[hull]
    hy = ys[hull]
    heights = np.diff(hy) / np.diff(hx)

    # every sample point sits on (hx[j], hx[j+1]] for some piece j
    idx = np.searchsorted(hx[1:], p, side="left")
    ll = float(np.mean(np.log(heights[idx])))
    return MonotoneDensityFit(tuple(hx), tuple(heights), loglik=ll)


# ---------------------------------------------------------------------------
# Lindsey: exp(polynomial) density via binned Poisson regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpFamilyFit:
    degree: int
    coefficients: Tuple[float, ...]
    bin_edges: Tuple[float, ...]
    bin_counts: Tuple[int, ...]
    converged: bool

    def density(self) -> ExpFamilyPoly:
        return ExpFamilyPoly(self.coefficients, self.bin_edges[0], self.bin_edges[-1])


def _poisson_loglik(y, eta):
    return float(np.sum(y * eta - np.exp(eta)))


def lindsey_fit(stats: StatVector, degree: int = 7, bins: int = 120,
                max_iter: int = 200, grad_tol: float = 1e-8) -> ExpFamilyFit:
    """Fit exp(sum_j beta_j z^j) by Poisson regression on histogram counts.

    Bins span [min z - 0.5, max z + 0.5] with equal widths.  The GLM is
    solved by damped Newton with step halving; the returned coefficients are
    shifted so the density integrates to 1 over the bin range.
    """
    z = stats.values
    m = z.size
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if m < degree + 2:
        raise ValueError(f"need m >= degree + 2, got m={m}")
    if bins < degree + 2:
        raise ValueError(f"need bins >= degree + 2, got bins={bins}")

    lo, hi = float(z.min()) - 0.5, float(z.max()) + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(z, bins=edges)
    if np.count_nonzero(counts) <= 1:
        raise FitError("degenerate histogram: all mass in one bin")
    width = edges[1] - edges[0]
    mids = 0.5 * (edges[:-1] + edges[1:])

    # fit in the standardized variable u for conditioning, map back after
    c, s = 0.5 * (lo + hi), 0.25 * (hi - lo)
    u = (mids - c) / s
    V = np.vander(u, degree + 1, increasing=True)
    offset = math.log(m * width)

    gamma = np.zeros(degree + 1)
    y = counts.astype(float)
    eta = V @ gamma + offset
    ll = _poisson_loglik(y, eta)
    converged = False
    for _ in range(max_iter):
        mu = np.exp(eta)
        grad = V.T @ (y - mu)
        if np.max(np.abs(grad)) <= grad_tol:
            converged = True
            break
        hess = V.T @ (mu[:, None] * V)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # step halving keeps the objective nondecreasing
        t = 1.0
        for _ in range(60):
            cand = gamma + t * step
            eta_cand = V @ cand + offset
            ll_cand = _poisson_loglik(y, eta_cand)
            if np.isfinite(ll_cand) and ll_cand >= ll - 1e-12:
                break
            t *= 0.5
        gamma = gamma + t * step
        eta = V @ gamma + offset
        ll = _poisson_loglik(y, eta)
    else:
        mu = np.exp(eta)
        converged = bool(np.max(np.abs(V.T @ (y - mu))) <= grad_tol)

    poly_u = np.polynomial.Polynomial(gamma)
    beta = poly_u(np.polynomial.Polynomial([-c / s, 1.0 / s])).coef
    beta = np.concatenate([beta, np.zeros(degree + 1 - beta.size)])

    norm, _ = integrate.quad(
        lambda x: np.exp(np.polynomial.polynomial.polyval(x, beta)), lo, hi, limit=200)
    beta[0] -= math.log(norm)

    return ExpFamilyFit(
        degree=degree,
        coefficients=tuple(float(b) for b in beta),
        bin_edges=tuple(float(e) for e in edges),
        bin_counts=tuple(int(k) for k in counts),
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Grid NPMLE: Gaussian location mixture by EM
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureFit:
    grid: Tuple[float, ...]
    weights: Tuple[float, ...]
    loglik: float

    def density(self) -> LocationMixture:
        return LocationMixture(self.grid, self.weights)


def npmle_mixture_fit(stats: StatVector, grid_size: int = 300, tol: float = 1e-8,
                      max_iter: int = 5000) -> MixtureFit:
    """Maximum likelihood mixing weights over a fixed location grid.

    Maximizes ``sum_i log sum_g w_g phi(z_i - mu_g)`` by EM; the objective is
    nondecreasing across iterations and the loop stops once the gain drops
    below ``tol``.
    """
    z = stats.values
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    grid = np.linspace(float(z.min()) - 1.0, float(z.max()) + 1.0, grid_size)
    # every observation has a nearby atom, so the kernel matrix stays in
    # ordinary float range and the EM can run in the probability domain
    phi = np.exp(-0.5 * (z[:, None] - grid[None, :]) ** 2) / math.sqrt(2 * math.pi)

    w = np.full(grid_size, 1.0 / grid_size)
    mix = phi @ w
    ll = float(np.mean(np.log(mix)))
    for _ in range(max_iter):
        w = w * (phi.T @ (1.0 / mix)) / z.size
        w = np.maximum(w, 0.0)
        w /= w.sum()
        mix = phi @ w
        new_ll = float(np.mean(np.log(mix)))
        gain = new_ll - ll
        ll = new_ll
        if gain < tol:
            break

    return MixtureFit(tuple(float(g) for g in grid), tuple(float(x) for x in w), ll)


def density_loglik(model: Density, stats: StatVector) -> float:
    """Mean log density ``(1/m) * sum_i log f(z_i)``; -inf where f vanishes."""
    with np.errstate(divide="ignore"):
        vals = np.log(np.asarray(model.pdf(stats.values), dtype=float))
    return float(np.mean(vals))
