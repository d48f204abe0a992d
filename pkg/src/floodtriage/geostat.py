"""Spherical-variogram estimation and ordinary kriging.

The kriging system is solved globally (all samples in one dense system);
at the sample counts used here (<= 500) this is a trivial solve and avoids
search-neighborhood artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import SingularSystem, TooFewSamples

_WLS_EPS = 1e-8


@dataclass
class VariogramModel:
    """Spherical nugget/sill/range model.

    gamma(h) = c0 + c1*(3h/2a - h^3/2a^3) for 0 < h <= a, c0 + c1 beyond the
    range, and c0 at the origin. ``fallback`` marks a pure-nugget model
    produced when the weighted least-squares fit could not converge.
    """

    nugget: float
    sill: float
    range_: float
    fallback: bool = False

    def __post_init__(self):
        if self.nugget < 0 or self.sill <= 0 or self.range_ <= 0:
            raise ValueError("require nugget >= 0, sill > 0, range > 0")

    def gamma(self, h):
        h = np.asarray(h, dtype=np.float64)
        hn = np.minimum(h, self.range_) / self.range_
        out = self.nugget + self.sill * (1.5 * hn - 0.5 * hn**3)
        return np.where(h <= 0, self.nugget, out)

    def gamma_kriging(self, h):
        """Semivariance for the kriging system: exactly 0 at zero lag."""
        h = np.asarray(h, dtype=np.float64)
        return np.where(h <= 0, 0.0, self.gamma(h))


def empirical_semivariogram(coords: np.ndarray, values: np.ndarray,
                            n_bins: int = 12):
    """Binned empirical semivariogram.

    Returns a list of (lag, gamma_hat, pair_count) for non-empty equal-width
    bins spanning (0, max_distance/2]. If no pair falls within that cutoff
    (tiny sample sets), the cutoff widens to the full maximum distance.
    """
    coords = np.asarray(coords, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        raise TooFewSamples("need at least 2 samples")
    dists = pdist(coords)
    sqdiff = pdist(values[:, None], metric="sqeuclidean")
    hmax = dists.max()
    if hmax <= 0:
        raise TooFewSamples("all sample locations coincide")
    cutoff = hmax / 2.0
    if not np.any(dists <= cutoff):
        cutoff = hmax
    edges = np.linspace(0.0, cutoff, n_bins + 1)
    bins = []
    for k in range(n_bins):
        lo, hi = edges[k], edges[k + 1]
        sel = (dists > lo) & (dists <= hi)
        count = int(sel.sum())
        if count == 0:
            continue
        gamma_hat = float(sqdiff[sel].sum() / (2.0 * count))
        lag = float(dists[sel].mean())
        bins.append((lag, gamma_hat, count))
    return bins


def fit_spherical(bins) -> VariogramModel:
    """Weighted least-squares spherical fit to empirical bins.

    Weights are N_k / max(gamma_hat_k, eps)^2. Falls back to a pure-nugget
    model (flagged) when the optimizer cannot produce feasible parameters.
    """
    if len(bins) < 3:
        raise TooFewSamples(f"need >= 3 non-empty bins, got {len(bins)}")
    lags = np.array([b[0] for b in bins])
    gammas = np.array([b[1] for b in bins])
    counts = np.array([b[2] for b in bins], dtype=np.float64)
    weights = counts / np.maximum(gammas, _WLS_EPS) ** 2
    sqrt_w = np.sqrt(weights)

    def residuals(p):
        c0, c1, a = p
        hn = np.minimum(lags, a) / a
        model = c0 + c1 * (1.5 * hn - 0.5 * hn**3)
        return sqrt_w * (model - gammas)

    g_top = max(gammas.max(), _WLS_EPS)
    x0 = np.array([
        max(gammas[0] * 0.5, _WLS_EPS),
        max(g_top - gammas[0] * 0.5, _WLS_EPS),
        max(lags.max() * 0.6, _WLS_EPS),
    ])
    # The range is only identifiable within the sampled lag domain; an
    # unbounded fit can run away to a quasi-linear model whose kriging
    # weights overshoot far from the samples.
    lower = np.array([0.0, 1e-12, 1e-12])
    upper = np.array([np.inf, np.inf, float(lags.max())])
    try:
        result = least_squares(residuals, x0, bounds=(lower, upper))
        c0, c1, a = result.x
        if not (np.isfinite([c0, c1, a]).all() and c1 > 0 and a > 0):
            raise ValueError("infeasible fit")
        return VariogramModel(float(max(c0, 0.0)), float(c1), float(a))
    except Exception:
        nug = float(np.average(gammas, weights=weights))
        return VariogramModel(max(nug, _WLS_EPS), _WLS_EPS, float(lags.max()),
                              fallback=True)


def _dedup(coords: np.ndarray, values: np.ndarray, min_dist: float):
    """Drop later samples closer than min_dist to an earlier one."""
    if min_dist <= 0 or len(values) < 2:
        return coords, values
    keep = np.ones(len(values), dtype=bool)
    d = squareform(pdist(coords))
    for i in range(len(values)):
        if not keep[i]:
            continue
        close = (d[i] < min_dist) & (np.arange(len(values)) > i)
        keep[close] = False
    return coords[keep], values[keep]


def krige_predict(coords: np.ndarray, values: np.ndarray, model: VariogramModel,
                  targets: np.ndarray, dedup_distance: float = 0.0):
    """Ordinary kriging at target locations.

    Returns (predictions, kriging_variance) arrays. The unbiasedness
    constraint (weights summing to 1) is enforced with a Lagrange
    multiplier. A singular system is retried once with diagonal jitter.
    """
    coords = np.asarray(coords, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(values) < 2:
        raise TooFewSamples("kriging needs >= 2 samples")
    coords, values = _dedup(coords, values, dedup_distance)
    n = len(values)
    if n < 2:
        raise TooFewSamples("fewer than 2 distinct samples after deduplication")

    a_mat = np.empty((n + 1, n + 1))
    a_mat[:n, :n] = model.gamma_kriging(squareform(pdist(coords)))
    a_mat[:n, n] = 1.0
    a_mat[n, :n] = 1.0
    a_mat[n, n] = 0.0

    gamma_t = model.gamma_kriging(cdist(coords, targets))  # (n, m)
    rhs = np.vstack([gamma_t, np.ones(len(targets))])

    try:
        sol = np.linalg.solve(a_mat, rhs)
    except np.linalg.LinAlgError:
        jittered = a_mat.copy()
        jittered[np.diag_indices(n)] += 1e-10
        try:
            sol = np.linalg.solve(jittered, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("kriging system singular after jitter") from exc

    weights = sol[:n]  # (n, m)
    mu = sol[n]
    predictions = weights.T @ values
    variance = np.einsum("nm,nm->m", weights, gamma_t) + mu
    variance = np.maximum(variance, 0.0)
    return predictions, variance
