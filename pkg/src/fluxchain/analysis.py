"""Ensemble post-processing: distributions, localization fits, dispersion.

The figures-as-data layer: log-spaced histograms of peak probabilities,
per-site means of ln P_l, the localization-length fit
``mean ln P_l ~ c0 - 2 l / xi`` over the reflection-free half of the chain,
the dimensionless disorder coordinate, the excitation group velocity of the
effective Ising chain, and the peak-vs-arrival parametric tables for
uniformly detuned chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import EnsembleResult
from .errors import ParameterError
from .evolution import EvolutionRecord, peak_stats

TWO_PI = 2.0 * np.pi

HISTOGRAM_LOW = 1e-4
HISTOGRAM_HIGH = 1.0
HISTOGRAM_BINS = 40


def default_log_bins(low: float = HISTOGRAM_LOW, high: float = HISTOGRAM_HIGH,
                     n_bins: int = HISTOGRAM_BINS) -> np.ndarray:
    """log10-spaced bin edges in probability space."""
    if not (0.0 < low < high):
        raise ParameterError(f"need 0 < low < high, got {low}, {high}")
    return np.logspace(math.log10(low), math.log10(high), n_bins + 1)


@dataclass(frozen=True)
class LogHistogram:
    """Density per unit log10(P), normalized by the total sample count.

    Samples at or below zero, or below the lowest edge, land in the underflow
    counter instead of being dropped, so density * bin width sums to
    1 - underflow/total exactly.
    """

    edges: np.ndarray     # (n_bins + 1,) probability-space edges
    counts: np.ndarray    # (n_bins,)
    density: np.ndarray   # (n_bins,)
    underflow: int
    total: int

    @property
    def log_widths(self) -> np.ndarray:
        return np.diff(np.log10(self.edges))

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * self.log_widths))


def log_histogram(samples, bins) -> LogHistogram:
    """Histogram of probability samples over log10-spaced bins."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 1:
        raise ParameterError("need at least one sample")
    bins = np.asarray(bins, dtype=float)
    if bins.ndim != 1 or bins.size < 2 or np.any(np.diff(bins) <= 0) or bins[0] <= 0:
        raise ParameterError("bins must be ascending positive edges")
    under = samples <= bins[0]
    kept = samples[~under]
    # probabilities marginally above 1 from float fuzz belong to the last bin
    kept = np.minimum(kept, bins[-1])
    counts, _ = np.histogram(kept, bins=bins)
    widths = np.diff(np.log10(bins))
    density = counts / (samples.size * widths)
    return LogHistogram(edges=bins, counts=counts, density=density,
                        underflow=int(np.count_nonzero(under)), total=int(samples.size))


def mean_log_peak(result: EnsembleResult) -> tuple[np.ndarray, np.ndarray]:
    """Per-site mean of ln P_l over successful realizations.

    Returns (means, n_excluded); peaks that are exactly zero cannot enter the
    log and are excluded with their count reported per site.
    """
    peaks = result.peak_matrix
    if peaks.shape[0] < 1:
        raise ParameterError("ensemble has no successful realizations")
    n_sites = peaks.shape[1]
    means = np.empty(n_sites)
    excluded = np.zeros(n_sites, dtype=int)
    for l in range(n_sites):
        col = peaks[:, l]
        good = col > 0.0
        excluded[l] = int(np.count_nonzero(~good))
        means[l] = np.mean(np.log(col[good])) if np.any(good) else -np.inf
    return means, excluded


@dataclass(frozen=True)
class LocalizationFit:
    """Least-squares fit of mean ln P_l = c0 - 2 l / xi over l in [1, l_max]."""

    c0: float
    xi: float                     # sites; inf when the slope is non-negative
    fit_range: tuple[int, int]    # inclusive site indices used
    residual: float               # RMS of fit residuals
    delocalized: bool             # slope >= 0: no decay within the fit range


def fit_localization_length(mean_ln_p, l_max: int) -> LocalizationFit:
    """Extract the localization length from the per-site decay of ln P_l.

    Site 0 (the injected site) is excluded; the fit runs over l = 1 .. l_max,
    which callers should keep at or below L/2 to stay clear of the far-end
    reflection.
    """
    mean_ln_p = np.asarray(mean_ln_p, dtype=float)
    if l_max >= mean_ln_p.shape[0]:
        raise ParameterError(f"l_max = {l_max} outside the {mean_ln_p.shape[0]}-site chain")
    sites = np.arange(1, l_max + 1)
    values = mean_ln_p[sites]
    finite = np.isfinite(values)
    if np.count_nonzero(finite) < 3:
        raise ParameterError("need at least 3 finite sites in the fit range")
    slope, c0 = np.polyfit(sites[finite], values[finite], 1)
    resid = float(np.sqrt(np.mean((values[finite] - (c0 + slope * sites[finite])) ** 2)))
    if slope >= 0.0:
        return LocalizationFit(c0=float(c0), xi=math.inf,
                               fit_range=(1, l_max), residual=resid, delocalized=True)
    return LocalizationFit(c0=float(c0), xi=float(-2.0 / slope),
                           fit_range=(1, l_max), residual=resid, delocalized=False)


def dimensionless_disorder(delta_eps: float, j: float, a: float) -> float:
    """Energy fluctuation in units of the bond energy: delta_eps / (J a^2)."""
    if j <= 0.0 or a <= 0.0:
        raise ParameterError(f"j and a must be positive, got {j}, {a}")
    return delta_eps / (j * a * a)


def group_velocity(q: float, epsilon0: float, ja2: float) -> float:
    """Excitation group velocity (sites/ns) at quasimomentum q (radians).

    Dispersion omega_q = 2 pi sqrt(eps0^2 + 2 ja2 eps0 cos q + ja2^2) rad/ns
    with energies in GHz; the sign is fixed so rightward speeds are positive.
    For eps0 >> ja2 the maximum approaches 2 pi ja2 at q = pi/2.
    """
    if epsilon0 <= 0.0 or ja2 <= 0.0:
        raise ParameterError(f"epsilon0 and ja2 must be positive, got {epsilon0}, {ja2}")
    root = math.sqrt(epsilon0**2 + 2.0 * ja2 * epsilon0 * math.cos(q) + ja2**2)
    return TWO_PI * ja2 * epsilon0 * math.sin(q) / root


def peak_vs_arrival(records: list[EvolutionRecord], sites, t_star: float,
                    ) -> dict[int, list[tuple[float, float]]]:
    """Parametric (t_peak, P) per requested site across a sweep of records."""
    sites = list(sites)
    table: dict[int, list[tuple[float, float]]] = {l: [] for l in sites}
    for record in records:
        for l in sites:
            if not 0 <= l < record.n_sites:
                raise ParameterError(
                    f"site {l} outside the {record.n_sites}-site record")
        peaks = peak_stats(record, t_star)
        for l in sites:
            p, t = peaks[l]
            table[l].append((t, p))
    return table
