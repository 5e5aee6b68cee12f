"""Evaluation mathematics: the square line-picking density, goodness-of-fit
indices on inter-distance histograms, empirical CCDFs and multi-run
aggregation with confidence intervals.

All distances handed to these functions are normalized by the area side,
so the reference density applies on [0, sqrt(2)] regardless of the actual
area size.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, stats
from scipy.spatial.distance import pdist

SQRT2 = float(np.sqrt(2.0))


def q_pdf(x):
    """Density of the distance between two uniform points in the unit square.

    Piecewise:
        q(x) = 2x (x^2 - 4x + pi)                                0 <= x < 1
        q(x) = 2x [4g - (x^2 + 2 - pi) - 4 atan(g)],  g=sqrt(x^2-1),
                                                      1 <= x <= sqrt(2)

    Parameters
    ----------
    x : float or array-like
        Normalized distance(s) in [0, sqrt(2)].

    Returns
    -------
    float or ndarray
        Density value(s); scalar input gives a scalar back.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if ((arr < 0) | (arr > SQRT2 + 1e-12)).any():
        raise ValueError("distance outside [0, sqrt(2)]")
    out = np.zeros_like(arr)
    lo = arr < 1.0
    xl = arr[lo]
    out[lo] = 2.0 * xl * (xl * xl - 4.0 * xl + np.pi)
    hi = ~lo
    xh = arr[hi]
    g = np.sqrt(np.maximum(xh * xh - 1.0, 0.0))
    out[hi] = 2.0 * xh * (4.0 * g - (xh * xh + 2.0 - np.pi) - 4.0 * np.arctan(g))
    return float(out[0]) if scalar else out


def integrate_q(a: float, b: float) -> float:
    """Integral of q_pdf over [a, b], splitting at the branch point x=1."""
    if not (0.0 <= a <= b <= SQRT2 + 1e-12):
        raise ValueError("integration bounds outside [0, sqrt(2)]")
    if a < 1.0 < b:
        return integrate.quad(q_pdf, a, 1.0)[0] + integrate.quad(q_pdf, 1.0, b)[0]
    return integrate.quad(q_pdf, a, b)[0]


@lru_cache(maxsize=None)
def q_bin_probs(n_bins: int) -> np.ndarray:
    """Probability mass of q in each of n_bins equal-width bins over [0, sqrt(2)]."""
    edges = np.linspace(0.0, SQRT2, n_bins + 1)
    return np.array([integrate_q(a, b) for a, b in zip(edges[:-1], edges[1:])])


def bin_edges(n_bins: int) -> np.ndarray:
    return np.linspace(0.0, SQRT2, n_bins + 1)


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total: int


def interdistance_samples(provider_positions: np.ndarray, area_side: float) -> np.ndarray:
    """Normalized Euclidean distance of every unordered provider pair.

    C providers give C(C-1)/2 samples; fewer than two providers give an
    empty array.
    """
    pos = np.asarray(provider_positions, dtype=float)
    if len(pos) < 2:
        return np.zeros(0)
    return pdist(pos) / area_side


def nodal_reference(node_positions: np.ndarray, area_side: float, n_bins: int = 20) -> Histogram:
    """Histogram of all node pairwise distances, the nodal-uniformity target."""
    pos = np.asarray(node_positions, dtype=float)
    if len(pos) < 2:
        raise ValueError("need at least two nodes")
    d = pdist(pos) / area_side
    counts, edges = np.histogram(d, bins=bin_edges(n_bins))
    return Histogram(edges, counts, int(counts.sum()))


def chi_squared_index(samples, reference="spatial", n_bins: int = 20) -> float:
    """Pearson index sum((O - E)^2 / E) of binned samples against a reference.

    Parameters
    ----------
    samples : array-like
        Normalized distances in [0, sqrt(2)].
    reference : "spatial" or Histogram
        "spatial" integrates q_pdf over each bin for the expected counts; a
        Histogram rescales its counts to the sample total (nodal target).
    n_bins : int
        Equal-width bins over [0, sqrt(2)]. Ignored when a Histogram is
        given (its binning is reused).

    Bins with zero expected count are skipped; if every bin is empty the
    reference cannot be applied and a ValueError is raised.
    """
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("no samples")
    if isinstance(reference, Histogram):
        edges = reference.bin_edges
        probs = reference.counts / reference.total
    else:
        if reference != "spatial":
            raise ValueError(f"unknown reference {reference!r}")
        edges = bin_edges(n_bins)
        probs = q_bin_probs(n_bins)
    obs, _ = np.histogram(s, bins=edges)
    expected = probs * s.size
    mask = expected > 0
    if not mask.any():
        raise ValueError("reference has no mass in any bin")
    return float(((obs[mask] - expected[mask]) ** 2 / expected[mask]).sum())


def windowed_fit_index(samples, reference="spatial", n_bins: int = 20) -> float:
    """Density-scale divergence used for the windowed uniformity metric.

    The raw Pearson index grows linearly with the number of pair samples
    for any fixed shape mismatch, so windows with different provider counts
    are not comparable. Dividing by (sample count x bin width) turns it
    into the same index computed on the measured and target probability
    density functions, which is stable in the sample count.
    """
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("no samples")
    if isinstance(reference, Histogram):
        width = float(reference.bin_edges[1] - reference.bin_edges[0])
    else:
        width = SQRT2 / n_bins
    return chi_squared_index(s, reference, n_bins) / (s.size * width)


def ccdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical complementary CDF.

    Returns (sorted unique values, fraction of observations >= value).
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        return np.zeros(0), np.zeros(0)
    uniq, first = np.unique(v, return_index=True)
    frac_ge = (n - first) / n
    return uniq, frac_ge


@dataclass
class MetricSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    run_index: int = 0


def aggregate_runs(series: list[MetricSeries], alpha: float = 0.05):
    """Pointwise mean and Student-t confidence band across aligned runs.

    Returns (times, mean, halfwidth). A single run yields a zero-width
    band. Raises ValueError when the runs' timestamps differ.
    """
    if not series:
        raise ValueError("no series to aggregate")
    t0 = series[0].times
    for s in series[1:]:
        if len(s.times) != len(t0) or not np.allclose(s.times, t0):
            raise ValueError("misaligned timestamps across runs")
    data = np.vstack([s.values for s in series])
    n = data.shape[0]
    mean = data.mean(axis=0)
    if n == 1:
        return t0.copy(), mean, np.zeros_like(mean)
    sem = data.std(axis=0, ddof=1) / np.sqrt(n)
    tcrit = stats.t.ppf(1.0 - alpha / 2.0, df=n - 1)
    return t0.copy(), mean, tcrit * sem


# ---------------------------------------------------------------------------
# CSV emission. All files use a header row; floats go through %.12g so a
# given run always serializes to identical bytes.

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_series_csv(path: str, columns: dict[str, MetricSeries]) -> None:
    """Write aligned metric series as one CSV with a shared time column."""
    names = list(columns)
    first = columns[names[0]]
    for s in columns.values():
        if len(s.times) != len(first.times):
            raise ValueError("series lengths differ")
    rows = zip(first.times, *(columns[n].values for n in names))
    write_csv(path, ["t"] + names, rows)
