"""Spectral and statistical evaluation of simulation campaigns.

Magnitude-squared coherence from Welch-averaged spectra,
C_xy(f) = |P_xy|^2 / (P_xx P_yy); per-segment extreme loads and wind
statistics; empirical quantile thresholds per wind bin; exceedance curves
with the Weibull plotting position P(x_(k)) = 1 - k/(N+1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal


@dataclass(frozen=True)
class SpectralConfig:
    nperseg: int = 1024
    overlap: float = 0.5
    sample_rate: float = 10.0  # Hz
    window: str = "hann"

    def __post_init__(self):
        if self.nperseg & (self.nperseg - 1) != 0:
            raise ValueError("segment length must be a power of two")
        if not 0.0 <= self.overlap <= 0.9:
            raise ValueError("overlap fraction must lie in [0, 0.9]")

    @property
    def noverlap(self) -> int:
        return int(self.nperseg * self.overlap)


def coherence(x, y, cfg: SpectralConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude-squared coherence of two equally sampled series.

    Bins with a vanishing auto-spectrum are emitted as NaN (undefined).
    Requires at least four Welch segments worth of data.
    """
    cfg = cfg or SpectralConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("series must have equal length")
    hop = cfg.nperseg - cfg.noverlap
    if (x.size - cfg.nperseg) // hop + 1 < 4:
        raise ValueError("need at least 4 Welch segments of data")
    f, pxx = signal.welch(x, fs=cfg.sample_rate, window=cfg.window,
                          nperseg=cfg.nperseg, noverlap=cfg.noverlap)
    _, pyy = signal.welch(y, fs=cfg.sample_rate, window=cfg.window,
                          nperseg=cfg.nperseg, noverlap=cfg.noverlap)
    _, pxy = signal.csd(x, y, fs=cfg.sample_rate, window=cfg.window,
                        nperseg=cfg.nperseg, noverlap=cfg.noverlap)
    denom = pxx * pyy
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.abs(pxy) ** 2 / denom
    c[denom <= 0.0] = np.nan
    return f, c


def pooled_coherence(pairs, cfg: SpectralConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Coherence with the auto/cross spectra averaged over several (x, y) runs."""
    cfg = cfg or SpectralConfig()
    pxx = pyy = pxy = None
    f = None
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        f, p1 = signal.welch(x, fs=cfg.sample_rate, window=cfg.window,
                             nperseg=cfg.nperseg, noverlap=cfg.noverlap)
        _, p2 = signal.welch(y, fs=cfg.sample_rate, window=cfg.window,
                             nperseg=cfg.nperseg, noverlap=cfg.noverlap)
        _, p12 = signal.csd(x, y, fs=cfg.sample_rate, window=cfg.window,
                            nperseg=cfg.nperseg, noverlap=cfg.noverlap)
        pxx = p1 if pxx is None else pxx + p1
        pyy = p2 if pyy is None else pyy + p2
        pxy = p12 if pxy is None else pxy + p12
    if f is None:
        raise ValueError("no series pairs given")
    denom = pxx * pyy
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.abs(pxy) ** 2 / denom
    c[denom <= 0.0] = np.nan
    return f, c


def coherence_half_crossing(f, c) -> float | None:
    """Lowest frequency where the coherence curve crosses 0.5 from above.

    Linear interpolation between bins; None when the curve never crosses.
    """
    f = np.asarray(f, dtype=float)
    c = np.asarray(c, dtype=float)
    valid = np.isfinite(c) & (f > 0.0)
    f, c = f[valid], c[valid]
    for i in range(1, f.size):
        if c[i - 1] >= 0.5 > c[i]:
            return float(f[i - 1] + (0.5 - c[i - 1]) * (f[i] - f[i - 1]) / (c[i] - c[i - 1]))
    return None


def signed_extreme(x) -> float:
    """Signed value of largest magnitude."""
    x = np.asarray(x, dtype=float)
    return float(x[np.argmax(np.abs(x))])


@dataclass
class SegmentRow:
    index: int
    t0: float
    t1: float
    mean_wind: float
    i_eff: float
    delta_mean: float
    delta_std: float
    est_delta_mean: float
    est_delta_std: float
    extremes: dict[str, float] = field(default_factory=dict)


def segment_stats(t, loads: dict[str, np.ndarray], truth: dict[str, np.ndarray],
                  segment_s: float, est: dict[str, np.ndarray] | None = None) -> list[SegmentRow]:
    """Split aligned series into whole segments and reduce each one.

    ``loads`` holds load channels (extreme = signed value of largest
    magnitude per segment), ``truth`` the rotor-average wind series with keys
    'u_eff' and 'delta', ``est`` optionally the estimated counterparts.
    """
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two samples")
    dt = t[1] - t[0]
    per_seg = int(round(segment_s / dt))
    n_seg = t.size // per_seg
    if n_seg < 1:
        raise ValueError("series shorter than one segment")
    rows = []
    for k in range(n_seg):
        sl = slice(k * per_seg, (k + 1) * per_seg)
        u = truth["u_eff"][sl]
        d = truth["delta"][sl]
        u_mean = float(np.mean(u))
        row = SegmentRow(
            index=k, t0=float(t[sl][0]), t1=float(t[sl][-1]),
            mean_wind=u_mean,
            i_eff=float(np.std(u - u[0])) / u_mean,
            delta_mean=float(np.mean(d)),
            delta_std=float(np.std(d - d[0])),
            est_delta_mean=float(np.mean(est["delta"][sl])) if est else float("nan"),
            est_delta_std=float(np.std(est["delta"][sl] - est["delta"][sl][0])) if est else float("nan"),
        )
        for name, series in loads.items():
            row.extremes[name] = signed_extreme(series[sl])
        rows.append(row)
    return rows


def quantile_threshold(values_by_bin: dict[float, list[float]], q: float,
                       min_samples: int = 5) -> tuple[dict[float, float], list[float]]:
    """Empirical per-bin quantile (linear interpolation between order statistics).

    Bins with fewer than ``min_samples`` entries fall back to the quantile of
    the pooled data and are reported in the second return value.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    pooled = [v for vals in values_by_bin.values() for v in vals]
    if not pooled:
        raise ValueError("no samples to take a quantile of")
    pooled_q = float(np.quantile(pooled, q))
    out: dict[float, float] = {}
    sparse: list[float] = []
    for b, vals in values_by_bin.items():
        if len(vals) < min_samples:
            sparse.append(b)
            out[b] = pooled_q
        else:
            out[b] = float(np.quantile(vals, q))
    return out, sparse


@dataclass
class ExceedanceCurve:
    """Sorted extremes with empirical exceedance probabilities (survival function)."""

    values: np.ndarray        # ascending
    probabilities: np.ndarray  # 1 - k/(N+1), descending
    channel: str = ""
    case_set: str = ""


def exceedance(extremes, channel: str = "", case_set: str = "") -> ExceedanceCurve:
    """Weibull plotting positions over the sorted magnitudes of segment extremes."""
    x = np.sort(np.abs(np.asarray(extremes, dtype=float)))
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 extremes for an exceedance curve")
    probs = 1.0 - np.arange(1, n + 1) / (n + 1.0)
    return ExceedanceCurve(values=x, probabilities=probs, channel=channel, case_set=case_set)


@dataclass
class ErrorHistogram:
    bias: float
    std: float
    bin_edges: np.ndarray
    counts: np.ndarray


def error_histogram(estimate, truth, dt: float, cutoff_hz: float,
                    n_bins: int = 40) -> ErrorHistogram:
    """Binned estimate-minus-truth errors after the filter settling interval.

    The first 3 / cutoff seconds are excluded as filter transient.
    """
    e = np.asarray(estimate, dtype=float)
    tr = np.asarray(truth, dtype=float)
    if e.shape != tr.shape:
        raise ValueError("series must be aligned")
    skip = int(math.ceil(3.0 / cutoff_hz / dt))
    err = (e - tr)[skip:]
    if err.size == 0:
        raise ValueError("nothing left after the settling interval")
    counts, edges = np.histogram(err, bins=n_bins)
    return ErrorHistogram(bias=float(np.mean(err)), std=float(np.std(err - err[0])),
                          bin_edges=edges, counts=counts)
