"""
Movement structure from per-frame angles.

Channels are columns of an :class:`AngleSeries`; NaN is the absence marker
throughout. Cycle segmentation works on one channel (by default the PIP
flexion of the ring finger) and the resulting cycles can then be resampled on
any channel of the same series.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import find_peaks

from .errors import (
    CycleTooShortError,
    InvalidLandmarkError,
    ProfileMismatchError,
    UsageError,
    ValidationError,
)
from .geometry import CHANNELS, angle_matrix, flexion_channel
from .skeleton import DEFAULT_FRAME_RATE, SkeletonSequence

DEFAULT_PROMINENCE = 10.0
DEFAULT_SMOOTH_WINDOW = 5
DEFAULT_SAMPLES = 100
DEFAULT_CHANNEL = flexion_channel("IV", "PIP")

ChannelKey = Union[str, int]


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AngleSeries:
    """``values`` has shape (n_frames, n_channels), degrees, NaN = absent."""

    values: np.ndarray
    channels: tuple[str, ...] = CHANNELS
    frame_rate: float = DEFAULT_FRAME_RATE
    sequence_id: str = ""

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 2 or v.shape[1] != len(self.channels):
            raise ValueError(f"values shape {v.shape} does not match {len(self.channels)} channels")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "channels", tuple(self.channels))

    def __len__(self):
        return self.values.shape[0]

    def channel_index(self, key: ChannelKey) -> int:
        if isinstance(key, str):
            try:
                return self.channels.index(key)
            except ValueError:
                raise UsageError(f"unknown channel {key!r}") from None
        if not 0 <= key < len(self.channels):
            raise UsageError(f"channel index {key} out of range")
        return int(key)

    def channel(self, key: ChannelKey) -> np.ndarray:
        return self.values[:, self.channel_index(key)]

    def select(self, keys: Iterable[ChannelKey]) -> "AngleSeries":
        idx = [self.channel_index(k) for k in keys]
        return AngleSeries(
            self.values[:, idx], tuple(self.channels[i] for i in idx), self.frame_rate, self.sequence_id
        )

    def replace(self, values) -> "AngleSeries":
        return AngleSeries(values, self.channels, self.frame_rate, self.sequence_id)


def angle_series(seq: SkeletonSequence) -> AngleSeries:
    """Apply the frame angle computation to every frame of a sequence."""
    return AngleSeries(angle_matrix(seq.positions), CHANNELS, seq.frame_rate, seq.sequence_id)


def _nanmedian_filter(x: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    pad = [(half, half)] + [(0, 0)] * (x.ndim - 1)
    padded = np.pad(x, pad, constant_values=np.nan)
    windows = sliding_window_view(padded, window, axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN windows stay NaN
        return np.nanmedian(windows, axis=-1)


def smooth(series: AngleSeries, window: int = DEFAULT_SMOOTH_WINDOW) -> AngleSeries:
    """
    Centred moving median per channel.

    Absent samples are skipped, so each output is the median of the present
    values inside its window; windows are truncated at the series edges.
    """
    if int(window) != window or window < 1 or window % 2 == 0:
        raise UsageError(f"smoothing window must be a positive odd integer, got {window!r}")
    if window > max(len(series), 1):
        raise UsageError(f"smoothing window {window} exceeds series length {len(series)}")
    if window == 1:
        return series
    return series.replace(_nanmedian_filter(series.values, int(window)))


@dataclass(frozen=True)
class Extremum:
    frame: int
    kind: str  # "max" | "min"


def _fill_gaps(x: np.ndarray) -> Optional[np.ndarray]:
    x = np.asarray(x, dtype=float)
    present = np.isfinite(x)
    if present.sum() < 2:
        return None
    if present.all():
        return x
    idx = np.arange(len(x))
    return np.interp(idx, idx[present], x[present])


def _plateau_center(x, i, lo, hi):
    """Centre of the run of samples equal to x[i] that contains i, within [lo, hi]."""
    a = i
    while a > lo and x[a - 1] == x[i]:
        a -= 1
    b = i
    while b < hi and x[b + 1] == x[i]:
        b += 1
    return (a + b) // 2


def _lowest(x, lo, hi):
    i = lo + int(np.argmin(x[lo : hi + 1]))
    return _plateau_center(x, i, lo, hi)


def _merge_shallow(x, peaks, prominence):
    # equal-height neighbours both get full prominence (ties never count as
    # "higher"), so drop the lower of two maxima separated by a shallow valley
    merged = True
    while merged and len(peaks) > 1:
        merged = False
        for k in range(len(peaks) - 1):
            a, b = peaks[k], peaks[k + 1]
            valley = x[a : b + 1].min()
            if min(x[a], x[b]) - valley < prominence:
                del peaks[k + 1 if x[a] >= x[b] else k]
                merged = True
                break
    return peaks


def detect_extrema(channel, prominence: float = DEFAULT_PROMINENCE) -> list[Extremum]:
    """
    Alternating maxima and minima of one channel.

    Maxima are interior local maxima whose topographic prominence is at least
    ``prominence`` degrees. Between two consecutive maxima the lowest sample
    is the minimum. Before the first and after the last maximum the lowest
    sample, series endpoints included, is reported when it lies at least
    ``prominence`` below that maximum. Flat extrema report their centre frame.
    Absent samples are linearly interpolated over before detection.
    """
    if not prominence > 0:
        raise UsageError(f"prominence must be positive, got {prominence!r}")
    x = _fill_gaps(channel)
    if x is None:
        return []
    peaks = _merge_shallow(x, list(find_peaks(x, prominence=prominence)[0]), prominence)
    if len(peaks) == 0:
        return []
    last = len(x) - 1
    out = []
    first = _lowest(x, 0, int(peaks[0]))
    if x[peaks[0]] - x[first] >= prominence:
        out.append(Extremum(first, "min"))
    for a, b in zip(peaks[:-1], peaks[1:]):
        out.append(Extremum(int(a), "max"))
        out.append(Extremum(_lowest(x, int(a), int(b)), "min"))
    out.append(Extremum(int(peaks[-1]), "max"))
    tail = _lowest(x, int(peaks[-1]), last)
    if x[peaks[-1]] - x[tail] >= prominence:
        out.append(Extremum(tail, "min"))
    return out


@dataclass(frozen=True)
class MovementCycle:
    channel: str
    start_frame: int
    end_frame: int
    peak_frame: int
    source: str = "auto"  # "auto" | "landmark"

    def __post_init__(self):
        if not self.start_frame < self.end_frame:
            raise ValueError("cycle start must precede its end")
        if not self.start_frame <= self.peak_frame <= self.end_frame:
            raise ValueError("cycle peak outside its bounds")

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


def _check_landmarks(landmarks, n):
    pairs = []
    prev_end = None
    for k, pair in enumerate(landmarks):
        try:
            s, e = (int(v) for v in pair)
        except (TypeError, ValueError):
            raise InvalidLandmarkError(f"landmark {k}: expected a (start, end) pair, got {pair!r}")
        if not (0 <= s < n and 0 <= e < n):
            raise InvalidLandmarkError(f"landmark {k}: ({s}, {e}) outside frames 0..{n - 1}")
        if not s < e:
            raise InvalidLandmarkError(f"landmark {k}: start {s} is not before end {e}")
        if prev_end is not None and s < prev_end:
            raise InvalidLandmarkError(f"landmark {k}: starts at {s}, before previous end {prev_end}")
        pairs.append((s, e))
        prev_end = e
    return pairs


def segment_cycles(
    series: AngleSeries,
    channel: ChannelKey = DEFAULT_CHANNEL,
    prominence: float = DEFAULT_PROMINENCE,
    landmarks: Optional[Sequence[tuple[int, int]]] = None,
) -> list[MovementCycle]:
    """
    Split one channel into movement cycles.

    With ``landmarks``, each (start, end) pair becomes a cycle whose peak is
    the highest present sample inside it. Otherwise each detected maximum
    bracketed by a minimum on both sides becomes a cycle spanning those two
    minima; consecutive cycles may share their boundary frame.
    """
    name = series.channels[series.channel_index(channel)]
    x = series.channel(channel)
    if landmarks is not None:
        cycles = []
        for s, e in _check_landmarks(landmarks, len(series)):
            seg = x[s : e + 1]
            if not np.isfinite(seg).any():
                raise CycleTooShortError(f"cycle ({s}, {e}) has no present samples on {name}")
            cycles.append(MovementCycle(name, s, e, s + int(np.nanargmax(seg)), "landmark"))
        return cycles

    ext = detect_extrema(x, prominence)
    cycles = []
    for a, b, c in zip(ext, ext[1:], ext[2:]):
        if (a.kind, b.kind, c.kind) == ("min", "max", "min"):
            cycles.append(MovementCycle(name, a.frame, c.frame, b.frame, "auto"))
    return cycles


def resample_cycle(
    series: AngleSeries,
    cycle: MovementCycle,
    n_samples: int = DEFAULT_SAMPLES,
    channel: Optional[ChannelKey] = None,
) -> np.ndarray:
    """
    Linear interpolation of one cycle onto ``n_samples`` evenly spaced points
    from its start to its end frame. ``channel`` defaults to the cycle's own
    segmentation channel; gaps of absent samples are interpolated across.
    """
    if int(n_samples) != n_samples or n_samples < 2:
        raise UsageError(f"n_samples must be an integer >= 2, got {n_samples!r}")
    if cycle.end_frame >= len(series) or cycle.start_frame < 0:
        raise InvalidLandmarkError(
            f"cycle ({cycle.start_frame}, {cycle.end_frame}) outside series of {len(series)} frames"
        )
    x = series.channel(cycle.channel if channel is None else channel)
    frames = np.arange(cycle.start_frame, cycle.end_frame + 1)
    seg = x[cycle.start_frame : cycle.end_frame + 1]
    present = np.isfinite(seg)
    if present.sum() < 2:
        raise CycleTooShortError(
            f"cycle ({cycle.start_frame}, {cycle.end_frame}) has fewer than 2 present samples"
        )
    t = np.linspace(cycle.start_frame, cycle.end_frame, int(n_samples))
    return np.interp(t, frames[present], seg[present])


@dataclass(frozen=True, eq=False)
class CycleProfile:
    channel: str
    mean: np.ndarray
    std: np.ndarray
    n_cycles: int

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(self.mean))
        object.__setattr__(self, "std", _readonly(self.std))
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D arrays of equal length")

    @property
    def n_samples(self) -> int:
        return self.mean.shape[0]

    @property
    def x(self) -> np.ndarray:
        """Percent of the movement, 0..100."""
        return np.linspace(0.0, 100.0, self.n_samples)


def aggregate(cycles: Sequence[np.ndarray], channel: str = "") -> CycleProfile:
    """Pointwise mean and population standard deviation of resampled cycles."""
    if len(cycles) == 0:
        raise ValidationError("cannot aggregate zero cycles")
    lengths = {len(c) for c in cycles}
    if len(lengths) != 1:
        raise ProfileMismatchError(f"cycles have different lengths: {sorted(lengths)}")
    stack = np.vstack([np.asarray(c, dtype=float) for c in cycles])
    return CycleProfile(channel, stack.mean(axis=0), stack.std(axis=0), stack.shape[0])


@dataclass(frozen=True)
class RomEntry:
    min: float
    max: float

    @property
    def range(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class RomSummary:
    """Per-channel extremes; None marks a channel with no present samples."""

    entries: Mapping[str, Optional[RomEntry]]

    def __getitem__(self, channel: str) -> Optional[RomEntry]:
        return self.entries[channel]

    def __iter__(self):
        return iter(self.entries.items())


def rom_summary(series: AngleSeries, smooth_window: Optional[int] = None) -> RomSummary:
    if smooth_window:
        series = smooth(series, smooth_window)
    entries = {}
    v = series.values
    present = np.isfinite(v)
    lo = np.where(present, v, np.inf).min(axis=0) if len(v) else np.full(v.shape[1], np.inf)
    hi = np.where(present, v, -np.inf).max(axis=0) if len(v) else np.full(v.shape[1], -np.inf)
    for k, name in enumerate(series.channels):
        entries[name] = RomEntry(float(lo[k]), float(hi[k])) if present[:, k].any() else None
    return RomSummary(entries)


def cycle_profiles(
    series_list: Sequence[AngleSeries],
    channel: ChannelKey = DEFAULT_CHANNEL,
    prominence: float = DEFAULT_PROMINENCE,
    n_samples: int = DEFAULT_SAMPLES,
    landmarks: Optional[Sequence[Optional[Sequence[tuple[int, int]]]]] = None,
) -> dict[str, CycleProfile]:
    """
    Segment every series on ``channel`` and aggregate the cycles of every
    channel into one profile each. Channels that yield no usable cycle are
    left out of the result. Series are folded in the given order.
    """
    if landmarks is None:
        landmarks = [None] * len(series_list)
    resampled: dict[str, list[np.ndarray]] = {}
    total = 0
    for series, marks in zip(series_list, landmarks):
        cycles = segment_cycles(series, channel, prominence, marks)
        total += len(cycles)
        for cyc in cycles:
            for name in series.channels:
                try:
                    resampled.setdefault(name, []).append(
                        resample_cycle(series, cyc, n_samples, name)
                    )
                except CycleTooShortError:
                    continue
    if total == 0:
        raise ValidationError("no movement cycles found")
    order = series_list[0].channels
    return {name: aggregate(resampled[name], name) for name in order if resampled.get(name)}


@dataclass(frozen=True)
class ProfileSummary:
    label: str
    channel: str
    n_cycles: int
    peak_mean: float
    mean_std: float
    mean_range: float


@dataclass
class ProfileComparison:
    """Labelled profiles of one channel, side by side."""

    channel: str
    profiles: dict[str, CycleProfile] = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return list(self.profiles)

    def summary(self) -> list[ProfileSummary]:
        out = []
        for label, p in self.profiles.items():
            out.append(
                ProfileSummary(
                    label,
                    self.channel,
                    p.n_cycles,
                    float(p.mean.max()),
                    float(p.std.mean()),
                    float(p.mean.max() - p.mean.min()),
                )
            )
        return out

    def difference(self, a: str, b: str) -> np.ndarray:
        """Pointwise mean of ``a`` minus mean of ``b``."""
        return self.profiles[a].mean - self.profiles[b].mean

    def fraction_lower_std(self, a: str, b: str) -> float:
        """Share of samples where ``a`` has the smaller standard deviation."""
        return float(np.mean(self.profiles[a].std < self.profiles[b].std))

    def rank_by(self, attr: str, reverse: bool = True) -> list[str]:
        rows = sorted(self.summary(), key=lambda s: getattr(s, attr), reverse=reverse)
        return [r.label for r in rows]


def compare_profiles(profiles: Mapping[str, CycleProfile]) -> ProfileComparison:
    if not profiles:
        raise ProfileMismatchError("nothing to compare")
    items = list(profiles.items())
    channel = items[0][1].channel
    n = items[0][1].n_samples
    for label, p in items:
        if p.channel != channel:
            raise ProfileMismatchError(f"{label}: channel {p.channel!r} differs from {channel!r}")
        if p.n_samples != n:
            raise ProfileMismatchError(f"{label}: {p.n_samples} samples, expected {n}")
    return ProfileComparison(channel, dict(items))
