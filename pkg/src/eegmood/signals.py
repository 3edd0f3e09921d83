"""EEG recording representation and raw-signal preprocessing.

Covers the electrode vocabulary, rating binarization, channel selection,
common average referencing, the 512 Hz -> 128 Hz band-pass/decimate path,
and tumbling-window segmentation. All operations are pure.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import butter, filtfilt

# International 10-20 labels of the 32-channel setup, in recording order.
CHANNELS_32 = (
    "FP1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7",
    "CP5", "CP1", "P3", "P7", "PO3", "O1", "OZ", "PZ",
    "FP2", "AF4", "FZ", "F4", "F8", "FC6", "FC2", "CZ",
    "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
)

# Consumer-headset subset (5 channels).
CHANNELS_5 = ("AF3", "T7", "PZ", "AF4", "T8")

RAW_RATE_HZ = 512.0
PIPELINE_RATE_HZ = 128.0
BANDPASS_HZ = (4.0, 45.0)
BANDPASS_ORDER = 4
BASELINE_SECONDS = 3.0
EVOKED_SECONDS = 60.0
RATING_MIN = 1.0
RATING_MAX = 9.0
RATING_THRESHOLD = 5.0


class Label(enum.Enum):
    LOW = "L"
    HIGH = "H"


def validate_channel(name: str) -> str:
    """Return the canonical (upper-case) channel name or raise."""
    canon = name.upper()
    if canon not in CHANNELS_32:
        raise ValueError(f"unknown channel {name!r}")
    return canon


@dataclass(frozen=True)
class Ratings:
    """Self-assessment scores on the 1-9 scale."""

    valence: float
    arousal: float

    def __post_init__(self):
        for field_name, value in (("valence", self.valence),
                                  ("arousal", self.arousal)):
            if not RATING_MIN <= value <= RATING_MAX:
                raise ValueError(
                    f"{field_name} rating {value} outside "
                    f"[{RATING_MIN}, {RATING_MAX}]")


@dataclass(frozen=True)
class EegRecording:
    """One trial: 3 s pre-trial baseline plus 60 s evoked signal.

    Matrices are (n_channels, n_samples) in microvolts; rows follow
    ``channels`` order.
    """

    subject_id: int
    trial_id: int
    sample_rate_hz: float
    channels: tuple[str, ...]
    baseline: np.ndarray
    evoked: np.ndarray
    ratings: Ratings

    def __post_init__(self):
        object.__setattr__(self, "channels",
                           tuple(validate_channel(c) for c in self.channels))
        n_ch = len(self.channels)
        if self.baseline.shape[0] != n_ch or self.evoked.shape[0] != n_ch:
            raise ValueError(
                f"matrix rows ({self.baseline.shape[0]} baseline, "
                f"{self.evoked.shape[0]} evoked) must equal channel count "
                f"{n_ch}")
        want_base = round(BASELINE_SECONDS * self.sample_rate_hz)
        want_evoked = round(EVOKED_SECONDS * self.sample_rate_hz)
        if self.baseline.shape[1] != want_base:
            raise ValueError(
                f"baseline must be {BASELINE_SECONDS:g} s "
                f"({want_base} samples at {self.sample_rate_hz:g} Hz), "
                f"got {self.baseline.shape[1]}")
        if self.evoked.shape[1] != want_evoked:
            raise ValueError(
                f"evoked must be {EVOKED_SECONDS:g} s "
                f"({want_evoked} samples at {self.sample_rate_hz:g} Hz), "
                f"got {self.evoked.shape[1]}")

    @property
    def n_channels(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class Window:
    """One tumbling window of the evoked signal."""

    index: int
    samples: np.ndarray  # (n_channels, tau_s * rate)
    tau_s: int


def binarize_rating(rating: float) -> Label:
    """High iff rating > 5; a rating of exactly 5 maps to Low."""
    if not RATING_MIN <= rating <= RATING_MAX:
        raise ValueError(
            f"rating {rating} outside [{RATING_MIN}, {RATING_MAX}]")
    return Label.HIGH if rating > RATING_THRESHOLD else Label.LOW


def select_channels(rec: EegRecording, subset) -> EegRecording:
    """Extract the given channels, in subset order; values are untouched."""
    subset = tuple(validate_channel(c) for c in subset)
    missing = [c for c in subset if c not in rec.channels]
    if missing:
        raise ValueError(
            f"channel(s) {', '.join(missing)} not present in recording")
    rows = [rec.channels.index(c) for c in subset]
    return replace(rec, channels=subset,
                   baseline=rec.baseline[rows, :].copy(),
                   evoked=rec.evoked[rows, :].copy())


def common_average_reference(m: np.ndarray) -> np.ndarray:
    """Subtract the instantaneous cross-channel mean from every channel."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError("need a non-empty (channels, samples) matrix")
    return m - m.mean(axis=0, keepdims=True)


def bandpass_filter_coefficients():
    """Digital 4.0-45.0 Hz Butterworth design used by preprocess_raw."""
    return butter(BANDPASS_ORDER, BANDPASS_HZ, btype="bandpass",
                  fs=RAW_RATE_HZ)


def preprocess_raw(m: np.ndarray, rate_hz: float = RAW_RATE_HZ) -> np.ndarray:
    """Band-pass 4.0-45.0 Hz (zero-phase) then decimate 512 Hz -> 128 Hz.

    The 45 Hz cutoff sits below the 64 Hz post-decimation Nyquist, so no
    extra anti-alias stage is applied. A trailing remainder that does not
    divide by 4 is truncated with a warning.
    """
    if rate_hz != RAW_RATE_HZ:
        raise ValueError(f"preprocess_raw expects {RAW_RATE_HZ:g} Hz input, "
                         f"got {rate_hz:g}")
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    factor = int(RAW_RATE_HZ / PIPELINE_RATE_HZ)
    remainder = m.shape[1] % factor
    if remainder:
        warnings.warn(
            f"input length {m.shape[1]} not divisible by {factor}; "
            f"truncating {remainder} trailing sample(s)", stacklevel=2)
        m = m[:, : m.shape[1] - remainder]
    b, a = bandpass_filter_coefficients()
    filtered = filtfilt(b, a, m, axis=1)
    return filtered[:, ::factor]


def segment_windows(rec: EegRecording, tau_s: int) -> list[Window]:
    """Tile the evoked signal into non-overlapping tau-second windows."""
    if tau_s not in (1, 3):
        raise ValueError(f"tau_s must be 1 or 3, got {tau_s}")
    step = round(tau_s * rec.sample_rate_hz)
    n = rec.evoked.shape[1]
    if n % step:
        raise ValueError(
            f"evoked length {n} not divisible by window length {step}")
    return [Window(index=i, samples=rec.evoked[:, i * step:(i + 1) * step],
                   tau_s=tau_s)
            for i in range(n // step)]
