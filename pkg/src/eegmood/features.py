"""Per-window feature assembly.

Band entropy/energy extraction via the wavelet cascade, pre-trial baseline
removal, flat feature-vector layout (channel-major, band, then ent/eng),
chained-model condition features, and cross-trial channel correlation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .signals import (BASELINE_SECONDS, Label, Window, segment_windows,
                      validate_channel)
from .wavelet import (BAND_ORDER, LEVEL_OF_BAND, PIPELINE_LEVELS,
                      PIPELINE_RATE_HZ, SYMMETRIC, Band, WaveletFilter,
                      dwt_decompose, wavelet_energy, wavelet_entropy)

N_BANDS = len(BAND_ORDER)
N_FEATURES = 2  # entropy, energy
SUPPORTED_CHANNEL_COUNTS = (5, 32)

ENT = 0
ENG = 1


@dataclass(frozen=True)
class BandFeatures:
    """Entropy/energy per (channel, band): values[(c, b, f)] with
    f=0 entropy, f=1 energy; bands ordered theta, alpha, beta, gamma."""

    values: np.ndarray  # (n_channels, 4, 2)
    channels: tuple[str, ...] | None = None

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BaselineReference:
    """Mean rest-state features over the K baseline segments."""

    values: np.ndarray  # (n_channels, 4, 2)
    tau_s: int
    n_segments: int
    channels: tuple[str, ...] | None = None


def band_features_of(samples, mode: str = SYMMETRIC,
                     filt: WaveletFilter | None = None) -> np.ndarray:
    """(..., channels, n) samples -> (..., channels, 4, 2) features."""
    samples = np.asarray(samples, dtype=np.float64)
    dec = dwt_decompose(samples, PIPELINE_LEVELS, filt, mode)
    out = np.empty(samples.shape[:-1] + (N_BANDS, N_FEATURES))
    for b, band in enumerate(BAND_ORDER):
        detail = dec.details[LEVEL_OF_BAND[band]]
        out[..., b, ENT] = wavelet_entropy(detail)
        out[..., b, ENG] = wavelet_energy(detail)
    return out


def extract_band_features(window: Window, channels=None,
                          mode: str = SYMMETRIC) -> BandFeatures:
    """Decompose each channel of a 128 Hz window and compute band features."""
    n = window.samples.shape[-1]
    if n != round(window.tau_s * PIPELINE_RATE_HZ):
        raise ValueError(
            f"window has {n} samples for tau={window.tau_s} s; "
            f"expected {round(window.tau_s * PIPELINE_RATE_HZ)} at 128 Hz")
    return BandFeatures(values=band_features_of(window.samples, mode=mode),
                        channels=tuple(channels) if channels else None)


def baseline_reference(baseline: np.ndarray, tau_s: int,
                       rate_hz: float = PIPELINE_RATE_HZ, channels=None,
                       mode: str = SYMMETRIC) -> BaselineReference:
    """Split the 3 s baseline into K = 3/tau tumbling segments and average
    their band features."""
    baseline = np.asarray(baseline, dtype=np.float64)
    want = round(BASELINE_SECONDS * rate_hz)
    if baseline.ndim != 2 or baseline.shape[1] != want:
        raise ValueError(
            f"baseline must be (channels, {want}) for {BASELINE_SECONDS:g} s "
            f"at {rate_hz:g} Hz, got {baseline.shape}")
    if tau_s not in (1, 3):
        raise ValueError(f"tau_s must be 1 or 3, got {tau_s}")
    k = int(BASELINE_SECONDS) // tau_s
    step = want // k
    segments = np.stack([baseline[:, i * step:(i + 1) * step]
                         for i in range(k)])  # (K, C, step)
    feats = band_features_of(segments, mode=mode)
    return BaselineReference(values=feats.mean(axis=0), tau_s=tau_s,
                             n_segments=k,
                             channels=tuple(channels) if channels else None)


def remove_baseline(evoked: BandFeatures,
                    ref: BaselineReference) -> BandFeatures:
    """Subtract the rest-state reference from evoked features (both entropy
    and energy); results may be negative."""
    if evoked.values.shape != ref.values.shape:
        raise ValueError(
            f"feature shape {evoked.values.shape} does not match reference "
            f"shape {ref.values.shape}")
    return BandFeatures(values=evoked.values - ref.values,
                        channels=evoked.channels)


@dataclass(frozen=True)
class FeatureVector:
    """Flat per-window vector: index c*8 + b*2 + f, optional trailing
    condition feature."""

    values: np.ndarray
    n_channels: int
    conditioned: bool = False

    def __len__(self) -> int:
        return len(self.values)


def assemble_vector(bf: BandFeatures) -> FeatureVector:
    """Flatten band features channel-major; length 40 (5 ch) or 256 (32 ch)."""
    n_ch = bf.n_channels
    if n_ch not in SUPPORTED_CHANNEL_COUNTS:
        raise ValueError(
            f"supported channel counts are {SUPPORTED_CHANNEL_COUNTS}, "
            f"got {n_ch}")
    return FeatureVector(values=bf.values.reshape(-1).copy(),
                         n_channels=n_ch)


def append_condition(fv: FeatureVector, label: Label) -> FeatureVector:
    """Append the one-hot condition feature (Low=0.0, High=1.0)."""
    if fv.conditioned:
        raise ValueError("vector already carries a condition feature")
    value = 1.0 if label is Label.HIGH else 0.0
    return FeatureVector(values=np.append(fv.values, value),
                         n_channels=fv.n_channels, conditioned=True)


def trial_feature_matrix(rec, tau_s: int, baseline_removed: bool = True,
                         mode: str = SYMMETRIC) -> np.ndarray:
    """All windows of one recording as rows of flat feature vectors."""
    windows = segment_windows(rec, tau_s)
    stack = np.stack([w.samples for w in windows])  # (W, C, n)
    feats = band_features_of(stack, mode=mode)
    if baseline_removed:
        ref = baseline_reference(rec.baseline, tau_s, rec.sample_rate_hz,
                                 channels=rec.channels, mode=mode)
        feats = feats - ref.values
    return feats.reshape(len(windows), -1)


def channel_correlation(trials, probe: str, band: Band) -> dict:
    """Pearson r of the probe channel's entropy series against every
    channel's, across trials; zero-variance series yield None."""
    trials = list(trials)
    if len(trials) < 2:
        raise ValueError("need at least 2 trials to correlate")
    first = trials[0]
    if first.channels is None:
        raise ValueError("band features must carry channel names")
    channels = first.channels
    for t in trials[1:]:
        if t.channels != channels:
            raise ValueError("all trials must share the same channel list")
    probe = validate_channel(probe)
    if probe not in channels:
        raise ValueError(f"probe channel {probe} not in the dataset")
    b = BAND_ORDER.index(band)
    series = np.stack([t.values[:, b, ENT] for t in trials])  # (trials, C)
    centered = series - series.mean(axis=0)
    norms = np.sqrt(np.sum(np.square(centered), axis=0))
    p = channels.index(probe)
    out = {}
    for c, name in enumerate(channels):
        if norms[p] == 0.0 or norms[c] == 0.0:
            out[name] = None
            continue
        r = float(np.dot(centered[:, p], centered[:, c])
                  / (norms[p] * norms[c]))
        out[name] = min(1.0, max(-1.0, r))
    return out


def save_baseline_reference(ref: BaselineReference, path) -> None:
    """Persist a reference for pre-calibrated streaming sessions."""
    doc = {
        "tau_s": ref.tau_s,
        "n_segments": ref.n_segments,
        "channels": list(ref.channels) if ref.channels else None,
        "ent": ref.values[:, :, ENT].tolist(),
        "eng": ref.values[:, :, ENG].tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_baseline_reference(path) -> BaselineReference:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    ent = np.asarray(doc["ent"], dtype=np.float64)
    eng = np.asarray(doc["eng"], dtype=np.float64)
    if ent.shape != eng.shape or ent.ndim != 2 or ent.shape[1] != N_BANDS:
        raise ValueError(f"malformed baseline reference file {path}")
    values = np.stack([ent, eng], axis=-1)
    channels = tuple(doc["channels"]) if doc.get("channels") else None
    return BaselineReference(values=values, tau_s=int(doc["tau_s"]),
                             n_segments=int(doc["n_segments"]),
                             channels=channels)
