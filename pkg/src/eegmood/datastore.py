"""Recording persistence and synthetic data generation.

A bundle is one directory per subject: a JSON ``manifest`` plus one
``trial_<id>.f32`` payload per trial (IEEE-754 float32, little-endian,
channel-major, baseline block before evoked block). A dataset directory
holds one bundle per subject. CSV import accepts one file per trial with a
channel-name header row. The synthetic generator provides labeled,
seed-reproducible recordings for end-to-end verification.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .signals import (BASELINE_SECONDS, CHANNELS_32, EegRecording,
                      EVOKED_SECONDS, Ratings, validate_channel)

MANIFEST_NAME = "manifest"
FORMAT_VERSION = 1

# generator tone frequencies, one inside each band (theta, alpha, beta,
# gamma); detuned so the per-window phase advance (f*tau mod 1) never
# repeats within a trial for tau in {1, 3}, otherwise windows of one trial
# share a trial-identifying phase signature
BAND_CENTERS_HZ = (6.17, 12.43, 24.71, 46.87)

RATING_LOW = 3.0
RATING_HIGH = 7.0


@dataclass(frozen=True)
class TrialInfo:
    trial_id: int
    valence: float
    arousal: float
    sample_rate_hz: float
    channels: tuple[str, ...]
    baseline_samples: int
    evoked_samples: int
    payload: str


@dataclass(frozen=True)
class BundleManifest:
    format_version: int
    subject_id: int
    trials: tuple[TrialInfo, ...]


def _payload_name(trial_id: int) -> str:
    return f"trial_{trial_id}.f32"


def write_bundle(recordings, path) -> None:
    """Persist one subject's recordings as manifest + per-trial payloads."""
    recordings = list(recordings)
    if not recordings:
        raise ValueError("nothing to write")
    subject_ids = {rec.subject_id for rec in recordings}
    if len(subject_ids) != 1:
        raise ValueError(f"one bundle holds one subject, got {subject_ids}")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    trials = []
    for rec in recordings:
        payload = _payload_name(rec.trial_id)
        blob = (rec.baseline.astype("<f4").tobytes()
                + rec.evoked.astype("<f4").tobytes())
        (path / payload).write_bytes(blob)
        trials.append({
            "trial_id": rec.trial_id,
            "valence": rec.ratings.valence,
            "arousal": rec.ratings.arousal,
            "sample_rate_hz": rec.sample_rate_hz,
            "channels": list(rec.channels),
            "baseline_samples": rec.baseline.shape[1],
            "evoked_samples": rec.evoked.shape[1],
            "payload": payload,
        })
    doc = {"format_version": FORMAT_VERSION,
           "subject_id": recordings[0].subject_id,
           "trials": trials}
    with open(path / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_manifest(path) -> BundleManifest:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"no manifest at {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: malformed manifest: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(
            f"{manifest_path}: unknown format_version {version!r}, "
            f"this reader supports {FORMAT_VERSION}")
    trials = tuple(TrialInfo(
        trial_id=int(t["trial_id"]), valence=float(t["valence"]),
        arousal=float(t["arousal"]),
        sample_rate_hz=float(t["sample_rate_hz"]),
        channels=tuple(validate_channel(c) for c in t["channels"]),
        baseline_samples=int(t["baseline_samples"]),
        evoked_samples=int(t["evoked_samples"]),
        payload=str(t["payload"])) for t in doc["trials"])
    return BundleManifest(format_version=version,
                          subject_id=int(doc["subject_id"]), trials=trials)


def read_bundle(path) -> list[EegRecording]:
    """Load one subject bundle; payload sizes are checked byte-exactly."""
    path = Path(path)
    manifest = read_manifest(path)
    recordings = []
    for trial in manifest.trials:
        n_ch = len(trial.channels)
        blob = (path / trial.payload).read_bytes()
        expected = 4 * n_ch * (trial.baseline_samples + trial.evoked_samples)
        if len(blob) != expected:
            raise DataError(
                f"{path / trial.payload}: expected {expected} bytes "
                f"({n_ch} channels x {trial.baseline_samples}+"
                f"{trial.evoked_samples} samples x 4), got {len(blob)}")
        flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
        split = n_ch * trial.baseline_samples
        baseline = flat[:split].reshape(n_ch, trial.baseline_samples)
        evoked = flat[split:].reshape(n_ch, trial.evoked_samples)
        recordings.append(EegRecording(
            subject_id=manifest.subject_id, trial_id=trial.trial_id,
            sample_rate_hz=trial.sample_rate_hz, channels=trial.channels,
            baseline=baseline, evoked=evoked,
            ratings=Ratings(valence=trial.valence, arousal=trial.arousal)))
    return recordings


def write_dataset(recordings, path) -> None:
    """Write a dataset directory: one bundle subdirectory per subject."""
    path = Path(path)
    by_subject: dict[int, list] = {}
    for rec in recordings:
        by_subject.setdefault(rec.subject_id, []).append(rec)
    for subject_id, recs in sorted(by_subject.items()):
        write_bundle(recs, path / f"subject_{subject_id:02d}")


def read_dataset(path) -> list[EegRecording]:
    """Load a single bundle or a directory of subject bundles."""
    path = Path(path)
    if (path / MANIFEST_NAME).exists():
        return read_bundle(path)
    bundles = sorted(p for p in path.iterdir()
                     if p.is_dir() and (p / MANIFEST_NAME).exists())
    if not bundles:
        raise DataError(f"{path}: no bundles found (no manifest anywhere)")
    recordings = []
    for bundle in bundles:
        recordings.extend(read_bundle(bundle))
    return recordings


def import_csv(path, manifest: BundleManifest | None = None) -> list[EegRecording]:
    """Import a bundle whose payloads are CSV files.

    Each trial file has a header row of channel names and one row per
    sample; the first 3 s become the baseline, the remainder the evoked
    signal.
    """
    path = Path(path)
    if manifest is None:
        manifest = read_manifest(path)
    recordings = []
    for trial in manifest.trials:
        csv_path = path / trial.payload
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{csv_path}: empty file") from None
            header = tuple(validate_channel(c) for c in header)
            if header != trial.channels:
                raise DataError(
                    f"{csv_path}: header channels {list(header)} do not "
                    f"match manifest {list(trial.channels)}")
            rows = []
            for row_num, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise DataError(
                        f"{csv_path}: row {row_num} has {len(row)} columns, "
                        f"expected {len(header)}")
                try:
                    rows.append([float(cell) for cell in row])
                except ValueError:
                    bad = next(i for i, cell in enumerate(row)
                               if not _is_float(cell))
                    raise DataError(
                        f"{csv_path}: non-numeric value {row[bad]!r} at "
                        f"row {row_num}, column {bad + 1}") from None
        if not rows:
            raise DataError(f"{csv_path}: no sample rows")
        samples = np.array(rows).T  # (channels, samples)
        split = round(BASELINE_SECONDS * trial.sample_rate_hz)
        want = split + round(EVOKED_SECONDS * trial.sample_rate_hz)
        if samples.shape[1] != want:
            raise DataError(
                f"{csv_path}: {samples.shape[1]} sample rows, expected "
                f"{want} ({BASELINE_SECONDS:g}+{EVOKED_SECONDS:g} s at "
                f"{trial.sample_rate_hz:g} Hz)")
        recordings.append(EegRecording(
            subject_id=manifest.subject_id, trial_id=trial.trial_id,
            sample_rate_hz=trial.sample_rate_hz, channels=trial.channels,
            baseline=samples[:, :split], evoked=samples[:, split:],
            ratings=Ratings(valence=trial.valence, arousal=trial.arousal)))
    return recordings


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic dataset description.

    ``valence_effect``/``arousal_effect`` are per-band (theta, alpha, beta,
    gamma) amplitude deltas added to High-class trials on the effect
    channels; the baseline period always uses the class-independent base
    amplitude.
    """

    seed: int
    n_subjects: int
    n_trials: int
    channels: tuple[str, ...]
    rate_hz: float = 128.0
    base_amplitude_uv: float = 10.0
    valence_effect: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    arousal_effect: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    noise_std_uv: float = 2.0
    effect_channels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.rate_hz != 128.0:
            raise ValueError("the generator is defined at 128 Hz")
        if self.n_subjects < 1 or self.n_trials < 2:
            raise ValueError("need >= 1 subject and >= 2 trials")
        object.__setattr__(self, "channels",
                           tuple(validate_channel(c) for c in self.channels))
        if self.effect_channels is not None:
            object.__setattr__(
                self, "effect_channels",
                tuple(validate_channel(c) for c in self.effect_channels))


def _balanced_labels(n: int, rng) -> np.ndarray:
    labels = np.zeros(n, dtype=bool)
    labels[: n // 2] = True
    if n % 2:
        labels[n // 2] = bool(rng.integers(2))
    rng.shuffle(labels)
    return labels


def generate_synthetic(spec: SynthSpec) -> list[EegRecording]:
    """Seed-reproducible labeled recordings.

    Each trial's evoked signal sums band-center sinusoids (random phase per
    channel and band) whose amplitudes carry the class effect, plus white
    noise; ratings sit at 3.0/7.0, safely away from the 5.0 threshold.
    """
    roots = np.random.SeedSequence(spec.seed).spawn(spec.n_subjects)
    n_ch = len(spec.channels)
    effect_mask = np.array([
        spec.effect_channels is None or c in spec.effect_channels
        for c in spec.channels], dtype=np.float64)
    n_base = round(BASELINE_SECONDS * spec.rate_hz)
    n_evoked = round(EVOKED_SECONDS * spec.rate_hz)
    t_base = np.arange(n_base) / spec.rate_hz
    t_evoked = np.arange(n_evoked) / spec.rate_hz
    val_eff = np.asarray(spec.valence_effect)
    aro_eff = np.asarray(spec.arousal_effect)
    recordings = []
    for subject_idx, seq in enumerate(roots):
        rng = np.random.default_rng(seq)
        val_high = _balanced_labels(spec.n_trials, rng)
        aro_high = _balanced_labels(spec.n_trials, rng)
        for trial in range(spec.n_trials):
            # (channels, bands) amplitudes
            amp = np.full((n_ch, len(BAND_CENTERS_HZ)),
                          spec.base_amplitude_uv)
            delta = (val_eff * val_high[trial] + aro_eff * aro_high[trial])
            amp_evoked = amp + effect_mask[:, None] * delta[None, :]
            phases = rng.uniform(0.0, 2.0 * np.pi,
                                 size=(2, n_ch, len(BAND_CENTERS_HZ)))
            baseline = np.zeros((n_ch, n_base))
            evoked = np.zeros((n_ch, n_evoked))
            for b, freq in enumerate(BAND_CENTERS_HZ):
                baseline += amp[:, b, None] * np.sin(
                    2.0 * np.pi * freq * t_base + phases[0, :, b, None])
                evoked += amp_evoked[:, b, None] * np.sin(
                    2.0 * np.pi * freq * t_evoked + phases[1, :, b, None])
            baseline += rng.normal(0.0, spec.noise_std_uv, baseline.shape)
            evoked += rng.normal(0.0, spec.noise_std_uv, evoked.shape)
            recordings.append(EegRecording(
                subject_id=subject_idx + 1, trial_id=trial + 1,
                sample_rate_hz=spec.rate_hz, channels=spec.channels,
                baseline=baseline, evoked=evoked,
                ratings=Ratings(
                    valence=RATING_HIGH if val_high[trial] else RATING_LOW,
                    arousal=RATING_HIGH if aro_high[trial] else RATING_LOW)))
    return recordings


def parse_synth_spec(doc: dict) -> SynthSpec:
    """Build a SynthSpec from a JSON document (the `synth --spec` file)."""
    channels = doc.get("channels", "reduced5")
    if channels == "all32":
        channels = CHANNELS_32
    elif channels == "reduced5":
        from .signals import CHANNELS_5
        channels = CHANNELS_5
    effect_channels = doc.get("effect_channels")
    kwargs = dict(
        seed=int(doc.get("seed", 0)),
        n_subjects=int(doc.get("n_subjects", 1)),
        n_trials=int(doc.get("n_trials", 40)),
        channels=tuple(channels),
        base_amplitude_uv=float(doc.get("base_amplitude_uv", 10.0)),
        noise_std_uv=float(doc.get("noise_std_uv", 2.0)),
    )
    for key in ("valence_effect", "arousal_effect"):
        if key in doc:
            value = doc[key]
            if isinstance(value, (int, float)):
                value = [value] * 4
            if len(value) != 4:
                raise ValueError(f"{key} needs 4 per-band values")
            kwargs[key] = tuple(float(v) for v in value)
    if effect_channels is not None:
        kwargs["effect_channels"] = tuple(effect_channels)
    return SynthSpec(**kwargs)
