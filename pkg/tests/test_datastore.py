import json
import struct

import numpy as np
import pytest

from eegmood.datastore import (BAND_CENTERS_HZ, SynthSpec, import_csv,
                               parse_synth_spec, read_bundle, read_dataset,
                               read_manifest, write_bundle, write_dataset)
from eegmood.errors import DataError
from eegmood.signals import CHANNELS_5, Label, binarize_rating
from eegmood.wavelet import band_of_level
from conftest import make_recordings


class TestBundleRoundTrip:
    def test_values_survive_round_trip(self, tmp_path, small_recordings):
        write_bundle(small_recordings, tmp_path / "b")
        loaded = read_bundle(tmp_path / "b")
        assert len(loaded) == len(small_recordings)
        for got, want in zip(loaded, small_recordings):
            assert got.channels == want.channels
            assert got.ratings == want.ratings
            assert np.array_equal(got.baseline,
                                  want.baseline.astype("<f4").astype(float))
            assert np.array_equal(got.evoked,
                                  want.evoked.astype("<f4").astype(float))

    def test_write_read_write_is_byte_identical(self, tmp_path,
                                                small_recordings):
        write_bundle(small_recordings, tmp_path / "a")
        loaded = read_bundle(tmp_path / "a")
        write_bundle(loaded, tmp_path / "b")
        for payload in sorted(p.name for p in (tmp_path / "a").iterdir()):
            assert (tmp_path / "a" / payload).read_bytes() == \
                (tmp_path / "b" / payload).read_bytes()

    def test_golden_float_encoding(self, tmp_path, small_recordings):
        rec = small_recordings[0]
        baseline = rec.baseline.copy()
        baseline[0, 0] = 1.0
        from dataclasses import replace
        rec = replace(rec, baseline=baseline)
        write_bundle([rec], tmp_path / "g")
        manifest = read_manifest(tmp_path / "g")
        blob = (tmp_path / "g" / manifest.trials[0].payload).read_bytes()
        assert blob[:4] == b"\x00\x00\x80\x3f"  # IEEE-754 float32 LE 1.0
        assert blob[:4] == struct.pack("<f", 1.0)

    def test_truncated_payload_reports_sizes(self, tmp_path,
                                             small_recordings):
        write_bundle(small_recordings[:1], tmp_path / "t")
        manifest = read_manifest(tmp_path / "t")
        payload = tmp_path / "t" / manifest.trials[0].payload
        blob = payload.read_bytes()
        payload.write_bytes(blob[:-1])
        with pytest.raises(DataError, match=f"expected {len(blob)} bytes"):
            read_bundle(tmp_path / "t")

    def test_unknown_format_version(self, tmp_path, small_recordings):
        write_bundle(small_recordings[:1], tmp_path / "v")
        manifest_path = tmp_path / "v" / "manifest"
        doc = json.loads(manifest_path.read_text())
        doc["format_version"] = 99
        manifest_path.write_text(json.dumps(doc))
        with pytest.raises(DataError, match="format_version"):
            read_bundle(tmp_path / "v")

    def test_mixed_subjects_rejected(self, tmp_path):
        recs = make_recordings(n_subjects=2, n_trials=2)
        with pytest.raises(ValueError, match="one subject"):
            write_bundle(recs, tmp_path / "m")

    def test_dataset_layout(self, tmp_path):
        recs = make_recordings(n_subjects=3, n_trials=2)
        write_dataset(recs, tmp_path / "ds")
        assert sorted(p.name for p in (tmp_path / "ds").iterdir()) == \
            ["subject_01", "subject_02", "subject_03"]
        loaded = read_dataset(tmp_path / "ds")
        assert len(loaded) == 6
        # a single bundle also reads as a dataset
        assert len(read_dataset(tmp_path / "ds" / "subject_02")) == 2

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError, match="manifest"):
            read_bundle(tmp_path)


class TestCsvImport:
    def _write_csv_bundle(self, path, n_rows=8064, n_cols=5, bad_cell=None):
        path.mkdir()
        manifest = {
            "format_version": 1, "subject_id": 4,
            "trials": [{"trial_id": 1, "valence": 7.0, "arousal": 3.0,
                        "sample_rate_hz": 128.0,
                        "channels": list(CHANNELS_5[:n_cols]),
                        "baseline_samples": 384, "evoked_samples": 7680,
                        "payload": "trial_1.csv"}],
        }
        (path / "manifest").write_text(json.dumps(manifest))
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(n_rows, n_cols)).round(3)
        lines = [",".join(CHANNELS_5[:n_cols])]
        for r, row in enumerate(rows):
            cells = [f"{v}" for v in row]
            if bad_cell is not None and r == bad_cell[0]:
                cells[bad_cell[1]] = "oops"
            lines.append(",".join(cells))
        (path / "trial_1.csv").write_text("\n".join(lines) + "\n")

    def test_import_splits_baseline_and_evoked(self, tmp_path):
        self._write_csv_bundle(tmp_path / "c")
        recs = import_csv(tmp_path / "c")
        assert len(recs) == 1
        assert recs[0].baseline.shape == (5, 384)
        assert recs[0].evoked.shape == (5, 7680)
        assert recs[0].ratings.valence == 7.0

    def test_column_count_mismatch(self, tmp_path):
        self._write_csv_bundle(tmp_path / "c")
        csv_path = tmp_path / "c" / "trial_1.csv"
        lines = csv_path.read_text().splitlines()
        lines[10] += ",0.5"
        csv_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="row 11"):
            import_csv(tmp_path / "c")

    def test_header_must_match_manifest(self, tmp_path):
        self._write_csv_bundle(tmp_path / "c")
        csv_path = tmp_path / "c" / "trial_1.csv"
        lines = csv_path.read_text().splitlines()
        lines[0] = ",".join(["AF4", "T7", "PZ", "AF3", "T8"])
        csv_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="header"):
            import_csv(tmp_path / "c")

    def test_non_numeric_cell_reports_position(self, tmp_path):
        self._write_csv_bundle(tmp_path / "c", bad_cell=(41, 2))
        with pytest.raises(DataError, match="row 43, column 3"):
            import_csv(tmp_path / "c")

    def test_empty_file_rejected(self, tmp_path):
        self._write_csv_bundle(tmp_path / "c")
        (tmp_path / "c" / "trial_1.csv").write_text("")
        with pytest.raises(DataError, match="empty"):
            import_csv(tmp_path / "c")

    def test_wrong_row_count_rejected(self, tmp_path):
        self._write_csv_bundle(tmp_path / "c", n_rows=8000)
        with pytest.raises(DataError, match="8064"):
            import_csv(tmp_path / "c")


class TestSyntheticGenerator:
    def test_same_seed_same_bytes(self, tmp_path):
        for sub in ("a", "b"):
            recs = make_recordings(seed=77, n_trials=4)
            write_bundle(recs, tmp_path / sub)
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_labels_balanced(self):
        for n_trials in (10, 11, 40):
            recs = make_recordings(seed=5, n_trials=n_trials)
            for pick in ("valence", "arousal"):
                labs = [binarize_rating(getattr(r.ratings, pick))
                        for r in recs]
                highs = sum(1 for lab in labs if lab is Label.HIGH)
                assert abs(highs - (len(labs) - highs)) <= 1

    def test_recording_counts_and_shape(self):
        recs = make_recordings(seed=1, n_subjects=2, n_trials=3)
        assert len(recs) == 6
        assert recs[0].baseline.shape == (5, 384)
        assert recs[0].evoked.shape == (5, 7680)

    def test_ratings_sit_away_from_threshold(self):
        recs = make_recordings(seed=2, n_trials=6)
        for rec in recs:
            assert rec.ratings.valence in (3.0, 7.0)
            assert rec.ratings.arousal in (3.0, 7.0)

    def test_tone_frequencies_inside_bands(self):
        for level, freq in zip((4, 3, 2, 1), BAND_CENTERS_HZ):
            _, lo, hi = band_of_level(level)
            assert lo < freq < hi

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError, match="128"):
            SynthSpec(seed=0, n_subjects=1, n_trials=4,
                      channels=CHANNELS_5, rate_hz=256.0)
        with pytest.raises(ValueError):
            SynthSpec(seed=0, n_subjects=0, n_trials=4, channels=CHANNELS_5)

    def test_effect_channels_limit_the_effect(self):
        recs = make_recordings(seed=9, n_trials=4,
                               effect_channels=("AF3",))
        spec_all = make_recordings(seed=9, n_trials=4)
        # with a single effect channel the other channels match the
        # zero-effect baseline statistics; just check generation works
        assert recs[0].evoked.shape == spec_all[0].evoked.shape

    def test_parse_spec_named_channel_sets(self):
        spec = parse_synth_spec({"seed": 1, "n_subjects": 1, "n_trials": 4,
                                 "channels": "all32",
                                 "valence_effect": 2.0})
        assert len(spec.channels) == 32
        assert spec.valence_effect == (2.0, 2.0, 2.0, 2.0)
        spec = parse_synth_spec({"channels": "reduced5",
                                 "arousal_effect": [1, 2, 3, 4],
                                 "n_trials": 4})
        assert spec.channels == CHANNELS_5
        assert spec.arousal_effect == (1.0, 2.0, 3.0, 4.0)

    def test_parse_spec_rejects_bad_effect(self):
        with pytest.raises(ValueError, match="4 per-band"):
            parse_synth_spec({"n_trials": 4, "valence_effect": [1, 2]})
