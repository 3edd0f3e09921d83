import numpy as np
import pytest
from scipy.signal import freqz

from eegmood.signals import (CHANNELS_32, CHANNELS_5, EegRecording, Label,
                             Ratings, Window, bandpass_filter_coefficients,
                             binarize_rating, common_average_reference,
                             preprocess_raw, segment_windows,
                             select_channels)


def make_recording(n_channels=5, rate=128.0, seed=0, subject=1, trial=1):
    rng = np.random.default_rng(seed)
    channels = CHANNELS_5 if n_channels == 5 else CHANNELS_32
    return EegRecording(
        subject_id=subject, trial_id=trial, sample_rate_hz=rate,
        channels=channels[:n_channels],
        baseline=rng.normal(size=(n_channels, round(3 * rate))),
        evoked=rng.normal(size=(n_channels, round(60 * rate))),
        ratings=Ratings(valence=7.0, arousal=3.0))


class TestBinarize:
    def test_scale_endpoints(self):
        assert binarize_rating(9.0) is Label.HIGH
        assert binarize_rating(1.0) is Label.LOW

    def test_threshold_is_strictly_greater(self):
        assert binarize_rating(5.0) is Label.LOW
        assert binarize_rating(5.000001) is Label.HIGH

    @pytest.mark.parametrize("bad", [0.5, 9.5, -1.0, 10.0])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            binarize_rating(bad)


class TestSelectChannels:
    def test_reduce_32_to_5(self):
        rec = make_recording(32)
        out = select_channels(rec, CHANNELS_5)
        assert out.channels == CHANNELS_5
        assert out.evoked.shape[0] == 5
        for i, name in enumerate(CHANNELS_5):
            src = rec.channels.index(name)
            assert np.array_equal(out.evoked[i], rec.evoked[src])
            assert np.array_equal(out.baseline[i], rec.baseline[src])

    def test_identity_subset(self):
        rec = make_recording(5)
        out = select_channels(rec, rec.channels)
        assert out.channels == rec.channels
        assert np.array_equal(out.evoked, rec.evoked)

    def test_subset_order_is_respected(self):
        rec = make_recording(5)
        out = select_channels(rec, ("T8", "AF3"))
        assert out.channels == ("T8", "AF3")
        assert np.array_equal(out.evoked[0],
                              rec.evoked[rec.channels.index("T8")])

    def test_unknown_channel_is_named(self):
        rec = make_recording(5)
        with pytest.raises(ValueError, match="XX9"):
            select_channels(rec, ("XX9",))

    def test_channel_not_in_recording(self):
        rec = make_recording(5)
        with pytest.raises(ValueError, match="FP1"):
            select_channels(rec, ("FP1",))


class TestCommonAverageReference:
    def test_two_row_example(self):
        out = common_average_reference(np.array([[1.0, 1.0], [3.0, 3.0]]))
        assert np.array_equal(out, [[-1.0, -1.0], [1.0, 1.0]])

    def test_identical_rows_become_zero(self):
        m = np.tile(np.arange(8.0), (4, 1))
        assert np.abs(common_average_reference(m)).max() == 0.0

    def test_single_row_becomes_zero(self):
        assert np.abs(common_average_reference(np.arange(6.0)[None])).max() \
            == 0.0

    def test_column_sums_vanish(self, rng):
        m = rng.normal(size=(7, 100)) * 50
        out = common_average_reference(m)
        scale = np.abs(m).max()
        assert np.abs(out.sum(axis=0)).max() < 1e-9 * scale

    def test_idempotent(self, rng):
        m = rng.normal(size=(6, 64))
        once = common_average_reference(m)
        twice = common_average_reference(once)
        assert np.abs(twice - once).max() < 1e-12

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            common_average_reference(np.empty((0, 4)))


class TestPreprocessRaw:
    def test_length_factor_four(self, rng):
        out = preprocess_raw(rng.normal(size=(2, 2048)))
        assert out.shape == (2, 512)

    def test_wrong_rate_rejected(self):
        with pytest.raises(ValueError):
            preprocess_raw(np.zeros((1, 2048)), rate_hz=256.0)

    def test_tail_truncated_with_warning(self, rng):
        with pytest.warns(UserWarning, match="truncat"):
            out = preprocess_raw(rng.normal(size=(1, 2050)))
        assert out.shape == (1, 512)

    def test_passband_10hz(self):
        t = np.arange(8 * 512) / 512.0
        x = np.sin(2 * np.pi * 10.0 * t)[None, :]
        y = preprocess_raw(x)[0]
        amp = np.abs(y[128:-128]).max()
        assert abs(amp - 1.0) < 0.05
        # design-route check: squared magnitude response (zero-phase filter)
        b, a = bandpass_filter_coefficients()
        _, h = freqz(b, a, worN=[2 * np.pi * 10.0 / 512.0])
        assert abs(abs(h[0]) ** 2 - 1.0) < 0.05

    def test_stopband_60hz(self):
        t = np.arange(8 * 512) / 512.0
        x = np.sin(2 * np.pi * 60.0 * t)[None, :]
        y = preprocess_raw(x)[0]
        assert np.abs(y[128:-128]).max() < 0.1
        b, a = bandpass_filter_coefficients()
        _, h = freqz(b, a, worN=[2 * np.pi * 60.0 / 512.0])
        assert abs(h[0]) ** 2 < 0.1


class TestSegmentWindows:
    def test_tau_one(self):
        rec = make_recording(5)
        windows = segment_windows(rec, 1)
        assert len(windows) == 60
        assert all(w.samples.shape == (5, 128) for w in windows)
        assert [w.index for w in windows] == list(range(60))

    def test_tau_three(self):
        rec = make_recording(5)
        windows = segment_windows(rec, 3)
        assert len(windows) == 20
        assert windows[0].samples.shape == (5, 384)

    def test_tiling_reproduces_evoked_exactly(self):
        rec = make_recording(5)
        for tau in (1, 3):
            tiled = np.hstack([w.samples for w in segment_windows(rec, tau)])
            assert np.array_equal(tiled, rec.evoked)

    def test_invalid_tau(self):
        rec = make_recording(5)
        with pytest.raises(ValueError):
            segment_windows(rec, 2)

    def test_61s_signal_rejected(self):
        # the recording type itself pins the 60 s evoked duration
        with pytest.raises(ValueError, match="evoked"):
            EegRecording(subject_id=1, trial_id=1, sample_rate_hz=128.0,
                         channels=CHANNELS_5,
                         baseline=np.zeros((5, 384)),
                         evoked=np.zeros((5, 61 * 128)),
                         ratings=Ratings(5.0, 5.0))

    def test_non_divisible_length(self):
        # a rate whose 3 s window does not divide the evoked length
        odd = EegRecording(subject_id=1, trial_id=1, sample_rate_hz=128.5,
                           channels=CHANNELS_5,
                           baseline=np.zeros((5, round(3 * 128.5))),
                           evoked=np.zeros((5, 7710)),
                           ratings=Ratings(5.0, 5.0))
        with pytest.raises(ValueError, match="divisible"):
            segment_windows(odd, 3)


class TestRecordingInvariants:
    def test_baseline_duration_enforced(self):
        with pytest.raises(ValueError, match="baseline"):
            EegRecording(subject_id=1, trial_id=1, sample_rate_hz=128.0,
                         channels=CHANNELS_5,
                         baseline=np.zeros((5, 100)),
                         evoked=np.zeros((5, 7680)),
                         ratings=Ratings(5.0, 5.0))

    def test_row_count_must_match_channels(self):
        with pytest.raises(ValueError, match="channel count"):
            EegRecording(subject_id=1, trial_id=1, sample_rate_hz=128.0,
                         channels=CHANNELS_5,
                         baseline=np.zeros((4, 384)),
                         evoked=np.zeros((4, 7680)),
                         ratings=Ratings(5.0, 5.0))

    def test_rating_bounds(self):
        with pytest.raises(ValueError):
            Ratings(valence=0.0, arousal=5.0)
        with pytest.raises(ValueError):
            Ratings(valence=5.0, arousal=9.5)

    def test_channel_names_canonicalized(self):
        rec = EegRecording(subject_id=1, trial_id=1, sample_rate_hz=128.0,
                           channels=("af3", "t7", "pz", "af4", "t8"),
                           baseline=np.zeros((5, 384)),
                           evoked=np.zeros((5, 7680)),
                           ratings=Ratings(5.0, 5.0))
        assert rec.channels == CHANNELS_5

    def test_reduced_set_is_subset_of_full(self):
        assert set(CHANNELS_5) <= set(CHANNELS_32)
        assert len(CHANNELS_32) == 32
