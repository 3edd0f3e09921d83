import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eegmood.datastore import SynthSpec, generate_synthetic
from eegmood.signals import CHANNELS_5


STRONG_VALENCE = (4.0, -3.0, 2.0, -2.0)
STRONG_AROUSAL = (-2.0, 3.0, -3.0, 2.0)


def make_recordings(seed=42, n_subjects=1, n_trials=12, channels=CHANNELS_5,
                    valence_effect=STRONG_VALENCE,
                    arousal_effect=STRONG_AROUSAL, noise_std_uv=2.0,
                    effect_channels=None):
    spec = SynthSpec(seed=seed, n_subjects=n_subjects, n_trials=n_trials,
                     channels=channels, valence_effect=valence_effect,
                     arousal_effect=arousal_effect,
                     noise_std_uv=noise_std_uv,
                     effect_channels=effect_channels)
    return generate_synthetic(spec)


@pytest.fixture
def small_recordings():
    """One subject, 12 trials, 5 channels, strong class effects."""
    return make_recordings()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
