import numpy as np
import pytest

from cneegnet.synth import SynthConfig, generate

# small fast generator settings: the p300 bump must fit in a 0.5 s epoch
SMALL_SYNTH = dict(n_epochs=120, channels=8, samples=64, seed=3,
                   background_noise_uv=1.0, p300_latency_s=0.25,
                   p300_width_s=0.05)

FAST_MODEL = dict(f1=4, f2=4, d=2, kernel_length=16, dropout_rate=0.1,
                  norm_rate=0.25, channels=8, samples=64)


@pytest.fixture(scope="session")
def small_dataset():
    return generate(SynthConfig(**SMALL_SYNTH))


def rand_epochs(rng, n, channels, samples):
    return rng.normal(size=(n, channels, samples)).astype(np.float32)
