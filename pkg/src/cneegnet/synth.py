"""Deterministic synthetic oddball-ERP generator.

Signal model (deliberately simple, no physiological fidelity claimed):

- background: sum of 20 random-phase sinusoids, frequencies linearly spaced
  over 1-40 Hz, amplitudes proportional to 1/f, scaled so the expected RMS
  equals background_noise_uv; independent phases per epoch and channel.
- alpha: a 10 Hz sinusoid at half the background RMS, random phase per epoch
  and channel.
- gait artifact: a sinusoid at gait_rate_hz plus a second harmonic at half
  amplitude, each with a per-epoch random phase shared across channels;
  amplitude is 0 seated, 20 walking, 30 loaded (overridable).
- target epochs add a Gaussian bump of amplitude p300_amplitude_uv centered
  at the integer sample round(p300_latency_s * sample_rate) with sigma
  p300_width_s * sample_rate, on the last ceil(p300_channel_fraction * C)
  channels only.

Everything is drawn from one seeded generator in a fixed order, so equal
configs produce bitwise-identical datasets.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import COND_LATE, COND_LOADED, COND_WALKING, EpochDataset
from .errors import ConfigError, DataError

CONDITIONS = ("seated", "walking", "loaded")

# default gait artifact amplitude (uV) per condition regime
GAIT_AMPLITUDE_UV = {"seated": 0.0, "walking": 20.0, "loaded": 30.0}

_N_BACKGROUND_COMPONENTS = 20
_BACKGROUND_BAND_HZ = (1.0, 40.0)
_ALPHA_HZ = 10.0
_ALPHA_RELATIVE_AMPLITUDE = 0.5


@dataclass
class SynthConfig:
    n_epochs: int = 1000
    channels: int = 16
    samples: int = 128
    sample_rate_hz: float = 128.0
    oddball_rate: float = 0.2
    p300_amplitude_uv: float = 5.0
    p300_latency_s: float = 0.30
    p300_width_s: float = 0.08
    p300_channel_fraction: float = 0.25
    background_noise_uv: float = 10.0
    condition: str = "seated"
    gait_artifact_uv: float = None  # None resolves from condition
    gait_rate_hz: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.condition not in CONDITIONS:
            raise ConfigError(
                f"condition must be one of {CONDITIONS}, got {self.condition!r}"
            )
        if self.gait_artifact_uv is None:
            self.gait_artifact_uv = GAIT_AMPLITUDE_UV[self.condition]
        if self.n_epochs < 1:
            raise ConfigError(f"n_epochs must be >= 1, got {self.n_epochs}")
        if self.channels < 1 or self.samples < 1:
            raise ConfigError("channels and samples must be >= 1")
        if not 0.0 < self.oddball_rate < 1.0:
            raise ConfigError(f"oddball_rate must lie in (0, 1), got {self.oddball_rate}")
        if not 0.0 < self.p300_channel_fraction <= 1.0:
            raise ConfigError(
                f"p300_channel_fraction must lie in (0, 1], got {self.p300_channel_fraction}"
            )
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be > 0")
        if min(self.p300_width_s, self.p300_latency_s) < 0:
            raise ConfigError("p300 latency and width must be >= 0")
        window = self.samples / self.sample_rate_hz
        if self.p300_latency_s + 3 * self.p300_width_s > window:
            raise ConfigError(
                f"p300 bump (latency {self.p300_latency_s}s + 3*width) does not fit "
                f"in the {window}s epoch"
            )
        if self.background_noise_uv < 0 or self.gait_artifact_uv < 0:
            raise ConfigError("amplitudes must be >= 0")


def p300_channels(channels, fraction):
    """Index array of the designated bump channels (the last ceil(f*C))."""
    count = int(math.ceil(fraction * channels))
    return np.arange(channels - count, channels)


def generate(cfg):
    """Produce a labeled EpochDataset under the configured noise regime."""
    n, c, t = cfg.n_epochs, cfg.channels, cfg.samples
    rng = np.random.default_rng(cfg.seed)
    time_s = np.arange(t) / cfg.sample_rate_hz

    n_targets = int(round(cfg.oddball_rate * n))
    labels = np.zeros(n, dtype=np.uint8)
    labels[:n_targets] = 1
    rng.shuffle(labels)

    data = np.zeros((n, c, t), dtype=np.float64)

    if cfg.background_noise_uv > 0:
        freqs = np.linspace(*_BACKGROUND_BAND_HZ, _N_BACKGROUND_COMPONENTS)
        rel = 1.0 / freqs
        # scale so that sum of a_f^2 / 2 equals the requested RMS^2
        scale = cfg.background_noise_uv * math.sqrt(2.0 / np.square(rel).sum())
        amps = scale * rel
        phases = rng.uniform(0.0, 2.0 * math.pi, size=(n, c, freqs.size))
        sin_basis = np.sin(2.0 * math.pi * freqs[:, None] * time_s[None, :])
        cos_basis = np.cos(2.0 * math.pi * freqs[:, None] * time_s[None, :])
        data += np.einsum("ncf,ft->nct", amps * np.cos(phases), sin_basis)
        data += np.einsum("ncf,ft->nct", amps * np.sin(phases), cos_basis)

        alpha_amp = _ALPHA_RELATIVE_AMPLITUDE * cfg.background_noise_uv
        alpha_phase = rng.uniform(0.0, 2.0 * math.pi, size=(n, c, 1))
        data += alpha_amp * np.sin(
            2.0 * math.pi * _ALPHA_HZ * time_s[None, None, :] + alpha_phase
        )

    if cfg.gait_artifact_uv > 0:
        base = rng.uniform(0.0, 2.0 * math.pi, size=(n, 1, 1))
        harm = rng.uniform(0.0, 2.0 * math.pi, size=(n, 1, 1))
        w = 2.0 * math.pi * cfg.gait_rate_hz
        gait = cfg.gait_artifact_uv * np.sin(w * time_s[None, None, :] + base)
        gait = gait + 0.5 * cfg.gait_artifact_uv * np.sin(
            2.0 * w * time_s[None, None, :] + harm
        )
        data += gait  # broadcast: identical across channels within an epoch

    if cfg.p300_amplitude_uv != 0:
        center = int(round(cfg.p300_latency_s * cfg.sample_rate_hz))
        sigma = cfg.p300_width_s * cfg.sample_rate_hz
        if sigma == 0:
            bump = (np.arange(t) == center).astype(np.float64)
        else:
            bump = np.exp(-0.5 * ((np.arange(t) - center) / sigma) ** 2)
        bump = cfg.p300_amplitude_uv * bump
        chans = p300_channels(c, cfg.p300_channel_fraction)
        target_rows = np.flatnonzero(labels == 1)
        data[np.ix_(target_rows, chans)] += bump[None, None, :]

    conditions = np.zeros(n, dtype=np.uint8)
    if cfg.condition in ("walking", "loaded"):
        conditions |= COND_WALKING
    if cfg.condition == "loaded":
        conditions |= COND_LOADED
    conditions[n // 2 :] |= COND_LATE  # second half of the run is tagged late

    return EpochDataset(
        epochs=data.astype(np.float32),
        labels=labels,
        conditions=conditions,
        sample_rate_hz=cfg.sample_rate_hz,
        subject_id=f"synth-{cfg.condition}-seed{cfg.seed}",
    )


def snr_estimate(ds, channel_fraction=0.25):
    """Peak of the target-minus-nontarget average on the bump channels in the
    0.25-0.35 s window, divided by the pooled non-target RMS there.

    Returns +inf when the non-target energy in the window is exactly zero.
    """
    targets = ds.epochs[ds.labels == 1]
    others = ds.epochs[ds.labels == 0]
    if targets.shape[0] == 0 or others.shape[0] == 0:
        raise DataError("snr estimate needs both classes present")
    fs = ds.sample_rate_hz
    lo = int(math.ceil(0.25 * fs))
    hi = min(int(math.floor(0.35 * fs)) + 1, ds.n_samples)
    if lo >= hi:
        raise DataError("epoch too short for the 0.25-0.35 s window")
    chans = p300_channels(ds.n_channels, channel_fraction)
    diff = targets.mean(axis=0) - others.mean(axis=0)
    peak = float(diff[chans, lo:hi].max())
    window = others[:, chans, lo:hi].astype(np.float64)
    denom = float(np.sqrt(np.mean(np.square(window))))
    if denom == 0.0:
        return math.inf
    return peak / denom
