"""Channel-level model of an M-way time-interleaved ADC (TIADC).

An M-channel TIADC realizes an aggregate rate fs by rotating through M
sub-ADCs, each converting at fs/M. Real converter channels disagree slightly:
channel m applies a gain error (1 + dg_m), samples at a skewed instant
(k*M + m + dt_m)*Ts instead of the nominal grid point, and adds a constant
offset do_m. This module synthesizes such captures (and their ideal
zero-mismatch counterparts) with a saturating mid-rise quantizer.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class TiadcConfig:
    """Static converter description.

    n_channels is M, fs the aggregate rate (Ts = 1/fs), bits the quantizer
    word length B, full_scale the input amplitude mapped to the top code.
    """

    n_channels: int
    fs: float = 1.0
    bits: int = 12
    full_scale: float = 1.0

    def __post_init__(self):
        if self.n_channels < 2:
            raise ConfigError(f"need at least 2 channels, got {self.n_channels}")
        if not 2 <= self.bits <= 24:
            raise ConfigError(f"bits must be in 2..24, got {self.bits}")
        if not self.fs > 0:
            raise ConfigError(f"fs must be positive, got {self.fs}")
        if not self.full_scale > 0:
            raise ConfigError(f"full_scale must be positive, got {self.full_scale}")

    @property
    def code_half_range(self) -> int:
        return 1 << (self.bits - 1)

    @property
    def lsb(self) -> float:
        return self.full_scale / self.code_half_range


@dataclass(frozen=True)
class ToneSpec:
    """Single-tone test input x(t) = dc + A*sin(2*pi*f*t + phase)."""

    amplitude: float
    freq_rel: float
    phase: float = 0.0
    dc: float = 0.0

    def __post_init__(self):
        if not 0 < self.freq_rel < 0.5:
            raise ConfigError(f"freq_rel must be in (0, 0.5), got {self.freq_rel}")
        if self.amplitude <= 0:
            raise ConfigError(f"amplitude must be positive, got {self.amplitude}")


@dataclass(frozen=True)
class MismatchProfile:
    """Per-channel ground-truth (or estimated) mismatch triplet.

    offsets in full-scale units, gains dimensionless, skews in units of Ts.
    """

    offsets: tuple
    gains: tuple
    skews: tuple

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(float(v) for v in self.offsets))
        object.__setattr__(self, "gains", tuple(float(v) for v in self.gains))
        object.__setattr__(self, "skews", tuple(float(v) for v in self.skews))
        n = len(self.offsets)
        if len(self.gains) != n or len(self.skews) != n:
            raise ConfigError("offsets, gains, skews must have equal length")
        # |dg|, |dt| < 0.5 keeps the mismatch model (and phase unwrap) valid
        if any(abs(g) >= 0.5 for g in self.gains):
            raise ConfigError("gain mismatch magnitude must be < 0.5")
        if any(abs(t) >= 0.5 for t in self.skews):
            raise ConfigError("skew mismatch magnitude must be < 0.5")

    @classmethod
    def zero(cls, n_channels: int) -> "MismatchProfile":
        z = (0.0,) * n_channels
        return cls(z, z, z)

    def __len__(self) -> int:
        return len(self.offsets)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.offsets + self.gains + self.skews)


@dataclass(frozen=True)
class ChannelCapture:
    """Quantized per-channel streams plus the interleaved output."""

    config: TiadcConfig
    per_channel: tuple
    interleaved: np.ndarray
    origin: str = "simulated"

    def __post_init__(self):
        lengths = {len(c) for c in self.per_channel}
        if len(lengths) != 1:
            raise ShapeError("per-channel streams must share one length")
        if len(self.interleaved) != len(self.per_channel) * lengths.pop():
            raise ShapeError("interleaved length inconsistent with channels")

    @property
    def n_per_channel(self) -> int:
        return len(self.per_channel[0])


def sample_channels(tone: ToneSpec, config: TiadcConfig,
                    profile: MismatchProfile, n_per_channel: int) -> list:
    """Sample the tone through the mismatched channel model, pre-quantization.

    Parameters
    ----------
    tone : ToneSpec
        Input sine definition; freq_rel is a fraction of fs.
    config : TiadcConfig
        Converter geometry (only n_channels is used here).
    profile : MismatchProfile
        Per-channel offset/gain/skew triplets, length n_channels.
    n_per_channel : int
        Samples to produce for each channel.

    Returns
    -------
    list of ndarray
        M float arrays of length n_per_channel. Channel m sample k equals
        (1 + dg_m) * x((k*M + m + dt_m)*Ts) + do_m.
    """
    M = config.n_channels
    if len(profile) != M:
        raise ConfigError(
            f"profile has {len(profile)} channels, config expects {M}")
    if n_per_channel < 1:
        raise ConfigError("n_per_channel must be >= 1")
    k = np.arange(n_per_channel, dtype=float)
    out = []
    for m in range(M):
        t = k * M + m + profile.skews[m]  # in units of Ts
        x = tone.dc + tone.amplitude * np.sin(
            2.0 * np.pi * tone.freq_rel * t + tone.phase)
        out.append((1.0 + profile.gains[m]) * x + profile.offsets[m])
    return out


def quantize_stream(samples, config: TiadcConfig) -> np.ndarray:
    """Mid-rise saturating quantizer, round half away from zero."""
    half = config.code_half_range
    scaled = np.asarray(samples, dtype=float) / config.full_scale * half
    codes = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(codes, -half, half - 1).astype(np.int64)


def dequantize_stream(codes, config: TiadcConfig) -> np.ndarray:
    """Map integer codes back to amplitude units (inverse of the code scale)."""
    return np.asarray(codes, dtype=float) * (config.full_scale / config.code_half_range)


def quantize_value(value: float, config: TiadcConfig) -> int:
    """Quantize a scalar with the same rule as quantize_stream."""
    return int(quantize_stream(np.array([value]), config)[0])


def interleave_channels(per_channel) -> np.ndarray:
    """Merge M equal-length streams into one, sample k*M+m from channel m."""
    lengths = {len(c) for c in per_channel}
    if len(lengths) != 1:
        raise ShapeError(f"ragged channel lengths: {sorted(len(c) for c in per_channel)}")
    M = len(per_channel)
    K = lengths.pop()
    first = np.asarray(per_channel[0])
    out = np.empty(M * K, dtype=first.dtype)
    for m, ch in enumerate(per_channel):
        out[m::M] = ch
    return out


def deinterleave(stream, n_channels: int) -> list:
    """Inverse of interleave_channels."""
    stream = np.asarray(stream)
    if len(stream) % n_channels:
        raise ShapeError(
            f"stream length {len(stream)} not divisible by {n_channels}")
    return [stream[m::n_channels] for m in range(n_channels)]


def simulate_capture(tone: ToneSpec, config: TiadcConfig,
                     profile: MismatchProfile, n_total: int) -> ChannelCapture:
    """Full capture: sample through the mismatch model, quantize, interleave."""
    M = config.n_channels
    if n_total % M:
        raise ShapeError(f"n_total {n_total} not divisible by {M} channels")
    analog = sample_channels(tone, config, profile, n_total // M)
    per_channel = tuple(quantize_stream(ch, config) for ch in analog)
    return ChannelCapture(config, per_channel,
                          interleave_channels(per_channel), origin="simulated")


def ideal_capture(tone: ToneSpec, config: TiadcConfig, n_total: int) -> ChannelCapture:
    """Capture of the same tone with a perfectly matched channel bank."""
    return simulate_capture(tone, config,
                            MismatchProfile.zero(config.n_channels), n_total)
