"""First-order FIR calibration filter bank.

Channel m of an M-way interleaved converter with gain error dg and sampling
skew dt (units of the aggregate period Ts) is corrected, to first order in
the mismatches, by filtering its own sub-rate stream with

    w[n] = (-1)^(n+1) / n * dt / M      for n != 0
    w[0] = 1 - dg                        (SubtractGain variant)
    w[0] = 1 / (1 + dg)                  (DivideGain variant)

whose response approximates the ideal corrector (1 - dg) - j*omega*dt/M: a
gain trim plus a fractional-delay differentiator. The two-sided ideal filter
is truncated rectangularly to n in [-ceil(N/2)+1, floor(N/2)] and realized
causally by delaying every channel (including the reference) by
D = ceil(N/2)-1 sub-rate samples.

Coefficients are quantized to two's-complement Q2.(W-2); convolution is
exact integer multiply-accumulate with one final scaling, so results are
bit-reproducible.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, TapOverflowError
from .model import ChannelCapture, MismatchProfile, TiadcConfig, interleave_channels
from .polyphase import convolve_serial

SUBTRACT_GAIN = "sub"
DIVIDE_GAIN = "div"


@dataclass(frozen=True)
class FilterSpec:
    """Corrector shape: tap count N, coefficient word length W, gain variant."""

    n_taps: int
    coeff_bits: int = 30
    variant: str = SUBTRACT_GAIN

    def __post_init__(self):
        if self.n_taps < 1:
            raise ConfigError(f"n_taps must be >= 1, got {self.n_taps}")
        if not 8 <= self.coeff_bits <= 32:
            raise ConfigError(f"coeff_bits must be in 8..32, got {self.coeff_bits}")
        if self.variant not in (SUBTRACT_GAIN, DIVIDE_GAIN):
            raise ConfigError(f"variant must be 'sub' or 'div', got {self.variant!r}")

    @property
    def group_delay(self) -> int:
        """Sub-rate samples of delay applied to every channel."""
        return (self.n_taps + 1) // 2 - 1

    @property
    def frac_bits(self) -> int:
        return self.coeff_bits - 2


def tap_indices(n_taps: int) -> np.ndarray:
    """Tap index range n in [-ceil(N/2)+1, floor(N/2)], length N."""
    return np.arange(-((n_taps + 1) // 2) + 1, n_taps // 2 + 1)


def design_taps(gain: float, skew: float, n_channels: int,
                spec: FilterSpec) -> np.ndarray:
    """Real-valued corrector taps for one channel.

    Parameters
    ----------
    gain, skew : float
        The channel's mismatches dg (dimensionless) and dt (units of Ts),
        both magnitude < 0.5.
    n_channels : int
        M; the skew term is dt/M because the channel runs at fs/M.
    spec : FilterSpec
        Tap count and gain variant; coeff_bits is not used here.

    Returns
    -------
    ndarray, length spec.n_taps, ordered by tap_indices(spec.n_taps).
    """
    if abs(gain) >= 0.5 or abs(skew) >= 0.5:
        raise ConfigError(f"|gain| and |skew| must be < 0.5, got {gain}, {skew}")
    if n_channels < 2:
        raise ConfigError(f"n_channels must be >= 2, got {n_channels}")
    n = tap_indices(spec.n_taps)
    w = np.zeros(spec.n_taps)
    nz = n != 0
    w[nz] = ((-1.0) ** (n[nz] + 1)) / n[nz] * (skew / n_channels)
    center = 1.0 - gain if spec.variant == SUBTRACT_GAIN else 1.0 / (1.0 + gain)
    w[n == 0] = center
    return w


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_taps(taps, coeff_bits: int) -> np.ndarray:
    """Round taps half-away-from-zero into Q2.(W-2) integers."""
    taps = np.asarray(taps, dtype=float)
    if np.any(np.abs(taps) >= 2.0):
        worst = taps[np.argmax(np.abs(taps))]
        raise TapOverflowError(f"tap {worst} outside Q2 range (-2, 2)")
    fx = _round_half_away(taps * (1 << (coeff_bits - 2))).astype(np.int64)
    limit = 1 << (coeff_bits - 1)
    if np.any(fx >= limit) or np.any(fx < -limit):
        raise TapOverflowError(
            f"quantized tap exceeds {coeff_bits}-bit two's complement")
    return fx


def dequantize_taps(taps_fx, coeff_bits: int) -> np.ndarray:
    return np.asarray(taps_fx, dtype=float) / (1 << (coeff_bits - 2))


def filter_frequency_response(taps, omega):
    """Response sum_n w[n] * exp(-j*omega*n) of truncated taps.

    omega may be a scalar or array in [-pi, pi]; taps are ordered by
    tap_indices(len(taps)).
    """
    taps = np.asarray(taps, dtype=float)
    n = tap_indices(len(taps))
    omega = np.asarray(omega, dtype=float)
    resp = np.exp(-1j * np.multiply.outer(omega, n)) @ taps
    return complex(resp) if resp.ndim == 0 else resp


def ideal_frequency_response(gain: float, skew: float, n_channels: int, omega,
                             variant: str = SUBTRACT_GAIN):
    """Untruncated target response: gain trim minus j*omega*dt/M."""
    omega = np.asarray(omega, dtype=float)
    center = 1.0 - gain if variant == SUBTRACT_GAIN else 1.0 / (1.0 + gain)
    resp = center - 1j * omega * (skew / n_channels)
    return complex(resp) if resp.ndim == 0 else resp


@dataclass(frozen=True)
class FilterBank:
    """Immutable per-channel corrector set (real + fixed-point views)."""

    spec: FilterSpec
    taps_real: tuple
    taps_fixed: tuple
    offsets: tuple

    def __post_init__(self):
        if not (len(self.taps_real) == len(self.taps_fixed) == len(self.offsets)):
            raise ConfigError("per-channel field lengths disagree")

    @property
    def n_channels(self) -> int:
        return len(self.taps_real)

    @property
    def group_delay(self) -> int:
        return self.spec.group_delay

    @classmethod
    def design(cls, profile: MismatchProfile, n_channels: int,
               spec: FilterSpec) -> "FilterBank":
        """Build correctors from a mismatch profile (truth or estimate)."""
        if len(profile) != n_channels:
            raise ConfigError(
                f"profile has {len(profile)} channels, expected {n_channels}")
        real = tuple(design_taps(profile.gains[m], profile.skews[m],
                                 n_channels, spec)
                     for m in range(n_channels))
        fixed = tuple(quantize_taps(w, spec.coeff_bits) for w in real)
        return cls(spec=spec, taps_real=real, taps_fixed=fixed,
                   offsets=profile.offsets)

    @classmethod
    def identity(cls, n_channels: int, spec: FilterSpec) -> "FilterBank":
        return cls.design(MismatchProfile.zero(n_channels), n_channels, spec)


def calibrate_channel(stream_codes, taps_fx, offset: float, spec: FilterSpec,
                      config: TiadcConfig) -> np.ndarray:
    """Correct one channel's code stream; output in amplitude units.

    Subtracts the quantized offset code, convolves with the fixed-point taps
    in exact integer arithmetic, then applies the single combined scaling
    2^-(W-2) * full_scale / 2^(B-1). Output sample k corresponds to input
    sample k - D; the first and last D samples are filter transient and are
    excluded from metrics by the capture-level wrapper.
    """
    codes = np.asarray(stream_codes, dtype=np.int64)
    if len(codes) < spec.n_taps:
        raise ShapeError(
            f"stream length {len(codes)} shorter than {spec.n_taps} taps")
    off_code = int(_round_half_away(
        offset / config.full_scale * config.code_half_range))
    acc = convolve_serial(codes - off_code, np.asarray(taps_fx, dtype=np.int64))
    scale = 2.0 ** -(spec.coeff_bits - 2) * config.lsb
    return acc * scale


def calibrate_capture(capture: ChannelCapture, bank: FilterBank,
                      spec: FilterSpec = None, engine=None) -> np.ndarray:
    """Correct every channel and re-interleave, trimming the transient.

    The uniform group delay D applies to all channels, so the interleaved
    output is simply shifted by D*M aggregate samples; D*M samples are
    trimmed from both ends. engine, if given, is a callable
    (codes, taps_fx) -> accumulator array replacing serial convolution
    (the polyphase path); it must be bit-exact with the serial rule.
    """
    spec = spec if spec is not None else bank.spec
    M = capture.config.n_channels
    if bank.n_channels != M:
        raise ConfigError(
            f"bank has {bank.n_channels} channels, capture has {M}")
    scale = 2.0 ** -(spec.coeff_bits - 2) * capture.config.lsb
    out = []
    for m in range(M):
        codes = np.asarray(capture.per_channel[m], dtype=np.int64)
        if len(codes) < spec.n_taps:
            raise ShapeError(
                f"channel {m} length {len(codes)} shorter than {spec.n_taps} taps")
        off_code = int(_round_half_away(
            bank.offsets[m] / capture.config.full_scale
            * capture.config.code_half_range))
        taps_fx = np.asarray(bank.taps_fixed[m], dtype=np.int64)
        if engine is None:
            acc = convolve_serial(codes - off_code, taps_fx)
        else:
            acc = engine(codes - off_code, taps_fx)
        out.append(acc * scale)
    merged = interleave_channels(out)
    trim = spec.group_delay * M
    return merged[trim: len(merged) - trim] if trim else merged


def write_coefficients_csv(path, bank: FilterBank) -> None:
    """Export taps as (channel, tap_index, real_value, fixed_point_integer,
    coeff_bits, format_tag) rows."""
    w = bank.spec.coeff_bits
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "tap_index", "real_value",
                         "fixed_point_integer", "coeff_bits", "format_tag"])
        for m in range(bank.n_channels):
            for n, real, fx in zip(tap_indices(bank.spec.n_taps),
                                   bank.taps_real[m], bank.taps_fixed[m]):
                writer.writerow([m, n, f"{real:.18g}", int(fx),
                                 w, f"Q2.{w - 2}"])
