"""Four-parameter sine fitting and per-channel mismatch estimation.

Each sub-channel of an M-way interleaved converter sees the common test tone
aliased to its own rate: a tone at relative frequency f (fraction of the
aggregate rate) appears in channel data at f_sub = (f*M) mod 1, reflected
about the sub-rate Nyquist when that alias lands above 0.5. Fitting
A*sin + B*cos + C with frequency refinement to every channel gives per-channel
amplitude, phase, and dc; mismatches follow by comparing against channel 0,
which is defined to be the reference (all its mismatches are zero).

The skew estimate comes from the phase difference: channel m's carrier phase
leads channel 0's by 2*pi*f*(m + dt_m), known only modulo 2*pi, so the branch
is chosen to make |dt_m| smallest; mismatches are assumed well below one
sample period.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, ConvergenceError, DegenerateFitError,
                     PhaseAmbiguityError)
from .model import ChannelCapture, TiadcConfig, dequantize_stream

_OMEGA_TOL = 1e-12
_MAX_ITERATIONS = 50


@dataclass(frozen=True)
class SineFitResult:
    """Least-squares parameters of one channel's record.

    freq_rel is a fraction of the fitted record's own rate (the sub-channel
    rate when fitting channel data). phase is in (-pi, pi] for the model
    amplitude * sin(2*pi*freq_rel*n + phase) + dc.
    """

    amplitude: float
    freq_rel: float
    phase: float
    dc: float
    rms_residual: float
    iterations: int


@dataclass(frozen=True)
class MismatchEstimate:
    """Derived mismatches relative to channel 0, plus the underlying fits."""

    fits: tuple
    offsets: tuple
    gains: tuple
    skews: tuple
    reference_channel: int = 0


def _three_param_solve(y, n, omega):
    m3 = np.column_stack([np.sin(omega * n), np.cos(omega * n), np.ones_like(n)])
    sol, res, rank, _ = np.linalg.lstsq(m3, y, rcond=None)
    if rank < 3:
        raise DegenerateFitError("normal equations singular in 3-parameter solve")
    model = m3 @ sol
    return sol, float(np.sum((y - model) ** 2))


def _result(a, b, c, omega, y, n, iterations) -> SineFitResult:
    amplitude = math.hypot(a, b)
    phase = math.atan2(b, a)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    resid = y - (a * np.sin(omega * n) + b * np.cos(omega * n) + c)
    return SineFitResult(amplitude=amplitude, freq_rel=omega / (2.0 * math.pi),
                         phase=phase, dc=float(c),
                         rms_residual=float(np.sqrt(np.mean(resid ** 2))),
                         iterations=iterations)


def sine_fit_four_param(samples, freq_guess_rel: float) -> SineFitResult:
    """Fit amplitude, frequency, phase, and dc of a sampled sine.

    Parameters
    ----------
    samples : sequence of reals
        At least 16 samples of one sine plus noise.
    freq_guess_rel : float
        Starting frequency in (0, 0.5), within one DFT bin (1/len) of truth.

    Returns
    -------
    SineFitResult

    Raises
    ------
    DegenerateFitError
        Constant or zero input, or singular fit equations.
    ConvergenceError
        Frequency refinement did not settle in 50 iterations; the error
        carries the last iterate in .last_fit.

    Notes
    -----
    Gauss-Newton on (A, B, C, omega): each iteration solves the linearized
    least-squares with the extra column n*(A*cos - B*sin) and updates omega
    by the resulting correction; stops when |d_omega|/omega < 1e-12. The
    guess is first refined by a small residual scan over +/- one bin, which
    widens the practical basin to the documented precondition.
    """
    y = np.asarray(samples, dtype=float)
    if len(y) < 16:
        raise ConfigError(f"need at least 16 samples, got {len(y)}")
    if not 0.0 < freq_guess_rel < 0.5:
        raise ConfigError(f"freq_guess_rel must be in (0, 0.5), got {freq_guess_rel}")
    span = float(np.max(y) - np.min(y)) if len(y) else 0.0
    if span == 0.0:
        raise DegenerateFitError("constant input has no sine component")

    n = np.arange(len(y), dtype=float)
    bin_width = 1.0 / len(y)
    # residual scan: the Gauss-Newton basin is about +/- half a bin, the
    # documented precondition is a full bin
    best = (math.inf, freq_guess_rel)
    for step in (-1.0, -0.5, 0.0, 0.5, 1.0):
        f = freq_guess_rel + step * bin_width
        if not 1e-9 < f < 0.5 - 1e-9:
            continue
        _, rss = _three_param_solve(y, n, 2.0 * math.pi * f)
        if rss < best[0]:
            best = (rss, f)
    omega = 2.0 * math.pi * best[1]

    (a, b, c), _ = _three_param_solve(y, n, omega)
    iterations = 0
    for i in range(_MAX_ITERATIONS):
        iterations = i + 1
        m4 = np.column_stack([
            np.sin(omega * n), np.cos(omega * n), np.ones_like(n),
            n * (a * np.cos(omega * n) - b * np.sin(omega * n)),
        ])
        sol, _, rank, _ = np.linalg.lstsq(m4, y, rcond=None)
        if rank < 4:
            raise DegenerateFitError("normal equations singular in 4-parameter solve")
        a, b, c, d_omega = sol
        omega += d_omega
        if not 0.0 < omega < math.pi:
            raise ConvergenceError(
                f"frequency iterate left (0, 0.5): {omega / (2 * math.pi)}",
                last_fit=_result(a, b, c, omega, y, n, iterations))
        if abs(d_omega) / abs(omega) < _OMEGA_TOL:
            fit = _result(a, b, c, omega, y, n, iterations)
            if fit.amplitude <= 1e-12 * span:
                raise DegenerateFitError("fitted amplitude is zero")
            return fit
    raise ConvergenceError(
        f"no convergence after {_MAX_ITERATIONS} iterations",
        last_fit=_result(a, b, c, omega, y, n, iterations))


def alias_to_subrate(freq_rel: float, n_channels: int) -> tuple:
    """Where a tone at freq_rel (aggregate units) lands in channel data.

    Returns (f_sub, reflected): the sub-rate frequency in (0, 0.5) and
    whether the alias is spectrally reflected (which negates phase).
    """
    a = (freq_rel * n_channels) % 1.0
    if min(a, 1.0 - a, abs(a - 0.5)) < 1e-9:
        raise ConfigError(
            "tone at %.9g of fs aliases onto a channel band edge for M=%d; "
            "per-channel sine fits are degenerate there" % (freq_rel, n_channels))
    if a < 0.5:
        return a, False
    return 1.0 - a, True


def derive_mismatches(fits, config: TiadcConfig,
                      tone_freq_rel: float) -> MismatchEstimate:
    """Turn per-channel sine fits into offset/gain/skew estimates.

    Parameters
    ----------
    fits : sequence of SineFitResult
        One per channel, all fitted on captures of the same tone.
    config : TiadcConfig
        Supplies the channel count.
    tone_freq_rel : float
        The tone frequency as a fraction of the aggregate rate, in (0, 0.5).

    Returns
    -------
    MismatchEstimate
        Channel-0 entries are exactly zero. Gains are amplitude ratios minus
        one, offsets are dc differences, skews come from phase differences
        with the 2*pi branch chosen to minimize |dt|.

    Raises
    ------
    PhaseAmbiguityError
        Every phase-unwrap branch puts |dt| at or beyond 0.5 Ts.
    """
    fits = tuple(fits)
    M = config.n_channels
    if len(fits) != M:
        raise ConfigError(f"{len(fits)} fits for {M} channels")
    if not 0.0 < tone_freq_rel < 0.5:
        raise ConfigError(f"tone_freq_rel must be in (0, 0.5), got {tone_freq_rel}")
    _, reflected = alias_to_subrate(tone_freq_rel, M)
    amps = np.array([f.amplitude for f in fits])
    if amps[0] <= 0.0:
        raise DegenerateFitError("reference channel amplitude is zero")
    phases = np.array([f.phase for f in fits])
    # a reflected alias maps carrier phase theta to pi - theta; undo it
    carrier = (math.pi - phases) if reflected else phases

    gains = amps / amps[0] - 1.0
    offsets = np.array([f.dc for f in fits]) - fits[0].dc
    skews = np.zeros(M)
    for m in range(1, M):
        dphi = carrier[m] - carrier[0]
        j = np.arange(-(m + 2), m + 3)
        candidates = (dphi + 2.0 * math.pi * j) / (2.0 * math.pi * tone_freq_rel) - m
        pick = candidates[np.argmin(np.abs(candidates))]
        if abs(pick) >= 0.5:
            raise PhaseAmbiguityError(
                f"channel {m}: nearest skew branch is {pick:.4f} Ts (>= 0.5); "
                "phase difference is ambiguous")
        skews[m] = pick
    gains[0] = 0.0
    offsets[0] = 0.0
    return MismatchEstimate(fits=fits,
                            offsets=tuple(float(v) for v in offsets),
                            gains=tuple(float(v) for v in gains),
                            skews=tuple(float(v) for v in skews))


def detect_tone_freq(capture: ChannelCapture) -> float:
    """Recover the tone frequency (aggregate units) from a capture alone.

    A windowed-DFT peak of the interleaved stream gives a coarse value
    (good to a small fraction of a bin); a four-parameter fit of channel 0
    then pins the sub-rate alias, and the coarse value selects which
    aggregate-band copy that alias came from.
    """
    config = capture.config
    stream = dequantize_stream(capture.interleaved, config)
    n = min(len(stream), 1 << 16)
    seg = np.asarray(stream[:n], dtype=float)
    mags = np.abs(np.fft.rfft(seg * np.hanning(n)))
    if len(mags) < 4:
        raise ConfigError("capture too short for frequency detection")
    k = 1 + int(np.argmax(mags[1:-1]))
    lo, mid, hi = (math.log(mags[k - 1] + 1e-300), math.log(mags[k] + 1e-300),
                   math.log(mags[k + 1] + 1e-300))
    denom = lo - 2.0 * mid + hi
    frac = 0.5 * (lo - hi) / denom if denom != 0.0 else 0.0
    coarse = (k + frac) / n
    if not 0.0 < coarse < 0.5:
        raise DegenerateFitError(f"detected peak at {coarse}, outside (0, 0.5)")

    M = config.n_channels
    alias_coarse = (coarse * M) % 1.0
    reflected = alias_coarse > 0.5
    guess_sub = 1.0 - alias_coarse if reflected else alias_coarse
    guess_sub = min(max(guess_sub, 1e-6), 0.5 - 1e-6)
    ch0 = dequantize_stream(capture.per_channel[0], config)
    fit = sine_fit_four_param(ch0, guess_sub)
    alias_fine = 1.0 - fit.freq_rel if reflected else fit.freq_rel
    band = round(coarse * M - alias_fine)
    freq = (band + alias_fine) / M
    if not 0.0 < freq < 0.5:
        raise DegenerateFitError(f"reconstructed frequency {freq} out of band")
    return freq


def estimate_from_capture(capture: ChannelCapture, tone_freq_rel: float = None,
                          block_samples: int = 4096) -> MismatchEstimate:
    """Estimate all mismatches from one capture.

    Uses the first block_samples of each channel (or the whole channel if
    shorter). When tone_freq_rel is omitted it is detected from the data.
    """
    config = capture.config
    if tone_freq_rel is None:
        tone_freq_rel = detect_tone_freq(capture)
    f_sub, _ = alias_to_subrate(tone_freq_rel, config.n_channels)
    f_sub = min(max(f_sub, 1e-6), 0.5 - 1e-6)
    fits = []
    for codes in capture.per_channel:
        values = dequantize_stream(codes[:block_samples], config)
        fits.append(sine_fit_four_param(values, f_sub))
    return derive_mismatches(fits, config, tone_freq_rel)
