"""Integer convolution engine: serial reference, polyphase parallel form,
and block streaming with carried history.

The calibration filters run one FIR per sub-channel. To raise throughput,
a sub-channel stream can itself be split into L interleaved lanes
(samples at indices j mod L), each lane convolved independently, and the
lane outputs merged back. The merge is bit-exact with the serial integer
convolution for every L, which is what makes the decomposition safe to use
under fixed-point rules.

All convolutions here are exact int64 multiply-accumulate; a range guard
rejects inputs that could wrap 64-bit accumulation.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

# max |code| * sum|taps| must stay below this for exact int64 accumulation
_ACC_LIMIT = 1 << 62


def _as_int64(arr, what: str) -> np.ndarray:
    out = np.asarray(arr)
    if out.dtype.kind not in "iu":
        raise ConfigError(f"{what} must be integers, got dtype {out.dtype}")
    return out.astype(np.int64)


def _guard_accumulator(codes: np.ndarray, taps: np.ndarray) -> None:
    if len(codes) == 0 or len(taps) == 0:
        return
    peak = int(np.max(np.abs(codes))) * int(np.sum(np.abs(taps)))
    if peak >= _ACC_LIMIT:
        raise NumericError(
            f"worst-case accumulator {peak} would overflow 64-bit integers")


def convolve_serial(codes, taps_fx) -> np.ndarray:
    """Causal FIR with zero initial history: y[k] = sum_i h[i]*x[k-i].

    Output length equals input length. This is the reference rule every
    other execution path (polyphase, blockwise) must match bit for bit.
    """
    codes = _as_int64(codes, "codes")
    taps = _as_int64(taps_fx, "taps")
    _guard_accumulator(codes, taps)
    if len(codes) == 0:
        return codes
    return np.convolve(codes, taps)[: len(codes)]


@dataclass(frozen=True)
class PolyphasePlan:
    """How to parallelize: lane count L, block size, and carried history."""

    lanes: int
    block_len: int = 4096
    overlap: int = 0

    def __post_init__(self):
        if self.lanes < 1:
            raise ConfigError(f"lanes must be >= 1, got {self.lanes}")
        if self.overlap < 0:
            raise ConfigError(f"overlap must be >= 0, got {self.overlap}")
        if self.block_len <= self.overlap:
            raise ConfigError(
                f"block_len {self.block_len} must exceed overlap {self.overlap}")

    @classmethod
    def for_filter(cls, lanes: int, n_taps: int,
                   block_len: int = 4096) -> "PolyphasePlan":
        """Plan carrying the N-1 samples of history a length-N FIR needs."""
        return cls(lanes=lanes, block_len=block_len, overlap=n_taps - 1)


def decompose(stream, lanes: int) -> list:
    """Split into L lanes: lane j holds samples at indices j mod L."""
    if lanes < 1:
        raise ConfigError(f"lanes must be >= 1, got {lanes}")
    stream = np.asarray(stream)
    return [stream[j::lanes] for j in range(lanes)]


def _expected_lengths(total: int, lanes: int) -> list:
    return [-(-(total - j) // lanes) for j in range(lanes)]


def recompose(substreams) -> np.ndarray:
    """Exact inverse of decompose."""
    subs = [np.asarray(s) for s in substreams]
    lanes = len(subs)
    if lanes == 0:
        raise ShapeError("no substreams to recompose")
    total = sum(len(s) for s in subs)
    lens = [len(s) for s in subs]
    if lens != _expected_lengths(total, lanes):
        raise ShapeError(
            f"lane lengths {lens} not a mod-{lanes} split of {total} samples")
    out = np.empty(total, dtype=np.result_type(*subs) if total else np.int64)
    for j, s in enumerate(subs):
        out[j::lanes] = s
    return out


def parallel_convolve(substreams, taps_fx, plan: PolyphasePlan) -> list:
    """Convolve decomposed lanes so recompose(output) matches the serial rule.

    Output lane r collects y[qL+r] = sum_u (h_u * x_u)[q] where h_u is the
    u-th phase of the taps (h_u[p] = h[pL+u]) and x_u is lane (r-u) mod L,
    delayed one sample when u > r (that lane's contributing samples then
    come from the previous aggregate index block). Lanes are independent and
    are evaluated concurrently.
    """
    subs = [_as_int64(s, "substream") for s in substreams]
    lanes = len(subs)
    if lanes != plan.lanes:
        raise ConfigError(f"{lanes} substreams but plan.lanes={plan.lanes}")
    total = sum(len(s) for s in subs)
    if [len(s) for s in subs] != _expected_lengths(total, lanes):
        raise ShapeError(f"inconsistent lane lengths {[len(s) for s in subs]}")
    taps = _as_int64(taps_fx, "taps")
    if total:
        _guard_accumulator(np.concatenate(subs), taps)
    phases = [taps[u::lanes] for u in range(lanes)]

    def one_lane(r: int) -> np.ndarray:
        out_len = len(subs[r])
        acc = np.zeros(out_len, dtype=np.int64)
        if out_len == 0:
            return acc
        for u in range(lanes):
            h_u = phases[u]
            if len(h_u) == 0:
                continue
            x = subs[(r - u) % lanes]
            if u > r:
                x = np.concatenate((np.zeros(1, dtype=np.int64), x))
            if len(x) == 0:
                continue
            full = np.convolve(x, h_u)
            take = min(out_len, len(full))
            acc[:take] += full[:take]
        return acc

    if lanes == 1:
        return [one_lane(0)]
    with ThreadPoolExecutor(max_workers=lanes) as pool:
        return list(pool.map(one_lane, range(lanes)))


def parallel_convolve_stream(codes, taps_fx, plan: PolyphasePlan) -> np.ndarray:
    """One-call parallel path: decompose, convolve lanes, recompose."""
    return recompose(parallel_convolve(decompose(codes, plan.lanes),
                                       taps_fx, plan))


class BlockConvolver:
    """Streaming convolution that carries N-1 history samples across blocks.

    Feeding blocks b0, b1, ... produces exactly convolve_serial(b0+b1+...)
    split at the same boundaries, even if the taps change between blocks
    (new taps apply from the first sample of the new block, history samples
    are raw input, so a tap swap never reaches back into old output).
    """

    def __init__(self, n_taps: int):
        if n_taps < 1:
            raise ConfigError(f"n_taps must be >= 1, got {n_taps}")
        self._history = np.zeros(n_taps - 1, dtype=np.int64)

    def process(self, codes, taps_fx) -> np.ndarray:
        codes = _as_int64(codes, "codes")
        taps = _as_int64(taps_fx, "taps")
        if len(codes) == 0:
            return codes
        if len(taps) != len(self._history) + 1:
            raise ConfigError(
                f"taps length {len(taps)} does not match convolver history "
                f"({len(self._history) + 1} expected)")
        ext = np.concatenate((self._history, codes))
        _guard_accumulator(ext, taps)
        hist = len(self._history)
        out = np.convolve(ext, taps)[hist: hist + len(codes)]
        if hist:
            self._history = ext[len(ext) - hist:].copy()
        return out
