"""Command-line harness.

Subcommands:
    simulate   scenario -> capture file (+ resolved scenario sidecar)
    estimate   capture  -> per-channel mismatch table
    calibrate  capture  -> before/after SINAD (+ calibrated CSV)
    sweep      scenario -> one CSV row per sweep value
    spectrum   capture  -> spectrum CSV / summary

Exit codes: 0 success, 2 configuration/usage error, 3 data-format error,
4 numeric failure.
"""

import argparse
import csv
import os
import sys

from .capture_io import read_capture, write_capture
from .errors import ConfigError, DataFormatError, NumericError, TiadcError
from .experiments import run_scenario, run_sweep, simulate_scenario
from .filterbank import FilterBank, FilterSpec, calibrate_capture
from .metrics import spectrum_report, worst_image_spur, write_spectrum_csv
from .model import MismatchProfile, dequantize_stream
from .polyphase import PolyphasePlan, parallel_convolve_stream
from .scenarios import (SWEEP_AXES, load_scenario, parse_value_list,
                        scenario_to_text, with_seed)
from .sinefit import detect_tone_freq, estimate_from_capture


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiadc-cal",
        description="Simulate, estimate, and calibrate channel mismatches of "
                    "a time-interleaved ADC.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_filter_flags(p):
        p.add_argument("--taps", type=int, help="FIR tap count N")
        p.add_argument("--coeff-bits", type=int,
                       help="coefficient word length W (Q2.(W-2))")
        p.add_argument("--variant", choices=["sub", "div"],
                       help="center-tap gain rule: 1-dg or 1/(1+dg)")
        p.add_argument("--parallel", type=int, metavar="L",
                       help="polyphase lanes per channel")

    sim = sub.add_parser("simulate", help="synthesize a capture file")
    sim.add_argument("--config", required=True,
                     help="builtin scenario name or config file path")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--out", default=".", help="output directory")

    est = sub.add_parser("estimate", help="estimate mismatches from a capture")
    est.add_argument("capture", help="capture file path")
    est.add_argument("--freq", type=float,
                     help="tone frequency relative to fs; detected if omitted")
    est.add_argument("--out", help="output directory for the estimate CSV")

    cal = sub.add_parser("calibrate", help="calibrate a capture file")
    cal.add_argument("capture", help="capture file path")
    cal.add_argument("--config",
                     help="scenario supplying the truth-mode profile; "
                          "defaults to the capture's .cfg sidecar")
    cal.add_argument("--mode", choices=["truth", "est"], default="truth",
                     help="coefficient source: injected profile or estimate")
    cal.add_argument("--freq", type=float,
                     help="tone frequency relative to fs (est mode)")
    add_filter_flags(cal)
    cal.add_argument("--out", help="output directory for CSVs")

    sw = sub.add_parser("sweep", help="run a parameter sweep")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", choices=SWEEP_AXES,
                    help="sweep axis; defaults to the scenario's")
    sw.add_argument("--values",
                    help="comma list or inclusive a:b integer range")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--mode", choices=["truth", "est"])
    add_filter_flags(sw)
    sw.add_argument("--out", default=".")

    spec = sub.add_parser("spectrum", help="spectrum and SINAD of a capture")
    spec.add_argument("capture")
    spec.add_argument("--n-fft", type=int, default=4096)
    spec.add_argument("--freq", type=float,
                      help="signal frequency relative to fs; detected if omitted")
    spec.add_argument("--window", choices=["rect", "bh4"], default="rect")
    spec.add_argument("--out", help="output directory for the spectrum CSV")
    return parser


def _apply_overrides(scenario, args):
    from dataclasses import replace
    if getattr(args, "seed", None) is not None:
        scenario = with_seed(scenario, args.seed)
    fs = scenario.filter_spec
    if getattr(args, "taps", None) is not None:
        fs = replace(fs, n_taps=args.taps)
    if getattr(args, "coeff_bits", None) is not None:
        fs = replace(fs, coeff_bits=args.coeff_bits)
    if getattr(args, "variant", None) is not None:
        fs = replace(fs, variant=args.variant)
    if fs is not scenario.filter_spec:
        scenario = replace(scenario, filter_spec=fs)
    if getattr(args, "parallel", None) is not None:
        scenario = replace(scenario, plan=PolyphasePlan.for_filter(
            args.parallel, scenario.filter_spec.n_taps,
            block_len=scenario.plan.block_len))
    if getattr(args, "mode", None) not in (None, scenario.mode) \
            and getattr(args, "mode", None) is not None:
        scenario = replace(scenario, mode=args.mode)
    return scenario


def _sidecar_path(capture_path: str) -> str:
    stem, _ = os.path.splitext(capture_path)
    return stem + ".cfg"


def _cmd_simulate(args) -> int:
    scenario = _apply_overrides(load_scenario(args.config), args)
    capture = simulate_scenario(scenario)
    os.makedirs(args.out, exist_ok=True)
    capture_path = os.path.join(args.out, f"{scenario.name}_capture.bin")
    write_capture(capture, capture_path)
    with open(_sidecar_path(capture_path), "w") as fh:
        fh.write(scenario_to_text(scenario))
    print(f"wrote {capture_path} ({len(capture.interleaved)} samples, "
          f"{scenario.config.n_channels} channels, {scenario.config.bits} bits)")
    print(f"tone freq_rel = {scenario.tone.freq_rel:.10g}, "
          f"sidecar = {_sidecar_path(capture_path)}")
    return 0


def _cmd_estimate(args) -> int:
    capture = read_capture(args.capture)
    estimate = estimate_from_capture(capture, args.freq)
    print(f"{'channel':>7} {'offset':>12} {'gain':>12} {'skew (Ts)':>12}")
    for m in range(capture.config.n_channels):
        print(f"{m:7d} {estimate.offsets[m]:12.6e} {estimate.gains[m]:12.6e} "
              f"{estimate.skews[m]:12.6e}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.capture))[0]
        path = os.path.join(args.out, stem + "_estimate.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["channel", "offset", "gain", "skew_ts"])
            for m in range(capture.config.n_channels):
                writer.writerow([m, f"{estimate.offsets[m]:.12g}",
                                 f"{estimate.gains[m]:.12g}",
                                 f"{estimate.skews[m]:.12g}"])
        print(f"estimate written to {path}")
    return 0


def _load_calibrate_scenario(args):
    source = args.config
    if source is None:
        sidecar = _sidecar_path(args.capture)
        if not os.path.exists(sidecar):
            raise ConfigError(
                f"no --config given and no sidecar at {sidecar}; "
                "supply --config or use --mode est")
        source = sidecar
    return _apply_overrides(load_scenario(source), args)


def _cmd_calibrate(args) -> int:
    capture = read_capture(args.capture)
    config = capture.config
    n_fft = 4096
    if args.mode == "truth":
        scenario = _load_calibrate_scenario(args)
        if scenario.config.n_channels != config.n_channels:
            raise ConfigError(
                f"scenario has {scenario.config.n_channels} channels, "
                f"capture has {config.n_channels}")
        profile = scenario.profile
        spec = scenario.filter_spec
        lanes = scenario.plan.lanes
        freq = args.freq if args.freq is not None else scenario.tone.freq_rel
        n_fft = scenario.n_fft
    else:
        spec = FilterSpec(n_taps=args.taps or 30,
                          coeff_bits=args.coeff_bits or 30,
                          variant=args.variant or "sub")
        lanes = args.parallel or 4
        freq = args.freq if args.freq is not None else detect_tone_freq(capture)
        estimate = estimate_from_capture(capture, freq)
        profile = MismatchProfile(offsets=estimate.offsets,
                                  gains=estimate.gains, skews=estimate.skews)
    bank = FilterBank.design(profile, config.n_channels, spec)
    engine = None
    if lanes > 1:
        plan = PolyphasePlan.for_filter(lanes, spec.n_taps)
        engine = lambda codes, taps_fx: parallel_convolve_stream(codes, taps_fx, plan)
    cal = calibrate_capture(capture, bank, engine=engine)
    uncal = dequantize_stream(capture.interleaved, config)
    rep_u = spectrum_report(uncal, freq, n_fft, config.n_channels,
                            config.full_scale)
    rep_c = spectrum_report(cal, freq, n_fft, config.n_channels,
                            config.full_scale)
    print(f"tone freq_rel = {freq:.10g} ({args.mode} coefficients, "
          f"N={spec.n_taps}, W={spec.coeff_bits})")
    print(f"SINAD uncalibrated = {rep_u.sinad_db:.2f} dB (ENOB {rep_u.enob:.2f})")
    print(f"SINAD calibrated   = {rep_c.sinad_db:.2f} dB (ENOB {rep_c.enob:.2f})")
    worst = worst_image_spur(rep_u.spurs)
    cal_levels = {(s.kind, s.bin_index): s.level_dbfs for s in rep_c.spurs}
    after = cal_levels[("image", worst.bin_index)]
    print(f"largest image spur at {worst.freq_rel:.6g} fs: "
          f"{worst.level_dbfs:.1f} -> {after:.1f} dBFS "
          f"({worst.level_dbfs - after:.1f} dB reduction)")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.capture))[0]
        cal_path = os.path.join(args.out, stem + "_calibrated.csv")
        with open(cal_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(cal):
                writer.writerow([i, f"{v:.12g}"])
        write_spectrum_csv(os.path.join(args.out, stem + "_spectrum_cal.csv"),
                           rep_c.magnitudes_dbfs)
        write_spectrum_csv(os.path.join(args.out, stem + "_spectrum_uncal.csv"),
                           rep_u.magnitudes_dbfs)
        print(f"calibrated samples written to {cal_path}")
    return 0


def _cmd_sweep(args) -> int:
    scenario = _apply_overrides(load_scenario(args.config), args)
    axis = args.axis if args.axis is not None else scenario.sweep_axis
    if axis is None:
        raise ConfigError("no sweep axis: pass --axis or use a sweep scenario")
    if args.values is not None:
        values = parse_value_list(args.values,
                                  integer=axis in ("coeff_bits", "n_taps"))
    else:
        values = scenario.sweep_values
    rows = run_sweep(scenario, axis, values, out_dir=args.out)
    print(f"{axis:>12} {'SINAD uncal':>12} {'SINAD cal':>12} "
          f"{'image uncal':>12} {'image cal':>12}")
    for row in rows:
        print(f"{row.value:12.6g} {row.sinad_uncal_db:12.2f} "
              f"{row.sinad_cal_db:12.2f} {row.worst_image_uncal_dbfs:12.1f} "
              f"{row.worst_image_cal_dbfs:12.1f}")
    if args.out:
        print(f"sweep CSV written to "
              f"{os.path.join(args.out, f'{scenario.name}_sweep_{axis}.csv')}")
    return 0


def _cmd_spectrum(args) -> int:
    capture = read_capture(args.capture)
    config = capture.config
    stream = dequantize_stream(capture.interleaved, config)
    freq = args.freq if args.freq is not None else detect_tone_freq(capture)
    report = spectrum_report(stream, freq, args.n_fft, config.n_channels,
                             config.full_scale, window=args.window)
    print(f"signal bin {report.signal_bin} of {args.n_fft} "
          f"(freq_rel {freq:.10g})")
    print(f"SINAD = {report.sinad_db:.2f} dB, ENOB = {report.enob:.2f}")
    for spur in report.spurs:
        note = " (collides with signal)" if spur.collides_with_signal else ""
        print(f"  {spur.kind:>6} spur at {spur.freq_rel:.6g} fs: "
              f"{spur.level_dbfs:.1f} dBFS{note}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        stem = os.path.splitext(os.path.basename(args.capture))[0]
        path = os.path.join(args.out, stem + "_spectrum.csv")
        write_spectrum_csv(path, report.magnitudes_dbfs)
        print(f"spectrum written to {path}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "calibrate": _cmd_calibrate,
    "sweep": _cmd_sweep,
    "spectrum": _cmd_spectrum,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except TiadcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
