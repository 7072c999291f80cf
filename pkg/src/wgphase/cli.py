"""Command-line front end.

Subcommands: ``simulate`` (spectra and fringe traces), ``extract`` (fringe
pair to phasors), ``pathlength`` (FFT imbalance estimate), ``fit``
(two-dipole spectral fit), ``fit-saturation`` (power series fit) and
``predict-chiral`` (thresholds and phase curves for directional coupling).

Every run writes its resolved config and a hashed manifest into the output
directory; identical config and seed reproduce byte-identical products.
Exit codes: 0 success, 2 bad input, 3 fit non-convergence, 4 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import traceback

import numpy as np

from . import emitter, spectra
from .bloch import BlochConvergenceError
from .config import ConfigError, RunConfig, load_config
from .extraction import NoFringeError, estimate_path_length_fft, extract_phasor_series
from .interferometer import apply_shot_noise, fringe_trace
from .io import (ResultBundle, TraceParseError, fit_result_json, parse_phasors_csv,
                 parse_trace_csv, phasor_file_meta)
from .lm import FitResult
from .units import detuning_angular

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NO_CONVERGENCE = 3
EXIT_INTERNAL = 4


class FitNonConvergence(RuntimeError):
    pass


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.noise.seed = args.seed
    return cfg


def _spectrum_table(bundle: ResultBundle, cfg: RunConfig, name: str):
    p = cfg.emitter.to_params()
    drv = cfg.drive
    freq = cfg.sweep.grid()
    t, i_t = emitter.transmission(p, detuning_angular(freq, p.f0),
                                  drv.omega_rad_ns, drv.linear_response)
    phase = np.angle(t)
    bundle.write_table(
        name,
        "freq_ghz,delta_rad_ns,phase_rad,phase_with_offset_rad,i_t,abs_t,re_t,im_t",
        [freq, detuning_angular(freq, p.f0), phase, phase + p.phi0, i_t,
         np.abs(t), t.real, t.imag])


def cmd_simulate(cfg: RunConfig, out_dir) -> ResultBundle:
    bundle = ResultBundle(out_dir)
    bundle.write_json("config.json", cfg.resolved())
    _spectrum_table(bundle, cfg, "model_spectrum.csv")

    p = cfg.emitter.to_params()
    icfg = cfg.interferometer.to_config()
    drive = None
    if not cfg.drive.linear_response or cfg.drive.omega_rad_ns > 0:
        drive = emitter.DriveState(delta=0.0, omega_r=cfg.drive.omega_rad_ns,
                                   linear_response=cfg.drive.linear_response)
    sweep = cfg.sweep.grid()
    for qd_on, name in ((True, "trace_on.csv"), (False, "trace_off.csv")):
        trace = fringe_trace(icfg, p, sweep, qd_on=qd_on, drive=drive)
        if cfg.noise.shot_noise:
            trace = apply_shot_noise(trace, cfg.noise.seed + (0 if qd_on else 1))
        bundle.write_trace(name, trace)
    bundle.finalize()
    return bundle


def cmd_extract(cfg: RunConfig, out_dir, on_file, off_file) -> ResultBundle:
    on = parse_trace_csv(on_file)
    off = parse_trace_csv(off_file)
    ext = cfg.extraction
    delta_l = ext.delta_l_m
    if delta_l is None:
        delta_l = estimate_path_length_fft(off)
    points = extract_phasor_series(
        on, off, window_periods=ext.window_periods, delta_l=delta_l,
        hop_periods=ext.hop_periods, poly_order=ext.poly_order,
        weight_beta=ext.weight_beta)
    bundle = ResultBundle(out_dir)
    bundle.write_json("config.json", cfg.resolved())
    drive = (on.meta or {}).get("drive") or {}
    bundle.write_phasors("phasors.csv", points,
                         meta={"delta_l_m": delta_l, "source_on": str(on_file),
                               "source_off": str(off_file),
                               "power": drive.get("power")})
    bundle.write_json("summary.json", {"delta_l_m": delta_l, "n_points": len(points),
                                       "n_low_contrast": sum(q.low_contrast for q in points)})
    bundle.finalize()
    return bundle


def cmd_pathlength(cfg: RunConfig, out_dir, trace_file) -> ResultBundle:
    trace = parse_trace_csv(trace_file)
    delta_l = estimate_path_length_fft(trace)
    bundle = ResultBundle(out_dir)
    bundle.write_json("config.json", cfg.resolved())
    bundle.write_json("summary.json", {"delta_l_m": delta_l, "source": str(trace_file)})
    bundle.finalize()
    return bundle


def _dataset_from_files(cfg: RunConfig, phasor_files):
    channels = []
    windows = cfg.fit.dipole_windows_ghz
    for i, path in enumerate(phasor_files, start=1):
        points = parse_phasors_csv(path)
        window = windows.get(str(i))
        ds = spectra.SpectrumDataset.from_phasors(
            points, dipole=i, intensity_from=cfg.fit.intensity_from,
            freq_window=tuple(window) if window else None)
        channels.extend(ds.channels)
    return spectra.SpectrumDataset(channels=channels)


def _check_converged(result: FitResult):
    if not result.converged:
        raise FitNonConvergence(result.message)


def _write_fit_outputs(bundle: ResultBundle, cfg: RunConfig, data, result: FitResult,
                       extra: dict | None = None):
    bundle.write_json("config.json", cfg.resolved())
    bundle.write_text("fit.json", fit_result_json(result, extra=extra))
    freqs, kinds, dipoles, values, models = [], [], [], [], []
    params = {}
    for d in data.dipoles():
        params[d] = emitter.EmitterParams.isotropic(
            gamma=result[f"gamma{d}"], beta=result[f"beta{d}"],
            gamma_dp=result["gamma_dp"], f0=result[f"f0{d}"], phi0=result["phi0"])
    dipoles = data.dipoles()
    for ch in data.channels:
        if cfg.fit.combine == "product" and len(dipoles) == 2:
            model = spectra.two_dipole_model(ch, params[dipoles[0]], params[dipoles[1]],
                                             combine="product")
        else:
            model = spectra.channel_model(ch, params[ch.dipole])
        freqs.extend(ch.freq)
        kinds.extend([{"phase": 0, "intensity": 1, "amplitude": 2}[ch.kind]] * ch.freq.size)
        dipoles.extend([ch.dipole] * ch.freq.size)
        values.extend(ch.values)
        models.extend(model)
    bundle.write_table("residuals.csv", "freq_ghz,channel,dipole,value,model",
                       [freqs, kinds, dipoles, values, models])


def cmd_fit(cfg: RunConfig, out_dir, phasor_files) -> ResultBundle:
    if not phasor_files:
        raise TraceParseError("no phasor datasets given")
    data = _dataset_from_files(cfg, phasor_files)
    result = spectra.fit_two_dipole_spectra(
        data, init=cfg.fit.init or None, bounds=cfg.fit.bounds or None,
        combine=cfg.fit.combine, max_iter=cfg.fit.max_iter)
    bundle = ResultBundle(out_dir)
    _write_fit_outputs(bundle, cfg, data, result)
    bundle.finalize()
    _check_converged(result)
    return bundle


def cmd_fit_saturation(cfg: RunConfig, out_dir, phasor_files) -> ResultBundle:
    if not phasor_files:
        raise TraceParseError("no phasor datasets given")
    datasets = []
    powers = list(cfg.fit.powers)
    for i, path in enumerate(phasor_files):
        points = parse_phasors_csv(path)
        power = powers[i] if i < len(powers) else phasor_file_meta(path).get("power")
        if power is None:
            raise TraceParseError(
                f"{path}: no power level in sidecar and none given in fit.powers")
        datasets.append(spectra.SpectrumDataset.from_phasors(
            points, dipole=1, power=float(power), intensity_from=cfg.fit.intensity_from))
    result = spectra.fit_saturation_series(
        datasets, init=cfg.fit.init or None, bounds=cfg.fit.bounds or None,
        max_iter=cfg.fit.max_iter)

    p_fit = emitter.EmitterParams.isotropic(
        gamma=result["gamma"], beta=max(result["beta"], 1e-6),
        gamma_dp=result["gamma_dp"], phi0=result["phi0"])
    n_c = emitter.critical_photon_flux(p_fit) if result["beta"] > 0 else None
    bundle = ResultBundle(out_dir)
    bundle.write_json("config.json", cfg.resolved())
    bundle.write_text("fit.json", fit_result_json(result, extra={"n_c": n_c}))
    if result["k"] > 0:
        pw = np.geomspace(min(ds.power for ds in datasets) / 3,
                          max(ds.power for ds in datasets) * 2, 25)
        phi = spectra.predict_phase_vs_power(p_fit, result["k"], pw)
        bundle.write_table("phase_vs_power.csv", "power,phi_max_rad", [pw, phi])
    bundle.finalize()
    _check_converged(result)
    return bundle


def cmd_predict_chiral(cfg: RunConfig, out_dir) -> ResultBundle:
    base = cfg.emitter.to_params()
    scan = cfg.chiral_scan
    bundle = ResultBundle(out_dir)
    bundle.write_json("config.json", cfg.resolved())

    ref = base.with_(coupling="chiral", beta=1.0) if not base.is_chiral else base
    thresholds = emitter.chiral_thresholds(ref)
    bundle.write_json("thresholds.json", {
        "omega_c_rad_ns": thresholds.omega_c,
        "gamma_dp_c_rad_ns": thresholds.gamma_dp_c,
        "beta_dir_c": thresholds.beta_dir_c,
    })

    omegas = np.linspace(0.0, scan.omega_max_rad_ns, scan.points)
    cols = [omegas]
    header = ["omega_rad_ns"]
    for bd in scan.beta_dirs:
        p = ref.with_(beta=float(bd), gamma_dp=0.0)
        cols.append(np.array([emitter.phase_extrema_numeric(p, omega_r=float(om)).phi
                              for om in omegas]))
        header.append(f"phi_max_bdir_{bd:g}")
    bundle.write_table("phase_vs_omega.csv", ",".join(header), cols)

    gdps = np.linspace(0.0, scan.gamma_dp_max_rad_ns, scan.points)
    cols = [gdps]
    header = ["gamma_dp_rad_ns"]
    for bd in scan.beta_dirs:
        vals = []
        for gdp in gdps:
            p = ref.with_(beta=float(bd), gamma_dp=float(gdp))
            vals.append(emitter.phase_extrema_numeric(p).phi)
        cols.append(np.array(vals))
        header.append(f"phi_max_bdir_{bd:g}")
    bundle.write_table("phase_vs_dephasing.csv", ",".join(header), cols)
    bundle.finalize()
    return bundle


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgphase",
        description="Forward and inverse modeling of single-emitter phase shifts "
                    "in photonic waveguides")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", default=os.environ.get("WGPHASE_OUT", "wgphase_out"),
                        help="output bundle directory (env: WGPHASE_OUT)")
    parser.add_argument("--seed", type=int, default=None, help="override noise seed")
    parser.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="accepted for interface compatibility; outputs are CSV "
                             "data plus JSON summaries either way")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="emit model spectra and an on/off fringe pair")
    p_ext = sub.add_parser("extract", help="extract phasors from an on/off trace pair")
    p_ext.add_argument("on_file")
    p_ext.add_argument("off_file")
    p_len = sub.add_parser("pathlength", help="FFT path-length estimate from a trace")
    p_len.add_argument("trace_file")
    p_fit = sub.add_parser("fit", help="joint spectral fit of phasor datasets")
    p_fit.add_argument("phasor_files", nargs="+")
    p_sat = sub.add_parser("fit-saturation", help="global fit across drive powers")
    p_sat.add_argument("phasor_files", nargs="+")
    sub.add_parser("predict-chiral", help="chiral thresholds and phase curves")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("WGPHASE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("wgphase")
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "simulate":
            cmd_simulate(cfg, args.out)
        elif args.command == "extract":
            cmd_extract(cfg, args.out, args.on_file, args.off_file)
        elif args.command == "pathlength":
            cmd_pathlength(cfg, args.out, args.trace_file)
        elif args.command == "fit":
            cmd_fit(cfg, args.out, args.phasor_files)
        elif args.command == "fit-saturation":
            cmd_fit_saturation(cfg, args.out, args.phasor_files)
        elif args.command == "predict-chiral":
            cmd_predict_chiral(cfg, args.out)
        else:  # pragma: no cover - argparse enforces the choices
            return EXIT_INTERNAL
    except (ConfigError, TraceParseError, NoFringeError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (FitNonConvergence, BlochConvergenceError) as exc:
        print(f"fit did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return EXIT_INTERNAL
    log.info("%s finished, bundle written to %s", args.command, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
