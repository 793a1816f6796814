"""Command-line entry points for the four workflows plus self-verification.

Subcommands: optimize-beam, gen-lut, simulate-pass, campaign, verify.
Every output file embeds the config hash and seed in a header comment so
results are traceable to their inputs; identical (config, seed) pairs
produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import atmosphere as _atm
from . import extraction as _ex
from . import fidelity as _fid
from . import optics as _opt
from .campaign import LinkModel, run_campaign
from .config import ScenarioConfig, load_config
from .errors import SatQkdError
from .source import SourceParams, optimize_lambda

_R = lambda x: repr(float(x))


def _parse_z_km(text: str) -> float:
    t = text.strip().lower()
    if t.endswith("km"):
        t = t[:-2]
    return float(t)


def _header(cfg: ScenarioConfig | None, seed) -> str:
    h = cfg.config_hash() if cfg is not None else "none"
    return f"# satqkd {__version__} config_hash: {h} seed: {seed}\n"


def _write_two_column(path, cfg, seed, comment, rows):
    with open(path, "w") as fh:
        fh.write(_header(cfg, seed))
        fh.write(f"# {comment}\n")
        for x, y in rows:
            fh.write(f"{_R(x)} {_R(y)}\n")


# -- optimize-beam ---------------------------------------------------------

def _cmd_optimize_beam(args) -> int:
    cfg = load_config(args.config)
    tx = cfg.transmitter
    station = cfg.link_stations()[0]
    z_m = _parse_z_km(args.z) * 1e3
    grid = args.grid or cfg.beam.grid_size
    bounds = cfg.beam.waist_bounds_m

    w0_opt, eta_opt = _opt.optimize_beamwaist(
        tx.aperture_radius_m, station.aperture_radius_m, z_m,
        tx.pointing_jitter_rad, tx.wavelength_m,
        search_bounds=bounds, grid_size=grid,
        oversampling=cfg.beam.oversampling)
    w0s = np.geomspace(bounds[0], bounds[1], args.points)
    etas = _opt.waist_scan(
        tx.aperture_radius_m, station.aperture_radius_m, z_m,
        tx.pointing_jitter_rad, tx.wavelength_m, w0s,
        grid_size=grid, oversampling=cfg.beam.oversampling)

    out = Path(args.out)
    with open(out, "w") as fh:
        fh.write(_header(cfg, cfg.seed))
        fh.write(f"# eta_bar(w0) at z = {z_m / 1e3:g} km; columns: w0_m eta_bar\n")
        fh.write(f"# maximum: w0 = {_R(w0_opt)} eta_bar = {_R(eta_opt)}\n")
        for w, e in zip(w0s, etas):
            mark = "  # max" if abs(w - w0_opt) == min(abs(w0s - w0_opt)) else ""
            fh.write(f"{_R(w)} {_R(e)}{mark}\n")
    if args.pdf_out:
        ch = _opt.BeamChannel(w0=w0_opt, a=tx.aperture_radius_m,
                              b=station.aperture_radius_m, z=z_m,
                              wavelength=tx.wavelength_m,
                              sigma_pj=tx.pointing_jitter_rad)
        fmap = _opt.propagate_truncated_gaussian(ch, grid, cfg.beam.oversampling)
        gmap = _opt.capture_probability_map(fmap, ch.b)
        pdf = _opt.capture_pdf(gmap, ch, args.pdf_bins)
        _write_two_column(args.pdf_out, cfg, cfg.seed,
                          "capture-probability density; columns: eta density",
                          zip(pdf.centers, pdf.densities))
    print(f"optimize-beam: w0* = {w0_opt:.6g} m, eta_bar* = {eta_opt:.6g} -> {out}")
    return 0


# -- gen-lut ---------------------------------------------------------------

def _cmd_gen_lut(args) -> int:
    blocks = ([int(float(b)) for b in args.blocks.split(",")]
              if args.blocks else _ex.DEFAULT_BLOCK_LENGTHS)
    qbers = ([float(q) for q in args.qbers.split(",")]
             if args.qbers else _ex.DEFAULT_QBER_GRID)
    lut = _ex.generate_lut(block_lengths=blocks, qber_grid=qbers,
                           trials=args.trials, seed=args.seed)
    out = Path(args.out)
    if out.suffix == ".json":
        lut.to_json(out)
    else:
        lut.to_csv(out)
    if args.json_out:
        lut.to_json(args.json_out)
    print(f"gen-lut: {lut.eta.shape[0]}x{lut.eta.shape[1]} cells, "
          f"{args.trials} trials/cell -> {out}")
    return 0


# -- simulate-pass ---------------------------------------------------------

def _pass_rows(record):
    w = record.window
    for i in range(w.t.size):
        yield (w.t[i], w.slant_a_km[i], w.slant_b_km[i], w.zenith_a_deg[i],
               w.zenith_b_deg[i], record.p_ta[i], record.p_tb[i],
               record.fidelity[i], record.qber[i], record.skr[i])


def _write_samples_csv(path, cfg, seed, records):
    cols = ("pass_index,t_offset_s,slant_a_km,slant_b_km,zenith_a_deg,"
            "zenith_b_deg,p_ta,p_tb,fidelity,qber,skr_bits_s")
    with open(path, "w") as fh:
        fh.write(_header(cfg, seed))
        fh.write(cols + "\n")
        for rec in records:
            for row in _pass_rows(rec):
                fh.write(",".join([str(rec.index)] + [_R(v) for v in row]) + "\n")


def _cmd_simulate_pass(args) -> int:
    cfg = load_config(args.config)
    sa, sb = cfg.link_stations()
    from .orbit import pass_windows

    span = (0.0, cfg.campaign.span_days * 86400.0)
    windows = pass_windows(cfg.orbit, sa, sb, span, cfg.campaign.max_zenith_deg,
                           step_s=cfg.campaign.sample_step_s,
                           coarse_step_s=cfg.campaign.coarse_step_s)
    if not windows:
        print("simulate-pass: no joint visibility window in the span",
              file=sys.stderr)
        return 1
    if not (0 <= args.index < len(windows)):
        print(f"simulate-pass: pass index {args.index} out of range "
              f"(found {len(windows)} windows)", file=sys.stderr)
        return 1
    model = LinkModel(cfg, sa, sb)
    record = model.simulate_pass(windows[args.index], index=args.index)

    outdir = Path(args.out_dir or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_samples_csv(outdir / "pass_samples.csv", cfg, cfg.seed, [record])
    summary = {
        "config_hash": cfg.config_hash(), "seed": cfg.seed,
        "link": [sa.name, sb.name], "pass_index": record.index,
        "start": record.window.start.isoformat(),
        "end": record.window.end.isoformat(),
        "duration_s": record.window.duration_s,
        "lambda_sq": record.lambda_sq,
        "sifted_bits": record.sifted_bits, "key_bits": record.key_bits,
        "successful": record.successful,
    }
    (outdir / "pass_summary.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True) + "\n")

    if cfg.source.lambda_mode == "optimized" and record.successful:
        ref = int(np.argmax(record.p_ta * record.p_tb))
        budget = _fid.ChannelBudget(float(record.p_ta[ref]),
                                    float(record.p_tb[ref]), model.p_dark)
        lams = np.geomspace(*cfg.source.lambda_bounds, 64)
        trace = []
        for lam in lams:
            params = SourceParams.from_pair_rate(cfg.source.pair_rate_hz, lam,
                                                 model.p_dark)
            bd = _fid.breakdown(params, budget)
            skr = (_ex.r_final(params.pulse_rate, bd)
                   * model.extraction.efficiency(bd.qber, block_length=None))
            trace.append((lam, skr))
        _write_two_column(outdir / "lambda_trace.txt", cfg, cfg.seed,
                          "SKR vs lambda at the best pass sample; "
                          "columns: lambda skr_bits_s", trace)
    print(f"simulate-pass: pass {record.index} key_bits = {record.key_bits:.6g} "
          f"-> {outdir}")
    return 0


# -- campaign --------------------------------------------------------------

def _write_passes_csv(path, cfg, seed, records):
    cols = ("pass_index,start_utc,end_utc,duration_s,weather_blocked,"
            "weather_tau,lambda_sq,sifted_bits,key_bits,successful")
    with open(path, "w") as fh:
        fh.write(_header(cfg, seed))
        fh.write(cols + "\n")
        for r in records:
            fh.write(",".join([
                str(r.index), r.window.start.isoformat(), r.window.end.isoformat(),
                _R(r.window.duration_s), str(int(r.weather.blocked)),
                _R(r.weather.tau) if math.isfinite(r.weather.tau) else "inf",
                _R(r.lambda_sq) if math.isfinite(r.lambda_sq) else "nan",
                _R(r.sifted_bits), _R(r.key_bits), str(int(r.successful)),
            ]) + "\n")


def _cmd_campaign(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    span = (0.0, cfg.campaign.span_days * 86400.0)
    summary, records = run_campaign(cfg.campaign.link, span, cfg, seed)

    outdir = Path(args.out_dir or cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_passes_csv(outdir / "passes.csv", cfg, seed, records)
    payload = {
        "config_hash": cfg.config_hash(), "seed": seed,
        "link": list(summary.link), "n_passes": summary.n_passes,
        "n_successful": summary.n_successful,
        "success_fraction": summary.success_fraction,
        "mean_key_bits_per_pass": summary.mean_key_bits_per_pass,
        "total_key_bits": summary.total_key_bits,
        "span_seconds": summary.span_seconds,
        "key_size_bits": summary.key_size_bits,
        "keys_per_second": summary.keys_per_second,
        "verdicts": summary.verdicts,
    }
    (outdir / "summary.json").write_text(
        json.dumps(payload, indent=1, sort_keys=True) + "\n")
    _write_two_column(outdir / "key_bits_per_pass.txt", cfg, seed,
                      "key material per pass; columns: day_offset key_bits",
                      [((r.window.start_offset_s) / 86400.0, r.key_bits)
                       for r in records])
    if args.samples:
        _write_samples_csv(outdir / "samples.csv", cfg, seed, records)
    print(f"campaign: {summary.n_passes} passes, "
          f"{summary.keys_per_second:.6g} keys/s -> {outdir}")
    return 0


# -- verify ----------------------------------------------------------------

def _cmd_verify(args) -> int:
    checks = []

    # Jitter quadrature against its Monte-Carlo oracle.
    ch = _opt.BeamChannel(w0=0.11, a=0.15, b=0.60, z=1.0e6,
                          wavelength=810e-9, sigma_pj=0.47e-6)
    fmap = _opt.propagate_truncated_gaussian(ch, 1024)
    gmap = _opt.capture_probability_map(fmap, ch.b)
    eta = _opt.jitter_averaged_capture(gmap, ch)
    mc = _opt.monte_carlo_capture(gmap, ch, 100_000, seed=20240601)
    rel = abs(eta - mc) / mc
    checks.append(("jitter-monte-carlo", rel <= 0.01,
                   f"eta_bar={eta:.6g} mc={mc:.6g} rel={rel:.2e} (tol 1e-2)"))

    # Analytic coefficients against the Fock-space simulator.
    params = SourceParams.from_pair_rate(5.9e6, 0.01, 1e-5)
    budget = _fid.ChannelBudget(0.4, 0.4, 1e-5)
    bd = _fid.breakdown(params, budget)
    sim = _fid.simulate_measurement_fock(params, budget, trials=200_000,
                                         seed=20240602)
    ok_f = abs(sim.fidelity - bd.fidelity) <= 3 * sim.fidelity_se
    ok_a = abs(sim.accept_prob - bd.accept_prob) <= 3 * sim.accept_se
    checks.append(("fock-fidelity", ok_f and ok_a,
                   f"F={bd.fidelity:.5f} F_mc={sim.fidelity:.5f}"
                   f"+/-{sim.fidelity_se:.5f}, accept={bd.accept_prob:.3e} "
                   f"mc={sim.accept_prob:.3e}+/-{sim.accept_se:.1e}"))

    # Cascade leakage against the Shannon bound.
    rng = np.random.default_rng(20240603)
    h = _ex.binary_entropy(0.05)
    worst = math.inf
    residual = 0
    for r in range(5):
        alice = rng.integers(0, 2, 20_000, dtype=np.uint8)
        bob = alice ^ (rng.random(20_000) < 0.05).astype(np.uint8)
        corr, leaked = _ex.cascade_reconcile(alice, bob, 0.05, seed=r)
        worst = min(worst, leaked / 20_000.0)
        residual += int((corr != alice).sum())
    checks.append(("cascade-shannon", worst >= h and residual == 0,
                   f"min leak/bit={worst:.4f} >= H(0.05)={h:.4f}, "
                   f"residual={residual}"))

    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += 0 if ok else 1
    if args.report:
        Path(args.report).write_text(json.dumps(
            {n: {"passed": bool(ok), "detail": d} for n, ok, d in checks},
            indent=1, sort_keys=True) + "\n")
    return 1 if failed else 0


# -- parser ----------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="satqkd",
        description="Entanglement-based satellite QKD link simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ob = sub.add_parser("optimize-beam", help="beam-waist optimization curve")
    ob.add_argument("--config", default="default")
    ob.add_argument("--z", required=True, help="link distance in km (e.g. 1000km)")
    ob.add_argument("--grid", type=int, default=None)
    ob.add_argument("--points", type=int, default=48)
    ob.add_argument("--out", default="beam_curve.txt")
    ob.add_argument("--pdf-out", default=None,
                    help="also emit the capture-probability density at w0*")
    ob.add_argument("--pdf-bins", type=int, default=400)
    ob.set_defaults(func=_cmd_optimize_beam)

    gl = sub.add_parser("gen-lut", help="generate the key-extraction table")
    gl.add_argument("--trials", type=int, default=50)
    gl.add_argument("--seed", type=int, default=0)
    gl.add_argument("--blocks", default=None, help="comma-separated block lengths")
    gl.add_argument("--qbers", default=None, help="comma-separated QBER values")
    gl.add_argument("--out", default="lut.csv")
    gl.add_argument("--json-out", default=None)
    gl.set_defaults(func=_cmd_gen_lut)

    sp = sub.add_parser("simulate-pass", help="simulate one satellite pass")
    sp.add_argument("--config", default="default")
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--out-dir", default=None)
    sp.set_defaults(func=_cmd_simulate_pass)

    ca = sub.add_parser("campaign", help="run a monthly campaign")
    ca.add_argument("--config", default="default")
    ca.add_argument("--seed", type=int, default=None)
    ca.add_argument("--out-dir", default=None)
    ca.add_argument("--samples", action="store_true",
                    help="also write the per-sample CSV")
    ca.set_defaults(func=_cmd_campaign)

    ve = sub.add_parser("verify", help="run the built-in oracle suite")
    ve.add_argument("--report", default=None, help="write a JSON report")
    ve.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SatQkdError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
