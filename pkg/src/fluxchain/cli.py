"""Command-line entry points.

    fluxchain solve    --config cfg.json [--out DIR]
    fluxchain evolve   --config cfg.json [--out DIR]
    fluxchain ensemble --config cfg.json [--out DIR] [--seed N] [--workers N] [--quick]
    fluxchain sweep    --config cfg.json [--out DIR]
    fluxchain analyze  --config cfg.json [--out DIR]

One config file = one experiment.  Exit codes: 0 success, 1 runtime failure,
2 config error.  Every output embeds the effective config hash and base seed;
outputs contain no timestamps, so identical config + seed give byte-identical
files.  CSVs are comma-separated, LF-terminated, one header row, floats with
9 significant digits, NaN forbidden.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, analysis, config as cfg, disorder
from .chain import assemble_hamiltonian, basis_state, build_chain, uniform_chain
from .circuit import flux_sweep, solve_fluxonium, solve_qubit
from .errors import ConfigError, FluxchainError, ParameterError
from .evolution import evolve, peak_stats, time_grid


def _provenance(command: str, sha256: str, seed: int | None) -> dict:
    return {
        "package": "fluxchain",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "command": command,
        "config_sha256": sha256,
        "base_seed": seed,
    }


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise FluxchainError(f"non-finite value {x!r} in CSV output")
    return format(x, ".9g")


def write_csv(path: Path, header: list[str], rows, provenance: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}={v}" for k, v in provenance.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


def cmd_solve(conf: cfg.SolveConfig, out: Path) -> None:
    spec = solve_fluxonium(conf.circuit, k_levels=conf.k_levels, tol=conf.tol)
    report = {
        "provenance": _provenance("solve", conf.sha256, None),
        "energies_ghz": spec.energies.tolist(),
        "epsilon_01_ghz": float(spec.energies[1] - spec.energies[0]),
        "epsilon_12_ghz": (float(spec.energies[2] - spec.energies[1])
                           if len(spec.energies) > 2 else None),
        "theta_elems": spec.theta_elems.tolist(),
        "cos_elems": spec.cos_elems.tolist(),
        "sin_elems": spec.sin_elems.tolist(),
        "theta_ge": float(spec.theta_elems[0, 1]),
        "eta": float(abs(spec.cos_elems[1, 1] - spec.cos_elems[0, 0])),
        "basis_size": spec.basis_size,
        "converged": spec.converged,
        "residual_ghz": spec.residual,
    }
    write_json(out / "spectral_report.json", report)
    print(f"wrote {out / 'spectral_report.json'}")


def cmd_evolve(conf: cfg.EvolveConfig, out: Path) -> None:
    chain = build_chain(conf.chain.site_params(),
                        np.full(conf.chain.length - 1, conf.chain.coupling))
    h = assemble_hamiltonian(chain)
    psi0 = basis_state(conf.chain.length, conf.excited_sites)
    record = evolve(h, psi0, time_grid(conf.t_max, conf.dt), tol=conf.tol,
                    record_energy=conf.record_energy)
    peaks = peak_stats(record, conf.t_star)

    prov = _provenance("evolve", conf.sha256, None)
    header = ["t_ns"] + [f"p_{l}" for l in range(conf.chain.length)] + ["norm"]
    rows = []
    for k in range(len(record.times)):
        rows.append([float(record.times[k])]
                    + [float(record.probs[l, k]) for l in range(conf.chain.length)]
                    + [float(record.norms[k])])
    write_csv(out / "trajectory.csv", header, rows, prov)

    sidecar = {
        "provenance": prov,
        "t_star_ns": conf.t_star,
        "peaks": [{"site": l, "p_max": p, "t_peak_ns": t}
                  for l, (p, t) in enumerate(peaks)],
        "norm_max_deviation": float(np.max(np.abs(record.norms - 1.0))),
    }
    if record.energies is not None:
        e0 = record.energies[0]
        sidecar["energy_drift_rel"] = float(
            np.max(np.abs(record.energies - e0)) / max(abs(e0), 1e-300))
    write_json(out / "peaks.json", sidecar)
    print(f"wrote {out / 'trajectory.csv'} and peaks.json")


def _aggregate_outputs(out: Path, prov: dict, records: list[disorder.RealizationRecord],
                       histogram_sites: list[int], hist_conf: cfg.HistogramConfig,
                       fit_l_max: int, extra: dict) -> None:
    """Aggregate CSVs/JSON shared by the ensemble and analyze commands."""
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise FluxchainError("no successful realizations to aggregate")
    peaks = np.array([r.p_peak for r in ok])
    n_sites = peaks.shape[1]

    means = np.empty(n_sites)
    excluded = np.zeros(n_sites, dtype=int)
    for l in range(n_sites):
        col = peaks[:, l]
        good = col > 0.0
        excluded[l] = np.count_nonzero(~good)
        means[l] = np.mean(np.log(col[good])) if np.any(good) else -np.inf
    write_csv(out / "mean_ln_p.csv", ["site", "mean_ln_p", "n_excluded"],
              [[l, float(means[l]), int(excluded[l])] for l in range(n_sites)],
              prov)

    bins = analysis.default_log_bins(hist_conf.low, hist_conf.high, hist_conf.n_bins)
    for l in histogram_sites:
        hist = analysis.log_histogram(peaks[:, l], bins)
        rows = [[float(hist.edges[i]), float(hist.edges[i + 1]),
                 float(hist.density[i]), int(hist.counts[i])]
                for i in range(len(hist.counts))]
        p = dict(prov)
        p["site"] = l
        p["underflow"] = hist.underflow
        p["total"] = hist.total
        write_csv(out / f"histogram_site_{l}.csv",
                  ["p_low", "p_high", "density_per_log10", "count"], rows, p)

    try:
        fit = analysis.fit_localization_length(means, fit_l_max)
        fit_payload = {
            "c0": fit.c0,
            "xi_sites": (fit.xi if math.isfinite(fit.xi) else "inf"),
            "fit_l_min": fit.fit_range[0],
            "fit_l_max": fit.fit_range[1],
            "residual": fit.residual,
            "delocalized": fit.delocalized,
        }
    except ParameterError as exc:
        fit_payload = {"unavailable": str(exc)}
    eps_samples = np.concatenate([r.epsilon for r in ok])
    delta_eps = float(np.sqrt(max(np.mean(eps_samples**2) - np.mean(eps_samples)**2, 0.0)))
    summary = {
        "provenance": prov,
        "n_realizations": len(records),
        "n_ok": len(ok),
        "n_failed": len(records) - len(ok),
        "resample_total": int(sum(r.resamples for r in ok)),
        "empirical_delta_epsilon_ghz": delta_eps,
        "localization_fit": fit_payload,
        **extra,
    }
    write_json(out / "localization_fit.json", fit_payload | {"provenance": prov})
    write_json(out / "summary.json", summary)


def cmd_ensemble(conf: cfg.EnsembleConfig, out: Path, workers: int,
                 progress: bool = True) -> disorder.EnsembleResult:
    out.mkdir(parents=True, exist_ok=True)
    result = disorder.run_ensemble(
        conf.template, conf.disorder, conf.evo, workers=workers,
        checkpoint_path=out / "checkpoint.jsonl", fingerprint=conf.sha256,
        progress=progress)
    prov = _provenance("ensemble", conf.sha256, conf.disorder.base_seed)

    # dimensionless disorder coordinate, reported both ways: from the pooled
    # empirical splitting spread and from the linear-response estimate
    site = solve_qubit(conf.template.circuit)
    a = float(site.theta[0, 1])
    ja2 = conf.template.coupling * a * a
    delta_emp = disorder.empirical_delta_epsilon(result)
    extra = {
        "kind": conf.disorder.kind,
        "sigma": conf.disorder.sigma,
        "coupling_ghz": conf.template.coupling,
        "theta_ge": a,
        "ja2_ghz": ja2,
        "eta": site.eta,
        "dimensionless_disorder_empirical": analysis.dimensionless_disorder(
            delta_emp, conf.template.coupling, a),
    }
    if conf.disorder.kind == "ej_gaussian":
        extra["delta_epsilon_linear_ghz"] = site.eta * conf.disorder.sigma
        extra["dimensionless_disorder_linear"] = analysis.dimensionless_disorder(
            site.eta * conf.disorder.sigma, conf.template.coupling, a)
    _aggregate_outputs(out, prov, result.records, conf.histogram_sites,
                       conf.histogram, conf.fit_l_max, extra)
    print(f"wrote ensemble aggregates to {out}")
    return result


def cmd_sweep(conf: cfg.SweepConfig, out: Path) -> None:
    prov = _provenance("sweep", conf.sha256, None)
    if conf.mode == "single_site":
        rows = []
        for row in flux_sweep(conf.circuit, conf.delta_phi_grid):
            if row.error is not None:
                raise FluxchainError(
                    f"sweep failed at delta_phi={row.delta_phi}: {row.error}")
            rows.append([row.delta_phi, row.epsilon, row.theta_gg, row.theta_ge,
                         row.theta_ee])
        write_csv(out / "flux_sweep.csv",
                  ["delta_phi_rad", "epsilon_ghz", "theta_gg", "theta_ge", "theta_ee"],
                  rows, prov)
        print(f"wrote {out / 'flux_sweep.csv'}")
        return

    # uniform_chain: one evolution per uniform detuning, parametric peaks
    grid = time_grid(conf.t_max, conf.dt)
    rows = []
    for dphi in conf.delta_phi_grid:
        params = conf.chain.circuit.replace(phi=conf.chain.circuit.phi + float(dphi))
        chain = uniform_chain(params, conf.chain.length, conf.chain.coupling)
        h = assemble_hamiltonian(chain)
        record = evolve(h, basis_state(conf.chain.length, {0}), grid, tol=conf.tol)
        peaks = peak_stats(record, conf.t_star)
        for l in conf.sites:
            p, t = peaks[l]
            rows.append([int(l), float(dphi), t, p])
    write_csv(out / "peak_vs_arrival.csv",
              ["site", "delta_phi_rad", "t_peak_ns", "p_max"], rows, prov)
    print(f"wrote {out / 'peak_vs_arrival.csv'}")


def cmd_analyze(conf: cfg.AnalyzeConfig, out: Path) -> None:
    if not conf.checkpoint.exists():
        raise ConfigError(f"checkpoint not found: {conf.checkpoint}")
    header, by_index = disorder.read_checkpoint(conf.checkpoint)
    records = [by_index[i] for i in sorted(by_index)]
    if not records:
        raise FluxchainError(f"checkpoint {conf.checkpoint} holds no realizations")
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise FluxchainError("checkpoint holds no successful realizations")
    n_sites = len(ok[0].p_peak)
    sites = conf.histogram_sites or [n_sites - 1]
    fit_l_max = conf.fit_l_max or n_sites // 2
    prov = _provenance("analyze", conf.sha256, None)
    prov["checkpoint_fingerprint"] = header.get("fingerprint")
    _aggregate_outputs(out, prov, records, sites, conf.histogram, fit_l_max,
                       {"checkpoint": str(conf.checkpoint)})
    print(f"wrote re-aggregated outputs to {out}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fluxchain",
        description="Excitation transport in coupled fluxonium chains")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in cfg.COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path,
                       help="JSON run configuration (one file = one experiment)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default runs/<config stem>)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's base seed (ensemble)")
        p.add_argument("--workers", type=int, default=None,
                       help="ensemble worker processes (default: all cores)")
        p.add_argument("--quick", action="store_true",
                       help=f"cap ensembles at {cfg.QUICK_N_REALIZATIONS} realizations")
    args = parser.parse_args(argv)

    try:
        raw = cfg.load_config_file(args.config)
        out = args.out if args.out is not None else Path("runs") / args.config.stem
        if args.command == "solve":
            cmd_solve(cfg.parse_solve(raw), out)
        elif args.command == "evolve":
            cmd_evolve(cfg.parse_evolve(raw), out)
        elif args.command == "ensemble":
            workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
            cmd_ensemble(cfg.parse_ensemble(raw, seed_override=args.seed,
                                            quick=args.quick), out, workers)
        elif args.command == "sweep":
            cmd_sweep(cfg.parse_sweep(raw), out)
        elif args.command == "analyze":
            cmd_analyze(cfg.parse_analyze(raw), out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FluxchainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
