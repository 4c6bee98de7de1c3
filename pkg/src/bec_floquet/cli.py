"""Command-line front end.

Subcommands ``meanfield``, ``period``, ``spectrum``, ``twa`` and ``report``
write into ``--out-dir``. Every CSV starts with ``#`` header lines carrying
the run's manifest hash and the physics-parameter hash; JSON outputs carry
the same two hashes as their first keys. Exit codes: 0 success, 2
configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__, floquet, pipeline, twa
from .integrate import NumericalError
from .meanfield import energy_series, kappa1_solution, write_trajectory_csv
from .params import ConfigError, RunConfig, load_config
from .period import write_power_spectrum_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SPECTRUM_CSV = "spectrum.csv"
BANDS_JSON = "bands.json"
PERIOD_JSON = "period.json"
TWA_JSON = "twa.json"


# ---------------------------------------------------------------------------
# Manifest and hashing
# ---------------------------------------------------------------------------


def _sha256(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=repr).encode()).hexdigest()


def params_hash(config: RunConfig) -> str:
    """Hash of everything that fixes the physics (not the numerics of one subcommand)."""
    num = config.numerics
    return _sha256({"physical": asdict(config.physical), "density": num.density,
                    "initial_population": num.initial_population})


def versions() -> dict:
    import numba
    import scipy

    return {"bec_floquet": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


class Manifest:
    """Run manifest; the hash covers everything except wall time and output paths."""

    def __init__(self, subcommand: str, config: RunConfig, seed=None, extra=None):
        self.subcommand = subcommand
        self.config = config
        self.seed = seed
        self.extra = dict(extra or {})
        self.outputs: list[str] = []
        self.start = time.perf_counter()
        core = {"subcommand": subcommand, "config": config.as_dict(), "seed": seed,
                "versions": versions(), "extra": self.extra}
        self.sha256 = _sha256(core)
        self.params_sha256 = params_hash(config)

    def header_lines(self) -> list[str]:
        return [f"manifest_sha256={self.sha256}", f"params_sha256={self.params_sha256}",
                f"subcommand={self.subcommand}"]

    def json_header(self) -> dict:
        return {"manifest_sha256": self.sha256, "params_sha256": self.params_sha256}

    def write(self, out_dir: Path) -> Path:
        path = out_dir / f"{self.subcommand}_manifest.json"
        data = {
            "manifest_sha256": self.sha256,
            "params_sha256": self.params_sha256,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "config": self.config.as_dict(),
            "versions": versions(),
            "extra": self.extra,
            "outputs": self.outputs,
            "wall_time_s": time.perf_counter() - self.start,
        }
        _write_json(path, data)
        return path


def _write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(x):
    """JSON-safe float (NaN and inf become None)."""
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    updates = {}
    for flag, name in (("k_min", "k_min"), ("k_max", "k_max"), ("k_count", "k_count"),
                       ("realizations", "twa_realizations")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[name] = value
    if updates:
        config = RunConfig(config.physical, replace(config.numerics, **updates))
    return config


def cmd_meanfield(args, config: RunConfig, out: Path) -> int:
    setup = pipeline.prepare(config)
    phys = config.physical
    man = Manifest("meanfield", config, extra={"t_final": args.t_final, "dt": args.dt})
    traj = pipeline.run_meanfield(setup, args.t_final, args.dt)
    n = np.abs(traj.values[:, 0]) ** 2 + np.abs(traj.values[:, 1]) ** 2
    norm_drift = float(np.max(np.abs(n / n[0] - 1.0)))
    energy = energy_series(traj, setup.background.g, phys.rabi_frequency, phys.hbar)
    energy_drift = float(np.max(np.abs(energy - energy[0])) / (phys.hbar * phys.rabi_frequency))
    diag = {"norm_drift": norm_drift, "energy_drift_over_hbar_omega": energy_drift,
            "n": setup.background.n, "g": setup.background.g, "kappa": setup.interactions.kappa}
    print(f"norm drift {norm_drift:.3e}; energy drift {energy_drift:.3e} hbar Omega")
    if setup.interactions.kappa == 1.0:
        exact = kappa1_solution(setup.initial, setup.interactions.u, traj.mu, phys.rabi_frequency,
                                traj.times, phys.hbar)
        err = float(np.max(np.abs(traj.values - exact)) / math.sqrt(setup.background.n))
        diag["kappa1_analytic_max_error"] = err
        print(f"kappa = 1 analytic match: max relative deviation {err:.3e}")
    csv_path = out / "meanfield.csv"
    write_trajectory_csv(traj, csv_path, header_lines=man.header_lines())
    _write_json(out / "meanfield.json", {**man.json_header(), **diag})
    man.outputs += [str(csv_path), str(out / "meanfield.json")]
    man.write(out)
    return EXIT_OK


def _period_payload(res: pipeline.PeriodResult) -> dict:
    est = res.estimate
    return {"T": est.T, "nu0": est.nu0, "delta_nu": est.delta_nu, "mu": est.mu,
            "mu_applied": est.mu_applied, "total_mu": est.total_mu,
            "comb_residual_hz": est.comb_residual, "fit_residual": est.fit_residual,
            "n_periods": est.n_periods, "periodicity_residual": res.periodicity.residual,
            "periodicity_passed": res.periodicity.passed}


def cmd_period(args, config: RunConfig, out: Path) -> int:
    setup = pipeline.prepare(config)
    man = Manifest("period", config, extra={"t_final": args.t_final, "dt": args.dt})
    res = pipeline.run_period(setup, args.t_final, args.dt)
    est = res.estimate
    print(f"T = {est.T * 1e6:.3f} us, nu0 = {est.nu0:.3f} Hz, delta_nu = {est.delta_nu:.3f} Hz, "
          f"periodicity residual {res.periodicity.residual:.2e}")
    csv_path = out / "power_spectrum.csv"
    write_power_spectrum_csv(res.trajectory, csv_path, header_lines=man.header_lines())
    _write_json(out / PERIOD_JSON, {**man.json_header(), **_period_payload(res)})
    man.outputs += [str(csv_path), str(out / PERIOD_JSON)]
    man.write(out)
    return EXIT_OK if res.periodicity.passed else EXIT_NUMERIC


def cmd_spectrum(args, config: RunConfig, out: Path) -> int:
    setup = pipeline.prepare(config)
    man = Manifest("spectrum", config, extra={"t_final": args.t_final, "dt": args.dt})
    res = pipeline.run_period(setup, args.t_final, args.dt)
    if not res.periodicity.passed:
        raise NumericalError(f"mean field not periodic at the detected period "
                             f"(residual {res.periodicity.residual:.2e})")
    spectrum = pipeline.run_spectrum(setup, res.estimate, threads=args.threads)
    csv_path = out / SPECTRUM_CSV
    floquet.write_spectrum_csv(spectrum, csv_path, header_lines=man.header_lines())
    summary = floquet.write_bands_json(spectrum, out / BANDS_JSON,
                                       header={**man.json_header(), "period": _period_payload(res)})
    if summary["bands"]:
        for b in summary["bands"]:
            print(f"{b['class']:>20s}: k in [{b['k_start']:.4e}, {b['k_end']:.4e}] m^-1, "
                  f"gamma_max = {b['gamma_max']:.1f} 1/s at k = {b['k_at_max_gamma']:.4e}")
    else:
        print("no instabilities")
    man.outputs += [str(csv_path), str(out / BANDS_JSON)]
    man.write(out)
    return EXIT_OK


def cmd_twa(args, config: RunConfig, out: Path) -> int:
    setup = pipeline.prepare(config)
    phys = config.physical
    tw = pipeline.prepare_twa(setup, args.dt)
    man = Manifest("twa", config, seed=args.seed,
                   extra={"t_final": args.t_final, "dt": tw.dt, "realizations": config.numerics.twa_realizations})
    res = pipeline.run_twa(setup, setup.reference_mu, args.seed, t_final=args.t_final,
                           threads=args.threads, tw=tw)
    header = man.header_lines()
    dens_path = out / "twa_density.csv"
    twa.write_momentum_csv(res, dens_path, header_lines=header)

    end = twa.linear_regime_end(res)
    kpos, pair = twa.positive_pair_occupation(res)
    keep = kpos <= config.numerics.k_max * (1 + 1e-12)
    contrast = twa.growth_contrast(pair, max(end, 1))
    growth_path = out / "twa_growth.csv"
    with open(growth_path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(f"# linear regime ends at t = {res.times[end]:.12e} s\n")
        fh.write("k,contrast,gamma_fit,t_start,t_end,n_points\n")
        upper = 0.01 * res.condensate_number
        for j in np.flatnonzero(keep):
            try:
                fit = twa.growth_rate_fit(res.times, pair[:, j], upper, t_max=res.times[end])
                row = (fit.gamma, fit.t_start, fit.t_end, fit.n_points)
            except twa.WindowError:
                row = (math.nan, math.nan, math.nan, 0)
            fh.write(",".join([f"{kpos[j]:.12e}", f"{contrast[j]:.12e}", f"{row[0]:.12e}",
                               f"{row[1]:.12e}", f"{row[2]:.12e}", str(row[3])]) + "\n")

    payload = {**man.json_header(), "seed": args.seed, "realizations": res.realizations,
               "n_points": tw.lattice.n_points, "length": tw.lattice.length, "dt": tw.dt,
               "n1d": tw.n1d, "area": tw.area, "max_norm_drift": res.max_norm_drift,
               "t_linear": float(res.times[end]), "comparison": None}
    if args.spectrum:
        spec = floquet.read_spectrum_csv(args.spectrum)
        if spec["header"].get("params_sha256") != man.params_sha256:
            print(f"warning: {args.spectrum} was computed for different parameters "
                  f"(params hash mismatch); comparison skipped", file=sys.stderr)
            payload["comparison"] = {"skipped": "params_sha256 mismatch"}
        else:
            cmp = twa.compare_with_floquet(res, spec["k"], spec["gamma"].max(axis=1),
                                           [c != floquet.STABLE for c in spec["classes"]],
                                           phys.atom_mass, phys.hbar)
            payload["comparison"] = cmp.as_dict()
            print(f"growing modes matched: {cmp.locations_ok}; gamma fit {cmp.gamma_fit} vs "
                  f"Floquet {cmp.gamma_floquet:.1f} at k = {cmp.k_star:.4e}")
    _write_json(out / TWA_JSON, payload)
    man.outputs += [str(dens_path), str(growth_path), str(out / TWA_JSON)]
    man.write(out)
    return EXIT_OK


def _read_optional(path):
    if path is None:
        return None, "not given"
    path = Path(path)
    if not path.is_file():
        return None, f"file not found: {path.name}"
    try:
        return json.loads(path.read_text()), None
    except json.JSONDecodeError as exc:
        return None, f"unreadable JSON: {exc.msg}"


def build_report(period_path=None, bands_path=None, twa_path=None) -> dict:
    """Consolidated summary; absent or unreadable inputs become ``{"missing": reason}`` sections."""
    sections = {}
    hashes = {}
    for name, path in (("period", period_path), ("bands", bands_path), ("twa", twa_path)):
        data, why = _read_optional(path)
        sections[name] = data if data is not None else {"missing": why}
        hashes[name] = None if data is None else data.get("manifest_sha256")
    report = {"manifest_sha256": _sha256(hashes), "inputs": hashes}
    per = sections["period"]
    if "missing" in per:
        report["period"] = per
    else:
        report["period"] = {k: per[k] for k in ("T", "nu0", "delta_nu", "mu", "periodicity_residual")
                            if k in per}
    bands = sections["bands"]
    if "missing" in bands:
        report["bands"] = bands
        report["gamma_max"] = {"missing": bands["missing"]}
    else:
        report["bands"] = {"instabilities": bands.get("instabilities"), "list": bands.get("bands", [])}
        if bands.get("bands"):
            best = max(bands["bands"], key=lambda b: b["gamma_max"])
            report["gamma_max"] = {"gamma_max": best["gamma_max"], "k": best["k_at_max_gamma"],
                                   "class": best["class"]}
        else:
            report["gamma_max"] = {"gamma_max": 0.0, "k": None, "class": floquet.STABLE}
    tw = sections["twa"]
    if "missing" in tw:
        report["twa_agreement"] = tw
    else:
        cmp = tw.get("comparison")
        if not cmp:
            report["twa_agreement"] = {"missing": "twa run had no spectrum comparison"}
        elif "skipped" in cmp:
            report["twa_agreement"] = {"missing": cmp["skipped"]}
        else:
            report["twa_agreement"] = {"locations_ok": cmp["locations_ok"], "k_star": cmp["k_star"],
                                       "gamma_floquet": cmp["gamma_floquet"], "gamma_fit": cmp["gamma_fit"],
                                       "relative_error": cmp["relative_error"],
                                       "realizations": tw.get("realizations")}
    return report


def report_markdown(report: dict) -> str:
    lines = [f"<!-- manifest_sha256={report['manifest_sha256']} -->", "# Run summary", ""]

    def section(title, body):
        lines.append(f"## {title}")
        if "missing" in body:
            lines.append(f"missing ({body['missing']})")
        else:
            for key, value in body.items():
                if key == "list":
                    for b in value:
                        lines.append(f"- {b['class']}: k in [{b['k_start']:.4e}, {b['k_end']:.4e}] m^-1, "
                                     f"gamma_max {b['gamma_max']:.1f} 1/s")
                else:
                    lines.append(f"- {key}: {value}")
        lines.append("")

    section("Period", report["period"])
    section("Bands", report["bands"])
    section("Largest growth rate", report["gamma_max"])
    section("TWA agreement", report["twa_agreement"])
    return "\n".join(lines)


def cmd_report(args, out: Path) -> int:
    base = Path(args.inputs) if args.inputs else out

    def pick(explicit, default):
        return explicit if explicit is not None else base / default

    report = build_report(pick(args.period, PERIOD_JSON), pick(args.bands, BANDS_JSON), pick(args.twa, TWA_JSON))
    _write_json(out / "report.json", report)
    (out / "report.md").write_text(report_markdown(report) + "\n")
    for name in ("period", "bands", "twa_agreement"):
        if "missing" in report[name]:
            print(f"{name}: missing ({report[name]['missing']})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bec-floquet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, physics=True):
        p.add_argument("--out-dir", default=".", help="output directory (created if needed)")
        if physics:
            p.add_argument("--config", help="key = value config file (defaults: He* parameters)")
            p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
            p.add_argument("--t-final", type=float, default=None, help="record length in s")
            p.add_argument("--dt", type=float, default=None, help="time step in s")
            p.add_argument("--seed", type=int, default=0)

    for name in ("meanfield", "period"):
        common(sub.add_parser(name))
    p = sub.add_parser("spectrum")
    common(p)
    p.add_argument("--k-min", type=float, default=None)
    p.add_argument("--k-max", type=float, default=None)
    p.add_argument("--k-count", type=int, default=None)
    p = sub.add_parser("twa")
    common(p)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--k-max", type=float, default=None, help="largest k in the growth table")
    p.add_argument("--spectrum", default=None, help="spectrum CSV to compare against")
    p = sub.add_parser("report")
    common(p, physics=False)
    p.add_argument("--inputs", default=None, help="directory holding period/bands/twa JSON (default: --out-dir)")
    p.add_argument("--period", default=None)
    p.add_argument("--bands", default=None)
    p.add_argument("--twa", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "report":
            return cmd_report(args, out)
        config = _load(args)
        if args.threads is None:
            args.threads = os.cpu_count() or 1
        handler = {"meanfield": cmd_meanfield, "period": cmd_period, "spectrum": cmd_spectrum,
                   "twa": cmd_twa}[args.command]
        return handler(args, config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
