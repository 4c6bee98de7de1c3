"""Mean-field period of the He* condensate and its power spectrum.

Runs the long mean-field record, detects the orbit period and the comb
offset, checks periodicity and writes the two-component power spectrum.

Usage: python scripts/period_scan.py [--out-dir DIR] [--config FILE]
"""

import argparse
from pathlib import Path

from bec_floquet import pipeline
from bec_floquet.params import RunConfig, load_config
from bec_floquet.period import write_power_spectrum_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="period_scan")
    parser.add_argument("--config", default=None)
    args = parser.parse_args()
    config = load_config(args.config) if args.config else RunConfig()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    setup = pipeline.prepare(config)
    res = pipeline.run_period(setup)
    est = res.estimate
    print(f"kappa          = {setup.interactions.kappa:.4f}")
    print(f"peak density   = {setup.background.n:.4e} m^-3  (g = {setup.background.g:.1f} 1/s)")
    print(f"T              = {est.T * 1e6:.3f} us")
    print(f"nu0            = {est.nu0:.3f} Hz")
    print(f"delta nu       = {est.delta_nu:.3f} Hz")
    print(f"periodicity    = {res.periodicity.residual:.2e}")
    path = out / "power_spectrum.csv"
    write_power_spectrum_csv(res.trajectory, path)
    print(f"power spectrum written to {path}")


if __name__ == "__main__":
    main()
