"""Truncated-Wigner cross-check of the Floquet instability bands.

Runs the 1D Wigner ensemble for the He* condensate, locates the growing
momentum modes in the linear regime and compares them, and the fitted
growth rate at the most unstable wave number, with a Floquet scan on the
same parameters. A 500-realization run takes a few minutes on a
multicore desktop.

Usage: python scripts/twa_crosscheck.py [--realizations R] [--seed S] [--out-dir DIR]
"""

import argparse
import json
from pathlib import Path

from bec_floquet import floquet, pipeline, twa
from bec_floquet.params import RunConfig, load_config


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="twa_crosscheck")
    parser.add_argument("--config", default=None)
    parser.add_argument("--realizations", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()
    config = load_config(args.config) if args.config else RunConfig()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    setup = pipeline.prepare(config)
    est = pipeline.run_period(setup).estimate
    spectrum = pipeline.run_spectrum(setup, est, threads=args.threads)
    result = pipeline.run_twa(setup, setup.reference_mu, args.seed, realizations=args.realizations,
                              threads=args.threads)
    cmp = twa.compare_with_floquet(result, spectrum.k_grid, spectrum.gamma.max(axis=1),
                                   [c != floquet.STABLE for c in spectrum.classes],
                                   config.physical.atom_mass)
    print(f"realizations {result.realizations}, linear regime up to {cmp.t_linear * 1e3:.2f} ms, "
          f"homogeneous cutoff {cmp.k_homogeneous:.2e} m^-1")
    print(f"growing bins: {len(cmp.growing_k)}, unmatched: {len(cmp.unmatched_growing_k)}, "
          f"missing bands: {cmp.missing_bands}")
    if cmp.gamma_fit is None:
        print(f"no growth-rate fit: {cmp.fit_error}")
    else:
        print(f"gamma at k = {cmp.k_star:.3e}: TWA {cmp.gamma_fit:.0f} 1/s, Floquet {cmp.gamma_floquet:.0f} 1/s "
              f"({cmp.relative_error:.1%})")
    twa.write_momentum_csv(result, out / "twa_density.csv")
    (out / "comparison.json").write_text(json.dumps(cmp.as_dict(), indent=2) + "\n")
    print(f"results written to {out}")


if __name__ == "__main__":
    main()
