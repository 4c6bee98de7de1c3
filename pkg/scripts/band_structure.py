"""Floquet band structure of the He* condensate.

Scans the Floquet exponents over the configured k grid, prints the
instability bands with their class and peak growth rate, and writes the
spectrum CSV plus a JSON band summary.

Usage: python scripts/band_structure.py [--out-dir DIR] [--config FILE] [--k-count N]
"""

import argparse
from pathlib import Path

from bec_floquet import floquet, pipeline
from bec_floquet.params import RunConfig, load_config


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="band_structure")
    parser.add_argument("--config", default=None)
    parser.add_argument("--k-count", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()
    config = load_config(args.config) if args.config else RunConfig()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    setup = pipeline.prepare(config)
    est = pipeline.run_period(setup).estimate
    k = pipeline.k_grid(config, k_count=args.k_count)
    spectrum = pipeline.run_spectrum(setup, est, k=k, threads=args.threads)
    print(f"T = {est.T * 1e6:.2f} us, {len(k)} k-points, max |det M - 1| = "
          f"{spectrum.det_residuals.max():.1e}")
    for band in floquet.band_edges(spectrum):
        print(f"{band.classification:>20s}  k in [{band.k_start:.3e}, {band.k_end:.3e}] m^-1  "
              f"gamma_max {band.gamma_max:7.1f} 1/s at {band.k_at_max_gamma:.3e}")
    floquet.write_spectrum_csv(spectrum, out / "spectrum.csv")
    floquet.write_bands_json(spectrum, out / "bands.json")
    print(f"spectrum and bands written to {out}")


if __name__ == "__main__":
    main()
