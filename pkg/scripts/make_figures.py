"""Emit every figure-data CSV into an output directory.

Usage: python scripts/make_figures.py [outdir]
"""
import sys

from fracprice.cli import main

out = sys.argv[1] if len(sys.argv) > 1 else "figures"
for fig in ("fig1", "fig3", "fig4", "fig5", "fig6"):
    rc = main(["figures", fig, "--out", out])
    if rc != 0:
        sys.exit(rc)
