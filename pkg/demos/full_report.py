"""Regenerate every dataset and the summary of fitted figures of merit.

Usage: python demos/full_report.py [outdir] [scale]
A scale of 0.1 gives a preview in well under a minute.
"""
import sys

from plasmonsps import report

outdir = sys.argv[1] if len(sys.argv) > 1 else "report_out"
scale = float(sys.argv[2]) if len(sys.argv) > 2 else 0.1
print(report.run(outdir, seed=2024, scale=scale))
