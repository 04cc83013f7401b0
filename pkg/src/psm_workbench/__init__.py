"""Propensity-score-matching workbench.

Automates the full PSM workflow: data validation, propensity model
selection, one-to-many matching, ATT estimation with bootstrap confidence
intervals, balance diagnostics, and sensitivity analysis, behind a
job-oriented HTTP service and a CLI.
"""

__version__ = "0.1.0"
