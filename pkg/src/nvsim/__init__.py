"""Desk-scale simulator of ensemble NV-diamond magnetometry.

Subpackages cover single-spin Bloch dynamics, decoupling pulse sequences,
dephasing noise and filter-function coherence, microwave resonator field
maps, ensemble sampling with two-branch optical readout, experiment
orchestration with curve fits, and a config-driven CLI.
"""

__version__ = "0.1.0"

from . import bloch, sequences, noise, filters, fields, ensemble, readout, fitting, experiments

__all__ = [
    "bloch",
    "sequences",
    "noise",
    "filters",
    "fields",
    "ensemble",
    "readout",
    "fitting",
    "experiments",
    "__version__",
]
