"""Simulation and analysis toolkit for fiber-coupled, plasmon-enhanced
single-photon sources.

Submodules
----------
waveguide
    HE11 mode of an optical nanofiber and dipole channeling fractions.
plasmon
    Quasi-static gold nanorod model and the rod/fiber hybrid response.
emitter
    Stochastic quantum dot emission and the detector chain.
tags
    Time-tag streams and the NTG1 file format.
inference
    Correlations, fits and derived figures of merit.
"""

__version__ = "0.1.0"

from . import emitter, inference, plasmon, tags, waveguide  # noqa: E402

__all__ = ["emitter", "inference", "plasmon", "tags", "waveguide", "__version__"]
