"""Spectral-injection diagnostics for the angular-frequency reach of
equivariant readouts.

The compiled core exposes the spherical-harmonic algebra, Gaunt/span
checks, the body-frame injector, least-squares probes, the readout head,
the recovery/sharpness metric suite, and the per-atom bandwidth analyzer.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
__doc__ = _core_doc
