"""RIS-aided rate maximization via block minorization-maximization.

Library layout: ``numerics`` (Hermitian eigen tools and the power
multiplier search), ``channel`` (geometry, Rician draws, effective-channel
composition), ``surrogates`` (minorizer constructions), ``wsr``/``mr``/``sr``
(the three solvers), ``accel`` (squared-extrapolation wrapper),
``diagnostics`` (KKT residuals), ``harness`` (Monte-Carlo driver and
baselines), and ``cli``.
"""

from .config import (ReflectionTopology, SystemConfig, default_config,
                     load_config, save_config)
from .designs import Design, IterationLog, SrDesign
from .wsr import SolverOptions

__all__ = [
    "ReflectionTopology", "SystemConfig", "default_config", "load_config",
    "save_config", "Design", "SrDesign", "IterationLog", "SolverOptions",
]
