"""Neutralization-based safe memory reclamation (NBR, NBR+) with baselines,
instrumented concurrent ordered sets, and a validation and benchmark harness."""

from .baselines import EBRReclaimer, HPReclaimer, LeakyReclaimer
from .config import SMRConfig
from .core import Lifecycle, Phase, Reclaimer, Record, ThreadContext, ThreadRegistry
from .errors import (
    AllocationFailure,
    CapacityExceeded,
    DoubleRetire,
    IllegalLifecycleTransition,
    IllegalTransition,
    InvalidSpec,
    PoisonDetected,
    ReservationViolation,
    RestartFromRootViolation,
    ScriptError,
    SMRError,
    TooManyReservations,
    UnsupportedCombination,
)
from .factory import make_reclaimer, make_set
from .nbr import NBRReclaimer
from .nbrplus import NBRPlusReclaimer, normalize, rgp_detected
from .neutralization import Neutralized
from .structures.base import OpKind, SetOperationResult
from .structures.harrislist import HarrisList
from .structures.lazylist import LazyList

__version__ = "0.1.0"
