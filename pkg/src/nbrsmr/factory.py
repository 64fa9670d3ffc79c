"""Construct reclaimers and data structures by name."""

from __future__ import annotations

from dataclasses import replace

from .baselines import EBRReclaimer, HPReclaimer, LeakyReclaimer
from .config import SMRConfig
from .errors import UnsupportedCombination
from .nbr import NBRReclaimer
from .nbrplus import NBRPlusReclaimer
from .structures.harrislist import HarrisList
from .structures.lazylist import LazyList

RECLAIMERS = {
    "nbr": NBRReclaimer,
    "nbrplus": NBRPlusReclaimer,
    "ebr": EBRReclaimer,
    "hp": HPReclaimer,
    "leaky": LeakyReclaimer,
}
ALIASES = {"none": "leaky", "nbr+": "nbrplus", "debra": "ebr"}

STRUCTURES = {
    "lazylist": LazyList,
    "harrislist": HarrisList,
}


def canonical_smr(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in RECLAIMERS:
        raise ValueError(f"unknown reclaimer {name!r}; choose from {sorted(RECLAIMERS)}")
    return name


def make_reclaimer(name: str, config: SMRConfig | None = None, **overrides):
    config = config or SMRConfig()
    if overrides:
        config = replace(config, **overrides)
    return RECLAIMERS[canonical_smr(name)](config)


def check_combination(ds: str, smr: str) -> None:
    if ds not in STRUCTURES:
        raise ValueError(f"unknown data structure {ds!r}; choose from {sorted(STRUCTURES)}")
    if ds == "harrislist" and canonical_smr(smr) == "hp":
        raise UnsupportedCombination(
            "hazard pointers cannot protect traversals through marked nodes of the "
            "Harris list; use nbr, nbrplus, ebr or leaky")


def make_set(ds: str, reclaimer):
    check_combination(ds, reclaimer.name)
    return STRUCTURES[ds](reclaimer)
