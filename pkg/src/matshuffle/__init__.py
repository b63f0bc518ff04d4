"""Communication-optimal redistribution and transposition of distributed matrices."""

from .copr import Relabeling, find_copr, solve_lap
from .cost import CommGraph, CostModel, gain_matrix, relabeled_cost, total_cost, total_gain
from .engine import (ExchangeReport, ProcessState, TransformJob, execute, execute_batched,
                     gather, make_processes, plan_relabelings, predict_cost, scatter)
from .errors import (ExtentMismatchError, LayoutError, MatShuffleError, ParseError,
                     ResourceGuardError, VerificationError)
from .layout import BlockRef, Grid, Layout, StorageDesc, make_block_cyclic
from .overlay import PackageSet, build_package_set, transposed_package_set

__version__ = "0.1.0"

__all__ = [
    "BlockRef", "CommGraph", "CostModel", "ExchangeReport", "ExtentMismatchError", "Grid",
    "Layout", "LayoutError", "MatShuffleError", "PackageSet", "ParseError", "ProcessState",
    "Relabeling", "ResourceGuardError", "StorageDesc", "TransformJob", "VerificationError",
    "build_package_set", "execute", "execute_batched", "find_copr", "gain_matrix", "gather",
    "make_block_cyclic", "make_processes", "plan_relabelings", "predict_cost", "relabeled_cost",
    "scatter", "solve_lap", "total_cost", "total_gain", "transposed_package_set",
]
