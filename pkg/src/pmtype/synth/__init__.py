"""Synthetic dump generation and scoring against ground truth."""

from .evaluate import EvalReport, evaluate
from .generate import GroundTruth, TruthObject, generate, owner_address, write_dump
from .spec import Script, SpecError, SynthSpec

__all__ = ["EvalReport", "GroundTruth", "Script", "SpecError", "SynthSpec", "TruthObject",
           "evaluate", "generate", "owner_address", "write_dump"]
