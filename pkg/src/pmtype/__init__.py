"""Postmortem type identification for heap objects in memory dumps."""

from .analyzers import LockModel, conflicts, findfalse, findlocks
from .dumpio import DumpError, DumpImage, load_dump, load_dump_file
from .typecat import CatalogBuilder, CatalogError, TypeCatalog, load_catalog, load_catalog_file
from .typegraph import PassStats, TypeGraph, check_array, greatest_reach, istype, render_stats, run, whattype

__version__ = "0.1.0"

__all__ = [
    "CatalogBuilder", "CatalogError", "DumpError", "DumpImage", "LockModel", "PassStats", "TypeCatalog",
    "TypeGraph", "check_array", "conflicts", "findfalse", "findlocks", "greatest_reach", "istype",
    "load_catalog", "load_catalog_file", "load_dump", "load_dump_file", "render_stats", "run", "whattype",
]
