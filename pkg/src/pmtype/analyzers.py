"""Analyses layered on a completed type graph: held locks, false sharing,
and type conflicts (the signature of use-after-free)."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .dumpio import DumpError, DumpImage
from .typecat import TypeCatalog
from .typegraph import ARRAY, Node, TypeGraph

log = logging.getLogger(__name__)

DEFAULT_GRANULARITY = 64
_LOCKISH = re.compile(r"mutex|lock", re.IGNORECASE)


@dataclass
class LockModel:
    """How to recognize a lock and decode its owner.

    The owner is the word at ``owner_word_offset`` within the lock, masked
    with ``owner_mask`` (by default the low three flag bits are cleared,
    as with an adaptive mutex word).
    """

    lock_types: frozenset[str]
    owner_word_offset: int = 0
    owner_mask: int | None = None

    def mask(self, pointer_size: int) -> int:
        if self.owner_mask is not None:
            return self.owner_mask
        return ((1 << (8 * pointer_size)) - 1) & ~0x7

    @classmethod
    def default(cls, catalog: TypeCatalog) -> "LockModel":
        """Every sync-primitive type whose name mentions a mutex or lock."""
        return cls(frozenset(t.name for t in catalog if t.sync_primitive and _LOCKISH.search(t.name)))

    def validate(self, catalog: TypeCatalog) -> None:
        for name in self.lock_types:
            t = catalog.resolve(catalog.lookup(name).id)
            if not t.sync_primitive:
                raise ValueError(f"lock type {name!r} is not a synchronization primitive")


@dataclass(frozen=True)
class LockRecord:
    address: int
    descriptor: str | None
    owner: int

    def render(self) -> str:
        desc = f" ({self.descriptor})" if self.descriptor else ""
        return f"{self.address:x}{desc} is owned by {self.owner:x}"


@dataclass(frozen=True)
class FalseSharingRecord:
    address: int
    symbol: str
    type: str
    element_size: int
    total_size: int

    def render(self) -> str:
        return f"{self.address:>11x} {self.symbol:<28} {self.type:<20} {self.element_size:>4} {self.total_size:>7}"


FINDFALSE_HEADER = f"{'ADDR':>11} {'SYMBOL':<28} {'TYPE':<20} {'SZ':>4} {'TOTSIZE':>7}"


@dataclass
class Conflict:
    node: Node
    inferences: list[tuple[str, int, int, str]] = field(default_factory=list)

    def render(self) -> str:
        lines = [f"{self.node.base:x}: {len(self.inferences)} conflicting inferences"]
        lines += [f"  {t} (from {b:x}+{o:x}, type {rt})" for t, b, o, rt in self.inferences]
        return "\n".join(lines)


def _identified(node: Node) -> bool:
    return node.kind == "static" or node.certainty in ("known", "conjectured")


def findlocks(graph: TypeGraph, image: DumpImage | None = None, model: LockModel | None = None) -> list[LockRecord]:
    image = image or graph.image
    cat = graph.catalog
    model = model or LockModel.default(cat)
    lock_ids = {cat.resolve(cat.lookup(n).id).id for n in model.lock_types}
    mask = model.mask(image.pointer_size)
    out = []
    for n in graph.nodes:
        if not _identified(n):
            continue
        for elem_off, et in graph.element_layout(n):
            for off, sync, path in cat.sync_members(et):
                if sync not in lock_ids:
                    continue
                addr = n.base + elem_off + off
                try:
                    owner = image.read_word(addr + model.owner_word_offset) & mask
                except DumpError as e:
                    log.warning("skipping lock at %x: %s", addr, e)
                    continue
                if not owner:
                    continue
                if n.kind == "static":
                    names = path.member_names()
                    desc = n.symbol + (names if names.startswith("[") else "." + names if names else "")
                elif path.steps:
                    desc = str(path)
                else:
                    desc = None
                out.append(LockRecord(addr, desc, owner))
    out.sort(key=lambda r: r.address)
    return out


def array_shape(graph: TypeGraph, node: Node) -> tuple[str, int] | None:
    """(element type id, element count) if the node is an array, else None."""
    cat = graph.catalog
    if node.kind == "static":
        t = cat.resolve(node.single)
        if t.kind == "array":
            return cat.resolve(t.element_type).id, t.element_count
        return None
    if node.certainty == "conjectured" and node.verdict.kind == ARRAY:
        return node.single, node.verdict.count
    return None


def findfalse(graph: TypeGraph, catalog: TypeCatalog | None = None,
              granularity: int = DEFAULT_GRANULARITY) -> list[FalseSharingRecord]:
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    cat = catalog or graph.catalog
    statics, heap = [], []
    for n in graph.nodes:
        shape = array_shape(graph, n)
        if shape is None:
            continue
        elem, count = shape
        et = cat.get(elem)
        total = count * et.size
        if et.kind != "struct" or et.size >= granularity or total <= granularity:
            continue
        if not cat.sync_members(elem):
            continue
        rec = FalseSharingRecord(n.base, n.symbol or "-", et.name, et.size, total)
        (statics if n.kind == "static" else heap).append(rec)
    return statics + heap


def conflicts(graph: TypeGraph) -> list[Conflict]:
    out = []
    for n in graph.heap_nodes:
        if len(n.inferences) < 2:
            continue
        c = Conflict(n)
        for t, refs in n.inferences.items():
            for r in refs:
                c.inferences.append((graph.type_name(t), graph.nodes[r.node].base, r.offset, graph.type_name(r.type)))
        out.append(c)
    return out


def render_findlocks(records: list[LockRecord]) -> str:
    return "\n".join(r.render() for r in records)


def render_findfalse(records: list[FalseSharingRecord]) -> str:
    return "\n".join([FINDFALSE_HEADER] + [r.render() for r in records])


def render_conflicts(items: list[Conflict]) -> str:
    return "\n".join(c.render() for c in items)
