"""Loading and indexing of memory dump images.

A dump document carries raw segments (base64), the allocator's caches,
the allocated heap objects and the typed static symbols.  The loaded
:class:`DumpImage` answers word reads and address-to-object queries.
"""

from __future__ import annotations

import base64
import bisect
import json
from dataclasses import dataclass, field

import numpy as np

from .typecat import TypeCatalog


class DumpError(ValueError):
    """Raised when a dump document is rejected or an address is unreadable."""


@dataclass(frozen=True)
class Segment:
    base: int
    data: bytes

    @property
    def end(self) -> int:
        return self.base + len(self.data)


@dataclass(frozen=True)
class Cache:
    id: str
    name: str
    object_size: int
    general_purpose: bool


@dataclass(frozen=True)
class HeapObject:
    base: int
    size: int
    cache: str

    @property
    def end(self) -> int:
        return self.base + self.size


@dataclass(frozen=True)
class StaticObject:
    symbol: str
    base: int
    size: int
    type: str

    @property
    def end(self) -> int:
        return self.base + self.size


@dataclass
class DumpImage:
    pointer_size: int
    endianness: str
    segments: list[Segment]
    caches: list[Cache]
    heap_objects: list[HeapObject]
    statics: list[StaticObject]
    _seg_bases: list[int] = field(default_factory=list, repr=False)
    _obj_bases: np.ndarray = field(default=None, repr=False)
    _obj_ends: np.ndarray = field(default=None, repr=False)
    _cache_by_id: dict[str, Cache] = field(default_factory=dict, repr=False)
    _gp_sizes: list[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self.segments.sort(key=lambda s: s.base)
        self.heap_objects.sort(key=lambda o: o.base)
        self.statics.sort(key=lambda s: s.base)
        self._seg_bases = [s.base for s in self.segments]
        self._obj_bases = np.array([o.base for o in self.heap_objects], dtype=np.uint64)
        self._obj_ends = np.array([o.end for o in self.heap_objects], dtype=np.uint64)
        self._cache_by_id = {c.id: c for c in self.caches}
        self._gp_sizes = sorted(c.object_size for c in self.caches if c.general_purpose)

    @property
    def word_dtype(self) -> np.dtype:
        return np.dtype(f"{'<' if self.endianness == 'little' else '>'}u{self.pointer_size}")

    def cache(self, cache_id: str) -> Cache:
        return self._cache_by_id[cache_id]

    def segment_at(self, addr: int) -> Segment | None:
        i = bisect.bisect_right(self._seg_bases, addr) - 1
        if i >= 0 and addr < self.segments[i].end:
            return self.segments[i]
        return None

    def is_mapped(self, addr: int) -> bool:
        return addr != 0 and self.segment_at(addr) is not None

    def read_bytes(self, addr: int, n: int) -> bytes:
        seg = self.segment_at(addr)
        if seg is None or addr + n > seg.end:
            raise DumpError(f"address {addr:#x} is not mapped")
        off = addr - seg.base
        return seg.data[off:off + n]

    def read_word(self, addr: int) -> int:
        if addr % self.pointer_size:
            raise DumpError(f"address {addr:#x} is misaligned")
        return int.from_bytes(self.read_bytes(addr, self.pointer_size), self.endianness)

    def words(self, base: int, size: int) -> np.ndarray:
        """All aligned words of ``[base, base+size)`` as an unsigned array."""
        n = size // self.pointer_size
        return np.frombuffer(self.read_bytes(base, n * self.pointer_size), dtype=self.word_dtype)

    def object_containing(self, addr: int) -> tuple[HeapObject, int] | None:
        if not self.heap_objects or addr < 0 or addr >= 1 << 64:
            return None
        i = int(np.searchsorted(self._obj_bases, np.uint64(addr), side="right")) - 1
        if i >= 0 and addr < int(self._obj_ends[i]):
            obj = self.heap_objects[i]
            return obj, addr - obj.base
        return None

    def index_of(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized ``object_containing`` returning (object index or -1, offset)."""
        words = words.astype(np.uint64, copy=False)
        if not self.heap_objects:
            return np.full(words.shape, -1, dtype=np.int64), np.zeros(words.shape, dtype=np.uint64)
        idx = np.searchsorted(self._obj_bases, words, side="right").astype(np.int64) - 1
        safe = np.maximum(idx, 0)
        hit = (idx >= 0) & (words < self._obj_ends[safe])
        idx = np.where(hit, idx, -1)
        off = np.where(hit, words - self._obj_bases[safe], 0)
        return idx, off

    def next_smaller_gp_cache(self, size: int) -> int | None:
        i = bisect.bisect_left(self._gp_sizes, size)
        return self._gp_sizes[i - 1] if i > 0 else None

    def static_containing(self, addr: int) -> tuple[StaticObject, int] | None:
        for s in self.statics:
            if s.base <= addr < s.end:
                return s, addr - s.base
        return None


def _addr(v) -> int:
    if isinstance(v, int):
        return v
    return int(str(v), 16)


def load_dump(document: dict | str, catalog: TypeCatalog) -> DumpImage:
    """Validate a dump document against ``catalog`` and index it."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise DumpError(f"malformed dump document: {e}") from None
    try:
        if document.get("format_version") != 1:
            raise DumpError(f"unsupported format_version {document.get('format_version')!r}")
        psize = document["pointer_size"]
        endian = document["endianness"]
        if psize not in (4, 8):
            raise DumpError(f"pointer_size must be 4 or 8, got {psize!r}")
        if endian not in ("little", "big"):
            raise DumpError(f"endianness must be little or big, got {endian!r}")
        segments = [Segment(_addr(s["base"]), base64.b64decode(s["data"])) for s in document["segments"]]
        caches = [Cache(str(c["id"]), str(c["name"]), int(c["object_size"]), bool(c["general_purpose"]))
                  for c in document["caches"]]
        objects = [HeapObject(_addr(o["base"]), int(o["size"]), str(o["cache"])) for o in document["objects"]]
        statics = []
        for s in document["statics"]:
            tid = s["type"]
            if tid not in catalog:
                raise DumpError(f"static {s['symbol']!r}: unknown type {tid!r}")
            statics.append(StaticObject(str(s["symbol"]), _addr(s["base"]), catalog.size_of(tid), tid))
    except (KeyError, TypeError, AttributeError) as e:
        raise DumpError(f"malformed dump document: {e!r}") from None

    segments.sort(key=lambda s: s.base)
    for s in segments:
        if s.base % psize:
            raise DumpError(f"segment {s.base:#x} is not pointer-aligned")
    for a, b in zip(segments, segments[1:]):
        if b.base < a.end:
            raise DumpError(f"segments {a.base:#x} and {b.base:#x} overlap")

    ids = [c.id for c in caches]
    if len(set(ids)) != len(ids):
        raise DumpError("duplicate cache ids")
    gp = [c.object_size for c in caches if c.general_purpose]
    if len(set(gp)) != len(gp):
        raise DumpError("general-purpose cache sizes must be unique")
    by_id = {c.id: c for c in caches}
    for c in caches:
        if c.object_size <= 0:
            raise DumpError(f"cache {c.name!r}: object_size must be positive")

    image = DumpImage(psize, endian, segments, caches, objects, statics)

    for o in image.heap_objects:
        if o.cache not in by_id:
            raise DumpError(f"object {o.base:#x}: unknown cache id {o.cache!r}")
        if o.size <= 0 or o.size > by_id[o.cache].object_size:
            raise DumpError(f"object {o.base:#x}: size {o.size} invalid for cache {by_id[o.cache].name!r}")
        if o.base % psize:
            raise DumpError(f"object {o.base:#x} is not pointer-aligned")
    for a, b in zip(image.heap_objects, image.heap_objects[1:]):
        if b.base < a.end:
            raise DumpError(f"objects {a.base:#x} and {b.base:#x} overlap")
    for o in [*image.heap_objects, *image.statics]:
        seg = image.segment_at(o.base)
        if seg is None or o.end > seg.end:
            raise DumpError(f"object {o.base:#x} lies outside any segment")
    return image


def load_dump_file(path, catalog: TypeCatalog) -> DumpImage:
    with open(path, encoding="utf-8") as f:
        return load_dump(json.load(f), catalog)


def read_word(image: DumpImage, addr: int) -> int:
    return image.read_word(addr)


def object_containing(image: DumpImage, addr: int):
    return image.object_containing(addr)


def next_smaller_gp_cache(image: DumpImage, size: int) -> int | None:
    return image.next_smaller_gp_cache(size)


def encode_segment(base: int, data: bytes) -> dict:
    return {"base": f"{base:#x}", "data": base64.b64encode(data).decode("ascii")}
