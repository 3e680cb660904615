"""Synthesize dump documents (plus ground truth) from allocation scenarios."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dumpio import encode_segment
from ..typecat import TypeCatalog, TypeDef, load_catalog
from .spec import SpecError, SynthSpec

# Address plan.  Integer members hold values < 1024 and character bytes
# lie in 0x21..0x7e, so no word assembled from them can reach a segment.
_LAYOUT = {
    8: dict(static_base=0xFFFF_FE00_0000_0000, heap_base=0xFFFF_8000_0000_0000,
            region=1 << 32, jitter=1 << 24, owner_base=0xFFFF_0A00_0000_0000),
    4: dict(static_base=0xF000_0000, heap_base=0x8000_0000,
            region=1 << 24, jitter=1 << 20, owner_base=0x7F00_0000),
}
_TOKEN = re.compile(r"\[(\d+)\]|([A-Za-z_]\w*)")
_PATH = re.compile(r"(?:\[\d+\]|\.?[A-Za-z_]\w*)*")


@dataclass
class TruthObject:
    name: str
    base: int
    size: int
    type: str
    kind: str
    count: int
    cache: str
    rooted: bool = False


@dataclass
class GroundTruth:
    objects: list[TruthObject] = field(default_factory=list)
    held_locks: list[tuple[int, int]] = field(default_factory=list)
    injections: list[dict] = field(default_factory=list)
    statics: dict[str, int] = field(default_factory=dict)

    def by_name(self) -> dict[str, TruthObject]:
        return {o.name: o for o in self.objects}

    def by_base(self) -> dict[int, TruthObject]:
        return {o.base: o for o in self.objects}

    def to_dict(self) -> dict:
        return {
            "objects": [asdict(o) | {"base": f"{o.base:#x}"} for o in self.objects],
            "held_locks": [[f"{a:#x}", f"{o:#x}"] for a, o in self.held_locks],
            "injections": [dict(i) | {"dst": f"{i['dst']:#x}"} for i in self.injections],
            "statics": {k: f"{v:#x}" for k, v in self.statics.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GroundTruth":
        return cls(
            objects=[TruthObject(**(o | {"base": int(o["base"], 16)})) for o in doc["objects"]],
            held_locks=[(int(a, 16), int(o, 16)) for a, o in doc["held_locks"]],
            injections=[i | {"dst": int(i["dst"], 16)} for i in doc["injections"]],
            statics={k: int(v, 16) for k, v in doc.get("statics", {}).items()},
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path) -> "GroundTruth":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


@dataclass
class _Placed:
    name: str
    base: int
    size: int
    type: TypeDef
    kind: str
    count: int
    cache: str = ""
    static: bool = False
    fill: str | None = None
    decl: str = ""


class _Memory:
    def __init__(self, pointer_size: int, endianness: str):
        self.ps = pointer_size
        self.endian = endianness
        self.regions: list[tuple[int, bytearray]] = []

    def add(self, base: int, size: int) -> None:
        self.regions.append((base, bytearray(size)))

    def _locate(self, addr: int, n: int) -> tuple[bytearray, int]:
        for base, buf in self.regions:
            if base <= addr and addr + n <= base + len(buf):
                return buf, addr - base
        raise SpecError(f"write to unmapped address {addr:#x}")

    def write(self, addr: int, value: int, n: int) -> None:
        buf, off = self._locate(addr, n)
        buf[off:off + n] = int(value).to_bytes(n, self.endian)

    def write_bytes(self, addr: int, data: bytes) -> None:
        buf, off = self._locate(addr, len(data))
        buf[off:off + len(data)] = data

    def read_word(self, addr: int) -> int:
        buf, off = self._locate(addr, self.ps)
        return int.from_bytes(buf[off:off + self.ps], self.endian)


def resolve_path(cat: TypeCatalog, obj: _Placed, path: str) -> tuple[int, TypeDef]:
    """Offset and type of ``path`` inside a placed object.

    A leading ``[i]`` indexes an array allocation; ``[i]`` on a trailing
    ``[1]``/``[]`` member may run past its declared bound.
    """
    cur = obj.type
    off = 0
    if not _PATH.fullmatch(path):
        raise SpecError(f"malformed member path {path!r}")
    tokens = _TOKEN.findall(path)
    for k, (idx, name) in enumerate(tokens):
        if idx:
            i = int(idx)
            if k == 0 and obj.kind == "array":
                if i >= obj.count:
                    raise SpecError(f"{obj.name}: index {i} out of range")
                off += i * cur.size
                continue
            if cur.kind != "array":
                raise SpecError(f"{obj.name}: {path!r} indexes a non-array")
            if i >= cur.element_count and cur.element_count > 1:
                raise SpecError(f"{obj.name}: index {i} out of range in {path!r}")
            cur = cat.resolve(cur.element_type)
            off += i * cur.size
            continue
        if cur.kind not in ("struct", "union"):
            raise SpecError(f"{obj.name}: {path!r} names a member of non-struct {cur.name!r}")
        for m in cur.members:
            if m.name == name:
                off += m.offset
                cur = cat.resolve(m.type)
                break
        else:
            raise SpecError(f"{obj.name}: {cur.name!r} has no member {name!r}")
    if off >= obj.size and obj.size:
        raise SpecError(f"{obj.name}: {path!r} lies outside the object")
    return off, cur


def _leaves(cat: TypeCatalog, t: TypeDef, off: int, out: list) -> None:
    """Scalar (non-pointer) leaves outside sync primitives: (offset, size, is_char)."""
    if t.sync_primitive or t.kind in ("pointer", "union", "function"):
        return
    if t.kind == "base":
        if t.size:
            out.append((off, t.size, t.size == 1))
    elif t.kind == "struct":
        for m in t.members:
            _leaves(cat, cat.resolve(m.type), off + m.offset, out)
    elif t.kind == "array":
        et = cat.resolve(t.element_type)
        for i in range(t.element_count):
            _leaves(cat, et, off + i * et.size, out)


def generate(spec: SynthSpec) -> tuple[dict, GroundTruth]:
    """Lay out and write every scripted object; return (dump document, truth)."""
    cat = load_catalog(spec.catalog)
    ps = spec.pointer_size
    lay = _LAYOUT[ps]
    rng = np.random.default_rng(spec.seed)
    for t in cat:
        if t.kind == "pointer" and t.size != ps:
            raise SpecError(f"catalog pointer {t.name!r} does not match pointer_size {ps}")

    gp_sizes = sorted(spec.gp_caches)
    caches = [{"id": f"gp{s}", "name": f"kmem_alloc_{s}", "object_size": s, "general_purpose": True}
              for s in gp_sizes]
    typed = {}
    for i, tc in enumerate(spec.typed_caches):
        t = cat.resolve(cat.lookup(tc["type"]).id)
        c = {"id": f"tc{i}", "name": tc["name"], "object_size": t.size, "general_purpose": False}
        typed[tc["name"]] = (c, t)
        caches.append(c)

    objects: dict[str, _Placed] = {}
    statics: dict[str, _Placed] = {}
    slots: dict[str, list[_Placed]] = {c["id"]: [] for c in caches}
    for d in spec.script:
        if d["op"] == "alloc":
            name = d["name"]
            if name in objects:
                raise SpecError(f"object {name!r} allocated twice")
            t = cat.resolve(cat.lookup(d["type"]).id)
            count, kind = d.get("count", 1), "single"
            if d.get("fam") is not None:
                fam = cat.detect_fam(t.id)
                if fam is None:
                    raise SpecError(f"{t.name!r} has no flexible array member")
                es = cat.size_of(fam[0])
                declared = cat.resolve(t.members[-1].type).element_count
                count, kind = d["fam"], "fam"
                request = t.size + (count - 1) * es if declared == 1 else t.size + count * es
            else:
                if count > 1:
                    kind = "array"
                request = count * t.size
            if d.get("cache"):
                c, ct = typed[d["cache"]]
                if ct.id != t.id or kind != "single":
                    raise SpecError(f"{name!r}: typed cache {d['cache']!r} holds {ct.name!r}")
            else:
                fits = [s for s in gp_sizes if s >= request]
                if not fits:
                    raise SpecError(f"{name!r}: no general-purpose cache holds {request} bytes")
                c = caches[gp_sizes.index(fits[0])]
            p = _Placed(name, 0, c["object_size"], t, kind, count, c["id"], fill=d.get("fill"))
            objects[name] = p
            slots[c["id"]].append(p)
        elif d["op"] == "static":
            sym = d["symbol"]
            t = cat.resolve(cat.lookup(d["type"]).id)
            statics[sym] = _Placed(sym, 0, t.size, t, "single", 1, static=True, decl=cat.lookup(d["type"]).id)

    mem = _Memory(ps, spec.endianness)
    heap_base = lay["heap_base"] + int(rng.integers(0, 16)) * lay["jitter"]
    seg_docs = []
    for ci, c in enumerate(caches):
        objs = slots[c["id"]]
        if not objs:
            continue
        stride = -(-c["object_size"] // ps) * ps
        base = heap_base + ci * lay["region"]
        k = 0
        for j, p in enumerate(objs):
            if spec.free_slot_every and j and j % spec.free_slot_every == 0:
                k += 1
            p.base = base + k * stride
            k += 1
        mem.add(base, k * stride)
    sbase = lay["static_base"]
    off = 0
    for p in statics.values():
        p.base = sbase + off
        off += -(-max(p.size, 1) // 16) * 16
    if statics:
        mem.add(sbase, off)

    names = {**objects, **statics}
    everything = list(objects.values()) + list(statics.values())
    leaf_cache: dict[str, list] = {}
    object_bases = [p.base for p in objects.values()]
    for p in everything:
        if p.fill == "text":
            mem.write_bytes(p.base, bytes(rng.integers(0x21, 0x7F, p.size, dtype=np.uint8)))
            continue
        leaves = leaf_cache.get(p.type.id)
        if leaves is None:
            leaves = leaf_cache[p.type.id] = []
            _leaves(cat, p.type, 0, leaves)
        n_elem = p.count if p.kind == "array" else 1
        for e in range(n_elem):
            eoff = e * p.type.size
            for loff, lsize, is_char in leaves:
                if is_char:
                    v = int(rng.integers(0x21, 0x7F))
                elif spec.adversarial and lsize == ps and object_bases:
                    v = object_bases[int(rng.integers(0, len(object_bases)))]
                else:
                    v = int(rng.integers(0, 512)) * 2 + 1
                    v &= (1 << (8 * lsize)) - 1
                mem.write(p.base + eoff + loff, v, lsize)

    truth = GroundTruth()
    adj: dict[str, list[str]] = {n: [] for n in names}

    def write_link(src: _Placed, path: str, d: dict, log_kind: str | None) -> None:
        off, pt = resolve_path(cat, src, path)
        if pt.kind != "pointer":
            raise SpecError(f"{src.name}.{path}: not a pointer member")
        dst_name = d["dst"]
        if dst_name not in objects:
            raise SpecError(f"link to undefined object {dst_name!r}")
        dst = objects[dst_name]
        doff = d.get("dst_offset", 0)
        if d.get("dst_path"):
            doff, _ = resolve_path(cat, dst, d["dst_path"])
        mem.write(src.base + off, dst.base + doff, ps)
        pointee = cat.resolve(pt.pointee)
        if pointee.size and pointee.kind != "function":
            adj[src.name].append(dst_name)
        if log_kind:
            truth.injections.append({"kind": log_kind, "src": src.name, "path": path, "dst": dst.base,
                                     "dst_name": dst_name, "stale_type": pointee.name,
                                     "true_type": dst.type.name})

    owner_mask = ((1 << (8 * ps)) - 1) & ~0x7
    unrooted_forced = set()
    for d in spec.script:
        op = d["op"]
        if op in ("link", "inject_cast", "inject_stale"):
            if d["src"] not in names:
                raise SpecError(f"link from undefined object {d['src']!r}")
            write_link(names[d["src"]], d["path"], d, None if op == "link" else op[len("inject_"):])
        elif op == "static":
            for ln in d.get("links", []):
                write_link(statics[d["symbol"]], ln.get("path", ""), ln, None)
        elif op == "hold_lock":
            if d["object"] not in names:
                raise SpecError(f"lock in undefined object {d['object']!r}")
            p = names[d["object"]]
            off, lt = resolve_path(cat, p, d.get("path", ""))
            if not lt.sync_primitive:
                raise SpecError(f"{p.name}.{d.get('path')}: not a synchronization primitive")
            owner = int(d["owner"])
            mem.write(p.base + off, owner | int(rng.integers(0, 2)), ps)
            truth.held_locks.append((p.base + off, owner & owner_mask))
        elif op == "leave_unrooted":
            if d["object"] not in objects:
                raise SpecError(f"undefined object {d['object']!r}")
            unrooted_forced.add(d["object"])

    rooted = set(statics)
    q = deque(statics)
    while q:
        for nxt in adj[q.popleft()]:
            if nxt not in rooted:
                rooted.add(nxt)
                q.append(nxt)

    for p in sorted(objects.values(), key=lambda p: p.base):
        truth.objects.append(TruthObject(p.name, p.base, p.size, p.type.id, p.kind, p.count, p.cache,
                                         p.name in rooted and p.name not in unrooted_forced))
    truth.statics = {s: p.base for s, p in statics.items()}
    truth.held_locks.sort()

    doc = {
        "format_version": 1,
        "pointer_size": ps,
        "endianness": spec.endianness,
        "segments": [encode_segment(b, bytes(buf)) for b, buf in sorted(mem.regions)],
        "caches": caches,
        "objects": [{"base": f"{o.base:#x}", "size": o.size, "cache": o.cache} for o in truth.objects],
        "statics": [{"symbol": s, "base": f"{p.base:#x}", "type": p.decl} for s, p in statics.items()],
    }
    return doc, truth


def owner_address(pointer_size: int, k: int) -> int:
    """A plausible, unmapped thread address for lock owners."""
    return _LAYOUT[pointer_size]["owner_base"] + k * 0x40


def write_dump(doc: dict, truth: GroundTruth, path) -> None:
    """Write ``path`` and its ``<path>.truth`` sidecar."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
    truth.save(f"{path}.truth")
