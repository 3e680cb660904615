"""Compiler-style type catalog.

A catalog is the universe of named types a dump was compiled against:
base types, structs, unions, pointers, fixed arrays and typedefs.  It is
loaded from a JSON document and answers the structural questions the
inference engine needs (pointer locations, trailing flexible array
members, embedded synchronization primitives).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

KINDS = ("base", "struct", "union", "pointer", "array", "typedef", "function")
FLAGS = ("sync_primitive",)

_COMMON_FIELDS = {"id", "kind", "name", "size", "flags"}
_KIND_FIELDS = {
    "base": set(),
    "function": set(),
    "struct": {"members"},
    "union": {"members"},
    "pointer": {"pointee"},
    "array": {"element_type", "element_count"},
    "typedef": {"target"},
}


class CatalogError(ValueError):
    """Raised when a catalog document is rejected."""


@dataclass(frozen=True)
class Member:
    name: str
    offset: int
    type: str


@dataclass(frozen=True)
class TypeDef:
    id: str
    kind: str
    name: str
    size: int
    members: tuple[Member, ...] = ()
    pointee: str | None = None
    element_type: str | None = None
    element_count: int | None = None
    target: str | None = None
    flags: frozenset[str] = frozenset()

    @property
    def is_struct(self) -> bool:
        return self.kind == "struct"

    @property
    def sync_primitive(self) -> bool:
        return "sync_primitive" in self.flags


@dataclass(frozen=True)
class MemberPath:
    """Route from an outermost type down to a nested member.

    ``steps`` holds ``(type name, member name)`` pairs; array elements
    appear as member names of the form ``[i]``.
    """

    root: str
    steps: tuple[tuple[str, str], ...]
    type: str
    offset: int

    def extend(self, type_name: str, member: str, type_id: str, offset: int) -> "MemberPath":
        return MemberPath(self.root, self.steps + ((type_name, member),), type_id, self.offset + offset)

    def member_names(self) -> str:
        out = ""
        for _, name in self.steps:
            out += name if name.startswith("[") else ("." + name if out else name)
        return out

    def __str__(self) -> str:
        names = self.member_names()
        if not names:
            return self.root
        return f"{self.root}{names}" if names.startswith("[") else f"{self.root}.{names}"


class TypeCatalog:
    """Immutable, validated set of types indexed by id and by name."""

    def __init__(self, types: Iterable[TypeDef]):
        self._by_id: dict[str, TypeDef] = {}
        self._by_name: dict[str, TypeDef] = {}
        for t in types:
            if t.id in self._by_id:
                raise CatalogError(f"duplicate type id {t.id!r}")
            self._by_id[t.id] = t
            self._by_name.setdefault(t.name, t)
        self._validate()
        self._ptr_cache: dict[str, tuple[tuple[int, str, MemberPath], ...]] = {}
        self._sync_cache: dict[str, tuple[tuple[int, str, MemberPath], ...]] = {}

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[TypeDef]:
        return iter(self._by_id.values())

    def __contains__(self, type_id: object) -> bool:
        return type_id in self._by_id

    def get(self, type_id: str) -> TypeDef:
        try:
            return self._by_id[type_id]
        except KeyError:
            raise KeyError(f"unknown type id {type_id!r}") from None

    def by_name(self, name: str) -> TypeDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"unknown type name {name!r}") from None

    def lookup(self, spelling: str) -> TypeDef:
        """Find a type by id, exact name, or a ``struct``/``union``-less spelling."""
        s = " ".join(spelling.split())
        if s in self._by_id:
            return self._by_id[s]
        if s in self._by_name:
            return self._by_name[s]
        for prefix in ("struct ", "union "):
            if s.startswith(prefix) and s[len(prefix):] in self._by_name:
                return self._by_name[s[len(prefix):]]
            if prefix + s in self._by_name:
                return self._by_name[prefix + s]
        raise KeyError(f"unknown type {spelling!r}")

    def size_of(self, type_id: str) -> int:
        return self.get(type_id).size

    # -- validation -------------------------------------------------------

    def _validate(self) -> None:
        for t in self._by_id.values():
            if t.kind not in KINDS:
                raise CatalogError(f"type {t.id!r}: unknown kind {t.kind!r}")
            if t.size < 0:
                raise CatalogError(f"type {t.id!r}: negative size")
            bad = set(t.flags) - set(FLAGS)
            if bad:
                raise CatalogError(f"type {t.id!r}: unknown flags {sorted(bad)}")
            for ref in self._refs(t):
                if ref not in self._by_id:
                    raise CatalogError(f"type {t.id!r}: dangling reference to {ref!r}")
        for t in self._by_id.values():
            if t.kind == "typedef":
                self._check_typedef_chain(t)
        for t in self._by_id.values():
            self._check_layout(t)

    @staticmethod
    def _refs(t: TypeDef) -> list[str]:
        if t.kind in ("struct", "union"):
            return [m.type for m in t.members]
        if t.kind == "pointer":
            return [t.pointee] if t.pointee is not None else []
        if t.kind == "array":
            return [t.element_type] if t.element_type is not None else []
        if t.kind == "typedef":
            return [t.target] if t.target is not None else []
        return []

    def _check_typedef_chain(self, t: TypeDef) -> None:
        seen = {t.id}
        cur = t
        while cur.kind == "typedef":
            nxt = self._by_id[cur.target]
            if nxt.id in seen:
                raise CatalogError(f"type {t.id!r}: cyclic typedef chain")
            seen.add(nxt.id)
            cur = nxt

    def _check_layout(self, t: TypeDef) -> None:
        if t.kind == "pointer" and t.pointee is None:
            raise CatalogError(f"type {t.id!r}: pointer without pointee")
        if t.kind == "typedef":
            if t.target is None:
                raise CatalogError(f"type {t.id!r}: typedef without target")
            if t.size != self.resolve(t.id).size:
                raise CatalogError(f"type {t.id!r}: size differs from typedef target")
        if t.kind == "array":
            if t.element_type is None or t.element_count is None or t.element_count < 0:
                raise CatalogError(f"type {t.id!r}: malformed array")
            if t.size != t.element_count * self._by_id[t.element_type].size:
                raise CatalogError(f"type {t.id!r}: size != element_count * element size")
        if t.kind == "struct":
            last = -1
            for m in t.members:
                if m.offset <= last:
                    raise CatalogError(f"type {t.id!r}: member {m.name!r} offset not increasing")
                last = m.offset
                if m.offset + self._by_id[m.type].size > t.size:
                    raise CatalogError(f"type {t.id!r}: member {m.name!r} exceeds struct size")
        if t.kind == "union":
            for m in t.members:
                if m.offset != 0:
                    raise CatalogError(f"type {t.id!r}: union member {m.name!r} at nonzero offset")
                if self._by_id[m.type].size > t.size:
                    raise CatalogError(f"type {t.id!r}: union member {m.name!r} exceeds union size")

    # -- structural queries ---------------------------------------------

    def resolve(self, type_id: str) -> TypeDef:
        t = self.get(type_id)
        while t.kind == "typedef":
            t = self._by_id[t.target]
        return t

    def pointer_members(self, type_id: str) -> tuple[tuple[int, str, MemberPath], ...]:
        """Every pointer-typed location inside one instance of ``type_id``.

        Returns ``(offset, pointee id, path)`` triples in ascending offset
        order, flattened through embedded structs, unions and fixed arrays.
        Pointers to functions are omitted.  A bare pointer or array type is
        accepted too (a static ``foo_t *`` is one pointer at offset 0).
        """
        t = self.resolve(type_id)
        cached = self._ptr_cache.get(t.id)
        if cached is None:
            out: list[tuple[int, str, MemberPath]] = []
            self._walk(t, MemberPath(t.name, (), t.id, 0), out, self._pointer_leaf)
            out.sort(key=lambda x: x[0])
            cached = self._ptr_cache[t.id] = tuple(out)
        return cached

    def sync_members(self, type_id: str) -> tuple[tuple[int, str, MemberPath], ...]:
        """Every synchronization primitive embedded in ``type_id``.

        A flagged type is itself a primitive at offset 0 with an empty path.
        """
        t = self.resolve(type_id)
        cached = self._sync_cache.get(t.id)
        if cached is None:
            out: list[tuple[int, str, MemberPath]] = []
            self._walk(t, MemberPath(t.name, (), t.id, 0), out, self._sync_leaf)
            out.sort(key=lambda x: x[0])
            cached = self._sync_cache[t.id] = tuple(out)
        return cached

    def _pointer_leaf(self, t: TypeDef, path: MemberPath, out: list) -> bool:
        if t.kind != "pointer":
            return False
        if self.resolve(t.pointee).kind != "function":
            out.append((path.offset, t.pointee, path))
        return True

    def _sync_leaf(self, t: TypeDef, path: MemberPath, out: list) -> bool:
        if t.sync_primitive:
            out.append((path.offset, t.id, path))
            return True
        return t.kind == "pointer"

    def _walk(self, t: TypeDef, path: MemberPath, out: list, leaf) -> None:
        if leaf(t, path, out):
            return
        if t.kind in ("struct", "union"):
            for m in t.members:
                mt = self.resolve(m.type)
                self._walk(mt, path.extend(t.name, m.name, mt.id, m.offset), out, leaf)
        elif t.kind == "array":
            et = self.resolve(t.element_type)
            for i in range(t.element_count):
                self._walk(et, path.extend(t.name, f"[{i}]", et.id, i * et.size), out, leaf)

    def detect_fam(self, type_id: str) -> tuple[str, int] | None:
        """Return ``(element type, offset)`` if the struct ends in a ``[1]`` or ``[]`` array."""
        t = self.resolve(type_id)
        if t.kind != "struct":
            raise TypeError(f"{t.name!r} is not a struct")
        if not t.members:
            return None
        last = t.members[-1]
        lt = self.resolve(last.type)
        if lt.kind == "array" and lt.element_count in (0, 1):
            return lt.element_type, last.offset
        return None

    def type_at(self, outer: str, offset: int, inner: str) -> bool:
        """True if ``inner`` sits at ``offset`` somewhere inside ``outer``."""
        t = self.resolve(outer)
        want = self.resolve(inner).id
        if offset == 0 and t.id == want:
            return True
        if offset < 0 or offset >= max(t.size, 1):
            return False
        if t.kind in ("struct", "union"):
            return any(
                m.offset <= offset < m.offset + max(self.size_of(m.type), 1)
                and self.type_at(m.type, offset - m.offset, want)
                for m in t.members
            )
        if t.kind == "array":
            es = self.resolve(t.element_type).size
            if es == 0:
                return False
            return self.type_at(t.element_type, offset % es, want)
        return False


def _parse_type(entry: Any) -> TypeDef:
    if not isinstance(entry, dict):
        raise CatalogError(f"type entry must be an object, got {type(entry).__name__}")
    tid = entry.get("id", "<missing id>")
    kind = entry.get("kind")
    if kind not in _KIND_FIELDS:
        raise CatalogError(f"type {tid!r}: unknown kind {kind!r}")
    allowed = _COMMON_FIELDS | _KIND_FIELDS[kind]
    unknown = set(entry) - allowed
    if unknown:
        raise CatalogError(f"type {tid!r}: unknown fields {sorted(unknown)}")
    for req in ("id", "name", "size"):
        if req not in entry:
            raise CatalogError(f"type {tid!r}: missing field {req!r}")
    if not isinstance(entry["size"], int) or isinstance(entry["size"], bool):
        raise CatalogError(f"type {tid!r}: size must be an integer")
    members = []
    for m in entry.get("members", []):
        if not isinstance(m, dict) or set(m) != {"name", "offset", "type"}:
            raise CatalogError(f"type {tid!r}: malformed member {m!r}")
        members.append(Member(str(m["name"]), int(m["offset"]), str(m["type"])))
    if kind in ("struct", "union") and "members" not in entry:
        raise CatalogError(f"type {tid!r}: {kind} without members")
    return TypeDef(
        id=str(entry["id"]),
        kind=kind,
        name=str(entry["name"]),
        size=entry["size"],
        members=tuple(members),
        pointee=entry.get("pointee"),
        element_type=entry.get("element_type"),
        element_count=entry.get("element_count"),
        target=entry.get("target"),
        flags=frozenset(entry.get("flags", ())),
    )


def load_catalog(document: dict | str) -> TypeCatalog:
    """Build a catalog from a parsed document or a JSON string."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise CatalogError(f"malformed catalog document: {e}") from None
    if not isinstance(document, dict) or not isinstance(document.get("types"), list):
        raise CatalogError("catalog document must have a top-level 'types' list")
    if set(document) - {"types"}:
        raise CatalogError(f"unknown top-level fields {sorted(set(document) - {'types'})}")
    return TypeCatalog(_parse_type(e) for e in document["types"])


def load_catalog_file(path) -> TypeCatalog:
    with open(path, encoding="utf-8") as f:
        return load_catalog(json.load(f))


def resolve(catalog: TypeCatalog, type_id: str) -> TypeDef:
    return catalog.resolve(type_id)


def pointer_members(catalog: TypeCatalog, type_id: str):
    return catalog.pointer_members(type_id)


def detect_fam(catalog: TypeCatalog, type_id: str):
    return catalog.detect_fam(type_id)


def sync_members(catalog: TypeCatalog, type_id: str):
    return catalog.sync_members(type_id)


@dataclass
class CatalogBuilder:
    """Assemble a catalog document with natural-alignment struct layout.

    Type ids are the C spellings (``"struct foo"``, ``"char *"``).
    """

    pointer_size: int = 8
    types: dict[str, dict] = field(default_factory=dict)
    _align: dict[str, int] = field(default_factory=dict)

    def base(self, name: str, size: int, *, align: int | None = None, flags: Iterable[str] = ()) -> str:
        self._add({"id": name, "kind": "base", "name": name, "size": size}, align or max(size, 1), flags)
        return name

    def function(self, name: str) -> str:
        self._add({"id": name, "kind": "function", "name": name, "size": 0}, 1, ())
        return name

    def pointer(self, pointee: str) -> str:
        tid = f"{pointee}*" if pointee.endswith("*") else f"{pointee} *"
        if tid not in self.types:
            self._add({"id": tid, "kind": "pointer", "name": tid, "size": self.pointer_size, "pointee": pointee},
                      self.pointer_size, ())
        return tid

    def array(self, element: str, count: int | None) -> str:
        n = 0 if count is None else count
        tid = f"{element}[{'' if count is None else count}]"
        if tid not in self.types:
            self._add({"id": tid, "kind": "array", "name": tid, "size": n * self.size(element),
                       "element_type": element, "element_count": n}, self._align[element], ())
        return tid

    def typedef(self, name: str, target: str) -> str:
        self._add({"id": name, "kind": "typedef", "name": name, "size": self.size(target), "target": target},
                  self._align[target], ())
        return name

    def declare(self, name: str) -> str:
        """Forward-declare a struct so self-referential pointers can be built."""
        self.types.setdefault(name, {"id": name, "kind": "struct", "name": name, "size": 0, "members": []})
        self._align.setdefault(name, 1)
        return name

    def struct(self, name: str, members: list[tuple[str, str]], *, flags: Iterable[str] = (),
               union: bool = False, size: int | None = None) -> str:
        off = 0
        align = 1
        out = []
        for mname, mtype in members:
            a = self._align[mtype]
            align = max(align, a)
            if not union:
                off = (off + a - 1) // a * a
            out.append({"name": mname, "offset": 0 if union else off, "type": mtype})
            if union:
                off = max(off, self.size(mtype))
            else:
                off += self.size(mtype)
        total = (off + align - 1) // align * align
        if size is not None:
            total = max(total, size)
        self.types[name] = {"id": name, "kind": "union" if union else "struct", "name": name,
                            "size": total, "members": out}
        if flags:
            self.types[name]["flags"] = sorted(flags)
        self._align[name] = align
        return name

    def size(self, tid: str) -> int:
        return self.types[tid]["size"]

    def _add(self, entry: dict, align: int, flags: Iterable[str]) -> None:
        if flags:
            entry["flags"] = sorted(flags)
        self.types[entry["id"]] = entry
        self._align[entry["id"]] = align

    def document(self) -> dict:
        return {"types": [dict(t) for t in self.types.values()]}

    def build(self) -> TypeCatalog:
        return load_catalog(self.document())
