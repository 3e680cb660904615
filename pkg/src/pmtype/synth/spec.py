"""Scenario descriptions for the dump synthesizer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

DIRECTIVES = ("alloc", "link", "static", "hold_lock", "inject_cast", "inject_stale", "leave_unrooted")


class SpecError(ValueError):
    pass


@dataclass
class SynthSpec:
    """A replayable allocation scenario.

    ``script`` is a list of directive dicts, each with an ``op`` key:

    - ``alloc``: ``name``, ``type``; optional ``count`` (array elements),
      ``fam`` (flexible-array element count), ``cache`` (typed cache name),
      ``fill`` (``"text"`` for printable bytes)
    - ``link``: ``src``, ``path``, ``dst``; optional ``dst_path`` or ``dst_offset``
    - ``static``: ``symbol``, ``type``; optional ``links`` list of ``{path, dst, ...}``
    - ``hold_lock``: ``object``, ``path``, ``owner``
    - ``inject_cast`` / ``inject_stale``: like ``link``, logged as injections
    - ``leave_unrooted``: ``object``
    """

    catalog: dict
    gp_caches: list[int]
    typed_caches: list[dict] = field(default_factory=list)
    script: list[dict] = field(default_factory=list)
    seed: int = 0
    pointer_size: int = 8
    endianness: str = "little"
    adversarial: bool = False
    free_slot_every: int = 0

    def __post_init__(self) -> None:
        if self.pointer_size not in (4, 8):
            raise SpecError("pointer_size must be 4 or 8")
        if len(set(self.gp_caches)) != len(self.gp_caches):
            raise SpecError("general-purpose cache sizes must be unique")
        for d in self.script:
            if d.get("op") not in DIRECTIVES:
                raise SpecError(f"unknown directive {d.get('op')!r}")

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise SpecError(f"unknown spec fields {sorted(extra)}")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        if isinstance(doc.get("catalog"), str):
            import os
            cpath = os.path.join(os.path.dirname(os.fspath(path)), doc["catalog"])
            with open(cpath, encoding="utf-8") as f:
                doc["catalog"] = json.load(f)
        return cls.from_dict(doc)


class Script:
    """Small helper for assembling directive lists in code."""

    def __init__(self) -> None:
        self.directives: list[dict] = []
        self._n = 0

    def alloc(self, type: str, *, count: int = 1, fam: int | None = None, cache: str | None = None,
              name: str | None = None, fill: str | None = None) -> str:
        if name is None:
            name = f"o{self._n}"
            self._n += 1
        d = {"op": "alloc", "name": name, "type": type}
        if count != 1:
            d["count"] = count
        if fam is not None:
            d["fam"] = fam
        if cache is not None:
            d["cache"] = cache
        if fill is not None:
            d["fill"] = fill
        self.directives.append(d)
        return name

    def link(self, src: str, path: str, dst: str, *, dst_path: str | None = None, op: str = "link") -> None:
        d = {"op": op, "src": src, "path": path, "dst": dst}
        if dst_path:
            d["dst_path"] = dst_path
        self.directives.append(d)

    def static(self, symbol: str, type: str, links: list[dict] | None = None) -> str:
        self.directives.append({"op": "static", "symbol": symbol, "type": type, "links": links or []})
        return symbol

    def hold_lock(self, obj: str, path: str, owner: int) -> None:
        self.directives.append({"op": "hold_lock", "object": obj, "path": path, "owner": owner})

    def inject_cast(self, src: str, path: str, dst: str) -> None:
        self.link(src, path, dst, op="inject_cast")

    def inject_stale(self, src: str, path: str, dst: str) -> None:
        self.link(src, path, dst, op="inject_stale")

    def leave_unrooted(self, obj: str) -> None:
        self.directives.append({"op": "leave_unrooted", "object": obj})
