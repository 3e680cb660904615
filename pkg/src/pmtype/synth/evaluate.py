"""Score a completed type graph against synthesizer ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..typegraph import ARRAY, FAM, TypeGraph
from .generate import GroundTruth


@dataclass
class EvalReport:
    nodes: int = 0
    correct: int = 0
    misidentified: int = 0
    conflicts: int = 0
    fragments: int = 0
    unknown: int = 0
    unrooted: int = 0
    wrong: list[tuple[int, str, str]] = field(default_factory=list)

    @property
    def recognition_rate(self) -> float:
        return (self.correct + self.fragments) / self.nodes if self.nodes else 0.0

    @property
    def misidentification_rate(self) -> float:
        denom = self.nodes - self.unrooted
        return self.misidentified / denom if denom > 0 else 0.0

    def render(self) -> str:
        rows = [
            ("nodes", self.nodes),
            ("correctly identified", self.correct),
            ("consistent fragments", self.fragments),
            ("misidentified", self.misidentified),
            ("conflicts", self.conflicts),
            ("unknown", self.unknown),
            ("unrooted (expected unknown)", self.unrooted),
            ("recognition rate", f"{100 * self.recognition_rate:.1f}%"),
            ("misidentification rate", f"{100 * self.misidentification_rate:.2f}%"),
        ]
        return "\n".join(f"eval: {k:>30} => {v}" for k, v in rows)


def _shape(kind: str, count: int) -> tuple[str, int]:
    if count == 1 and kind in ("single", "fam"):
        return "single", 1
    return kind, count


def evaluate(graph: TypeGraph, truth: GroundTruth) -> EvalReport:
    cat = graph.catalog
    by_base = truth.by_base()
    if len(by_base) != len(graph.heap_nodes):
        raise ValueError(f"truth covers {len(by_base)} objects, graph has {len(graph.heap_nodes)}")
    rep = EvalReport()
    for n in graph.heap_nodes:
        t = by_base.get(n.base)
        if t is None:
            raise ValueError(f"no truth for object {n.base:#x}")
        rep.nodes += 1
        if not t.rooted:
            rep.unrooted += 1
        c = n.certainty
        true_type = cat.resolve(t.type).id
        if c in ("known", "conjectured"):
            got = n.single
            v = n.verdict
            kind = {ARRAY: "array", FAM: "fam"}.get(v.kind, "single")
            count = v.count if v.kind in (ARRAY, FAM) else 1
            if got == true_type and _shape(kind, count) == _shape(t.kind, t.count):
                rep.correct += 1
            else:
                rep.misidentified += 1
                rep.wrong.append((n.base, f"{cat.get(got).name} {kind}({count})",
                                  f"{cat.get(true_type).name} {t.kind}({t.count})"))
        elif c == "conflict":
            rep.conflicts += 1
        elif c == "fragment":
            if all(_fragment_ok(graph, t, f.offset, f.type) for f in n.fragments):
                rep.fragments += 1
            else:
                rep.misidentified += 1
                rep.wrong.append((n.base, "fragments", cat.get(true_type).name))
        else:
            rep.unknown += 1
    return rep


def _fragment_ok(graph: TypeGraph, truth, offset: int, ftype: str) -> bool:
    cat = graph.catalog
    tt = cat.resolve(truth.type)
    if truth.kind == "array":
        if tt.size == 0:
            return False
        offset %= tt.size
    elif truth.kind == "fam" and offset >= tt.size:
        elem, f_off = cat.detect_fam(tt.id)
        es = cat.size_of(elem)
        return cat.type_at(elem, (offset - f_off) % es, ftype)
    return cat.type_at(tt.id, offset, ftype)
