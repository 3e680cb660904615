"""Object/pointer graph and the type-inference pass pipeline.

One node per heap object and per static symbol; one edge per aligned word
that points into a heap object.  Type information flows outward from
nodes of known type in a sequence of increasingly aggressive passes:

1. conservative propagation (base-offset inferences, interior fragments)
2. array / flexible-array-member determination, to a fixpoint
3. coalescence of struct vs. non-struct inferences
4. non-array inference for oversized single-inference nodes
5. a closing array + conservative sweep
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field

from .dumpio import DumpImage
from .typecat import MemberPath, TypeCatalog, TypeDef

log = logging.getLogger(__name__)

UNDETERMINED = "undetermined"
ARRAY = "array"
FAM = "fam"
NOT_ARRAY = "not_array"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Referrer:
    """Who drew an inference: referring node, source offset, and the
    type (and member path within it) through which the pointer was read."""

    node: int
    offset: int
    type: str
    path: MemberPath


@dataclass(frozen=True)
class FragmentNote:
    offset: int
    type: str
    via: MemberPath
    referrer: int
    src_offset: int


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    src_offset: int
    dst: int
    dst_offset: int


@dataclass(frozen=True)
class Verdict:
    kind: str = UNDETERMINED
    count: int = 0
    element: str | None = None
    type: str | None = None


@dataclass(eq=False)
class Node:
    id: int
    base: int
    size: int
    kind: str
    cache: str | None = None
    symbol: str | None = None
    inferences: dict[str, list[Referrer]] = field(default_factory=dict)
    known: bool = False
    pinned: bool = False
    marked: bool = False
    fragments: list[FragmentNote] = field(default_factory=list)
    verdict: Verdict = Verdict()
    rejected: list[tuple[str, str, Referrer]] = field(default_factory=list)
    out_edges: list[int] = field(default_factory=list)
    in_edges: list[int] = field(default_factory=list)
    out_by_offset: dict[int, Edge] = field(default_factory=dict, repr=False)

    @property
    def end(self) -> int:
        return self.base + self.size

    @property
    def single(self) -> str | None:
        if len(self.inferences) == 1:
            return next(iter(self.inferences))
        return None

    @property
    def certainty(self) -> str:
        if self.known or self.pinned:
            return "known"
        if len(self.inferences) > 1:
            return "conflict"
        if self.inferences:
            return "conjectured"
        if self.fragments:
            return "fragment"
        return "unknown"


@dataclass
class PassStats:
    label: str
    nodes: int
    unmarked: int
    known: int
    conjectured: int
    conjectured_fragments: int
    known_or_conjectured: int
    conflicts: int
    candidates: int
    elapsed: float = 0.0
    total_elapsed: float = 0.0
    maximum_nodes: int | None = None
    anchored_nodes: int | None = None

    def counters(self) -> dict[str, int | str]:
        """Everything except wall-clock timings."""
        return {k: v for k, v in self.__dict__.items() if k not in ("elapsed", "total_elapsed")}


def check_array(object_size: int, type_size: int, next_smaller: int | None) -> bool:
    """Decide whether an oversized object may be an array of a type.

    The space the largest whole number of elements would occupy is compared
    against the next-smaller general-purpose cache: if that cache could
    have held it, the allocator would have used it, so this is not an array.
    """
    used = object_size - object_size % type_size
    return not (next_smaller is not None and used <= next_smaller)


class TypeGraph:
    def __init__(self, image: DumpImage, catalog: TypeCatalog,
                 table: list[tuple[str, str]] | dict[str, str] | None = None):
        self.image = image
        self.catalog = catalog
        self.table = dict(table or {})
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self.stats: list[PassStats] = []
        self.has_run = False
        self._queue: deque[int] = deque()
        self._t0 = 0.0
        self.conflicted_sources = 0
        self._build()

    # -- construction ------------------------------------------------------

    def _build(self) -> None:
        cat, img = self.catalog, self.image
        for t in cat:
            if t.kind == "pointer" and t.size != img.pointer_size:
                raise GraphError(f"pointer type {t.name!r} has size {t.size}, dump pointer size is {img.pointer_size}")
        cache_names = {c.name: c for c in img.caches}
        self._table_types: dict[str, str] = {}
        for cname, tname in self.table.items():
            if cname not in cache_names:
                raise GraphError(f"cache table names unknown cache {cname!r}")
            try:
                self._table_types[cache_names[cname].id] = cat.resolve(cat.lookup(tname).id).id
            except KeyError:
                raise GraphError(f"cache table names unknown type {tname!r}") from None

        entries = [(o.base, "heap", o) for o in img.heap_objects] + [(s.base, "static", s) for s in img.statics]
        entries.sort(key=lambda e: (e[0], e[1]))
        self._heap_node: list[int] = [0] * len(img.heap_objects)
        heap_pos = {o.base: i for i, o in enumerate(img.heap_objects)}
        for nid, (base, kind, obj) in enumerate(entries):
            if kind == "heap":
                node = Node(nid, base, obj.size, "heap", cache=obj.cache)
                self._heap_node[heap_pos[base]] = nid
            else:
                node = Node(nid, base, obj.size, "static", symbol=obj.symbol, known=True)
            self.nodes.append(node)
        self.heap_nodes = [n for n in self.nodes if n.kind == "heap"]
        self._node_by_base = {n.base: n.id for n in self.heap_nodes}
        self.static_nodes = [n for n in self.nodes if n.kind == "static"]
        self._seed_known()

        ps = img.pointer_size
        for n in self.nodes:
            start = -n.base % ps
            if n.size - start < ps:
                continue
            words = img.words(n.base + start, n.size - start)
            idx, off = img.index_of(words)
            for w in (idx >= 0).nonzero()[0].tolist():
                dst = self._heap_node[int(idx[w])]
                e = Edge(len(self.edges), n.id, start + w * ps, dst, int(off[w]))
                self.edges.append(e)
                n.out_edges.append(e.id)
                n.out_by_offset[e.src_offset] = e
                self.nodes[dst].in_edges.append(e.id)

    def _seed_known(self) -> None:
        stypes = {(s.base, s.symbol): s.type for s in self.image.statics}
        for n in self.nodes:
            if n.kind == "static":
                n.inferences = {self.catalog.resolve(stypes[(n.base, n.symbol)]).id: []}
            elif n.cache in self._table_types:
                n.known = True
                n.inferences = {self._table_types[n.cache]: []}

    # -- lookup ------------------------------------------------------------

    def node_at(self, addr: int) -> tuple[Node, int] | None:
        hit = self.image.object_containing(addr)
        if hit is not None:
            obj, off = hit
            return self.nodes[self._node_by_base[obj.base]], off
        for n in self.static_nodes:
            if n.base <= addr < n.end:
                return n, addr - n.base
        return None

    def type_name(self, tid: str) -> str:
        return self.catalog.get(tid).name

    # -- propagation core -------------------------------------------------

    def _fits_window(self, n: Node, t: TypeDef) -> bool:
        return t.size <= n.size < 2 * t.size

    def _add_inference(self, d: Node, tid: str, ref: Referrer) -> bool:
        """Record a base-offset inference; returns True if the type is new."""
        refs = d.inferences.get(tid)
        if refs is not None:
            if all((r.node, r.offset) != (ref.node, ref.offset) for r in refs):
                refs.append(ref)
            return False
        if d.known or d.pinned:
            d.rejected.append(("overridden", tid, ref))
            return False
        d.inferences[tid] = [ref]
        if len(d.inferences) > 1:
            # conflicted nodes are frozen
            d.marked = False
        if not d.marked:
            d.verdict = Verdict()
        return True

    def _enqueue(self, n: Node) -> None:
        n.marked = True
        self._queue.append(n.id)

    def _through(self, node: Node, tid: str, base_off: int, visited: set) -> int:
        """Propagate ``tid`` laid at ``base_off`` in ``node`` along its pointer members.

        Returns the number of new base-offset inferences drawn.
        """
        cat = self.catalog
        new = 0
        stack = [(node, tid, base_off)]
        while stack:
            n, t, b = stack.pop()
            for m_off, pointee, path in cat.pointer_members(t):
                e = n.out_by_offset.get(b + m_off)
                if e is None:
                    continue
                r = cat.resolve(pointee)
                if r.size == 0 or r.kind == "function":
                    continue
                d = self.nodes[e.dst]
                ref = Referrer(n.id, e.src_offset, t, path)
                if e.dst_offset == 0:
                    if r.kind == "union" or r.size > d.size:
                        d.rejected.append(("union" if r.kind == "union" else "oversized", r.id, ref))
                        continue
                    if self._add_inference(d, r.id, ref):
                        new += 1
                    if not d.marked and d.single == r.id and not d.known and not d.pinned \
                            and self._fits_window(d, r):
                        self._enqueue(d)
                    continue
                if r.kind != "base" and e.dst_offset + r.size > d.size:
                    d.rejected.append(("oversized", r.id, ref))
                    continue
                note = FragmentNote(e.dst_offset, r.id, path, n.id, e.src_offset)
                if note not in d.fragments:
                    d.fragments.append(note)
                key = (d.id, r.id, e.dst_offset)
                if key not in visited:
                    visited.add(key)
                    stack.append((d, r.id, e.dst_offset))
        return new

    def _drain(self, visited: set) -> int:
        new = 0
        while self._queue:
            n = self.nodes[self._queue.popleft()]
            t = n.single
            if t is None:
                n.marked = False
                continue
            new += self._through(n, t, 0, visited)
        return new

    # -- passes ------------------------------------------------------------

    def pass_conservative(self, label: str = "1") -> PassStats:
        t0 = time.perf_counter()
        for n in self.nodes:
            if n.marked:
                continue
            t = n.single
            if t is None:
                continue
            td = self.catalog.get(t)
            if n.known or n.pinned:
                if td.size <= n.size:
                    self._enqueue(n)
            elif n.verdict.kind in (UNDETERMINED, NOT_ARRAY) and self._fits_window(n, td):
                self._enqueue(n)
        self._drain(set())
        return self._snapshot(label, t0)

    def _fam_layout(self, t: TypeDef) -> tuple[str, int, int] | None:
        fam = self.catalog.detect_fam(t.id)
        if fam is None:
            return None
        last = self.catalog.resolve(t.members[-1].type)
        return fam[0], fam[1], last.element_count

    def _is_candidate(self, n: Node) -> bool:
        t = n.single
        if t is None or n.known or n.pinned or n.verdict.kind != UNDETERMINED:
            return False
        td = self.catalog.get(t)
        if td.size == 0:
            return False
        if td.kind == "struct" and self._fam_layout(td) is not None and n.size >= td.size:
            return True
        return not n.marked and n.size >= 2 * td.size

    def fam_elements(self, n: Node, t: TypeDef, elem: str, f_off: int, declared: int) -> tuple[int, int]:
        """Trailing-element geometry: (element count, offset of first element outside ``t``)."""
        es = self.catalog.size_of(elem)
        if declared == 1:
            return 1 + (n.size - t.size) // es, f_off + es
        return (n.size - f_off) // es, f_off

    def _decide(self, n: Node) -> Verdict:
        cat, img = self.catalog, self.image
        t = cat.get(n.single)
        fam = self._fam_layout(t) if t.kind == "struct" else None
        if fam is not None:
            elem, f_off, declared = fam
            count, first = self.fam_elements(n, t, elem, f_off, declared)
            trailing = count - 1 if declared == 1 else count
            if self.verify_array(n, t.id, 0, 1) and self.verify_array(n, elem, first, trailing):
                return Verdict(FAM, count, elem, t.id)
            return Verdict(NOT_ARRAY, type=t.id)
        if n.size < 2 * t.size:
            return Verdict(NOT_ARRAY, type=t.id)
        if n.cache is not None and img.cache(n.cache).general_purpose:
            count = n.size // t.size
            if check_array(n.size, t.size, img.next_smaller_gp_cache(n.size)) \
                    and self.verify_array(n, t.id, 0, count):
                return Verdict(ARRAY, count, t.id, t.id)
        return Verdict(NOT_ARRAY, type=t.id)

    def verify_array(self, n: Node, elem: str, start: int, count: int) -> bool:
        """Every pointer member of every element holds NULL or a mapped address."""
        img = self.image
        es = self.catalog.size_of(elem)
        members = self.catalog.pointer_members(elem)
        if not members:
            return True
        for i in range(count):
            for m_off, _, _ in members:
                addr = n.base + start + i * es + m_off
                if addr % img.pointer_size:
                    return False
                w = img.read_word(addr)
                if w != 0 and not img.is_mapped(w):
                    return False
        return True

    def element_layout(self, n: Node) -> list[tuple[int, str]]:
        """(offset, type) of every typed element laid out in ``n``."""
        t = n.single
        if t is None:
            return []
        v = n.verdict
        if v.kind == ARRAY:
            es = self.catalog.size_of(t)
            return [(i * es, t) for i in range(v.count)]
        if v.kind == FAM:
            td = self.catalog.get(t)
            elem, f_off, declared = self._fam_layout(td)
            count, first = self.fam_elements(n, td, elem, f_off, declared)
            trailing = count - 1 if declared == 1 else count
            es = self.catalog.size_of(elem)
            return [(0, t)] + [(first + k * es, elem) for k in range(trailing)]
        return [(0, t)]

    def pass_array(self, label: str = "2") -> PassStats:
        t0 = time.perf_counter()
        while True:
            visited: set = set()
            progress = 0
            for n in self.heap_nodes:
                if not self._is_candidate(n):
                    continue
                n.verdict = self._decide(n)
                progress += 1
                if n.verdict.kind in (ARRAY, FAM):
                    n.marked = True
                    for off, et in self.element_layout(n):
                        progress += self._through(n, et, off, visited)
                    progress += self._drain(visited)
            if not progress:
                break
        return self._snapshot(label, t0)

    def pass_coalesce(self, label: str = "3") -> PassStats:
        t0 = time.perf_counter()
        for n in self.heap_nodes:
            if len(n.inferences) < 2:
                continue
            structs = [t for t in n.inferences if self.catalog.get(t).kind == "struct"]
            if structs and len(structs) < len(n.inferences):
                n.inferences = {t: n.inferences[t] for t in structs}
                n.verdict = Verdict()
        return self._snapshot(label, t0)

    def pass_nonarray(self, label: str = "4") -> PassStats:
        t0 = time.perf_counter()
        visited: set = set()
        for n in self.heap_nodes:
            t = n.single
            if t is None or n.marked or n.known or n.pinned or n.verdict.kind != NOT_ARRAY:
                continue
            if 2 * self.catalog.size_of(t) < n.size:
                n.marked = True
                self._through(n, t, 0, visited)
                self._drain(visited)
        return self._snapshot(label, t0)

    def run(self) -> list[PassStats]:
        self._t0 = time.perf_counter()
        self.stats = [self._initial_stats()]
        self.stats.append(self.pass_conservative("1"))
        self.stats.append(self.pass_array("2"))
        self.stats.append(self.pass_coalesce("3"))
        self.stats.append(self.pass_nonarray("4"))
        self.stats.append(self.pass_array("5"))
        self.stats.append(self.pass_conservative("6"))
        self.has_run = True
        return self.stats

    # -- manual intervention ------------------------------------------------

    def istype(self, addr: int, type_spelling: str) -> list[PassStats]:
        hit = self.node_at(addr)
        if hit is None:
            raise GraphError(f"{addr:x} is not in any known object")
        node, _ = hit
        try:
            tid = self.catalog.resolve(self.catalog.lookup(type_spelling).id).id
        except KeyError:
            raise GraphError(f"unknown type {type_spelling!r}") from None
        if node.known and node.single != tid:
            raise GraphError(f"{node.base:x} is known to be {self.type_name(node.single)}")
        for n in self.nodes:
            if n.known or n.pinned:
                n.inferences = {t: [] for t in n.inferences}
            else:
                n.inferences = {}
            n.fragments = []
            n.rejected = []
            n.marked = False
            n.verdict = Verdict()
        if not node.known:
            node.inferences = {tid: []}
            node.pinned = True
        return self.run()

    # -- reach ---------------------------------------------------------------

    def _unknown(self, n: Node) -> bool:
        return n.kind == "heap" and not n.inferences and not n.fragments

    def reach_sets(self) -> dict[int, int]:
        """Bitset of unknown nodes reachable (through unknown nodes) from each unknown node,
        the node itself included.  Computed once per strongly connected component."""
        unknown = [n.id for n in self.nodes if self._unknown(n)]
        uset = set(unknown)
        succ = {u: sorted({self.edges[e].dst for e in self.nodes[u].out_edges} & uset) for u in unknown}
        index: dict[int, int] = {}
        low: dict[int, int] = {}
        on_stack: set[int] = set()
        stack: list[int] = []
        comp_of: dict[int, int] = {}
        comps: list[list[int]] = []
        counter = 0
        for root in unknown:
            if root in index:
                continue
            work = [(root, 0)]
            while work:
                v, i = work.pop()
                if i == 0:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on_stack.add(v)
                s = succ[v]
                if i < len(s):
                    work.append((v, i + 1))
                    w = s[i]
                    if w not in index:
                        work.append((w, 0))
                    elif w in on_stack:
                        low[v] = min(low[v], index[w])
                    continue
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp_of[w] = len(comps)
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(comp)
        # Tarjan emits components sinks-first
        bits: list[int] = []
        for ci, comp in enumerate(comps):
            b = 0
            for v in comp:
                b |= 1 << v
            for v in comp:
                for w in succ[v]:
                    cw = comp_of[w]
                    if cw != ci:
                        b |= bits[cw]
            bits.append(b)
        return {v: bits[comp_of[v]] for v in unknown}

    def reach(self, node_id: int, sets: dict[int, int] | None = None) -> int:
        sets = self.reach_sets() if sets is None else sets
        n = self.nodes[node_id]
        if node_id in sets:
            b = sets[node_id] & ~(1 << node_id)
        else:
            b = 0
            for e in n.out_edges:
                b |= sets.get(self.edges[e].dst, 0)
            b &= ~(1 << node_id)
        return b.bit_count()

    def greatest_reach(self) -> tuple[int | None, int]:
        sets = self.reach_sets()
        best, best_reach = None, 0
        for nid in sorted(sets, key=lambda i: self.nodes[i].base):
            r = (sets[nid] & ~(1 << nid)).bit_count()
            if r > best_reach:
                best, best_reach = nid, r
        if best is None and sets:
            best = min(sets, key=lambda i: self.nodes[i].base)
        return best, best_reach

    # -- statistics --------------------------------------------------------

    def _counts(self) -> dict[str, int]:
        nodes = known = conj = frag = conflicts = cand = unmarked = 0
        for n in self.heap_nodes:
            nodes += 1
            unmarked += not n.marked
            c = n.certainty
            if c == "known":
                known += 1
            elif c == "conjectured":
                conj += 1
                t = n.single
                if not n.marked and n.size >= 2 * self.catalog.size_of(t):
                    cand += 1
            elif c == "fragment":
                frag += 1
            elif c == "conflict":
                conflicts += 1
        return dict(nodes=nodes, unmarked=unmarked, known=known, conjectured=conj,
                    conjectured_fragments=frag, known_or_conjectured=known + conj + frag,
                    conflicts=conflicts, candidates=cand)

    def _snapshot(self, label: str, t0: float) -> PassStats:
        now = time.perf_counter()
        return PassStats(label, **self._counts(), elapsed=now - t0, total_elapsed=now - self._t0)

    def _initial_stats(self) -> PassStats:
        # slot capacity of the mapped segments that hold each cache's objects
        segs: dict[str, set[int]] = {}
        for o in self.image.heap_objects:
            segs.setdefault(o.cache, set()).add(self.image.segment_at(o.base).base)
        seg_len = {sg.base: len(sg.data) for sg in self.image.segments}
        maximum = sum(seg_len[b] // self.image.cache(c).object_size for c, bases in segs.items() for b in bases)
        st = self._snapshot("initial", self._t0)
        st.maximum_nodes = maximum
        st.anchored_nodes = len(self.static_nodes)
        return st


def build(image: DumpImage, catalog: TypeCatalog, table=None) -> TypeGraph:
    return TypeGraph(image, catalog, table)


def pass_conservative(graph: TypeGraph) -> PassStats:
    return graph.pass_conservative()


def pass_array(graph: TypeGraph) -> PassStats:
    return graph.pass_array()


def pass_coalesce(graph: TypeGraph) -> PassStats:
    return graph.pass_coalesce()


def pass_nonarray(graph: TypeGraph) -> PassStats:
    return graph.pass_nonarray()


def run(graph: TypeGraph) -> list[PassStats]:
    return graph.run()


def verify_array(graph: TypeGraph, node: Node, element_type: str, start_offset: int, count: int) -> bool:
    return graph.verify_array(node, element_type, start_offset, count)


def istype(graph: TypeGraph, addr: int, type_spelling: str) -> list[PassStats]:
    return graph.istype(addr, type_spelling)


def greatest_reach(graph: TypeGraph) -> tuple[int | None, int]:
    return graph.greatest_reach()


@dataclass
class TypeReport:
    addr: int
    base: int | None
    offset: int
    certainty: str
    type: str | None = None
    referrer: str | None = None
    alternatives: list[tuple[str, int, int, str]] = field(default_factory=list)
    rejected: list[tuple[str, str, int, int]] = field(default_factory=list)

    def render(self) -> str:
        if self.base is None:
            return f"{self.addr:x} is not in a known object"
        head = f"{self.addr:x} is {self.base:x}+{self.offset:x}, "
        if self.certainty == "known":
            lines = [head + self.type]
        elif self.certainty in ("conjectured", "fragment"):
            tail = f" ({self.referrer})" if self.referrer else ""
            lines = [f"{head}possibly {self.type}{tail}"]
        elif self.certainty == "conflict":
            lines = [head + "possibly one of the following:"]
            lines += [f"  {t} (from {b:x}+{o:x}, type {rt})" for t, b, o, rt in self.alternatives]
        else:
            lines = [head + "unknown type"]
        lines += [f"  rejected {why} {t} (from {b:x}+{o:x})" for why, t, b, o in self.rejected]
        return "\n".join(lines)

    def __str__(self) -> str:
        return self.render()


def _referrer_text(graph: TypeGraph, tid: str, path: MemberPath, ref_node: int) -> str | None:
    """Referring type and member, shown for base-type interpretations."""
    if graph.catalog.get(tid).kind != "base":
        return None
    src = graph.nodes[ref_node]
    if not path.steps and src.kind == "static":
        return src.symbol
    return str(path)


def whattype(graph: TypeGraph, addr: int) -> TypeReport:
    hit = graph.node_at(addr)
    if hit is None:
        return TypeReport(addr, None, 0, "unknown")
    n, off = hit
    name = graph.type_name
    rejected = []
    c = n.certainty
    if c == "unknown":
        rejected = [(why, name(t), graph.nodes[r.node].base, r.offset) for why, t, r in n.rejected]
    if c == "known":
        return TypeReport(addr, n.base, off, c, name(n.single))
    if c == "conjectured":
        t = n.single
        refs = n.inferences[t]
        referrer = _referrer_text(graph, t, refs[0].path, refs[0].node) if refs else None
        return TypeReport(addr, n.base, off, c, name(t), referrer)
    if c == "conflict":
        alts = []
        for t, refs in n.inferences.items():
            r = refs[0]
            alts.append((name(t), graph.nodes[r.node].base, r.offset, name(r.type)))
        return TypeReport(addr, n.base, off, c, alternatives=alts)
    if c == "fragment":
        best = None
        for f in n.fragments:
            fsize = graph.catalog.size_of(f.type)
            end = n.size if graph.catalog.get(f.type).kind == "base" else f.offset + fsize
            if f.offset <= off < end and (best is None or f.offset > best.offset):
                best = f
        if best is not None:
            return TypeReport(addr, n.base + best.offset, off - best.offset, c, name(best.type),
                              _referrer_text(graph, best.type, best.via, best.referrer))
        return TypeReport(addr, n.base, off, "unknown")
    return TypeReport(addr, n.base, off, c, rejected=rejected)


_PCT_FIELDS = ("unmarked", "known", "conjectured", "conjectured_fragments", "known_or_conjectured")


def _line(label: str, value) -> str:
    return f"typegraph: {label:>30} => {value}"


def render_stats(stats: list[PassStats] | PassStats, *, timing: bool = True) -> str:
    """Render pass counters in the ``typegraph: <field> => <value>`` form."""
    if isinstance(stats, PassStats):
        stats = [stats]
    out = []
    for st in stats:
        out.append(_line("pass", st.label))
        if st.label == "initial":
            out.append(_line("maximum nodes", st.maximum_nodes))
            out.append(_line("actual nodes", st.nodes))
            out.append(_line("anchored nodes", st.anchored_nodes))
            out.append(_line("known", _pct(st.known, st.nodes)))
        else:
            out.append(_line("nodes", st.nodes))
            for f in _PCT_FIELDS:
                out.append(_line(f.replace("_", " "), _pct(getattr(st, f), st.nodes)))
            out.append(_line("conflicts", st.conflicts))
            out.append(_line("candidates", st.candidates))
        if timing:
            out.append(_line("time elapsed, this pass", f"{st.elapsed:.0f} seconds"))
            out.append(_line("time elapsed, total", f"{st.total_elapsed:.0f} seconds"))
        out.append("typegraph:")
    return "\n".join(out)


def _pct(v: int, total: int) -> str:
    return f"{v:<13d} ({100.0 * v / total:4.1f}%)" if total else f"{v:<13d} (   -%)"


def render_reach(graph: TypeGraph) -> str:
    nid, r = graph.greatest_reach()
    if nid is None:
        return "typegraph: no unknown nodes"
    return f"typegraph: node {graph.nodes[nid].base:x} has reach {r}"
