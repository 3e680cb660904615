import pytest

from pmtype.dumpio import load_dump
from pmtype.typecat import CatalogBuilder
from pmtype.typegraph import (ARRAY, FAM, NOT_ARRAY, UNDETERMINED, GraphError, TypeGraph, check_array,
                              render_stats, whattype)

from .conftest import FOO_LIST, make_doc

H = 0x10000  # heap objects
S = 0x900000  # statics


def _cat8():
    b = CatalogBuilder(8)
    char = b.base("char", 1)
    b.base("int", 4)
    long = b.base("long", 8)
    b.declare("struct vnode")
    b.struct("struct vnode", [("v_next", b.pointer("struct vnode")), ("v_data", long)])
    b.struct("struct sonode", [("so_vnode", "struct vnode"), ("so_buf", b.pointer(char))])
    b.struct("struct frotz", [("f_a", long), ("f_b", long), ("f_name", b.pointer(char))])
    b.struct("struct pair", [("p_a", b.pointer("struct frotz")), ("p_b", long)])
    b.struct("struct big", [("b_p", b.pointer("struct frotz")), ("b_pad", b.array(long, 8))])
    b.struct("struct rec", [("r_next", b.pointer("struct rec")), ("r_a", long), ("r_b", long), ("r_c", long)])
    for t in ("struct vnode", "struct sonode", "struct frotz", "struct pair", "struct big", "struct rec", "long"):
        b.pointer(t)
    b.struct("struct holder", [("h_rec", b.pointer("struct rec")), ("h_name", b.pointer(char))])
    b.pointer("struct holder")
    return b.build()


def _graph(objects, statics, *, table=(), typed=(), gp=(8, 16, 32, 64), cat=None):
    cat = cat or _cat8()
    img = load_dump(make_doc(8, objects, statics=statics, typed=typed, gp=gp), cat)
    return TypeGraph(img, cat, table)


# -- build -----------------------------------------------------------------

def test_build_foo_heap_static_edge(foo_heap):
    cat, img = foo_heap
    g = TypeGraph(img, cat)
    static = g.static_nodes[0]
    assert static.known and static.single == "foo_t *"
    out = [g.edges[e] for e in static.out_edges]
    assert len(out) == 1
    assert g.nodes[out[0].dst].base == FOO_LIST and out[0].dst_offset == 0
    assert all(not n.marked for n in g.heap_nodes)


def test_build_edges_sorted_and_zero_object():
    g = _graph({H: ([0, 0], 16), H + 0x100: ([H + 8, H], 16)}, {S: ("p", "long *", [H + 0x100])})
    assert g.node_at(H)[0].out_edges == []
    keys = [(g.nodes[e.src].base, e.src_offset) for e in g.edges]
    assert keys == sorted(keys)
    interior = [e for e in g.edges if e.dst_offset == 8]
    assert len(interior) == 1


def test_build_known_cache():
    g = _graph({H: ([0, 0], "vn_cache"), H + 0x40: ([0, 0], 16)}, {},
               typed=[("vn_cache", 16)], table=[("vn_cache", "struct vnode")])
    assert g.node_at(H)[0].known and g.node_at(H)[0].single == "struct vnode"
    assert not g.node_at(H + 0x40)[0].known


def test_build_rejects_bad_table():
    with pytest.raises(GraphError, match="cache"):
        _graph({}, {}, table=[("nope", "struct vnode")])
    with pytest.raises(GraphError, match="type"):
        _graph({H: ([0, 0], "vn_cache")}, {}, typed=[("vn_cache", 16)], table=[("vn_cache", "struct nope")])


def test_heap_pointers_into_statics_make_no_edges():
    g = _graph({H: ([S, 0], 16)}, {S: ("p", "long *", [0])})
    assert g.edges == []


# -- conservative propagation ---------------------------------------------

def test_foo_heap_chain(foo_heap):
    cat, img = foo_heap
    g = TypeGraph(img, cat)
    g.pass_conservative()
    assert g.node_at(0xDE714060)[0].single == "struct foo"
    assert g.node_at(0xDE704078)[0].single == "struct foo"
    assert g.node_at(0xDE701DF0)[0].single == "char"
    assert g.node_at(0xDEFED090)[0].single == "struct bar"
    # the second list element propagated too
    assert g.node_at(0xDE709DE0)[0].single == "struct bar"
    assert g.node_at(0xDE5BE840)[0].single == "struct foo"


def test_two_struct_inferences_are_frozen():
    # a 24-byte sonode reached as both sonode* and vnode*; its buffer must stay unknown
    objs = {H: ([0, 0, H + 0x40], 32), H + 0x40: ([0x41414141, 0], 16)}
    g = _graph(objs, {S: ("a", "struct sonode *", [H]), S + 8: ("b", "struct vnode *", [H])}, gp=(16, 24, 32))
    g.run()
    n = g.node_at(H)[0]
    assert set(n.inferences) == {"struct sonode", "struct vnode"}
    assert n.certainty == "conflict" and not n.marked
    assert g.node_at(H + 0x40)[0].certainty == "unknown"


def test_cache_geometry_leaves_candidate():
    b = CatalogBuilder(4)
    b.base("int", 4)
    t = b.struct("struct t76", [("a", "int")], size=76)
    b.pointer(t)
    cat = b.build()
    img = load_dump(make_doc(4, {H: ([0] * 56, 224)}, gp=(128, 160, 224), statics={S: ("p", "struct t76 *", [H])}),
                    cat)
    g = TypeGraph(img, cat)
    st = g.pass_conservative()
    n = g.node_at(H)[0]
    assert n.single == "struct t76" and not n.marked
    assert st.candidates == 1
    g.pass_array()
    assert n.verdict.kind == NOT_ARRAY


def test_interior_pointer_records_fragment():
    objs = {H: ([0, 0, 0, 0], 32)}
    g = _graph(objs, {S: ("h", "struct holder", [0, H + 8])})
    g.run()
    n = g.node_at(H)[0]
    assert n.inferences == {}
    assert [(f.offset, f.type) for f in n.fragments] == [(8, "char")]
    assert n.certainty == "fragment"


def test_oversized_and_union_inferences_only_noted():
    objs = {H: ([0], 8)}
    g = _graph(objs, {S: ("p", "struct rec *", [H])})
    g.run()
    n = g.node_at(H)[0]
    assert n.inferences == {} and n.rejected[0][0] == "oversized"


# -- check_array / verify_array --------------------------------------------

@pytest.mark.parametrize("args, expected", [
    ((224, 76, 160), False),
    ((224, 76, 128), True),
    ((224, 76, None), True),
    ((128, 32, 96), True),
    ((160, 40, 128), True),
    ((160, 48, 144), False),
])
def test_check_array(args, expected):
    assert check_array(*args) is expected


def test_verify_array():
    objs = {H: ([H + 0x100, 1, 0, 2, 0xDEAD0000, 3], 64), H + 0x100: ([0, 0, 0], 32)}
    g = _graph(objs, {})
    n = g.node_at(H)[0]
    assert g.verify_array(n, "struct pair", 0, 2)
    assert not g.verify_array(n, "struct pair", 0, 3)
    assert g.verify_array(n, "long", 0, 6)


# -- array pass --------------------------------------------------------------

def _fam_cat():
    b = CatalogBuilder(4)
    i32 = b.base("int", 4)
    b.typedef("mumble_t", i32)
    b.struct("struct foo", [("foo_bar", i32), ("foo_baz", i32), ("foo_mumble", b.array("mumble_t", 1))])
    b.typedef("foo_t", "struct foo")
    b.pointer("foo_t")
    return b.build()


def test_fam_verdict_from_size():
    cat = _fam_cat()
    img = load_dump(make_doc(4, {H: ([1, 3, 5, 7, 9, 11], 24)}, gp=(8, 16, 24, 32),
                             statics={S: ("f", "foo_t *", [H])}), cat)
    g = TypeGraph(img, cat)
    g.run()
    v = g.node_at(H)[0].verdict
    assert (v.kind, v.count, v.element) == (FAM, 4, "mumble_t")


def test_array_verdict_and_element_propagation():
    # 128 bytes of struct rec (32 each) from a general-purpose cache; next smaller is 96
    words = []
    for i in range(4):
        words += [H + 0x200 + 0x40 * i if i < 3 else 0, 1, 3, 5]
    objs = {H: (words, 128)}
    for i in range(3):
        objs[H + 0x200 + 0x40 * i] = ([0, 7, 9, 11], 32)
    g = _graph(objs, {S: ("r", "struct rec *", [H])}, gp=(32, 64, 96, 128))
    g.run()
    n = g.node_at(H)[0]
    assert (n.verdict.kind, n.verdict.count) == (ARRAY, 4)
    for i in range(3):
        assert g.node_at(H + 0x200 + 0x40 * i)[0].single == "struct rec"


def test_array_needs_valid_pointers():
    words = [H + 0x200, 1, 3, 5, 0xBAD00000, 1, 3, 5, 0, 1, 3, 5, 0, 1, 3, 5]
    objs = {H: (words, 128), H + 0x200: ([0, 7, 9, 11], 32)}
    g = _graph(objs, {S: ("r", "struct rec *", [H])}, gp=(32, 64, 96, 128))
    g.run()
    assert g.node_at(H)[0].verdict.kind == NOT_ARRAY


# -- coalesce / nonarray ------------------------------------------------------

def test_coalesce_drops_base_types():
    objs = {H: ([1, 3, 0], 24)}
    g = _graph(objs, {S: ("f", "struct frotz *", [H]), S + 8: ("c", "char *", [H])}, gp=(8, 16, 24, 32))
    g.pass_conservative()
    n = g.node_at(H)[0]
    assert set(n.inferences) == {"struct frotz", "char"}
    g.pass_coalesce()
    assert set(n.inferences) == {"struct frotz"}


def test_coalesce_keeps_struct_conflicts_and_base_pairs():
    objs = {H: ([0, 0, 0], 24), H + 0x40: ([0, 0], 16)}
    g = _graph(objs, {S: ("a", "struct sonode *", [H]), S + 8: ("b", "struct vnode *", [H]),
                      S + 16: ("c", "char *", [H + 0x40]), S + 24: ("l", "long *", [H + 0x40])},
               gp=(16, 24, 32))
    g.pass_conservative()
    g.pass_coalesce()
    assert len(g.node_at(H)[0].inferences) == 2
    assert set(g.node_at(H + 0x40)[0].inferences) == {"char", "long"}


def test_nonarray_propagates_embedded_first_member():
    # a 64-byte object reached only as vnode*, in a typed cache so no array verdict
    objs = {H: ([H + 0x100] + [0] * 7, "tmp_cache"), H + 0x100: ([0, 0], 16)}
    g = _graph(objs, {S: ("v", "struct vnode *", [H])}, typed=[("tmp_cache", 64)])
    g.pass_conservative()
    g.pass_array()
    n = g.node_at(H)[0]
    assert n.verdict.kind == NOT_ARRAY and not n.marked
    g.pass_coalesce()
    g.pass_nonarray()
    assert n.marked
    assert g.node_at(H + 0x100)[0].single == "struct vnode"


def test_nonarray_ignores_conflicts_and_arrays():
    objs = {H: ([0, 0, 0], 24)}
    g = _graph(objs, {S: ("a", "struct sonode *", [H]), S + 8: ("b", "struct vnode *", [H])}, gp=(16, 24, 32))
    g.run()
    assert not g.node_at(H)[0].marked


# -- run ---------------------------------------------------------------------

def test_run_empty_heap():
    g = _graph({}, {S: ("p", "long *", [0])})
    stats = g.run()
    assert [s.label for s in stats] == ["initial", "1", "2", "3", "4", "5", "6"]
    assert all(s.nodes == 0 for s in stats)


def test_run_foo_heap_monotone(foo_heap):
    cat, img = foo_heap
    g = TypeGraph(img, cat)
    stats = g.run()
    koc = [s.known_or_conjectured for s in stats[1:]]
    assert koc == sorted(koc)
    assert stats[-1].known_or_conjectured == 8
    for s in stats[1:]:
        assert s.known + s.conjectured + s.conjectured_fragments == s.known_or_conjectured <= s.nodes


# -- whattype --------------------------------------------------------------

def test_whattype_forms(foo_heap):
    cat, img = foo_heap
    g = TypeGraph(img, cat)
    g.run()
    assert whattype(g, 0xDE714060).render() == "de714060 is de714060+0, possibly struct foo"
    assert whattype(g, 0xDE701DF4).render() == "de701df4 is de701df0+4, possibly char (struct foo.foo_name)"
    assert whattype(g, 0xC0100000).render() == "c0100000 is c0100000+0, foo_t *"
    assert whattype(g, 0x10).render() == "10 is not in a known object"


def test_whattype_known_and_conflict():
    objs = {H: ([0, 0, 0], 24), H + 0x40: ([0, 0], "vn_cache")}
    g = _graph(objs, {S: ("a", "struct sonode *", [H]), S + 8: ("b", "struct vnode *", [H])},
               gp=(16, 24, 32), typed=[("vn_cache", 16)], table=[("vn_cache", "struct vnode")])
    g.run()
    assert whattype(g, H + 0x40).render() == f"{H + 0x40:x} is {H + 0x40:x}+0, struct vnode"
    assert whattype(g, H).render().splitlines() == [
        f"{H:x} is {H:x}+0, possibly one of the following:",
        f"  struct sonode (from {S:x}+0, type struct sonode *)",
        f"  struct vnode (from {S + 8:x}+0, type struct vnode *)",
    ]


def test_whattype_unknown():
    g = _graph({H: ([0, 0], 16)}, {})
    g.run()
    assert whattype(g, H + 8).render() == f"{H + 8:x} is {H:x}+8, unknown type"


# -- istype / reach -------------------------------------------------------

def _chain():
    # a -> b -> c, all unknown; d is typed from a static
    objs = {H: ([H + 0x40, 0], 16), H + 0x40: ([H + 0x80, 0], 16), H + 0x80: ([0, 0], 16),
            H + 0xC0: ([0, 0], 16)}
    return _graph(objs, {S: ("d", "struct vnode *", [H + 0xC0])})


def test_reach_chain():
    g = _chain()
    g.run()
    a = g.node_at(H)[0]
    assert g.reach(a.id) == 2
    assert g.greatest_reach() == (a.id, 2)


def test_istype_feedback():
    g = _chain()
    before = g.run()[-1].known_or_conjectured
    after = g.istype(H, "struct vnode")[-1].known_or_conjectured
    assert after == before + 3
    assert g.node_at(H)[0].pinned
    assert g.greatest_reach() == (None, 0)


def test_istype_known_noop_and_errors(foo_heap):
    cat, img = foo_heap
    g = TypeGraph(img, cat)
    first = render_stats(g.run(), timing=False)
    again = render_stats(g.istype(0xC0100000, "foo_t *"), timing=False)
    assert first == again
    with pytest.raises(GraphError):
        g.istype(0x10, "foo_t")
    with pytest.raises(GraphError):
        g.istype(0xDE714060, "struct nope")


def test_istype_oversized_type_not_propagated():
    g = _chain()
    g.run()
    g.istype(H, "struct rec")
    n = g.node_at(H)[0]
    assert n.pinned and n.single == "struct rec"
    assert g.node_at(H + 0x40)[0].certainty == "unknown"


def test_known_never_overwritten():
    objs = {H: ([0, 0], "vn_cache")}
    g = _graph(objs, {S: ("f", "struct frotz *", [H])}, typed=[("vn_cache", 16)],
               table=[("vn_cache", "struct vnode")])
    g.run()
    n = g.node_at(H)[0]
    assert n.single == "struct vnode" and n.known
    assert n.rejected


# -- stats rendering -------------------------------------------------------

def test_render_stats_shape(foo_heap):
    cat, img = foo_heap
    g = TypeGraph(img, cat)
    text = render_stats(g.run()[:2], timing=False)
    lines = text.splitlines()
    assert lines[0] == "typegraph:                           pass => initial"
    assert "typegraph:           known or conjectured => 8             (100.0%)" in lines
    assert lines[-1] == "typegraph:"


def test_verdict_defaults():
    g = _graph({H: ([0, 0], 16)}, {})
    assert g.nodes[0].verdict.kind == UNDETERMINED
