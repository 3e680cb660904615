import struct

import pytest

from pmtype.dumpio import encode_segment, load_dump
from pmtype.synth import generate
from pmtype.synth.corpora import kernel_catalog
from pmtype.typecat import CatalogBuilder, load_catalog
from pmtype.typegraph import TypeGraph

# A small linked foo_t heap: eight objects, 32-bit, little-endian.
FOO_LIST = 0xDE714060
FOO_HEAP_WORDS = {
    0xDE714060: [0xDE704078, 0xDE701DF0, 0xDEFED090, 0x12E],
    0xDE704078: [0xDE711008, 0xDE70A4C8, 0xDE709DE0, 0xA0],
    0xDEFED090: [0x1, 0xDE5BE840],
    0xDE701DF0: [0x646E6172, 0xBA000000, 0, 0],
    0xDE711008: [0, 0, 0, 0],
    0xDE70A4C8: [0x6F6F66, 0, 0, 0],
    0xDE709DE0: [0x3, 0],
    0xDE5BE840: [0, 0, 0, 0x7],
}
FOO_HEAP_STATIC = 0xC0100000


def foo_heap_catalog_document():
    b = CatalogBuilder(4)
    b.base("char", 1)
    i32 = b.base("int", 4)
    b.declare("struct foo")
    bar = b.struct("struct bar", [("bar_flags", i32), ("bar_next", b.pointer("struct foo"))])
    b.typedef("bar_t", bar)
    b.struct("struct foo", [("foo_next", b.pointer("struct foo")), ("foo_name", b.pointer("char")),
                            ("foo_bar", b.pointer("bar_t")), ("foo_val", i32)])
    b.typedef("foo_t", "struct foo")
    b.pointer("foo_t")
    return b.document()


def foo_heap_catalog():
    return load_catalog(foo_heap_catalog_document())


def foo_heap_document():
    segs, objs = [], []
    for base, words in sorted(FOO_HEAP_WORDS.items()):
        data = struct.pack(f"<{len(words)}I", *words)
        segs.append(encode_segment(base, data))
        objs.append({"base": f"{base:#x}", "size": len(data), "cache": "c8" if len(data) == 8 else "c16"})
    segs.append(encode_segment(FOO_HEAP_STATIC, struct.pack("<I", FOO_LIST)))
    return {
        "format_version": 1, "pointer_size": 4, "endianness": "little", "segments": segs,
        "caches": [{"id": "c8", "name": "kmem_alloc_8", "object_size": 8, "general_purpose": True},
                   {"id": "c16", "name": "kmem_alloc_16", "object_size": 16, "general_purpose": True}],
        "objects": objs,
        "statics": [{"symbol": "foo_list", "base": f"{FOO_HEAP_STATIC:#x}", "type": "foo_t *"}],
    }


@pytest.fixture
def foo_heap():
    cat = foo_heap_catalog()
    return cat, load_dump(foo_heap_document(), cat)


def build_spec(spec):
    """Generate, load and build (not run) the graph for a synth spec."""
    doc, truth = generate(spec)
    cat = load_catalog(spec.catalog)
    img = load_dump(doc, cat)
    g = TypeGraph(img, cat, [(c["name"], c["type"]) for c in spec.typed_caches])
    return g, truth, doc


@pytest.fixture(scope="session")
def kcat():
    return load_catalog(kernel_catalog(8))


def make_doc(ps, objects, *, gp=(8, 16, 32, 64), typed=(), statics=(), endian="little"):
    """Dump document from ``{base: (words, cache_size_or_name)}`` plus ``{base: (symbol, type, words)}``.

    Every object and static gets its own segment; sizes are ``len(words) * ps``.
    """
    fmt = {4: "I", 8: "Q"}[ps]
    order = "<" if endian == "little" else ">"
    caches = [{"id": f"gp{s}", "name": f"kmem_alloc_{s}", "object_size": s, "general_purpose": True} for s in gp]
    caches += [{"id": name, "name": name, "object_size": size, "general_purpose": False} for name, size in typed]
    segs, objs, stats = [], [], []
    for base, (words, cache) in sorted(objects.items()):
        data = struct.pack(f"{order}{len(words)}{fmt}", *words)
        segs.append(encode_segment(base, data))
        objs.append({"base": f"{base:#x}", "size": len(data),
                     "cache": f"gp{cache}" if isinstance(cache, int) else cache})
    for base, (symbol, tid, words) in sorted(dict(statics).items()):
        segs.append(encode_segment(base, struct.pack(f"{order}{len(words)}{fmt}", *words)))
        stats.append({"symbol": symbol, "base": f"{base:#x}", "type": tid})
    return {"format_version": 1, "pointer_size": ps, "endianness": endian, "segments": segs,
            "caches": caches, "objects": objs, "statics": stats}
