"""Ready-made catalogs and scenario corpora.

Each builder returns a :class:`SynthSpec`; the scenario families mirror
the C idioms type identification has to cope with: linked lists, structs
embedded at nonzero offsets, flexible array members, dynamically sized
arrays, character buffers, embedded-first-member polymorphism, stale
references after reuse, held locks and lock-bearing arrays.
"""

from __future__ import annotations

import numpy as np

from ..typecat import CatalogBuilder
from .generate import owner_address
from .spec import Script, SynthSpec

# General-purpose size classes: every step is less than 2x the previous one.
LADDER = [8, 16, 24, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 288, 320, 384,
          448, 512, 640, 768, 896, 1024, 1280, 1536, 1792, 2048, 2560, 3072, 4096, 8192]


def kernel_catalog(pointer_size: int = 8) -> dict:
    """A small kernel-flavoured type universe used by all corpora."""
    b = CatalogBuilder(pointer_size)
    char = b.base("char", 1)
    short = b.base("short", 2)
    i32 = b.base("int", 4)
    long = b.base("long", pointer_size)
    uptr = b.base("uintptr_t", pointer_size)
    void = b.base("void", 0, align=1)
    fn = b.function("void (void)")
    b.typedef("mumble_t", i32)

    mutex = b.struct("struct mutex", [("m_owner", uptr)], flags=["sync_primitive"])
    b.typedef("kmutex_t", mutex)
    b.struct("struct _kcondvar", [("cv_waiters", short)], flags=["sync_primitive"])

    # classic list element with name and bar pointers
    b.declare("struct foo")
    bar = b.struct("struct bar", [("bar_flags", i32), ("bar_next", b.pointer("struct foo"))])
    b.typedef("bar_t", bar)
    foo = b.struct("struct foo", [("foo_next", b.pointer("struct foo")), ("foo_name", b.pointer(char)),
                                  ("foo_bar", b.pointer("bar_t")), ("foo_val", i32)])
    b.typedef("foo_t", foo)

    # flexible array members
    b.struct("struct fam", [("fam_bar", i32), ("fam_baz", i32), ("fam_mumble", b.array("mumble_t", 1))])
    b.typedef("fam_t", "struct fam")
    b.declare("struct payload")
    b.struct("struct vec", [("v_n", i32), ("v_flags", i32), ("v_items", b.array(b.pointer("struct payload"), 1))])
    b.struct("struct payload", [("p_a", long), ("p_b", long), ("p_c", i32)])

    # linked list with strings and payloads
    b.declare("struct node")
    b.struct("struct node", [("n_next", b.pointer("struct node")), ("n_prev", b.pointer("struct node")),
                             ("n_key", i32), ("n_flags", i32), ("n_name", b.pointer(char)),
                             ("n_data", b.pointer("struct payload")), ("n_func", b.pointer(fn))])

    # embedding at a nonzero offset
    b.declare("struct listlink")
    b.struct("struct listlink", [("l_next", b.pointer("struct listlink")), ("l_prev", b.pointer("struct listlink"))])
    b.struct("struct cred", [("cr_uid", i32), ("cr_gid", i32), ("cr_ref", long)])
    b.struct("struct proc", [("p_pid", i32), ("p_flag", i32), ("p_link", "struct listlink"),
                             ("p_cred", b.pointer("struct cred")), ("p_lock", "kmutex_t"),
                             ("p_comm", b.pointer(char))])
    b.typedef("proc_t", "struct proc")

    # dynamically sized arrays
    b.struct("struct entry", [("e_node", b.pointer("struct node")), ("e_key", long), ("e_val", long)])
    b.struct("struct table", [("t_n", i32), ("t_flags", i32), ("t_ents", b.pointer("struct entry")),
                              ("t_hash", b.pointer(b.pointer("struct node")))])

    # embedded first member: struct tmpnode begins with struct vnode
    b.declare("struct vnode")
    b.struct("struct vnode", [("v_next", b.pointer("struct vnode")), ("v_type", i32), ("v_flag", i32),
                              ("v_data", b.pointer(void))])
    b.typedef("vnode_t", "struct vnode")
    b.declare("struct tmpnode")
    b.struct("struct filock", [("f_next", b.pointer("struct filock")), ("f_start", long), ("f_len", long),
                               ("f_pid", i32), ("f_type", i32)])
    b.struct("struct lock_descriptor", [("l_next", b.pointer("struct lock_descriptor")), ("l_flags", long),
                                        ("l_start", long), ("l_end", i32), ("l_state", i32)])
    b.struct("struct tmpnode", [("tn_vnode", "vnode_t"), ("tn_next", b.pointer("struct tmpnode")),
                                ("tn_size", long), ("tn_filock", b.pointer("struct filock")),
                                ("tn_gen", long), ("tn_mode", long)])
    b.struct("struct socklist", [("sl_next", b.pointer("struct socklist")),
                                 ("sl_vp", b.pointer("struct vnode"))])

    # locks
    b.struct("struct anon_map", [("refcnt", long), ("size", long), ("swresv", long),
                                 ("serial_lock", "kmutex_t"), ("lock", "kmutex_t")])
    b.struct("struct segkp_data", [("kp_lock", "kmutex_t"), ("kp_base", b.pointer(char)), ("kp_len", long)])

    # lock-bearing array elements
    b.struct("struct tbf", [("tbf_lock", "kmutex_t"), ("tbf_head", b.pointer("struct node")),
                            ("tbf_pad", b.array(long, 5))])
    b.struct("struct fifolock", [("ff_lock", "kmutex_t"), ("ff_cv", "struct _kcondvar"),
                                 ("ff_count", i32), ("ff_owner", b.pointer(void)), ("ff_pad", long)])
    b.struct("struct uf_entry", [("uf_file", b.pointer(void)), ("uf_flag", long), ("uf_lock", "kmutex_t"),
                                 ("uf_refcnt", long), ("uf_busy", long)])
    b.struct("struct smfree", [("sm_lock", "kmutex_t"), ("sm_free", b.pointer("struct node")),
                               ("sm_cv", "struct _kcondvar")])
    b.struct("struct pair", [("a", long), ("b", b.pointer("struct node"))])

    # union (used only outside the clean corpora)
    b.struct("union un", [("u_node", b.pointer("struct node")), ("u_val", long)], union=True)
    b.struct("struct holder", [("h_kind", long), ("h_u", "union un")])

    # derived types named by scenario allocations and statics
    for t in ("struct proc", "proc_t", "struct node", "struct tmpnode", "vnode_t", "struct pair", "struct vec",
              "fam_t", "struct table", "foo_t", "struct anon_map", "struct segkp_data", "struct entry",
              "struct lock_descriptor", "struct vnode", "struct tbf", "struct fifolock", "struct uf_entry",
              "struct mutex", "struct smfree"):
        b.pointer(t)
    for t in ("struct proc *", "struct tmpnode *", "vnode_t *"):
        b.pointer(t)
    for t, n in (("struct tbf", 32), ("struct mutex", 16), ("struct pair", 16), ("struct mutex", 4)):
        b.array(t, n)
    return b.document()


def _spec(script: Script, seed: int, *, ladder=LADDER, typed=(), pointer_size=8, **kw) -> SynthSpec:
    return SynthSpec(catalog=kernel_catalog(pointer_size), gp_caches=list(ladder), typed_caches=list(typed),
                     script=script.directives, seed=seed, pointer_size=pointer_size, **kw)


def _string(s: Script, rng) -> str:
    return s.alloc("char", count=int(rng.choice([16, 32, 64, 128])), fill="text")


def _list(s: Script, rng, length: int, head_symbol: str, *, cache: str | None = None) -> list[str]:
    nodes = [s.alloc("struct node", cache=cache) for _ in range(length)]
    for a, b in zip(nodes, nodes[1:]):
        s.link(a, "n_next", b)
        s.link(b, "n_prev", a)
    for n in nodes:
        if rng.random() < 0.7:
            s.link(n, "n_name", _string(s, rng))
        if rng.random() < 0.5:
            s.link(n, "n_data", s.alloc("struct payload"))
    s.static(head_symbol, "struct node *", [{"path": "", "dst": nodes[0]}])
    return nodes


def recognition_corpus(n_objects: int = 10_000, seed: int = 1) -> SynthSpec:
    """Cast-free, fully rooted mix of every scenario family."""
    rng = np.random.default_rng(seed)
    s = Script()
    typed = [{"name": "process_cache", "type": "proc_t"}]
    k = 0
    while True:
        made = len([d for d in s.directives if d["op"] == "alloc"])
        if made >= n_objects:
            break
        family = k % 5
        k += 1
        if family == 0:
            _list(s, rng, int(rng.integers(5, 40)), f"list_head_{k}")
        elif family == 1:
            # procs chained through an embedded link; each also held by a table slot
            procs = []
            for _ in range(int(rng.choice([4, 5, 6, 7, 8, 10, 12, 14, 16]))):
                p = s.alloc("proc_t", cache="process_cache" if rng.random() < 0.5 else None)
                s.link(p, "p_cred", s.alloc("struct cred"))
                if rng.random() < 0.6:
                    s.link(p, "p_comm", _string(s, rng))
                procs.append(p)
            for a, b in zip(procs, procs[1:]):
                s.link(a, "p_link.l_next", b, dst_path="p_link")
                s.link(b, "p_link.l_prev", a, dst_path="p_link")
            s.link(procs[-1], "p_link.l_next", procs[0], dst_path="p_link")
            tab = s.alloc("struct proc *", count=len(procs))
            for i, p in enumerate(procs):
                s.link(tab, f"[{i}]", p)
            s.static(f"procarr_{k}", "struct proc **", [{"path": "", "dst": tab}])
        elif family == 2:
            # flexible array members sized to fill their slot exactly
            n = int(rng.choice([1, 2, 3, 5, 7, 9, 11, 15]))
            v = s.alloc("struct vec", fam=n)
            for i in range(n):
                if rng.random() < 0.8:
                    s.link(v, f"v_items[{i}]", s.alloc("struct payload"))
            s.static(f"vec_{k}", "struct vec *", [{"path": "", "dst": v}])
            m = int(rng.choice([2, 4, 6, 10, 14]))
            f = s.alloc("fam_t", fam=m)
            s.static(f"fam_{k}", "fam_t *", [{"path": "", "dst": f}])
        elif family == 3:
            # dynamic arrays of structs and of pointers
            n = int(rng.choice([2, 4, 8, 16, 32]))
            t = s.alloc("struct table")
            ents = s.alloc("struct entry", count=n)
            s.link(t, "t_ents", ents)
            for i in range(n):
                if rng.random() < 0.5:
                    s.link(ents, f"[{i}].e_node", _list(s, rng, 1, f"ent_{k}_{i}")[0])
            nb = int(rng.choice([4, 8, 16, 32, 64]))
            hb = s.alloc("struct node *", count=nb)
            s.link(t, "t_hash", hb)
            for i in range(nb):
                if rng.random() < 0.6:
                    nd = s.alloc("struct node")
                    s.link(hb, f"[{i}]", nd)
                    s.link(nd, "n_name", _string(s, rng))
            s.static(f"table_{k}", "struct table *", [{"path": "", "dst": t}])
        else:
            # foo_t chain with names and bars
            foos = [s.alloc("foo_t") for _ in range(int(rng.integers(3, 15)))]
            for a, b in zip(foos, foos[1:]):
                s.link(a, "foo_next", b)
            for f in foos:
                s.link(f, "foo_name", _string(s, rng))
                bar = s.alloc("bar_t")
                s.link(f, "foo_bar", bar)
            s.static(f"foo_list_{k}", "foo_t *", [{"path": "", "dst": foos[0]}])
    return _spec(s, seed, typed=typed)


def typed_fraction_corpus(n_objects: int = 1000, typed_fraction: float = 0.3, seed: int = 2) -> SynthSpec:
    """Lists of struct node where an exact fraction comes from a typed cache."""
    s = Script()
    n_typed = round(n_objects * typed_fraction)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_objects)
    nodes = []
    for i in range(n_objects):
        nodes.append(s.alloc("struct node", cache="node_cache" if order[i] < n_typed else None))
    for i in range(0, n_objects, 50):
        chunk = nodes[i:i + 50]
        for a, b in zip(chunk, chunk[1:]):
            s.link(a, "n_next", b)
        s.static(f"nlist_{i}", "struct node *", [{"path": "", "dst": chunk[0]}])
    return _spec(s, seed, typed=[{"name": "node_cache", "type": "struct node"}])


def fam_corpus(counts=range(1, 17), seed: int = 3, pointer_size: int = 4) -> SynthSpec:
    """One fam_t per trailing count, with exact-fit size classes."""
    s = Script()
    ladder = list(range(12, 12 + 4 * 20, 4))
    names = [s.alloc("fam_t", fam=n, name=f"fam{n}") for n in counts]
    for n in names:
        s.static(f"{n}_ptr", "fam_t *", [{"path": "", "dst": n}])
    return _spec(s, seed, ladder=ladder, pointer_size=pointer_size)


def embedded_first_member_corpus(n: int = 100, seed: int = 4) -> SynthSpec:
    """tmpnodes reached both as ``struct tmpnode *`` and as ``vnode_t *``."""
    s = Script()
    tmps = [s.alloc("struct tmpnode") for _ in range(n)]
    # tables sized to fill their slot exactly; trailing entries stay NULL
    slots = min(c for c in LADDER if c >= 8 * n) // 8
    tt = s.alloc("struct tmpnode *", count=slots)
    vt = s.alloc("vnode_t *", count=slots)
    for i, t in enumerate(tmps):
        s.link(tt, f"[{i}]", t)
        s.link(vt, f"[{i}]", t)
    s.static("tmpnode_table", "struct tmpnode **", [{"path": "", "dst": tt}])
    s.static("vnode_table", "vnode_t **", [{"path": "", "dst": vt}])
    return _spec(s, seed)


def use_after_free_corpus(n: int = 50, seed: int = 5) -> SynthSpec:
    """Objects reallocated as lock_descriptor while a stale filock pointer survives."""
    s = Script()
    for i in range(n):
        owner = s.alloc("struct tmpnode")
        s.static(f"tmp_{i}", "struct tmpnode *", [{"path": "", "dst": owner}])
        ld = s.alloc("struct lock_descriptor")
        s.static(f"ld_{i}", "struct lock_descriptor *", [{"path": "", "dst": ld}])
        s.inject_stale(owner, "tn_filock", ld)
    return _spec(s, seed)


def locks_corpus(n_held: int = 200, n_free: int = 200, seed: int = 6) -> SynthSpec:
    """anon_maps and segkp_data in lists; exactly ``n_held`` locks held."""
    rng = np.random.default_rng(seed)
    s = Script()
    sites = []
    n_objs = (n_held + n_free + 1) // 2
    for i in range(n_objs):
        if i % 4 == 3:
            o = s.alloc("struct segkp_data")
            sites += [(o, "kp_lock")]
            sites += [(o, None)]
        else:
            o = s.alloc("struct anon_map")
            sites += [(o, "serial_lock"), (o, "lock")]
        s.static(f"am_{i}", "struct anon_map *" if i % 4 != 3 else "struct segkp_data *",
                 [{"path": "", "dst": o}])
    sites = [x for x in sites if x[1] is not None]
    while len(sites) < n_held + n_free:
        o = s.alloc("struct anon_map")
        s.static(f"am_x{len(sites)}", "struct anon_map *", [{"path": "", "dst": o}])
        sites += [(o, "serial_lock"), (o, "lock")]
    sites = sites[:n_held + n_free]
    held = rng.permutation(len(sites))[:n_held]
    for k, i in enumerate(sorted(held)):
        o, path = sites[i]
        s.hold_lock(o, path, owner_address(8, k + 1))
    s.static("pageout_mutex", "kmutex_t", [])
    return _spec(s, seed)


def false_sharing_corpus(seed: int = 7) -> SynthSpec:
    """Planted lock-bearing arrays plus arrays that must not be reported."""
    s = Script()
    s.static("tbftable", "struct tbf[32]", [])
    s.static("fx_list_lock", "struct mutex[16]", [])
    s.static("plain_pairs", "struct pair[16]", [])
    s.static("two_locks", "struct mutex[4]", [])
    planted = []
    for i, (t, n) in enumerate([("struct fifolock", 9), ("struct fifolock", 9), ("struct uf_entry", 64),
                                ("struct mutex", 512), ("struct smfree", 8)]):
        a = s.alloc(t, count=n, name=f"planted{i}")
        planted.append(a)
        s.static(f"p{i}", f"{t} *", [{"path": "", "dst": a}])
    for i, (t, n) in enumerate([("struct pair", 16), ("struct entry", 8)]):
        a = s.alloc(t, count=n, name=f"nolock{i}")
        s.static(f"q{i}", f"{t} *", [{"path": "", "dst": a}])
    small = s.alloc("struct mutex", count=6, name="small_locks")
    s.static("small", "struct mutex *", [{"path": "", "dst": small}])
    return _spec(s, seed)


def feedback_corpus(n_hidden: int = 500, n_visible: int = 200, seed: int = 8) -> SynthSpec:
    """A ``void *``-rooted list of ``n_hidden`` nodes beside an ordinary typed list."""
    s = Script()
    vis = [s.alloc("struct node") for _ in range(n_visible)]
    for a, b in zip(vis, vis[1:]):
        s.link(a, "n_next", b)
    s.static("visible_list", "struct node *", [{"path": "", "dst": vis[0]}])
    hidden = [s.alloc("struct node") for _ in range(n_hidden)]
    for a, b in zip(hidden, hidden[1:]):
        s.link(a, "n_next", b)
        s.link(b, "n_prev", a)
    owner = s.alloc("struct vnode")
    s.static("opaque_vnode", "struct vnode *", [{"path": "", "dst": owner}])
    s.link(owner, "v_data", hidden[0])
    return _spec(s, seed)


CORPORA = {
    "recognition": recognition_corpus,
    "typed": typed_fraction_corpus,
    "fam": fam_corpus,
    "embedded": embedded_first_member_corpus,
    "stale": use_after_free_corpus,
    "locks": locks_corpus,
    "falseshare": false_sharing_corpus,
    "feedback": feedback_corpus,
}
