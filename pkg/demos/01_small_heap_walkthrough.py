"""A tiny heap, typed by hand and then by the graph.

Eight objects hang off one static list head. Only the head's type is
known up front; everything else is inferred by following pointers.
"""

# %%
from pmtype import TypeGraph, load_catalog, load_dump, render_stats, whattype
from pmtype.synth import Script, SynthSpec, evaluate, generate
from pmtype.synth.corpora import kernel_catalog

# %% [markdown]
# Build a short foo_t chain. Each foo points at a name buffer and a bar.

# %%
s = Script()
foos = [s.alloc("foo_t") for _ in range(3)]
for a, b in zip(foos, foos[1:]):
    s.link(a, "foo_next", b)
for f in foos:
    s.link(f, "foo_name", s.alloc("char", count=16, fill="text"))
    s.link(f, "foo_bar", s.alloc("bar_t"))
s.static("foo_list", "foo_t *", [{"path": "", "dst": foos[0]}])
spec = SynthSpec(catalog=kernel_catalog(4), gp_caches=[8, 16, 32, 64], script=s.directives,
                 seed=1, pointer_size=4)
doc, truth = generate(spec)

# %%
cat = load_catalog(spec.catalog)
g = TypeGraph(load_dump(doc, cat), cat)
stats = g.run()
print(render_stats(stats[-1], timing=False))

# %% [markdown]
# Ask about a few addresses, including one inside a name buffer.

# %%
for o in truth.objects[:4]:
    print(whattype(g, o.base + 4))

# %%
print(evaluate(g, truth).render())
