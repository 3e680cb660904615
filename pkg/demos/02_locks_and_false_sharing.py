"""Who holds which lock, and which lock arrays share cache lines."""

# %%
from pmtype import TypeGraph, load_catalog, load_dump
from pmtype.analyzers import findfalse, findlocks, render_findfalse, render_findlocks
from pmtype.synth import generate
from pmtype.synth.corpora import false_sharing_corpus, locks_corpus


def build(spec):
    doc, truth = generate(spec)
    cat = load_catalog(spec.catalog)
    g = TypeGraph(load_dump(doc, cat), cat)
    g.run()
    return g, truth


# %% [markdown]
# Forty lock sites, twenty of them held. A held mutex stores its owner
# thread, so reading identified objects is enough to list them.

# %%
g, truth = build(locks_corpus(20, 20))
recs = findlocks(g)
print(render_findlocks(recs))
assert {(r.address, r.owner) for r in recs} == set(truth.held_locks)

# %% [markdown]
# Small lock-bearing elements packed into a larger array are the classic
# false-sharing shape. Arrays without a lock are left out.

# %%
g, _ = build(false_sharing_corpus())
print(render_findfalse(findfalse(g, granularity=64)))
