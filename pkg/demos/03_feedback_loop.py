"""Recovering a subgraph hidden behind a void pointer.

A vnode's v_data points at a list the catalog cannot see into. The
greatest-reach node is the best place to spend one manual annotation.
"""

# %%
from pmtype import TypeGraph, load_catalog, load_dump
from pmtype.synth import generate
from pmtype.synth.corpora import feedback_corpus

spec = feedback_corpus(500, 200)
doc, truth = generate(spec)
cat = load_catalog(spec.catalog)
g = TypeGraph(load_dump(doc, cat), cat)
before = g.run()[-1]
print("known or conjectured:", before.known_or_conjectured, "of", before.nodes)

# %%
nid, reach = g.greatest_reach()
print(f"{g.nodes[nid].base:x} reaches {reach} unknown nodes")

# %% [markdown]
# Tell the graph what that node is and let propagation do the rest.

# %%
after = g.istype(g.nodes[nid].base, "struct node")[-1]
print("known or conjectured:", after.known_or_conjectured, "of", after.nodes)
