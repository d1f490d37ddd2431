"""Rainbow spanning tree in a host whose three clusters form a triangle."""
import sys

from rainbowblowup.apps import dirac_tree_embed, verify_spanning_embedding
from rainbowblowup.generate import planted_cycle_host, random_bounded_tree

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
G, c = planted_cycle_host(120, 3, 0.7, k=2, seed=seed)
T = random_bounded_tree(120, 3, seed=seed)
print(f"host: {len(G.edges)} edges; tree max degree {max(d for _, d in T.degree)}")

res = dirac_tree_embed(G, c, T, seed=seed)
ver = verify_spanning_embedding(G, c, T, res.phi)
print("rainbow spanning copy:", ver["ok"])
st = res.report["stages"]
print("  Hamilton cycle of the reduced graph:", st["hamilton"])
print("  tree classes:", st["tree_partition"]["sizes"], "hat candidates:", st["tree_partition"]["hat_counts"])
print("  hats per class:", st["hats"]["sizes"], "matched by Hall:", st["hall"]["matched"])
