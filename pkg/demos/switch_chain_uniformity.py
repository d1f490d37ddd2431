"""How close to uniform is the switch chain on K_{4,4}?

Compares chain frequencies with the 24 enumerated perfect matchings.
"""
from collections import Counter

from scipy.stats import chi2

from rainbowblowup.graphcore import BipartiteGraph
from rainbowblowup.matching import enumerate_perfect_matchings, run_parallel_chains

B = BipartiteGraph.complete(range(4), range(4, 8))
pms = enumerate_perfect_matchings(B)
samples = 24_000

for steps in (1, 4, 16, 64, 640):
    m = run_parallel_chains(B, samples, steps, seed=1)
    counts = Counter(map(tuple, m.tolist()))
    exp = samples / len(pms)
    freqs = [counts.get(tuple(M[a] - 4 for a in range(4)), 0) for M in pms]
    stat = sum((f - exp) ** 2 / exp for f in freqs)
    print(f"{steps:4d} steps: chi2 = {stat:10.1f}  (99.9% quantile {chi2.ppf(0.999, len(pms) - 1):.1f}), "
          f"worst deviation {max(abs(f - exp) for f in freqs) / exp:.1%}")
