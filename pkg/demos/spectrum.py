"""Estimated cost against measured i-cost for every plan of a 6-vertex path."""

import time

from hybridjoin import build_catalogue, enumerate_spectrum, execute
from hybridjoin.datasets import named_query, random_graph

g = random_graph(60, 0.08, seed=4)
cat = build_catalogue(g, h=3, z=1000)
spectrum = enumerate_spectrum(named_query("Q13"), cat)
print(f"{len(spectrum)} plans")
print("rank,est_cost,icost_actual,seconds,plan")
for i, rp in enumerate(spectrum[:10] + spectrum[-3:]):
    t0 = time.perf_counter()
    r = execute(rp.plan, g)
    print(f"{i},{rp.cost:.0f},{r.stats.icost_actual},{time.perf_counter() - t0:.4f},{rp.plan.signature()}")
