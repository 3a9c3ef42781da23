"""Plan and run diamond-X on a small graph, then check it against brute force."""

from hybridjoin import build_catalogue, execute, explain, optimize, parse_query
from hybridjoin.datasets import random_graph
from hybridjoin.oracle import brute_force_count

g = random_graph(40, 0.15, seed=1)
cat = build_catalogue(g, h=3, z=1000)
q = parse_query("(a1)-[:_]->(a2),(a1)-[:_]->(a3),(a2)-[:_]->(a3),(a2)-[:_]->(a4),(a3)-[:_]->(a4)")

plan = optimize(q, cat)
print(explain(plan))
result = execute(plan, g)
print("matches:", result.count, "brute force:", brute_force_count(q, g))
print("i-cost:", result.stats.icost_actual, "cache hits:", result.stats.cache_hits)
