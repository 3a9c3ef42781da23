"""A fixed ordering pays 3n on the triads graph; the adaptive one pays n."""

from hybridjoin import build_catalogue, execute
from hybridjoin.datasets import DIAMOND_X, shape, triads
from hybridjoin.executor import ICOST_UNMATCHED
from hybridjoin.planner import wco_plan

n = 1000
g = triads(n)
cat = build_catalogue(g, h=3, z=10_000)
plan = wco_plan(shape(DIAMOND_X), ("a2", "a3", "a4", "a1"))
for adaptive in (False, True):
    r = execute(plan, g, icost_mode=ICOST_UNMATCHED, catalogue=cat, adaptive=adaptive)
    print(f"adaptive={adaptive}: i-cost {r.stats.icost_actual}, routes {dict(r.stats.routes)}")
