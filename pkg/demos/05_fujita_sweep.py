"""
A Fujita diagram from a parameter sweep
=======================================

Sweep the coupled Laplacian system over (p, q), classify each cell by
evolution and by barrier certificates, and print the map alongside the side
of the critical curve (max{p,q}+1)/(pq-1) = N/2.
"""

# %%
from pathlib import Path

from puccisys.harness import load_config, run
from puccisys.harness.pipeline import read_records

cfg = load_config(Path(__file__).with_name("sweep.ini"))
result = run(cfg, "runs/demo-sweep")
print(result.summary)

# %%
rows = read_records("runs/demo-sweep/records.csv")
mark = {"blown-up": "B", "global-to-T": "g", "certified-global": "C"}
ps = sorted({float(r["p"]) for r in rows})
qs = sorted({float(r["q"]) for r in rows})
cell = {(float(r["p"]), float(r["q"])): r for r in rows}
print("outcome (B blown up, g global to T, C certified) / curve side (- sub, 0 critical, + super)")
print("  q\\p " + " ".join(f"{p:6.2f}" for p in ps))
for q in reversed(qs):
    line = []
    for p in ps:
        r = cell[(p, q)]
        side = {"sub": "-", "critical": "0", "super": "+"}.get(r["eh_side"], "?")
        line.append(f"  {mark.get(r['outcome'], 'x')}/{side} ")
    print(f"{q:6.2f} " + " ".join(line))
