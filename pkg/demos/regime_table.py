"""Which well-posedness statements apply where: a small table of the regime oracle.

Run with ``python demos/regime_table.py``.
"""
import math

from fracscalar import RegimeQuery, alpha0, regime_classify

for d in (1, 2, 3):
    print(f"d={d}, alpha0={alpha0(d):.4f}")
    for alpha in (0.5, 1.0, 1.2, 1.5, 2.0):
        cert = regime_classify(RegimeQuery(d, alpha, "ca", q=5, q0=math.inf))
        cells = []
        for name, v in (("global", cert.global_mild), ("local", cert.local_mild), ("martingale", cert.martingale)):
            cells.append(f"{name}: {v.clause if v.granted else '-'}")
        print(f"  alpha={alpha:<4} " + " | ".join(cells))

# full text certificate for one point, including the notes on refused verdicts
print()
print(regime_classify(RegimeQuery(2, 0.5, "ca", q=2, q0=2)).to_text())
