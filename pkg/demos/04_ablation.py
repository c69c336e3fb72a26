"""
Desk-scale ablation
===================

Every benchmark variant over three seeds, 50 epochs each, plus the k-means
reference. Expect about 25 minutes on one core.
"""
import logging

from scdc import benchmark as bm

logging.basicConfig(level=logging.INFO, format="%(message)s")

data = bm.benchmark_data()
print("k-means CAC per seed:", [round(bm.kmeans_cac(data, s), 3) for s in bm.SEEDS])

runs = bm.run_ablation(data)
rac, cac = bm.medians(runs, "rac"), bm.medians(runs, "cac")
for name in bm.VARIANTS:
    print("%-13s median RAC %.3f  median CAC %.3f" % (name, rac[name], cac[name]))
