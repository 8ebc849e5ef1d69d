"""
Coarsening space and time
=========================

Coarser cells and longer bins make traces look alike. The sweep draws
leaks once at the finest granularity and re-evaluates the same leaks on
every coarser grid, so the numbers below can only go down along each axis.
"""

import numpy as np

from leakmatch import DiscretizationConfig
from leakmatch.analysis import sweep
from leakmatch.ingest import SyntheticPopulationConfig, generate_synthetic

ds = generate_synthetic(SyntheticPopulationConfig(num_users=2000, seed=3), DiscretizationConfig(200.0, 300))

dts = [300, 900, 1800, 3600]
dxys = [200.0, 1000.0, 5000.0, 25000.0, 125000.0]
grid = sweep(ds, ks=[2, 10], delta_ts=dts, delta_xys=dxys, sample_size=400, seed=4)

for m, k in enumerate(grid.ks):
    print("\nk = %d   rows: delta_t (min), columns: delta_xy (km)" % k)
    print("        " + "".join("%8g" % (d / 1000) for d in dxys))
    for i, dt in enumerate(dts):
        print("%6d  " % (dt // 60) + "".join("%8.3f" % v for v in grid.rho[i, :, m]))

print("\nmonotonicity violations:", grid.monotonicity_violations())

###############################################################################
# Anonymity-set growth for one sampled leak chain

j = int(np.argmax(grid.nu[-1, -1, -1]))
print("largest anonymity set at the coarsest point:", grid.nu[-1, -1, -1, j])
print("same leak at the finest point:", grid.nu[0, 0, -1, j])
