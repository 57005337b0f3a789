"""
How much faster must the fabric run?
====================================

Poisson packets with exponential lengths of mean L bytes, cut into S-byte
cells, form an M/G/1 queue whose service is geometric in cell times.  The
switch fabric must run sigma = mu / (1 - e^-mu) times faster than the
line (mu = S/L) just to carry the offered load.
"""

from cellseg.mg1 import required_speedup, segmentation_curve

S = 64
for L in (100, 500, 1000):
    print(f"L={L:5d} bytes: required speed-up sigma = {required_speedup(L, S):.3f}")

# mean number in system against link utilization, without any speed-up
rhos = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
print("\nrho   " + "".join(f"L={L:<10d}" for L in (100, 500, 1000)))
curves = {L: segmentation_curve(L, S, rhos) for L in (100, 500, 1000)}
for k, rho in enumerate(rhos):
    cells = []
    for L in (100, 500, 1000):
        r = curves[L][k]
        cells.append(f"{r.mean_queue_length:<12.3f}" if r.stable else "unstable    ")
    print(f"{rho:<6}" + "".join(cells))
