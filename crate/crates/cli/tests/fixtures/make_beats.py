"""Regenerate the synthetic histogram pair used by the CLI golden test.

Reference: 1 + 0.3 exp(-t/3us) cos(2pi 2.5MHz t), test: the same beat delayed
by 60 ns and scaled by 1.6. Counts are Poisson around a plateau of 4000
counts per 1.64 ns bin.
"""
import math
import random

BIN_NS = 1.64
N_BINS = 2866
PLATEAU = 4000.0


def poisson(rng, lam):
    # Normal approximation; lam is in the thousands.
    return max(0, int(round(rng.gauss(lam, math.sqrt(lam)))))


def write(path, scale, delay_ns, seed):
    rng = random.Random(seed)
    with open(path, "w") as f:
        f.write("tau_ns,counts,g2_normalized\n")
        for k in range(N_BINS):
            t = (k + 0.5) * BIN_NS
            g2 = 1.0 + scale * 0.3 * math.exp(-t / 3000.0) * math.cos(2 * math.pi * 2.5e-3 * (t - delay_ns))
            c = poisson(rng, PLATEAU * g2)
            f.write(f"{t:.4f},{c},{c / PLATEAU:.9f}\n")


write("beat_reference.csv", 1.0, 0.0, 1)
write("beat_test.csv", 1.6, 60.0, 2)
