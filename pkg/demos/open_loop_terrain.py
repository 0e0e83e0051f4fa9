"""Open-loop trot on flat ground and on increasingly rough terrain.

The untrained gait walks on flat ground but rarely gets far once the
terrain gets rough. Takes about a minute.

    python demos/open_loop_terrain.py
"""
import numpy as np

from quadgait import D2Distribution, D2Sample, GaitParams, World, nominal_sample, run_batch

world, dist = World(), D2Distribution()
steps = 3000  # 30 s
seeds = range(10)
for magnitude in (0.0, 0.02, 0.04, 0.06, 0.08):
    base = nominal_sample(dist, magnitude)
    samples = [D2Sample(base.base_mass, base.link_masses, base.friction, magnitude, s) for s in seeds]
    res = run_batch(world, None, samples, seeds, steps, open_loop=GaitParams())
    d = np.array([r.distance for r in res])
    fell = sum(r.fell for r in res)
    print(f"magnitude {magnitude:.2f} m: fell {fell:2d}/{len(res)}, distance mean {d.mean():5.2f} m, "
          f"max {d.max():5.2f} m")
