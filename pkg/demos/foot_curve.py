"""Print the open-loop foot curve and the trot phase schedule.

    python demos/foot_curve.py
"""
import numpy as np

from quadgait import LEGS, PhaseClock, leg_phases, trajectory

TAU, PSI, DELTA = 0.035, 0.04, 0.01

s = np.linspace(0.0, 2.0, 17, endpoint=False)
q, z = trajectory(s, TAU, PSI, DELTA)
print("   s      q (m)     z (m)   part")
for si, qi, zi in zip(s, q, z):
    print(f"{si:5.3f}  {qi:+.4f}  {zi:+.4f}   {'stance' if si < 1 else 'swing'}")
print(f"apex {z.max():.4f} m, deepest press {z.min():.4f} m")

clock = PhaseClock(t_swing=0.15, t_stance=0.45)
print("\n  t (s)  " + "  ".join(f"{leg:>5}" for leg in LEGS))
for t in np.arange(0.0, clock.t_stride, 0.075):
    ph = leg_phases(clock, t)
    print(f"  {t:5.3f}  " + "  ".join(f"{p:5.2f}" for p in ph))
