"""Run explicit curve shortening on polygons.

Vertices move by the discrete curvature of the polyline. A regular
polygon tracks the shrinking-circle law r(t) = sqrt(r0^2 - 2t); a
self-crossing curve is detected and the run stops.
"""

import numpy as np

from varmcf.flow import (
    SelfIntersectionError,
    polyline_length,
    run_curve_shortening,
)


def regular_polygon(m, radius=1.0):
    # closed implicitly: the last vertex connects back to the first
    ang = np.linspace(0.0, 2 * np.pi, m, endpoint=False)
    return radius * np.column_stack([np.cos(ang), np.sin(ang)])


times, history = run_curve_shortening(
    regular_polygon(256), duration=0.3, record_every=64
)
print("256-gon under curve shortening (exact radius sqrt(1 - 2t)):")
for t, poly in zip(times, history):
    mean_r = float(np.mean(np.linalg.norm(poly, axis=1)))
    print(f"  t={t:6.4f} length={polyline_length(poly):8.5f} "
          f"mean radius={mean_r:.5f} exact={np.sqrt(1 - 2 * t):.5f}")

# a limacon with an inner loop crosses itself; the run refuses to continue
theta = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
r = 1.0 + 1.6 * np.cos(theta)
limacon = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
try:
    run_curve_shortening(limacon, duration=0.3)
except SelfIntersectionError as err:
    print(f"limacon: {err}")
