"""Pure-Python elbow integration kernel; mirror of the compiled version.

Operation order matches `_core.pyx` exactly so both backends agree to the
last bit on IEEE doubles.
"""

from math import cos, sinh

BACKEND = "python"


def elbow_rk4(q, qd, th_a, th_b, is_esv, a, b, inertia, damping, grav, tau_ext, dt, n):
    """Run n fixed-step RK4 updates of the elbow with frozen motor angles.

    Dynamics: I*qdd = tau_vsa(q) + tau_ext - damping*qd - grav*cos(q).
    AA layout: tau_vsa = a*sinh(b*(th_a-q)) - a*sinh(b*(q-th_b));
    ESV layout (is_esv): th_a is the position motor, th_b the preload.
    """
    inv_i = 1.0 / inertia
    for _ in range(n):
        k1q = qd
        k1v = _accel(q, qd, th_a, th_b, is_esv, a, b, damping, grav, tau_ext, inv_i)
        q2 = q + 0.5 * dt * k1q
        v2 = qd + 0.5 * dt * k1v
        k2q = v2
        k2v = _accel(q2, v2, th_a, th_b, is_esv, a, b, damping, grav, tau_ext, inv_i)
        q3 = q + 0.5 * dt * k2q
        v3 = qd + 0.5 * dt * k2v
        k3q = v3
        k3v = _accel(q3, v3, th_a, th_b, is_esv, a, b, damping, grav, tau_ext, inv_i)
        q4 = q + dt * k3q
        v4 = qd + dt * k3v
        k4q = v4
        k4v = _accel(q4, v4, th_a, th_b, is_esv, a, b, damping, grav, tau_ext, inv_i)
        q = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        qd = qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q, qd


def _accel(q, qd, th_a, th_b, is_esv, a, b, damping, grav, tau_ext, inv_i):
    if is_esv:
        d = q - th_a
        tau = -(a * sinh(b * (d + th_b)) + a * sinh(b * (d - th_b)))
    else:
        tau = a * sinh(b * (th_a - q)) - a * sinh(b * (q - th_b))
    return (tau + tau_ext - damping * qd - grav * cos(q)) * inv_i
