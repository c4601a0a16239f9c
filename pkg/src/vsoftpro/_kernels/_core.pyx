# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elbow integration kernel; see _py.py for the reference version."""

from libc.math cimport cos, sinh

BACKEND = "compiled"


cdef inline double _accel(double q, double qd, double th_a, double th_b,
                          bint is_esv, double a, double b, double damping,
                          double grav, double tau_ext, double inv_i) noexcept:
    cdef double tau, d
    if is_esv:
        d = q - th_a
        tau = -(a * sinh(b * (d + th_b)) + a * sinh(b * (d - th_b)))
    else:
        tau = a * sinh(b * (th_a - q)) - a * sinh(b * (q - th_b))
    return (tau + tau_ext - damping * qd - grav * cos(q)) * inv_i


def elbow_rk4(double q, double qd, double th_a, double th_b, bint is_esv,
              double a, double b, double inertia, double damping,
              double grav, double tau_ext, double dt, int n):
    """Run n fixed-step RK4 updates of the elbow with frozen motor angles."""
    cdef double inv_i = 1.0 / inertia
    cdef double k1q, k1v, k2q, k2v, k3q, k3v, k4q, k4v, q2, v2, q3, v3, q4, v4
    cdef int i
    for i in range(n):
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
