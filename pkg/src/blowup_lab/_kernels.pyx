# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled leapfrog kernel; mirrors ``_kernels_py.advance``."""
from libc.math cimport fabs, exp, log, isfinite


def advance(double[::1] um, double[::1] u, const double[::1] cL, const double[::1] cC,
            const double[::1] cR, const double[::1] inv_plus, const double[::1] minus,
            double dt, double p, bint nonlinear, Py_ssize_t nsteps, double threshold,
            double t0, double R, double dr, Py_ssize_t pad):
    cdef Py_ssize_t N = u.shape[0] - 1
    cdef Py_ssize_t k, j, J
    cdef double dt2 = dt * dt
    cdef double prev_j, cur_j, acc, new, m
    cdef double max_now = 0.0, max_prev
    cdef double t, a
    cdef int ip = 0
    if p == 2.0:
        ip = 2
    elif p == 3.0:
        ip = 3
    for j in range(N + 1):
        if fabs(u[j]) > max_now:
            max_now = fabs(u[j])
    max_prev = max_now
    for k in range(nsteps):
        t = t0 + k * dt
        J = <Py_ssize_t>((t + R) / dr) + pad
        if J > N - 1:
            J = N - 1
        m = 0.0
        # prev_j carries the old u[j-1] once u[j-1] has been overwritten
        prev_j = 0.0
        for j in range(J + 1):
            cur_j = u[j]
            acc = cC[j] * cur_j + cR[j] * u[j + 1]
            if j > 0:
                acc += cL[j] * prev_j
            if nonlinear:
                a = fabs(cur_j)
                if ip == 2:
                    acc += a * a
                elif ip == 3:
                    acc += a * a * a
                elif a > 0.0:
                    # exp/log is markedly cheaper than libm pow here
                    acc += exp(p * log(a))
            new = inv_plus[j] * (2.0 * cur_j - minus[j] * um[j] + dt2 * acc)
            um[j] = cur_j
            u[j] = new
            prev_j = cur_j
            if fabs(new) > m:
                m = fabs(new)
        max_prev = max_now
        max_now = m
        if not isfinite(m):
            return k + 1, 2, max_prev, max_now
        if m >= threshold:
            return k + 1, 1, max_prev, max_now
    return nsteps, 0, max_prev, max_now
