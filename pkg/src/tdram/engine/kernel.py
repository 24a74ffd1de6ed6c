"""Compiled MNA assembly, Newton iteration and fixed-step time integration.

Unknowns are the non-ground node voltages followed by one branch current per
voltage source. Ground is index -1 in every connectivity array.
"""

import math

import numpy as np
from numba import njit

from ..device import kernel_current

BACKWARD_EULER = 0
TRAPEZOIDAL = 1

FD_STEP = 1e-3  # central-difference perturbation for device derivatives
MAX_UPDATE = 0.5  # volts; Newton steps are scaled down to this
MAX_HALVINGS = 8
SWITCH_BAND = 0.05  # volts of control swing over which a switch moves between roff and ron

OK = 0
NO_CONVERGENCE = 1


@njit(cache=True, nogil=True)
def pwl_value(j, t, off, pt, pv):
    a = off[j]
    b = off[j + 1]
    if t <= pt[a]:
        return pv[a]
    if t >= pt[b - 1]:
        return pv[b - 1]
    lo = a
    hi = b - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pt[mid] <= t:
            lo = mid
        else:
            hi = mid
    t0 = pt[lo]
    t1 = pt[hi]
    if t1 == t0:
        return pv[hi]
    return pv[lo] + (pv[hi] - pv[lo]) * (t - t0) / (t1 - t0)


@njit(cache=True, nogil=True)
def _v(x, i):
    if i < 0:
        return 0.0
    return x[i]


@njit(cache=True, nogil=True)
def _stamp_g(J, a, b, g):
    if a >= 0:
        J[a, a] += g
        if b >= 0:
            J[a, b] -= g
    if b >= 0:
        J[b, b] += g
        if a >= 0:
            J[b, a] -= g


@njit(cache=True, nogil=True)
def switch_conductance(s, t, sw_ctrl, sw_thr, sw_gon, sw_goff, src_off, src_t, src_v):
    u = (pwl_value(sw_ctrl[s], t, src_off, src_t, src_v) - sw_thr[s]) / SWITCH_BAND + 0.5
    if u <= 0.0:
        return sw_goff[s]
    if u >= 1.0:
        return sw_gon[s]
    # smoothstep in log-conductance keeps the closing event resolvable by the time grid
    w = u * u * (3.0 - 2.0 * u)
    return sw_goff[s] * (sw_gon[s] / sw_goff[s]) ** w


@njit(cache=True, nogil=True)
def assemble(x, t, n, gmin, scale, dynamic, geq_factor, trap,
             cap_a, cap_b, cap_c, vcap_prev, icap_prev,
             sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
             fet_d, fet_g, fet_s, fet_p,
             src_a, src_b, src_off, src_t, src_v,
             J, f):
    J[:, :] = 0.0
    f[:] = 0.0
    for i in range(n):
        J[i, i] += gmin
        f[i] += gmin * x[i]

    if dynamic:
        for c in range(cap_a.shape[0]):
            a = cap_a[c]
            b = cap_b[c]
            geq = cap_c[c] * geq_factor
            i = geq * (_v(x, a) - _v(x, b) - vcap_prev[c])
            if trap:
                i -= icap_prev[c]
            if a >= 0:
                f[a] += i
            if b >= 0:
                f[b] -= i
            _stamp_g(J, a, b, geq)

    for s in range(sw_a.shape[0]):
        a = sw_a[s]
        b = sw_b[s]
        g = switch_conductance(s, t, sw_ctrl, sw_thr, sw_gon, sw_goff, src_off, src_t, src_v)
        i = g * (_v(x, a) - _v(x, b))
        if a >= 0:
            f[a] += i
        if b >= 0:
            f[b] -= i
        _stamp_g(J, a, b, g)

    h = FD_STEP
    for q in range(fet_d.shape[0]):
        d = fet_d[q]
        g_ = fet_g[q]
        s_ = fet_s[q]
        p = fet_p[q]
        vs = _v(x, s_)
        vgs = _v(x, g_) - vs
        vds = _v(x, d) - vs
        ids = kernel_current(p[0], p[1], p[2], p[3], p[4], p[5], vgs, vds)
        gm = (kernel_current(p[0], p[1], p[2], p[3], p[4], p[5], vgs + h, vds)
              - kernel_current(p[0], p[1], p[2], p[3], p[4], p[5], vgs - h, vds)) / (2 * h)
        gds = (kernel_current(p[0], p[1], p[2], p[3], p[4], p[5], vgs, vds + h)
               - kernel_current(p[0], p[1], p[2], p[3], p[4], p[5], vgs, vds - h)) / (2 * h)
        if d >= 0:
            f[d] += ids
            if g_ >= 0:
                J[d, g_] += gm
            J[d, d] += gds
            if s_ >= 0:
                J[d, s_] -= gm + gds
        if s_ >= 0:
            f[s_] -= ids
            if g_ >= 0:
                J[s_, g_] -= gm
            if d >= 0:
                J[s_, d] -= gds
            J[s_, s_] += gm + gds

    for j in range(src_a.shape[0]):
        row = n + j
        a = src_a[j]
        b = src_b[j]
        ij = x[row]
        if a >= 0:
            f[a] += ij
            J[a, row] += 1.0
            J[row, a] += 1.0
        if b >= 0:
            f[b] -= ij
            J[b, row] -= 1.0
            J[row, b] -= 1.0
        f[row] = _v(x, a) - _v(x, b) - scale * pwl_value(j, t, src_off, src_t, src_v)


@njit(cache=True, nogil=True)
def solve_dense(A, b, out):
    """Gaussian elimination with partial pivoting; destroys A and b."""
    size = b.shape[0]
    for k in range(size):
        p = k
        big = abs(A[k, k])
        for r in range(k + 1, size):
            if abs(A[r, k]) > big:
                big = abs(A[r, k])
                p = r
        if big == 0.0:
            return False
        if p != k:
            for c in range(k, size):
                tmp = A[k, c]
                A[k, c] = A[p, c]
                A[p, c] = tmp
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
        piv = A[k, k]
        for r in range(k + 1, size):
            m = A[r, k] / piv
            if m != 0.0:
                for c in range(k + 1, size):
                    A[r, c] -= m * A[k, c]
                b[r] -= m * b[k]
    for k in range(size - 1, -1, -1):
        acc = b[k]
        for c in range(k + 1, size):
            acc -= A[k, c] * out[c]
        out[k] = acc / A[k, k]
    return True


@njit(cache=True, nogil=True)
def newton(x, t, n, gmin, scale, dynamic, geq_factor, trap,
           cap_a, cap_b, cap_c, vcap_prev, icap_prev,
           sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
           fet_d, fet_g, fet_s, fet_p,
           src_a, src_b, src_off, src_t, src_v,
           v_tol, i_tol, max_iter):
    """Solve in place. Returns (converged, iterations, worst node index)."""
    size = x.shape[0]
    J = np.empty((size, size))
    f = np.empty(size)
    dx = np.empty(size)
    worst = 0
    for it in range(max_iter):
        assemble(x, t, n, gmin, scale, dynamic, geq_factor, trap,
                 cap_a, cap_b, cap_c, vcap_prev, icap_prev,
                 sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
                 fet_d, fet_g, fet_s, fet_p,
                 src_a, src_b, src_off, src_t, src_v, J, f)
        max_res = 0.0
        for i in range(n):
            if abs(f[i]) > max_res:
                max_res = abs(f[i])
        for i in range(size):
            f[i] = -f[i]
        if not solve_dense(J, f, dx):
            return False, it + 1, worst
        max_dv = 0.0
        for i in range(n):
            if abs(dx[i]) > max_dv:
                max_dv = abs(dx[i])
                worst = i
        if not (math.isfinite(max_dv) and math.isfinite(max_res)):
            return False, it + 1, worst
        if max_dv > MAX_UPDATE:
            dx *= MAX_UPDATE / max_dv
        x += dx
        if max_dv < v_tol and max_res < i_tol:
            return True, it + 1, worst
    return False, max_iter, worst


@njit(cache=True, nogil=True)
def element_currents(x, t, sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
                     fet_d, fet_g, fet_s, fet_p, src_off, src_t, src_v, i_sw, i_fet):
    for s in range(sw_a.shape[0]):
        g = switch_conductance(s, t, sw_ctrl, sw_thr, sw_gon, sw_goff, src_off, src_t, src_v)
        i_sw[s] = g * (_v(x, sw_a[s]) - _v(x, sw_b[s]))
    for q in range(fet_d.shape[0]):
        p = fet_p[q]
        vs = _v(x, fet_s[q])
        i_fet[q] = kernel_current(p[0], p[1], p[2], p[3], p[4], p[5],
                                  _v(x, fet_g[q]) - vs, _v(x, fet_d[q]) - vs)


@njit(cache=True, nogil=True)
def run_transient(x0, n, n_steps, dt, method, gmin, v_tol, i_tol, max_iter,
                  cap_a, cap_b, cap_c,
                  sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
                  fet_d, fet_g, fet_s, fet_p,
                  src_a, src_b, src_off, src_t, src_v,
                  out_x, out_icap, out_isw, out_ifet):
    """Fixed-step integration from the operating point ``x0``.

    Writes samples 0..n_steps into the out arrays. A failed step is retried
    as sub-steps of dt/2, dt/4, ... (at most MAX_HALVINGS halvings); only
    grid points are recorded. Returns (status, failing time, worst node).
    """
    trap = method == TRAPEZOIDAL
    n_cap = cap_a.shape[0]
    x = x0.copy()
    vcap = np.zeros(n_cap)
    icap = np.zeros(n_cap)
    for c in range(n_cap):
        vcap[c] = _v(x, cap_a[c]) - _v(x, cap_b[c])
    out_x[0, :] = x
    out_icap[0, :] = 0.0  # operating point: capacitors carry no current
    element_currents(x, 0.0, sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
                     fet_d, fet_g, fet_s, fet_p, src_off, src_t, src_v, out_isw[0], out_ifet[0])

    trial = np.empty_like(x)
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * dt
        t_target = k * dt
        t_cur = t_prev
        h = dt
        level = 0
        while t_target - t_cur > 1e-9 * dt:
            hs = min(h, t_target - t_cur)
            t_new = t_cur + hs
            if t_target - t_new < 1e-9 * dt:
                t_new = t_target
                hs = t_new - t_cur
            geq_factor = (2.0 if trap else 1.0) / hs
            trial[:] = x
            ok, iters, worst = newton(trial, t_new, n, gmin, 1.0, True, geq_factor, trap,
                                      cap_a, cap_b, cap_c, vcap, icap,
                                      sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
                                      fet_d, fet_g, fet_s, fet_p,
                                      src_a, src_b, src_off, src_t, src_v,
                                      v_tol, i_tol, max_iter)
            if not ok:
                level += 1
                if level > MAX_HALVINGS:
                    return NO_CONVERGENCE, t_new, worst
                h = h / 2
                continue
            for c in range(n_cap):
                v_new = _v(trial, cap_a[c]) - _v(trial, cap_b[c])
                i_new = cap_c[c] * geq_factor * (v_new - vcap[c])
                if trap:
                    i_new -= icap[c]
                vcap[c] = v_new
                icap[c] = i_new
            x[:] = trial
            t_cur = t_new
        out_x[k, :] = x
        out_icap[k, :] = icap
        element_currents(x, t_target, sw_a, sw_b, sw_ctrl, sw_thr, sw_gon, sw_goff,
                         fet_d, fet_g, fet_s, fet_p, src_off, src_t, src_v, out_isw[k], out_ifet[k])
    return OK, 0.0, 0
