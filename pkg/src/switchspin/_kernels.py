"""Hot numeric loops: quaternion chains, coordinate-ascent sweeps, trajectories.

Quaternions are float64 arrays ``(w, x, y, z)`` standing for the SU(2)
element ``w*1 - i*(x*sx + y*sy + z*sz)``.  Everything here is compiled by
numba unless ``SWITCHSPIN_NO_JIT`` is set (see :mod:`switchspin._accel`).
"""

import math

import numpy as np

from ._accel import kernel

TWO_PI = 2.0 * math.pi


@kernel
def qmul(a, b):
    out = np.empty(4)
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return out


@kernel
def qconj(a):
    out = np.empty(4)
    out[0] = a[0]
    out[1] = -a[1]
    out[2] = -a[2]
    out[3] = -a[3]
    return out


@kernel
def qnormalize(a):
    n = math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3])
    return a / n


@kernel
def qaxis(axis, angle):
    out = np.empty(4)
    h = 0.5 * angle
    s = math.sin(h)
    out[0] = math.cos(h)
    out[1] = s * axis[0]
    out[2] = s * axis[1]
    out[3] = s * axis[2]
    return out


@kernel
def qapply(q, v):
    # v + 2w (u x v) + 2 u x (u x v)
    ux, uy, uz = q[1], q[2], q[3]
    tx = 2.0 * (uy * v[2] - uz * v[1])
    ty = 2.0 * (uz * v[0] - ux * v[2])
    tz = 2.0 * (ux * v[1] - uy * v[0])
    out = np.empty(3)
    out[0] = v[0] + q[0] * tx + (uy * tz - uz * ty)
    out[1] = v[1] + q[0] * ty + (uz * tx - ux * tz)
    out[2] = v[2] + q[0] * tz + (ux * ty - uy * tx)
    return out


@kernel
def rodrigues(v, axis, angle):
    c = math.cos(angle)
    s = math.sin(angle)
    d = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2]
    out = np.empty(3)
    cx = axis[1] * v[2] - axis[2] * v[1]
    cy = axis[2] * v[0] - axis[0] * v[2]
    cz = axis[0] * v[1] - axis[1] * v[0]
    out[0] = v[0] * c + cx * s + axis[0] * d * (1.0 - c)
    out[1] = v[1] * c + cy * s + axis[1] * d * (1.0 - c)
    out[2] = v[2] * c + cz * s + axis[2] * d * (1.0 - c)
    return out


@kernel
def chain_product(durations, axes, omegas, start):
    """Product of alternating rotations; segment 0 uses ``axes[start]``."""
    q = np.zeros(4)
    q[0] = 1.0
    a = start
    for i in range(durations.shape[0]):
        q = qmul(qaxis(axes[a], omegas[a] * durations[i]), q)
        a = 1 - a
    return qnormalize(q)


@kernel
def chain_batch(durations, counts, axes, omegas, start):
    m = durations.shape[0]
    out = np.empty((m, 4))
    for r in range(m):
        out[r] = chain_product(durations[r, : counts[r]], axes, omegas, start)
    return out


@kernel
def trajectory(durations, axes, omegas, start, v0, dt):
    """Bloch vector samples on a ``dt`` grid plus every segment endpoint."""
    n = 1
    for d in durations:
        nj = int(math.floor(d / dt))
        if nj > 0 and nj * dt >= d - 1e-12 * max(d, 1.0):
            nj -= 1
        n += nj + 1
    times = np.empty(n)
    pts = np.empty((n, 3))
    times[0] = 0.0
    pts[0] = v0
    v = v0.copy()
    t0 = 0.0
    a = start
    idx = 1
    for d in durations:
        nj = int(math.floor(d / dt))
        if nj > 0 and nj * dt >= d - 1e-12 * max(d, 1.0):
            nj -= 1
        for j in range(1, nj + 1):
            s = j * dt
            times[idx] = t0 + s
            pts[idx] = rodrigues(v, axes[a], omegas[a] * s)
            idx += 1
        v = rodrigues(v, axes[a], omegas[a] * d)
        t0 += d
        times[idx] = t0
        pts[idx] = v
        idx += 1
        a = 1 - a
    return times, pts


# ---------------------------------------------------------------------------
# single-coordinate trace maximisation
# ---------------------------------------------------------------------------


@kernel
def sweep_coefficients(c, x, axis):
    """Tr(C R X R^-1) = A0 + A1 cos(phi) + A2 sin(phi), R = rotation by phi."""
    cpar = c[1] * axis[0] + c[2] * axis[1] + c[3] * axis[2]
    xpar = x[1] * axis[0] + x[2] * axis[1] + x[3] * axis[2]
    cx = c[1] * x[1] + c[2] * x[2] + c[3] * x[3]
    # axis x x_v
    ax = axis[1] * x[3] - axis[2] * x[2]
    ay = axis[2] * x[1] - axis[0] * x[3]
    az = axis[0] * x[2] - axis[1] * x[1]
    a0 = 2.0 * (c[0] * x[0] - cpar * xpar)
    a1 = -2.0 * (cx - cpar * xpar)
    a2 = -2.0 * (c[1] * ax + c[2] * ay + c[3] * az)
    return a0, a1, a2


@kernel
def best_on_interval(a0, a1, a2, lo, hi):
    """Maximise a0 + a1 cos + a2 sin over [lo, hi]; returns (phi, value)."""
    best_phi = lo
    best = a0 + a1 * math.cos(lo) + a2 * math.sin(lo)
    v = a0 + a1 * math.cos(hi) + a2 * math.sin(hi)
    if v > best:
        best = v
        best_phi = hi
    if a1 * a1 + a2 * a2 > 0.0:
        star = math.atan2(a2, a1)
        j = math.ceil((lo - star) / TWO_PI)
        phi = star + j * TWO_PI
        while phi <= hi:
            v = a0 + a1 * math.cos(phi) + a2 * math.sin(phi)
            if v > best:
                best = v
                best_phi = phi
            phi += TWO_PI
    return best_phi, best


@kernel
def nested_trace_product(target, lefts, rights):
    x = target.copy()
    for i in range(lefts.shape[0]):
        x = qmul(qmul(lefts[i], x), rights[i])
    return qnormalize(x)


@kernel
def selective_factors(axes, omegas, tc, taus, ms):
    k = taus.shape[0]
    lefts = np.empty((k, 4))
    rights = np.empty((k, 4))
    for i in range(k):
        lefts[i] = qaxis(axes[i], omegas[i] * (taus[i] - ms[i] * tc[i]))
        rights[i] = qaxis(axes[i], -omegas[i] * taus[i])
    return lefts, rights


@kernel
def selective_ascent(target, axes, omegas, tc, mmax, taus0, max_sweeps, tol, stag_tol, lead_eps):
    """Coordinate ascent of Re Tr of the nested refocusing product.

    Coordinate ``i`` lives on ``[0, mmax[i] * tc[i]]``; the branch index
    ``ms[i]`` (complement = ms*tc - tau) is chosen jointly with the delay, so
    every update is an exact 1D maximisation and the trace never decreases.
    Returns ``(taus, ms, trace, sweeps, history, min_delta)``.
    """
    k = taus0.shape[0]
    taus = taus0.copy()
    ms = np.empty(k, np.int64)
    for i in range(k):
        m = int(math.ceil(taus[i] / tc[i] - 1e-12))
        if m < 1:
            m = 1
        if m > mmax[i]:
            m = mmax[i]
        ms[i] = m
    lefts, rights = selective_factors(axes, omegas, tc, taus, ms)
    trace = 2.0 * nested_trace_product(target, lefts, rights)[0]
    history = np.full(max_sweeps + 1, np.nan)
    history[0] = trace
    min_delta = np.inf
    prev = trace
    sweeps = 0
    while sweeps < max_sweeps and 2.0 - trace >= tol:
        start = trace
        x = target.copy()
        for i in range(k):
            p = np.zeros(4)
            p[0] = 1.0
            q = p.copy()
            for j in range(i + 1, k):
                p = qmul(lefts[j], p)
                q = qmul(q, rights[j])
            qp = qmul(q, p)
            w = omegas[i]
            best_tau = taus[i]
            best_m = ms[i]
            cm = qmul(qp, qaxis(axes[i], -w * ms[i] * tc[i]))
            a0, a1, a2 = sweep_coefficients(cm, x, axes[i])
            best = a0 + a1 * math.cos(w * taus[i]) + a2 * math.sin(w * taus[i])
            for m in range(1, mmax[i] + 1):
                cm = qmul(qp, qaxis(axes[i], -w * m * tc[i]))
                a0, a1, a2 = sweep_coefficients(cm, x, axes[i])
                lo = (m - 1) * tc[i]
                if i == 0 and lo < lead_eps:
                    lo = lead_eps
                hi = m * tc[i]
                phi, val = best_on_interval(a0, a1, a2, w * lo, w * hi)
                if val > best + 1e-15:
                    best = val
                    best_tau = min(max(phi / w, lo), hi)
                    best_m = m
            taus[i] = best_tau
            ms[i] = best_m
            lefts[i] = qaxis(axes[i], w * (best_tau - best_m * tc[i]))
            rights[i] = qaxis(axes[i], -w * best_tau)
            d = best - prev
            if d < min_delta:
                min_delta = d
            prev = best
            x = qmul(qmul(lefts[i], x), rights[i])
        trace = 2.0 * nested_trace_product(target, lefts, rights)[0]
        prev = trace
        sweeps += 1
        history[sweeps] = trace
        if trace - start < stag_tol:
            break
    return taus, ms, trace, sweeps, history, min_delta


@kernel
def selective_residual(target, axes, omegas, tc, ms, taus):
    lefts, rights = selective_factors(axes, omegas, tc, taus, ms)
    x = nested_trace_product(target, lefts, rights)
    if x[0] < 0.0:
        x = -x
    return x[1:].copy()


# ---------------------------------------------------------------------------
# many nuclei, shared delays
# ---------------------------------------------------------------------------


@kernel
def multi_chain_quats(taus, ax, om):
    """Chain products for every (nucleus, manifold) row; ax is (C, 2, 3)."""
    c = ax.shape[0]
    out = np.empty((c, 4))
    for r in range(c):
        q = np.zeros(4)
        q[0] = 1.0
        for i in range(taus.shape[0]):
            s = i % 2
            q = qmul(qaxis(ax[r, s], om[r, s] * taus[i]), q)
        out[r] = qnormalize(q)
    return out


@kernel
def multi_objective(taus, ax, om, targets):
    qs = multi_chain_quats(taus, ax, om)
    total = 0.0
    for r in range(qs.shape[0]):
        d = (qs[r, 0] * targets[r, 0] + qs[r, 1] * targets[r, 1]
             + qs[r, 2] * targets[r, 2] + qs[r, 3] * targets[r, 3])
        total += 2.0 * abs(d)
    return total


@kernel
def _multi_line(tau, p, r, w):
    total = 0.0
    for c in range(p.shape[0]):
        h = 0.5 * w[c] * tau
        total += 2.0 * abs(p[c] * math.cos(h) + r[c] * math.sin(h))
    return total


@kernel
def multi_sweep(taus0, hi, ax, om, targets, grid, golden_iters):
    """One pass of grid-bracketed golden-section line searches over every delay."""
    k = taus0.shape[0]
    nc = ax.shape[0]
    taus = taus0.copy()
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for i in range(k):
        s = i % 2
        p = np.empty(nc)
        r = np.empty(nc)
        w = np.empty(nc)
        for c in range(nc):
            f = np.zeros(4)
            f[0] = 1.0
            for j in range(i):
                f = qmul(qaxis(ax[c, j % 2], om[c, j % 2] * taus[j]), f)
            left = np.zeros(4)
            left[0] = 1.0
            for j in range(k - 1, i, -1):
                left = qmul(left, qaxis(ax[c, j % 2], om[c, j % 2] * taus[j]))
            e = np.zeros(4)
            e[1] = ax[c, s, 0]
            e[2] = ax[c, s, 1]
            e[3] = ax[c, s, 2]
            lf = qmul(left, f)
            lef = qmul(left, qmul(e, f))
            t = targets[c]
            p[c] = lf[0] * t[0] + lf[1] * t[1] + lf[2] * t[2] + lf[3] * t[3]
            r[c] = lef[0] * t[0] + lef[1] * t[1] + lef[2] * t[2] + lef[3] * t[3]
            w[c] = om[c, s]
        cur = _multi_line(taus[i], p, r, w)
        step = hi[i] / grid
        best_g = 0.0
        best_v = -1.0
        for g in range(grid + 1):
            v = _multi_line(g * step, p, r, w)
            if v > best_v:
                best_v = v
                best_g = g * step
        a = max(best_g - step, 0.0)
        b = min(best_g + step, hi[i])
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1 = _multi_line(x1, p, r, w)
        f2 = _multi_line(x2, p, r, w)
        for _ in range(golden_iters):
            if f1 > f2:
                b = x2
                x2 = x1
                f2 = f1
                x1 = b - invphi * (b - a)
                f1 = _multi_line(x1, p, r, w)
            else:
                a = x1
                x1 = x2
                f1 = f2
                x2 = a + invphi * (b - a)
                f2 = _multi_line(x2, p, r, w)
        cand = 0.5 * (a + b)
        cv = _multi_line(cand, p, r, w)
        if best_v > cv:
            cand = best_g
            cv = best_v
        if cv > cur:
            taus[i] = cand
    return taus, multi_objective(taus, ax, om, targets)
