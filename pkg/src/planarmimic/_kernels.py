"""Compiled planar rigid-body kernels.

Generalized coordinates are ``[X, Y, th0, th1, ..., thJ]``. For a floating
character ``(X, Y)`` is the whole-body center of mass and ``th0`` the root link
angle; for a fixed-base character ``(X, Y, th0)`` is the pinned base pose.
Rotational dof ``k`` (``k >= 1``) is the joint whose child is link ``k``.

All kernels take the model as flat arrays (see ``CharacterModel.arrays``).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

DIVERGED_NONE = -1


@njit(cache=True)
def relative_kinematics(parent, attach, com, th):
    """Link origins, angles and COMs with the root origin at (0, 0)."""
    n = parent.shape[0]
    ang = np.empty(n)
    org = np.zeros((n, 2))
    pcom = np.empty((n, 2))
    ang[0] = th[0]
    for i in range(1, n):
        p = parent[i]
        ang[i] = ang[p] + th[i]
        c = math.cos(ang[p])
        s = math.sin(ang[p])
        org[i, 0] = org[p, 0] + c * attach[i, 0] - s * attach[i, 1]
        org[i, 1] = org[p, 1] + s * attach[i, 0] + c * attach[i, 1]
    for i in range(n):
        c = math.cos(ang[i])
        s = math.sin(ang[i])
        pcom[i, 0] = org[i, 0] + c * com[i, 0] - s * com[i, 1]
        pcom[i, 1] = org[i, 1] + s * com[i, 0] + c * com[i, 1]
    return ang, org, pcom


@njit(cache=True)
def point_jacobian(anc, org, link, px, py, out):
    """d(point)/d(th) for a point rigidly attached to ``link`` (2 x n, written into out)."""
    n = anc.shape[0]
    for k in range(n):
        if anc[link, k]:
            out[0, k] = -(py - org[k, 1])
            out[1, k] = px - org[k, 0]
        else:
            out[0, k] = 0.0
            out[1, k] = 0.0


@njit(cache=True)
def com_offset(mass, pcom):
    mt = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(mass.shape[0]):
        mt += mass[i]
        cx += mass[i] * pcom[i, 0]
        cy += mass[i] * pcom[i, 1]
    return cx / mt, cy / mt, mt


@njit(cache=True)
def link_jacobians(anc, org, pcom, mass, floating):
    """Per-link COM Jacobians ``A[i]`` (2 x n) and the whole-body COM Jacobian."""
    n = anc.shape[0]
    A = np.empty((n, 2, n))
    jc = np.zeros((2, n))
    mt = 0.0
    for i in range(n):
        point_jacobian(anc, org, i, pcom[i, 0], pcom[i, 1], A[i])
        mt += mass[i]
        for r in range(2):
            for k in range(n):
                jc[r, k] += mass[i] * A[i, r, k]
    for r in range(2):
        for k in range(n):
            jc[r, k] /= mt
    if floating:
        for i in range(n):
            for r in range(2):
                for k in range(n):
                    A[i, r, k] -= jc[r, k]
    return A, jc


@njit(cache=True)
def mass_matrix(anc, A, mass, inertia):
    n = anc.shape[0]
    M = np.zeros((n, n))
    for i in range(n):
        for a in range(n):
            wa = 1.0 if anc[i, a] else 0.0
            for b in range(a, n):
                wb = 1.0 if anc[i, b] else 0.0
                v = mass[i] * (A[i, 0, a] * A[i, 0, b] + A[i, 1, a] * A[i, 1, b]) + inertia[i] * wa * wb
                M[a, b] += v
    for a in range(n):
        for b in range(a):
            M[a, b] = M[b, a]
    return M


@njit(cache=True)
def link_omegas(parent, thd):
    n = parent.shape[0]
    om = np.empty(n)
    om[0] = thd[0]
    for i in range(1, n):
        om[i] = om[parent[i]] + thd[i]
    return om


@njit(cache=True)
def bias_accelerations(parent, org, pcom, om):
    """Velocity-product accelerations of every link COM (q_ddot = 0)."""
    n = parent.shape[0]
    borg = np.zeros((n, 2))
    bcom = np.empty((n, 2))
    for i in range(1, n):
        p = parent[i]
        w2 = om[p] * om[p]
        borg[i, 0] = borg[p, 0] - w2 * (org[i, 0] - org[p, 0])
        borg[i, 1] = borg[p, 1] - w2 * (org[i, 1] - org[p, 1])
    for i in range(n):
        w2 = om[i] * om[i]
        bcom[i, 0] = borg[i, 0] - w2 * (pcom[i, 0] - org[i, 0])
        bcom[i, 1] = borg[i, 1] - w2 * (pcom[i, 1] - org[i, 1])
    return bcom


@njit(cache=True)
def cholesky_solve(M, rhs, lo):
    """Solve the trailing block ``M[lo:, lo:] x = rhs[lo:]``; entries below ``lo`` are zero."""
    n = M.shape[0]
    m = n - lo
    Lm = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1):
            s = M[lo + i, lo + j]
            for k in range(j):
                s -= Lm[i, k] * Lm[j, k]
            if i == j:
                Lm[i, i] = math.sqrt(s)
            else:
                Lm[i, j] = s / Lm[j, j]
    y = np.empty(m)
    for i in range(m):
        s = rhs[lo + i]
        for k in range(i):
            s -= Lm[i, k] * y[k]
        y[i] = s / Lm[i, i]
    x = np.zeros(n)
    for i in range(m - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, m):
            s -= Lm[k, i] * x[lo + k]
        x[lo + i] = s / Lm[i, i]
    return x


@njit(cache=True)
def world_point(q, floating, cx, cy, ang, org, link, local):
    c = math.cos(ang[link])
    s = math.sin(ang[link])
    rx = org[link, 0] + c * local[0] - s * local[1]
    ry = org[link, 1] + s * local[0] + c * local[1]
    if floating:
        return q[0] - cx + rx, q[1] - cy + ry, rx, ry
    return q[0] + rx, q[1] + ry, rx, ry


@njit(cache=True)
def substep(q, qd, anchor, active, tau, fext, fext_link, h, gx, gy,
            parent, anc, attach, com, mass, inertia, floating,
            c_link, c_local, ground, kn, cn, kt, ct, mu, flags, normal_out):
    """Advance one simulation substep in place (drift-kick-drift).

    ``tau`` holds joint torques (length n-1). ``fext`` is an external force
    applied at the COM of ``fext_link``. ``flags`` receives per-link contact
    flags and ``normal_out`` the normal force at each contact point.
    """
    n = parent.shape[0]
    nq = n + 2
    half = 0.5 * h
    lo = 0 if floating else 1
    qm = q.copy()
    for i in range(nq):
        qm[i] = q[i] + half * qd[i]
    if not floating:
        for i in range(3):
            qm[i] = q[i]

    th = qm[2:]
    thd = qd[2:]
    ang, org, pcom = relative_kinematics(parent, attach, com, th)
    cx, cy, mt = com_offset(mass, pcom)
    A, jc = link_jacobians(anc, org, pcom, mass, floating)
    M = mass_matrix(anc, A, mass, inertia)
    om = link_omegas(parent, thd)
    bcom = bias_accelerations(parent, org, pcom, om)

    rhs = np.zeros(n)
    for j in range(1, n):
        rhs[j] += tau[j - 1]
    for i in range(n):
        bx = bcom[i, 0]
        by = bcom[i, 1]
        for k in range(n):
            rhs[k] -= mass[i] * (A[i, 0, k] * bx + A[i, 1, k] * by)
    if not floating:
        for i in range(n):
            for k in range(n):
                rhs[k] += mass[i] * (A[i, 0, k] * gx + A[i, 1, k] * gy)

    ftx = 0.0
    fty = 0.0
    for i in range(n):
        flags[i] = False
    jp = np.empty((2, n))
    npts = c_link.shape[0]
    for ci in range(npts):
        li = c_link[ci]
        px, py, rx, ry = world_point(qm, floating, cx, cy, ang, org, li, c_local[ci])
        pen = ground - py
        if pen <= 0.0:
            active[ci] = False
            normal_out[ci] = 0.0
            continue
        point_jacobian(anc, org, li, rx, ry, jp)
        vx = 0.0
        vy = 0.0
        for k in range(n):
            if floating:
                vx += (jp[0, k] - jc[0, k]) * thd[k]
                vy += (jp[1, k] - jc[1, k]) * thd[k]
            else:
                vx += jp[0, k] * thd[k]
                vy += jp[1, k] * thd[k]
        if floating:
            vx += qd[0]
            vy += qd[1]
        fn = kn * pen - cn * vy
        if fn < 0.0:
            fn = 0.0
        if not active[ci]:
            active[ci] = True
            anchor[ci] = px
        ft = -kt * (px - anchor[ci]) - ct * vx
        lim = mu * fn
        if ft > lim or ft < -lim:
            ft = lim if ft > 0.0 else -lim
            anchor[ci] = px + (ft + ct * vx) / kt
        flags[li] = True
        normal_out[ci] = fn
        for k in range(n):
            if floating:
                rhs[k] += (jp[0, k] - jc[0, k]) * ft + (jp[1, k] - jc[1, k]) * fn
            else:
                rhs[k] += jp[0, k] * ft + jp[1, k] * fn
        ftx += ft
        fty += fn

    if fext[0] != 0.0 or fext[1] != 0.0:
        li = fext_link
        for k in range(n):
            rhs[k] += A[li, 0, k] * fext[0] + A[li, 1, k] * fext[1]
        ftx += fext[0]
        fty += fext[1]

    acc = cholesky_solve(M, rhs, lo)
    if floating:
        qd[0] += h * (ftx / mt + gx)
        qd[1] += h * (fty / mt + gy)
        for k in range(n):
            qd[2 + k] += h * acc[k]
    else:
        for k in range(1, n):
            qd[2 + k] += h * acc[k]
    for i in range(nq):
        q[i] = qm[i] + half * qd[i]
    if not floating:
        for i in range(3):
            q[i] = qm[i]


@njit(cache=True)
def spd_torques(th_j, thd_j, target, kp, kd, lim, dt, out):
    for j in range(th_j.shape[0]):
        t = -kp[j] * (th_j[j] + dt * thd_j[j] - target[j]) - kd[j] * thd_j[j]
        if t > lim[j]:
            t = lim[j]
        elif t < -lim[j]:
            t = -lim[j]
        out[j] = t


@njit(cache=True)
def control_loop(q, qd, anchor, active, targets, nsub, h, t0, gx, gy,
                 parent, anc, attach, com, mass, inertia, floating,
                 c_link, c_local, ground, kn, cn, kt, ct, mu,
                 kp, kd, lim, push, push_link, push_t0, push_t1, blowup,
                 flags, tau_max):
    """Hold PD targets and run ``nsub`` substeps. Returns the index of the
    diverged substep, or -1."""
    n = parent.shape[0]
    tau = np.zeros(n - 1)
    zero = np.zeros(2)
    normal = np.zeros(c_link.shape[0])
    for s in range(nsub):
        t = t0 + s * h
        spd_torques(q[3:], qd[3:], targets, kp, kd, lim, h, tau)
        for j in range(n - 1):
            a = abs(tau[j])
            if a > tau_max[j]:
                tau_max[j] = a
        f = zero
        if push_t1 > push_t0 and t >= push_t0 - 1e-9 and t < push_t1 - 1e-9:
            f = push
        substep(q, qd, anchor, active, tau, f, push_link, h, gx, gy,
                parent, anc, attach, com, mass, inertia, floating,
                c_link, c_local, ground, kn, cn, kt, ct, mu, flags, normal)
        for i in range(qd.shape[0]):
            v = qd[i]
            if not (abs(v) <= blowup):
                return s
        for i in range(q.shape[0]):
            if not math.isfinite(q[i]):
                return s
    return DIVERGED_NONE


@njit(cache=True)
def link_states(q, qd, parent, anc, attach, com, mass, floating):
    """World COM position/velocity and angle/rate of every link."""
    n = parent.shape[0]
    th = q[2:]
    thd = qd[2:]
    ang, org, pcom = relative_kinematics(parent, attach, com, th)
    cx, cy, mt = com_offset(mass, pcom)
    A, jc = link_jacobians(anc, org, pcom, mass, floating)
    om = link_omegas(parent, thd)
    pos = np.empty((n, 2))
    vel = np.zeros((n, 2))
    for i in range(n):
        if floating:
            pos[i, 0] = q[0] - cx + pcom[i, 0]
            pos[i, 1] = q[1] - cy + pcom[i, 1]
            vel[i, 0] = qd[0]
            vel[i, 1] = qd[1]
        else:
            pos[i, 0] = q[0] + pcom[i, 0]
            pos[i, 1] = q[1] + pcom[i, 1]
        for k in range(n):
            vel[i, 0] += A[i, 0, k] * thd[k]
            vel[i, 1] += A[i, 1, k] * thd[k]
    if floating:
        ox, oy = q[0] - cx, q[1] - cy
    else:
        ox, oy = q[0], q[1]
    return pos, vel, ang, om, ox, oy


@njit(cache=True)
def root_to_generalized(root_x, root_y, root_vx, root_vy, th, thd,
                        parent, anc, attach, com, mass, floating):
    """Convert a root-origin description into generalized ``(q, qd)``."""
    n = parent.shape[0]
    ang, org, pcom = relative_kinematics(parent, attach, com, th)
    cx, cy, mt = com_offset(mass, pcom)
    q = np.empty(n + 2)
    qd = np.empty(n + 2)
    q[2:] = th
    qd[2:] = thd
    if floating:
        A, jc = link_jacobians(anc, org, pcom, mass, False)
        vx = 0.0
        vy = 0.0
        for k in range(n):
            vx += jc[0, k] * thd[k]
            vy += jc[1, k] * thd[k]
        q[0] = root_x + cx
        q[1] = root_y + cy
        qd[0] = root_vx + vx
        qd[1] = root_vy + vy
    else:
        q[0] = root_x
        q[1] = root_y
        qd[0] = 0.0
        qd[1] = 0.0
        qd[2] = 0.0
    return q, qd


@njit(cache=True)
def energy(q, qd, parent, anc, attach, com, mass, inertia, floating, gy):
    """Kinetic and potential energy (gravity along -y with magnitude -gy)."""
    n = parent.shape[0]
    th = q[2:]
    thd = qd[2:]
    ang, org, pcom = relative_kinematics(parent, attach, com, th)
    cx, cy, mt = com_offset(mass, pcom)
    A, jc = link_jacobians(anc, org, pcom, mass, floating)
    M = mass_matrix(anc, A, mass, inertia)
    lo = 0 if floating else 1
    ke = 0.0
    for a in range(lo, n):
        for b in range(lo, n):
            ke += 0.5 * thd[a] * M[a, b] * thd[b]
    pe = 0.0
    if floating:
        ke += 0.5 * mt * (qd[0] * qd[0] + qd[1] * qd[1])
        pe = -gy * mt * q[1]
    else:
        for i in range(n):
            pe += -gy * mass[i] * (q[1] + pcom[i, 1])
    return ke, pe
