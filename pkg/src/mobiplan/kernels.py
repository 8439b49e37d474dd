"""Numeric kernels for the planner's inner loops.

Everything here operates on plain float64 arrays so the same source can run
either as compiled numba dispatchers or as ordinary Python/NumPy functions.
The backend is chosen once at import time from the ``MOBIPLAN_JIT`` env var:

    MOBIPLAN_JIT=auto   use numba when importable (default)
    MOBIPLAN_JIT=1      require numba, fail loudly if missing
    MOBIPLAN_JIT=0      pure NumPy fallback (slow, for verification)

Quaternions are (w, x, y, z). Kinematic chains arrive pre-packed as arrays
(see ``kinematics.KinematicChain``): frame i sits at joint i's origin after
the joint rotation, and the link offset maps frame i to joint i+1.
"""

from __future__ import annotations

import importlib.util
import math
import os
import types

import numpy as np

JIT_ENV_VAR = "MOBIPLAN_JIT"

# Converged / budget-exceeded flags returned by the IK kernel.
IK_CONVERGED = 1
IK_BUDGET_EXCEEDED = 0

# Signed distance reported when there is nothing to collide with.
FREE_SPACE_DISTANCE = 1e6


def _jit_requested() -> bool:
    flag = os.environ.get(JIT_ENV_VAR, "auto").strip().lower()
    if flag in ("0", "off", "false", "no"):
        return False
    if flag in ("1", "on", "true", "yes"):
        import numba  # noqa: F401  (raise ImportError if unavailable)

        return True
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


JIT_ENABLED = _jit_requested()


# ---------------------------------------------------------------------------
# Quaternion primitives
# ---------------------------------------------------------------------------

def quat_mul(a, b):
    out = np.empty(4)
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return out


def quat_conj(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


def quat_normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    out = np.empty(4)
    out[0] = q[0] / n
    out[1] = q[1] / n
    out[2] = q[2] / n
    out[3] = q[3] / n
    return out


def quat_rotate(q, v):
    # v' = v + 2 w (u x v) + 2 u x (u x v), u = vector part
    ux = q[2] * v[2] - q[3] * v[1]
    uy = q[3] * v[0] - q[1] * v[2]
    uz = q[1] * v[1] - q[2] * v[0]
    out = np.empty(3)
    out[0] = v[0] + 2.0 * (q[0] * ux + q[2] * uz - q[3] * uy)
    out[1] = v[1] + 2.0 * (q[0] * uy + q[3] * ux - q[1] * uz)
    out[2] = v[2] + 2.0 * (q[0] * uz + q[1] * uy - q[2] * ux)
    return out


def quat_from_axis_angle(axis, angle):
    half = 0.5 * angle
    s = math.sin(half)
    out = np.empty(4)
    out[0] = math.cos(half)
    out[1] = axis[0] * s
    out[2] = axis[1] * s
    out[3] = axis[2] * s
    return out


def quat_from_yaw(yaw):
    half = 0.5 * yaw
    out = np.empty(4)
    out[0] = math.cos(half)
    out[1] = 0.0
    out[2] = 0.0
    out[3] = math.sin(half)
    return out


def quat_from_rotvec(v):
    angle = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    out = np.empty(4)
    if angle < 1e-12:
        out[0] = 1.0
        out[1] = 0.5 * v[0]
        out[2] = 0.5 * v[1]
        out[3] = 0.5 * v[2]
        return quat_normalize(out)
    s = math.sin(0.5 * angle) / angle
    out[0] = math.cos(0.5 * angle)
    out[1] = v[0] * s
    out[2] = v[1] * s
    out[3] = v[2] * s
    return out


def rotvec_from_quat(q):
    # Log map; sign-normalize first so the angle lands in [0, pi].
    w = q[0]
    sign = 1.0
    if w < 0.0:
        sign = -1.0
    w = w * sign
    vn = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    out = np.empty(3)
    if vn < 1e-12:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0
        return out
    angle = 2.0 * math.atan2(vn, w)
    scale = sign * angle / vn
    out[0] = q[1] * scale
    out[1] = q[2] * scale
    out[2] = q[3] * scale
    return out


def quat_angle_between(a, b):
    dot = abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3])
    if dot > 1.0:
        dot = 1.0
    return 2.0 * math.acos(dot)


# ---------------------------------------------------------------------------
# Forward kinematics and damped-least-squares IK
# ---------------------------------------------------------------------------

def fk_frames(mount_pos, mount_quat, off_pos, off_quat, axes, q):
    """Per-joint frames (origin at each joint, post joint rotation) + EE pose.

    Returns (joint_pos (n,3), joint_quat (n,4), ee_pos (3,), ee_quat (4,)),
    all expressed in the base frame.
    """
    n = q.shape[0]
    joint_pos = np.empty((n, 3))
    joint_quat = np.empty((n, 4))
    p = mount_pos.copy()
    r = mount_quat.copy()
    for i in range(n):
        r = quat_mul(r, quat_from_axis_angle(axes[i], q[i]))
        joint_pos[i, 0] = p[0]
        joint_pos[i, 1] = p[1]
        joint_pos[i, 2] = p[2]
        joint_quat[i, 0] = r[0]
        joint_quat[i, 1] = r[1]
        joint_quat[i, 2] = r[2]
        joint_quat[i, 3] = r[3]
        step = quat_rotate(r, off_pos[i])
        p = p + step
        r = quat_mul(r, off_quat[i])
    return joint_pos, joint_quat, p, quat_normalize(r)


def fk_ee(mount_pos, mount_quat, off_pos, off_quat, axes, q):
    _, _, ee_pos, ee_quat = fk_frames(mount_pos, mount_quat, off_pos, off_quat, axes, q)
    return ee_pos, ee_quat


def pose_error(ee_pos, ee_quat, tgt_pos, tgt_quat):
    """6-D twist error (dx, dy, dz, wx, wy, wz) and its pos/rot norms."""
    e = np.empty(6)
    e[0] = tgt_pos[0] - ee_pos[0]
    e[1] = tgt_pos[1] - ee_pos[1]
    e[2] = tgt_pos[2] - ee_pos[2]
    q_err = quat_mul(tgt_quat, quat_conj(ee_quat))
    rv = rotvec_from_quat(q_err)
    e[3] = rv[0]
    e[4] = rv[1]
    e[5] = rv[2]
    pos_norm = math.sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
    rot_norm = math.sqrt(e[3] * e[3] + e[4] * e[4] + e[5] * e[5])
    return e, pos_norm, rot_norm


def _restart_alpha():
    primes = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)
    out = np.empty(len(primes))
    for i, p in enumerate(primes):
        out[i] = math.sqrt(p) % 1.0
    return out


# Low-discrepancy directions for deterministic IK restart probes.
IK_RESTART_ALPHA = _restart_alpha()

# A descent leg is abandoned once its best error stops improving for this
# many consecutive updates (joint-limit deadlocks and flip minima).
IK_STALL_WINDOW = 12
IK_STALL_TOL = 1e-9


def ik_dls(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
           tgt_pos, tgt_quat, seed, max_iters, tol_pos, tol_rot,
           damping, step_cap):
    """Damped-least-squares IK with per-iteration joint-limit clamping.

    Joints pinned at a limit with the step still pushing outward are locked
    out of the solve so the remaining joints keep descending. When the error
    stalls, the solve restarts from a fixed low-discrepancy probe sequence
    over the joint box; everything stays deterministic.

    Returns (q, iterations, flag, res_pos, res_rot) where iterations counts
    the DLS updates actually performed (across restarts) and flag is
    IK_CONVERGED or IK_BUDGET_EXCEEDED. On budget exhaustion q is the
    best-error iterate seen, with its residuals.
    """
    n = seed.shape[0]
    q = np.empty(n)
    for i in range(n):
        v = seed[i]
        if v < lo[i]:
            v = lo[i]
        elif v > hi[i]:
            v = hi[i]
        q[i] = v

    lam2 = damping * damping
    n_alpha = IK_RESTART_ALPHA.shape[0]
    best_err = 1e18
    best_q = q.copy()
    best_rp = 0.0
    best_rr = 0.0
    leg_best = 1e18
    stall = 0
    restart = 0
    total = 0
    while True:
        joint_pos, joint_quat, ee_pos, ee_quat = fk_frames(
            mount_pos, mount_quat, off_pos, off_quat, axes, q)
        e, res_pos, res_rot = pose_error(ee_pos, ee_quat, tgt_pos, tgt_quat)
        err = res_pos + 0.5 * res_rot
        if err < best_err:
            best_err = err
            for i in range(n):
                best_q[i] = q[i]
            best_rp = res_pos
            best_rr = res_rot
        if res_pos <= tol_pos and res_rot <= tol_rot:
            return q, total, IK_CONVERGED, res_pos, res_rot
        if total >= max_iters:
            return best_q, max_iters, IK_BUDGET_EXCEEDED, best_rp, best_rr

        if err < leg_best - IK_STALL_TOL:
            leg_best = err
            stall = 0
        else:
            stall += 1
        if stall >= IK_STALL_WINDOW:
            restart += 1
            for i in range(n):
                a = 0.5 + restart * IK_RESTART_ALPHA[i % n_alpha]
                u = a - math.floor(a)
                q[i] = lo[i] + u * (hi[i] - lo[i])
            leg_best = 1e18
            stall = 0
            continue

        # Geometric Jacobian for revolute joints.
        jac = np.empty((6, n))
        for i in range(n):
            ax = quat_rotate(joint_quat[i], axes[i])
            rx = ee_pos[0] - joint_pos[i, 0]
            ry = ee_pos[1] - joint_pos[i, 1]
            rz = ee_pos[2] - joint_pos[i, 2]
            jac[0, i] = ax[1] * rz - ax[2] * ry
            jac[1, i] = ax[2] * rx - ax[0] * rz
            jac[2, i] = ax[0] * ry - ax[1] * rx
            jac[3, i] = ax[0]
            jac[4, i] = ax[1]
            jac[5, i] = ax[2]

        # dq = J^T (J J^T + lam^2 I)^-1 e, re-solved with saturated joints
        # (pinned at a limit, step pushing outward) locked to zero.
        locked = np.zeros(n, np.bool_)
        dq = np.zeros(n)
        for _pass in range(n + 1):
            a = np.empty((6, 6))
            for r in range(6):
                for c in range(6):
                    s = 0.0
                    for k in range(n):
                        if not locked[k]:
                            s += jac[r, k] * jac[c, k]
                    a[r, c] = s
                a[r, r] += lam2
            y = np.linalg.solve(a, e)
            new_lock = False
            for i in range(n):
                if locked[i]:
                    dq[i] = 0.0
                    continue
                s = 0.0
                for r in range(6):
                    s += jac[r, i] * y[r]
                dq[i] = s
                if (q[i] <= lo[i] + 1e-12 and s < 0.0) or \
                        (q[i] >= hi[i] - 1e-12 and s > 0.0):
                    locked[i] = True
                    new_lock = True
            if not new_lock:
                break
        for i in range(n):
            if locked[i]:
                dq[i] = 0.0

        step_norm = 0.0
        for i in range(n):
            step_norm += dq[i] * dq[i]
        step_norm = math.sqrt(step_norm)
        if step_norm > step_cap:
            scale = step_cap / step_norm
            for i in range(n):
                dq[i] *= scale
        for i in range(n):
            v = q[i] + dq[i]
            if v < lo[i]:
                v = lo[i]
            elif v > hi[i]:
                v = hi[i]
            q[i] = v
        total += 1


# ---------------------------------------------------------------------------
# Distance-field query and robot-surface materialization
# ---------------------------------------------------------------------------

def trilinear_query(values, origin, inv_res, p):
    """Trilinear interpolation with coordinates clamped to the grid box."""
    nx, ny, nz = values.shape
    u = (p[0] - origin[0]) * inv_res
    v = (p[1] - origin[1]) * inv_res
    w = (p[2] - origin[2]) * inv_res
    # Snap to the node when rounding noise is all that separates them, so
    # node-coordinate queries return stored values exactly.
    ur = math.floor(u + 0.5)
    if abs(u - ur) < 1e-9:
        u = ur
    vr = math.floor(v + 0.5)
    if abs(v - vr) < 1e-9:
        v = vr
    wr = math.floor(w + 0.5)
    if abs(w - wr) < 1e-9:
        w = wr
    if u < 0.0:
        u = 0.0
    elif u > nx - 1.0:
        u = nx - 1.0
    if v < 0.0:
        v = 0.0
    elif v > ny - 1.0:
        v = ny - 1.0
    if w < 0.0:
        w = 0.0
    elif w > nz - 1.0:
        w = nz - 1.0
    i0 = int(u)
    j0 = int(v)
    k0 = int(w)
    if i0 > nx - 2:
        i0 = nx - 2
    if j0 > ny - 2:
        j0 = ny - 2
    if k0 > nz - 2:
        k0 = nz - 2
    fu = u - i0
    fv = v - j0
    fw = w - k0
    c000 = values[i0, j0, k0]
    c100 = values[i0 + 1, j0, k0]
    c010 = values[i0, j0 + 1, k0]
    c110 = values[i0 + 1, j0 + 1, k0]
    c001 = values[i0, j0, k0 + 1]
    c101 = values[i0 + 1, j0, k0 + 1]
    c011 = values[i0, j0 + 1, k0 + 1]
    c111 = values[i0 + 1, j0 + 1, k0 + 1]
    c00 = c000 * (1.0 - fu) + c100 * fu
    c10 = c010 * (1.0 - fu) + c110 * fu
    c01 = c001 * (1.0 - fu) + c101 * fu
    c11 = c011 * (1.0 - fu) + c111 * fu
    c0 = c00 * (1.0 - fv) + c10 * fv
    c1 = c01 * (1.0 - fv) + c11 * fv
    return c0 * (1.0 - fw) + c1 * fw


def materialize_state(joint_pos, joint_quat, base_x, base_y, base_yaw,
                      qp_link, qp_off):
    """Map query-point offsets (link frame or base body) to world coords."""
    m = qp_link.shape[0]
    out = np.empty((m, 3))
    cy = math.cos(base_yaw)
    sy = math.sin(base_yaw)
    for j in range(m):
        li = qp_link[j]
        if li < 0:
            vx = qp_off[j, 0]
            vy = qp_off[j, 1]
            vz = qp_off[j, 2]
        else:
            v = quat_rotate(joint_quat[li], qp_off[j])
            vx = joint_pos[li, 0] + v[0]
            vy = joint_pos[li, 1] + v[1]
            vz = joint_pos[li, 2] + v[2]
        out[j, 0] = base_x + cy * vx - sy * vy
        out[j, 1] = base_y + sy * vx + cy * vy
        out[j, 2] = vz
    return out


def collision_terms(values, origin, inv_res, points, eps0):
    """Hinge penalty sum max(0, eps0 - D) and the minimum distance seen."""
    m = points.shape[0]
    total = 0.0
    min_dist = FREE_SPACE_DISTANCE
    for j in range(m):
        d = trilinear_query(values, origin, inv_res, points[j])
        if d < min_dist:
            min_dist = d
        gap = eps0 - d
        if gap > 0.0:
            total += gap
    return total, min_dist


def world_target_to_base(base_x, base_y, base_yaw, tgt_pos, tgt_quat):
    """Express a world-frame pose in the (planar) base frame."""
    cy = math.cos(base_yaw)
    sy = math.sin(base_yaw)
    dx = tgt_pos[0] - base_x
    dy = tgt_pos[1] - base_y
    p = np.empty(3)
    p[0] = cy * dx + sy * dy
    p[1] = -sy * dx + cy * dy
    p[2] = tgt_pos[2]
    q = quat_mul(quat_conj(quat_from_yaw(base_yaw)), tgt_quat)
    return p, quat_normalize(q)


# ---------------------------------------------------------------------------
# Whole-pose and whole-segment evaluation
# ---------------------------------------------------------------------------

def eval_state(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
               values, origin, inv_res, qp_link, qp_off,
               base, tgt_pos, tgt_quat, seed,
               n_max, tol_pos, tol_rot, damping, step_cap, eps0):
    """IK + collision terms for one (base pose, world EE target) sample.

    Returns (q, iterations, flag, hinge_sum, min_dist, res_pos, res_rot).
    """
    loc_pos, loc_quat = world_target_to_base(base[0], base[1], base[2],
                                             tgt_pos, tgt_quat)
    # a target farther from the mount than the chain can stretch can never
    # meet the position tolerance; skip the iteration burn in that case
    span = 0.0
    for i in range(off_pos.shape[0]):
        span += math.sqrt(off_pos[i, 0] ** 2 + off_pos[i, 1] ** 2
                          + off_pos[i, 2] ** 2)
    ddx = loc_pos[0] - mount_pos[0]
    ddy = loc_pos[1] - mount_pos[1]
    ddz = loc_pos[2] - mount_pos[2]
    if math.sqrt(ddx * ddx + ddy * ddy + ddz * ddz) > span + tol_pos:
        n = seed.shape[0]
        q = np.empty(n)
        for i in range(n):
            v = seed[i]
            if v < lo[i]:
                v = lo[i]
            elif v > hi[i]:
                v = hi[i]
            q[i] = v
        ee_pos, ee_quat = fk_ee(mount_pos, mount_quat, off_pos, off_quat,
                                axes, q)
        _, res_p, res_r = pose_error(ee_pos, ee_quat, loc_pos, loc_quat)
        iters = n_max
        flag = IK_BUDGET_EXCEEDED
    else:
        q, iters, flag, res_p, res_r = ik_dls(
            mount_pos, mount_quat, off_pos, off_quat,
            axes, lo, hi, loc_pos, loc_quat, seed,
            n_max, tol_pos, tol_rot, damping, step_cap)
    joint_pos, joint_quat, _, _ = fk_frames(mount_pos, mount_quat,
                                            off_pos, off_quat, axes, q)
    pts = materialize_state(joint_pos, joint_quat, base[0], base[1], base[2],
                            qp_link, qp_off)
    hinge, min_dist = collision_terms(values, origin, inv_res, pts, eps0)
    return q, iters, flag, hinge, min_dist, res_p, res_r


def wrap_angle_scalar(a):
    return a - 2.0 * math.pi * math.ceil((a - math.pi) / (2.0 * math.pi))


def eval_segment(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
                 values, origin, inv_res, qp_link, qp_off,
                 bases, tgt_pos, tgt_quat, seed0,
                 n_max, tol_pos, tol_rot, damping, step_cap, eps0, c0,
                 yaw_weight):
    """Reach/smooth/collide terms over a full (base, EE-target) track.

    IK is warm-started from the previous sample's solution; the first sample
    seeds from ``seed0``. Returns (reach, smooth, collide, min_dist,
    joints (S,n), iters (S,), flags (S,), res_pos (S,), res_rot (S,)).
    """
    s_count = bases.shape[0]
    n = seed0.shape[0]
    joints = np.empty((s_count, n))
    iters = np.empty(s_count, dtype=np.int64)
    flags = np.empty(s_count, dtype=np.int64)
    res_pos = np.empty(s_count)
    res_rot = np.empty(s_count)
    reach = 0.0
    collide = 0.0
    min_dist = FREE_SPACE_DISTANCE
    seed = seed0
    for t in range(s_count):
        q, it, flag, hinge, md, rp, rr = eval_state(
            mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
            values, origin, inv_res, qp_link, qp_off,
            bases[t], tgt_pos[t], tgt_quat[t], seed,
            n_max, tol_pos, tol_rot, damping, step_cap, eps0)
        joints[t] = q
        iters[t] = it
        flags[t] = flag
        res_pos[t] = rp
        res_rot[t] = rr
        if flag == IK_CONVERGED:
            reach += it / n_max
        else:
            reach += c0
        collide += hinge
        if md < min_dist:
            min_dist = md
        seed = q
    smooth = 0.0
    for t in range(s_count - 1):
        dj = 0.0
        for i in range(n):
            d = joints[t + 1, i] - joints[t, i]
            dj += d * d
        dx = bases[t + 1, 0] - bases[t, 0]
        dy = bases[t + 1, 1] - bases[t, 1]
        dyaw = wrap_angle_scalar(bases[t + 1, 2] - bases[t, 2]) * yaw_weight
        smooth += math.sqrt(dj) + math.sqrt(dx * dx + dy * dy + dyaw * dyaw)
    return reach, smooth, collide, min_dist, joints, iters, flags, \
        res_pos, res_rot


def eval_candidates(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
                    values, origin, inv_res, qp_link, qp_off,
                    base, cand_pos, cand_quat, prev_q, prev_base,
                    n_max, tol_pos, tol_rot, damping, step_cap, eps0, c0,
                    yaw_weight, lam_r, lam_s, lam_c):
    """Single-pose objective for each sampled world EE candidate at ``base``.

    Smoothness is measured against the previous committed state
    (prev_q, prev_base). Returns one weighted objective value per candidate.
    """
    m = cand_pos.shape[0]
    n = prev_q.shape[0]
    out = np.empty(m)
    dx = base[0] - prev_base[0]
    dy = base[1] - prev_base[1]
    dyaw = wrap_angle_scalar(base[2] - prev_base[2]) * yaw_weight
    base_delta = dx * dx + dy * dy + dyaw * dyaw
    for j in range(m):
        q, it, flag, hinge, _, _, _ = eval_state(
            mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
            values, origin, inv_res, qp_link, qp_off,
            base, cand_pos[j], cand_quat[j], prev_q,
            n_max, tol_pos, tol_rot, damping, step_cap, eps0)
        if flag == IK_CONVERGED:
            reach = it / n_max
        else:
            reach = c0
        dj = 0.0
        for i in range(n):
            d = q[i] - prev_q[i]
            dj += d * d
        smooth = math.sqrt(dj) + math.sqrt(base_delta)
        out[j] = lam_r * reach + lam_s * smooth + lam_c * hinge
    return out


# ---------------------------------------------------------------------------
# Backend selection
# ---------------------------------------------------------------------------

_KERNEL_NAMES = (
    "quat_mul",
    "quat_conj",
    "quat_normalize",
    "quat_rotate",
    "quat_from_axis_angle",
    "quat_from_yaw",
    "quat_from_rotvec",
    "rotvec_from_quat",
    "quat_angle_between",
    "fk_frames",
    "fk_ee",
    "pose_error",
    "ik_dls",
    "trilinear_query",
    "materialize_state",
    "collision_terms",
    "world_target_to_base",
    "eval_state",
    "wrap_angle_scalar",
    "eval_segment",
    "eval_candidates",
)

if JIT_ENABLED:
    from numba import njit

    # only the canonical import may write the on-disk cache: copies loaded
    # under a synthetic module name would store entries that later imports
    # cannot unpickle
    _CACHE_OK = __name__ == "mobiplan.kernels"
    for _name in _KERNEL_NAMES:
        globals()[_name] = njit(cache=_CACHE_OK)(globals()[_name])
    del _name


def load_backend(use_jit: bool) -> types.ModuleType:
    """Load a fresh copy of this module with the JIT flag forced.

    Used by the kernel benchmark and the backend-agreement tests; the
    module-level functions here are untouched.
    """
    name = f"{__name__}_{'jit' if use_jit else 'plain'}"
    spec = importlib.util.spec_from_file_location(name, __file__)
    module = importlib.util.module_from_spec(spec)
    previous = os.environ.get(JIT_ENV_VAR)
    os.environ[JIT_ENV_VAR] = "1" if use_jit else "0"
    try:
        spec.loader.exec_module(module)
    finally:
        if previous is None:
            del os.environ[JIT_ENV_VAR]
        else:
            os.environ[JIT_ENV_VAR] = previous
    return module


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def warmup() -> None:
    """Force compilation of the hot kernels (no-op on the NumPy backend).

    Argument mutability is part of a compiled signature, so this mirrors the
    wrappers exactly: persistent structures (chain arrays, distance field,
    query points) are read-only, per-call arrays are writable.
    """
    mount_pos = _readonly(np.zeros(3))
    mount_quat = _readonly(np.array([1.0, 0.0, 0.0, 0.0]))
    off_pos = _readonly(np.array([[0.3, 0.0, 0.0], [0.3, 0.0, 0.0]]))
    off_quat = _readonly(np.array([[1.0, 0.0, 0.0, 0.0],
                                   [1.0, 0.0, 0.0, 0.0]]))
    axes = _readonly(np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]))
    lo = _readonly(np.array([-3.0, -3.0]))
    hi = _readonly(np.array([3.0, 3.0]))
    values = _readonly(np.full((2, 2, 2), FREE_SPACE_DISTANCE))
    origin = _readonly(np.zeros(3))
    qp_link = _readonly(np.array([-1, 0], dtype=np.int64))
    qp_off = _readonly(np.zeros((2, 3)))
    ro_quat = _readonly(np.array([1.0, 0.0, 0.0, 0.0]))
    ro_vec = _readonly(np.zeros(3))

    bases = np.zeros((2, 3))
    tgt_pos = np.array([[0.5, 0.0, 0.1], [0.5, 0.0, 0.1]])
    tgt_quat = np.array([[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
    seed = np.zeros(2)

    # geometry passes read-only pose components; costs and the planner mix
    # fresh arrays with read-only ones
    for qa in (ro_quat, ro_quat.copy()):
        for qb in (ro_quat, ro_quat.copy()):
            quat_mul(qa, qb)
        quat_conj(qa)
        quat_normalize(qa)
        quat_angle_between(qa, ro_quat)
        rotvec_from_quat(qa)
        for v in (ro_vec, ro_vec.copy()):
            quat_rotate(qa, v)
    for v in (ro_vec, ro_vec.copy()):
        quat_from_rotvec(v)
        quat_from_axis_angle(v, 0.3)
    quat_from_yaw(0.1)
    wrap_angle_scalar(4.0)

    q = np.zeros(2)
    fk_frames(mount_pos, mount_quat, off_pos, off_quat, axes, q)
    ee_pos, ee_quat = fk_ee(mount_pos, mount_quat, off_pos, off_quat, axes, q)
    for tp, tq in ((tgt_pos[0], tgt_quat[0]), (ro_vec, ro_quat)):
        pose_error(ee_pos, ee_quat, tp, tq)
    ik_dls(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
           tgt_pos[0].copy(), tgt_quat[0].copy(), seed.copy(),
           4, 1e-3, 1e-2, 1e-3, 0.5)
    for p in (np.zeros(3), ro_vec):
        trilinear_query(values, origin, 1.0, p)
    jp, jq, _, _ = fk_frames(mount_pos, mount_quat, off_pos, off_quat,
                             axes, q)
    materialize_state(jp, jq, 0.0, 0.0, 0.1, qp_link, qp_off)
    collision_terms(values, origin, 1.0, np.zeros((2, 3)), 0.1)
    world_target_to_base(0.0, 0.0, 0.1, tgt_pos[0], tgt_quat[0])
    eval_state(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
               values, origin, 1.0, qp_link, qp_off,
               bases[0], tgt_pos[0], tgt_quat[0], seed.copy(),
               4, 1e-3, 1e-2, 1e-3, 0.5, 0.1)
    eval_segment(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
                 values, origin, 1.0, qp_link, qp_off,
                 bases, tgt_pos, tgt_quat, seed,
                 4, 1e-3, 1e-2, 1e-3, 0.5, 0.1, 1e3, 1.0)
    eval_candidates(mount_pos, mount_quat, off_pos, off_quat, axes, lo, hi,
                    values, origin, 1.0, qp_link, qp_off,
                    np.zeros(3), tgt_pos, tgt_quat, seed, np.zeros(3),
                    4, 1e-3, 1e-2, 1e-3, 0.5, 0.1, 1e3, 1.0,
                    10.0, 1.0, 0.6)
