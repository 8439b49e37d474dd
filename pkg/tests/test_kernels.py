"""Kernel-level checks: quaternion algebra against rotation-matrix oracles,
trilinear interpolation, and bit-agreement between the numba and numpy
backends on the fused evaluation kernels."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mobiplan import kernels
from mobiplan.kinematics import default_chain


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def test_quat_mul_matches_matrix_product(rng):
    for _ in range(50):
        a, b = random_quat(rng), random_quat(rng)
        got = quat_to_matrix(kernels.quat_mul(a, b))
        want = quat_to_matrix(a) @ quat_to_matrix(b)
        assert_allclose(got, want, atol=1e-12)


def test_quat_rotate_matches_matrix(rng):
    for _ in range(50):
        q = random_quat(rng)
        v = rng.normal(size=3)
        assert_allclose(kernels.quat_rotate(q, v), quat_to_matrix(q) @ v,
                        atol=1e-12)


def test_quat_conj_inverts_rotation(rng):
    q = random_quat(rng)
    ident = kernels.quat_mul(q, kernels.quat_conj(q))
    assert_allclose(ident, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_quat_normalize_unit_and_idempotent(rng):
    q = rng.normal(size=4) * 3.0
    n1 = kernels.quat_normalize(q)
    assert math.isclose(np.linalg.norm(n1), 1.0, abs_tol=1e-12)
    assert_allclose(kernels.quat_normalize(n1), n1, atol=1e-15)


def test_quat_from_axis_angle_rodrigues(rng):
    for _ in range(20):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-math.pi, math.pi)
        R = quat_to_matrix(kernels.quat_from_axis_angle(axis, angle))
        K = np.array([[0, -axis[2], axis[1]],
                      [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        want = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K
        assert_allclose(R, want, atol=1e-12)


def test_quat_from_yaw_planar():
    yaw = 0.7
    R = quat_to_matrix(kernels.quat_from_yaw(yaw))
    want = np.array([[math.cos(yaw), -math.sin(yaw), 0],
                     [math.sin(yaw), math.cos(yaw), 0],
                     [0, 0, 1.0]])
    assert_allclose(R, want, atol=1e-12)


def test_rotvec_round_trip(rng):
    for _ in range(50):
        v = rng.normal(size=3)
        v *= rng.uniform(0.0, 3.0) / max(np.linalg.norm(v), 1e-9)
        back = kernels.rotvec_from_quat(kernels.quat_from_rotvec(v))
        assert_allclose(back, v, atol=1e-9)


def test_rotvec_from_quat_sign_canonical(rng):
    q = random_quat(rng)
    v1 = kernels.rotvec_from_quat(q)
    v2 = kernels.rotvec_from_quat(-q)
    assert_allclose(v1, v2, atol=1e-12)
    assert np.linalg.norm(v1) <= math.pi + 1e-12


def test_quat_angle_between(rng):
    axis = np.array([0.0, 0.0, 1.0])
    for angle in (0.0, 0.3, 1.7, math.pi - 0.01):
        a = kernels.quat_from_axis_angle(axis, 0.2)
        b = kernels.quat_mul(a, kernels.quat_from_axis_angle(axis, angle))
        assert math.isclose(kernels.quat_angle_between(a, b), angle,
                            abs_tol=1e-9)


def test_wrap_angle_scalar_range_and_period(rng):
    for a in rng.uniform(-20, 20, size=100):
        w = kernels.wrap_angle_scalar(a)
        assert -math.pi <= w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-12)
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


def fk_oracle(chain, q):
    """Independent FK: homogeneous transforms, rotation applied before the
    link offset, matching the chain convention."""
    T = np.eye(4)
    T[:3, :3] = quat_to_matrix(chain.base_mount.orientation)
    T[:3, 3] = chain.base_mount.position
    for link, qi in zip(chain.links, q):
        joint = np.eye(4)
        joint[:3, :3] = quat_to_matrix(
            kernels.quat_from_axis_angle(np.asarray(link.axis, float), qi))
        off = np.eye(4)
        off[:3, :3] = quat_to_matrix(link.offset.orientation)
        off[:3, 3] = link.offset.position
        T = T @ joint @ off
    return T


def test_fk_frames_matches_matrix_oracle(chain, rng):
    args = chain.packed()[:5]
    for _ in range(20):
        q = rng.uniform(chain.lower_limits, chain.upper_limits)
        _, _, ee_pos, ee_quat = kernels.fk_frames(*args, q)
        T = fk_oracle(chain, q)
        assert_allclose(ee_pos, T[:3, 3], atol=1e-10)
        assert_allclose(quat_to_matrix(ee_quat), T[:3, :3], atol=1e-10)


def test_pose_error_zero_at_identity(chain, rng):
    q = rng.uniform(chain.lower_limits, chain.upper_limits)
    pos, quat = kernels.fk_ee(*chain.packed()[:5], q)
    e, pn, rn = kernels.pose_error(pos, quat, pos, quat)
    assert pn == 0.0 and rn == 0.0
    assert_allclose(e, np.zeros(6), atol=1e-15)


def test_trilinear_exact_at_nodes_and_for_linear_fields(rng):
    origin = np.array([-1.0, 0.5, -0.25])
    res = 0.2
    nx, ny, nz = 5, 4, 6
    xs, ys, zs = np.meshgrid(
        origin[0] + res * np.arange(nx), origin[1] + res * np.arange(ny),
        origin[2] + res * np.arange(nz), indexing="ij")
    lin = 0.3 * xs - 1.1 * ys + 0.7 * zs + 0.25
    for _ in range(30):
        idx = (rng.integers(nx), rng.integers(ny), rng.integers(nz))
        p = origin + res * np.array(idx, float)
        got = kernels.trilinear_query(lin, origin, 1.0 / res, p)
        assert got == lin[idx]
    # trilinear interpolation reproduces affine fields exactly inside the box
    for _ in range(30):
        p = origin + res * np.array([nx - 1, ny - 1, nz - 1]) * rng.uniform(
            0.0, 1.0, size=3)
        got = kernels.trilinear_query(lin, origin, 1.0 / res, p)
        want = 0.3 * p[0] - 1.1 * p[1] + 0.7 * p[2] + 0.25
        assert math.isclose(got, want, abs_tol=1e-12)


def test_trilinear_clamps_outside_grid():
    origin = np.zeros(3)
    values = np.arange(8, dtype=float).reshape(2, 2, 2)
    inside = kernels.trilinear_query(values, origin, 1.0, np.zeros(3))
    below = kernels.trilinear_query(values, origin, 1.0,
                                    np.array([-5.0, -5.0, -5.0]))
    assert below == inside
    top = kernels.trilinear_query(values, origin, 1.0, np.ones(3))
    above = kernels.trilinear_query(values, origin, 1.0,
                                    np.array([9.0, 9.0, 9.0]))
    assert above == top


def test_collision_terms_hinge_oracle(rng):
    origin = np.array([-1.0, -1.0, -1.0])
    res = 0.25
    values = rng.uniform(-0.2, 0.5, size=(9, 9, 9))
    pts = rng.uniform(-0.9, 0.9, size=(40, 3))
    eps0 = 0.1
    total, min_d = kernels.collision_terms(values, origin, 1.0 / res, pts,
                                           eps0)
    ds = np.array([kernels.trilinear_query(values, origin, 1.0 / res, p)
                   for p in pts])
    assert math.isclose(total, float(np.sum(np.maximum(0.0, eps0 - ds))),
                        abs_tol=1e-12)
    assert math.isclose(min_d, float(ds.min()), abs_tol=1e-15)


def test_world_target_to_base_round_trip(rng):
    base = rng.uniform(-1, 1, size=3)
    tgt_pos = rng.uniform(-2, 2, size=3)
    tgt_quat = random_quat(rng)
    loc_pos, loc_quat = kernels.world_target_to_base(
        base[0], base[1], base[2], tgt_pos, tgt_quat)
    yaw_q = kernels.quat_from_yaw(base[2])
    back = kernels.quat_rotate(yaw_q, loc_pos)
    back[0] += base[0]
    back[1] += base[1]
    assert_allclose(back, tgt_pos, atol=1e-12)
    assert_allclose(quat_to_matrix(kernels.quat_mul(yaw_q, loc_quat)),
                    quat_to_matrix(tgt_quat), atol=1e-12)


# ---------------------------------------------------------------------------
# Backend agreement
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def backends():
    return (kernels.load_backend(use_jit=False),
            kernels.load_backend(use_jit=True))


def _segment_inputs(chain, rng, n_states=4):
    values = rng.uniform(-0.1, 0.8, size=(8, 8, 8))
    origin = np.array([-1.0, -1.0, -0.2])
    inv_res = 1.0 / 0.3
    n_q = 12
    qp_link = rng.integers(-1, len(chain.links), size=n_q).astype(np.int64)
    qp_off = rng.uniform(-0.1, 0.1, size=(n_q, 3))
    bases = rng.uniform(-0.3, 0.3, size=(n_states, 3))
    tgt_pos = rng.uniform(0.2, 0.5, size=(n_states, 3))
    tgt_quat = np.array([random_quat(rng) for _ in range(n_states)])
    seed = np.zeros(len(chain.links))
    return (chain.packed() + (values, origin, inv_res, qp_link, qp_off,
                              bases, tgt_pos, tgt_quat, seed))


def test_backends_agree_on_eval_segment(backends, chain, rng):
    plain, jit = backends
    args = _segment_inputs(chain, rng)
    solver = (100, 1e-3, 1e-2, 0.1, 0.5, 0.1, 1e3, 1.0)
    out_p = plain.eval_segment(*args, *solver)
    out_j = jit.eval_segment(*args, *solver)
    for a, b in zip(out_p, out_j):
        assert_allclose(np.asarray(a), np.asarray(b), rtol=1e-12, atol=1e-12)


def test_backends_agree_on_eval_state(backends, chain, rng):
    plain, jit = backends
    (mp, mq, op, oq, ax, lo, hi, values, origin, inv_res, qp_link, qp_off,
     bases, tgt_pos, tgt_quat, seed) = _segment_inputs(chain, rng)
    common = (mp, mq, op, oq, ax, lo, hi, values, origin, inv_res,
              qp_link, qp_off, bases[0], tgt_pos[0], tgt_quat[0], seed,
              100, 1e-3, 1e-2, 0.1, 0.5, 0.1)
    for a, b in zip(plain.eval_state(*common), jit.eval_state(*common)):
        assert_allclose(np.asarray(a), np.asarray(b), rtol=1e-12, atol=1e-12)


def test_backends_agree_on_quat_ops(backends, rng):
    plain, jit = backends
    a, b = random_quat(rng), random_quat(rng)
    v = rng.normal(size=3)
    assert_allclose(plain.quat_mul(a, b), jit.quat_mul(a, b), atol=1e-15)
    assert_allclose(plain.quat_rotate(a, v), jit.quat_rotate(a, v),
                    atol=1e-15)
    assert_allclose(plain.quat_from_rotvec(v), jit.quat_from_rotvec(v),
                    atol=1e-15)


def test_env_flag_selects_backend(backends):
    plain, jit = backends
    assert not plain.JIT_ENABLED
    assert jit.JIT_ENABLED


def test_default_chain_total_reach(chain):
    offsets = [np.linalg.norm(link.offset.position) for link in chain.links]
    assert math.isclose(chain.total_reach, sum(offsets), rel_tol=1e-12)
