import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bevlift.geometry import (
    BevSpec, OrthoCamera, PinholeCamera, Pose, backproject, column_to_ray, convex_hull, fov_mask,
    ground_truth_correspondence, points_in_polygon, polar_gather_index, pool_to_ground, rasterize_hull,
    read_mask, read_pgm, read_raw, voxelize, write_mask, write_pgm, write_raw,
)
from bevlift.geometry.projection import PointCloud, VoxelGrid


def floor_depth(cam: PinholeCamera, eye: float, max_depth: float = np.inf) -> np.ndarray:
    """z-depth of a level camera looking at an infinite floor, 0 above the horizon."""
    v = (np.arange(cam.height) + 0.5 - cam.cy) / cam.focal
    d = np.where(v > 0, eye / np.where(v > 0, v, 1.0), 0.0)
    d = np.where(d <= max_depth, d, 0.0)
    return np.repeat(d[:, None], cam.width, axis=1)


def cloud_at(world: np.ndarray, payload=None) -> PointCloud:
    world = np.atleast_2d(world).astype(float)
    payload = np.ones((len(world), 1)) if payload is None else np.asarray(payload, float).reshape(len(world), -1)
    return PointCloud(world.copy(), world, payload, np.zeros((len(world), 2), int))


def test_default_fov_is_79_degrees():
    cam = PinholeCamera.from_fov()
    assert (cam.width, cam.height) == (384, 384)
    assert math.degrees(cam.hfov) == pytest.approx(79.0, abs=1e-9)
    spec = BevSpec()
    assert spec.cell_forward == pytest.approx(0.05) and spec.cell_lateral == pytest.approx(0.05)


def test_camera_validation():
    with pytest.raises(ValueError):
        PinholeCamera(10, 10, 0.0, 5, 5)
    with pytest.raises(ValueError):
        PinholeCamera(10, 10, 5.0, 11, 5)


def test_backproject_principal_point_and_corner():
    cam = PinholeCamera(4, 4, 2.0, 2.5, 2.5)  # pixel (2, 2) centre sits on the principal point
    depth = np.zeros((4, 4))
    depth[2, 2] = 3.0
    depth[0, 0] = 2.0
    cl = backproject(depth, cam)
    got = {tuple(p): tuple(c) for p, c in zip(cl.pixels, cl.cam)}
    assert got[(2, 2)] == pytest.approx((0.0, 0.0, 3.0))
    # ((u - cx) d / f, (v - cy) d / f, d) with u = v = 0.5
    assert got[(0, 0)] == pytest.approx(((0.5 - 2.5) * 2 / 2, (0.5 - 2.5) * 2 / 2, 2.0))


def test_backproject_skips_invalid_pixels():
    cam = PinholeCamera.from_fov(16)
    rng = np.random.default_rng(0)
    depth = rng.uniform(0.5, 3, (16, 16))
    depth[rng.random((16, 16)) < 0.3] = 0.0
    depth[0, 0] = np.nan
    depth[1, 1] = -1.0
    cl = backproject(depth, cam, rng.random((16, 16, 3)))
    assert len(cl) == int((np.isfinite(depth) & (depth > 0)).sum())
    assert cl.payload.shape == (len(cl), 3)
    assert len(backproject(np.zeros((16, 16)), cam)) == 0


def test_backproject_payload_shape_mismatch():
    cam = PinholeCamera.from_fov(8)
    with pytest.raises(ValueError):
        backproject(np.ones((8, 8)), cam, np.ones((4, 8)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-0.4, 0.4), st.integers(0, 2**31 - 1))
def test_projection_round_trip(yaw, pitch, seed):
    rng = np.random.default_rng(seed)
    cam = PinholeCamera.from_fov(24, pose=Pose((rng.uniform(-3, 3), rng.uniform(-3, 3), 1.5), yaw, pitch))
    depth = rng.uniform(0.2, 10, (24, 24))
    cl = backproject(depth, cam)
    uv = cam.project(cam.world_to_cam(cl.world))
    expect = np.stack([cl.pixels[:, 1] + 0.5, cl.pixels[:, 0] + 0.5], -1)
    assert np.max(np.abs(uv - expect)) < 1e-9


def test_pose_rotation_is_proper():
    R = Pose((0, 0, 1), 0.7, 0.2).rotation
    assert np.allclose(R.T @ R, np.eye(3)) and np.linalg.det(R) == pytest.approx(1.0)
    # level camera: image down is world -z
    assert np.allclose(Pose((0, 0, 1), 1.1, 0.0).rotation[:, 1], [0, 0, -1])


def test_voxelize_single_and_coincident_points():
    spec = BevSpec()
    pose = Pose((0, 0, 1.5), 0.0)
    # cell (row 10, col 50, level 11) centre: forward 0.525, right 0.025, up 0.525
    p = np.array([0.525, -0.025, 0.525])  # right = -y for yaw 0
    g = voxelize(cloud_at(p), spec, pose)
    assert g.counts[10, 50, 11] == 1 and g.counts.sum() == 1 and g.dropped == 0
    g2 = voxelize(cloud_at(np.stack([p, p])), spec, pose)
    assert g2.counts[10, 50, 11] == 2


def test_voxelize_drops_out_of_bounds():
    spec = BevSpec()
    pose = Pose((0, 0, 1.5), 0.0)
    pts = np.array([[5.001, 0.0, 0.5],    # 1 mm beyond the far edge
                    [-0.001, 0.0, 0.5],   # 1 mm behind the camera
                    [1.0, -2.501, 0.5],   # 1 mm right of the footprint
                    [1.0, 0.0, 0.5]])
    g = voxelize(cloud_at(pts), spec, pose)
    assert g.dropped == 3 and g.counts.sum() == 1
    # boundary belongs to the lower-index side: forward 4.999 lands in the last row
    g = voxelize(cloud_at([4.999, 0.0, 0.5]), spec, pose)
    assert g.dropped == 0 and g.counts[99].sum() == 1


def _column_grid(levels_payload: dict[int, float]):
    spec = BevSpec(rows=2, cols=2, extent_forward=0.1, extent_lateral=0.1)
    counts = np.zeros((2, 2, spec.height_cells), int)
    sums = np.zeros((2, 2, spec.height_cells, 1))
    for lev, val in levels_payload.items():
        counts[0, 0, lev] = 1
        sums[0, 0, lev, 0] = val
    return VoxelGrid(spec, Pose(), counts, sums)


def test_pool_max_below_cutoff():
    g = _column_grid({5: 1.0})  # level 5 spans [0.20, 0.25)
    assert pool_to_ground(g, "max").values[0, 0, 0] == 1.0
    assert pool_to_ground(g, "max").values[1, 1, 0] == 0.0


def test_pool_max_ignores_voxel_above_cutoff():
    g = _column_grid({51: 1.0})  # level 51 spans [2.50, 2.55)
    assert pool_to_ground(g, "max", 2.0).values[0, 0, 0] == 0.0
    assert pool_to_ground(g, "max", 3.0).values[0, 0, 0] == 1.0


def test_pool_average_hand_example():
    g = _column_grid({1: 0.0, 2: 1.0, 3: 1.0, 4: 0.0})
    assert pool_to_ground(g, "average").values[0, 0, 0] == 0.5


def test_pool_errors():
    g = _column_grid({1: 1.0})
    with pytest.raises(ValueError):
        pool_to_ground(g, "median")
    with pytest.raises(ValueError):
        pool_to_ground(g, "max", 10.0)


def test_bev_grid_masks_to_zero():
    g = _column_grid({1: 1.0})
    mask = np.zeros((2, 2), bool)
    assert pool_to_ground(g, "max", mask=mask).values.sum() == 0


def test_point_at_cutoff_excluded():
    spec = BevSpec()
    pose = Pose((0, 0, 1.5), 0.0)
    g = voxelize(cloud_at([[1.0, 0.0, 2.0], [2.0, 0.0, 1.999]]), spec, pose)
    v = pool_to_ground(g, "max").values[..., 0]
    assert v[20, 50] == 0.0 and v[40, 50] == 1.0


def test_hull_square_with_centre():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.5, 0]])
    h = convex_hull(pts)
    assert len(h) == 4
    area = 0.5 * np.sum(h[:, 0] * np.roll(h[:, 1], -1) - np.roll(h[:, 0], -1) * h[:, 1])
    assert area == pytest.approx(1.0)  # positive signed area -> counterclockwise


def test_hull_degenerate():
    h = convex_hull(np.array([[0, 0], [1, 1], [2, 2], [0.5, 0.5]]))
    assert len(h) == 2 and {tuple(v) for v in h} == {(0, 0), (2, 2)}
    assert len(convex_hull(np.array([[1.0, 2.0], [1.0, 2.0]]))) == 1
    with pytest.raises(ValueError):
        convex_hull(np.zeros((0, 2)))


def _contained(poly, pts, tol=1e-9):
    """O(n*h) oracle: inside or on every edge of the CCW polygon."""
    for p in pts:
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -tol:
                return False
    return True


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(3, 300))
def test_hull_contains_all_points(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2))
    h = convex_hull(pts)
    assert _contained(h, pts)
    # every vertex is an input point and strictly convex
    assert all(any(np.allclose(v, p) for p in pts) for v in h)
    for i in range(len(h)):
        a, b, c = h[i - 1], h[i], h[(i + 1) % len(h)]
        assert (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(3, 200))
def test_hull_matches_qhull(seed, n):
    from scipy.spatial import ConvexHull
    pts = np.random.default_rng(seed).uniform(-1, 1, (n, 2))
    ref = pts[ConvexHull(pts).vertices]
    h = convex_hull(pts)
    assert len(h) == len(ref)
    assert {tuple(v) for v in np.round(h, 12)} == {tuple(v) for v in np.round(ref, 12)}


def test_hull_prefilter_matches_plain_chain():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (5000, 2))
    fast = convex_hull(pts)
    small = convex_hull(fast)  # below the prefilter threshold only if hull is small
    assert {tuple(v) for v in fast} == {tuple(v) for v in small}
    assert _contained(fast, pts)


def test_rasterize_point_and_segment():
    spec = BevSpec()
    m = rasterize_hull(np.array([[0.01, 1.01]]), spec)
    assert m.sum() == 1 and m[20, 50]
    seg = rasterize_hull(np.array([[0.01, 1.01], [0.01, 2.01]]), spec)
    assert seg.sum() == 21 and seg[20:41, 50].all()


def test_fov_mask_single_pixel():
    cam = PinholeCamera.from_fov(32, pose=Pose((0, 0, 1.5), 0.3))
    full = floor_depth(cam, 1.5)
    depth = np.zeros_like(full)
    depth[28, 16] = full[28, 16]
    m = fov_mask(depth, cam, BevSpec())
    assert m.sum() == 1


def test_fov_mask_matches_floor_trapezoid():
    cam = PinholeCamera.from_fov(384, pose=Pose((1.0, 2.0, 1.5), 0.4))
    spec = BevSpec()
    m = fov_mask(floor_depth(cam, 1.5), cam, spec)
    # analytic region: floor wedge between the nearest visible row and the outermost pixel columns
    near = 1.5 * cam.focal / (cam.height - 0.5 - cam.cy)
    tan_half = (cam.width / 2 - 0.5) / cam.focal
    ff, rr = spec.cell_centers()
    expect = (ff >= near) & (np.abs(rr) <= ff * tan_half)
    diff = m != expect
    # disagreements confined to cells within one cell of the analytic boundary
    c = spec.cell
    dist = np.minimum(np.abs(ff - near), np.abs(np.abs(rr) - ff * tan_half) / math.hypot(1, tan_half))
    dist = np.minimum(dist, spec.extent_forward - ff)  # far clip, where floor samples thin out
    assert np.all(dist[diff] <= c * 1.5)
    assert diff.sum() <= 0.02 * expect.sum()


def test_fov_mask_monotone_in_max_depth():
    cam = PinholeCamera.from_fov(96, pose=Pose((0, 0, 1.5), -0.2))
    spec = BevSpec()
    areas = [fov_mask(floor_depth(cam, 1.5, dmax), cam, spec).sum() for dmax in (1.5, 2, 3, 4, 6, 9)]
    assert all(a <= b for a, b in zip(areas, areas[1:]))
    assert areas[-1] > areas[0]


def _segment_cells(a, b, n=400):
    t = np.linspace(0, 1, n)[:, None]
    return np.unique(np.rint(a + t * (b - a)).astype(int), axis=0)


def test_fov_mask_convexity():
    rng = np.random.default_rng(1)
    cam = PinholeCamera.from_fov(64, pose=Pose((0, 0, 1.5), 0.0))
    depth = floor_depth(cam, 1.5, 4.0)
    depth[rng.random(depth.shape) < 0.5] = 0
    m = fov_mask(depth, cam, BevSpec())
    cells = np.argwhere(m)
    for _ in range(300):
        a, b = cells[rng.integers(len(cells), size=2)]
        seg = _segment_cells(a, b)
        # rounding a continuous segment can step one cell outside a rasterized convex set at its rim
        inside = m[seg[:, 0], seg[:, 1]]
        if not inside.all():
            outside = seg[~inside]
            pad = np.pad(m, 1)
            assert all(pad[r:r + 3, c:c + 3].sum() >= 2 for r, c in outside)


def test_column_to_ray_angles():
    cam = PinholeCamera.from_fov(384)
    rays = column_to_ray(cam, BevSpec())
    th = rays.thetas
    assert np.all(np.diff(th) > 0)
    half = cam.hfov / 2
    pix = math.atan(1 / cam.focal)
    assert abs(th[0] + half) <= 0.5 * pix + 1e-12 and abs(th[-1] - half) <= 0.5 * pix + 1e-12
    odd = PinholeCamera.from_fov(7)
    assert column_to_ray(odd, BevSpec()).thetas[3] == 0.0
    assert rays.rho_step == pytest.approx(0.05)


def test_polar_gather_nearest_and_bilinear():
    cam = PinholeCamera.from_fov(64)
    spec = BevSpec(rows=20, cols=20)
    rays = column_to_ray(cam, spec, stride=4)
    idx, valid = polar_gather_index(cam, spec, rays)
    assert idx.shape == (400,) and idx.min() >= 0 and idx.max() < len(rays.thetas) * rays.n_rho
    # centre-line cells map to the middle rays at increasing range
    ff, rr = spec.cell_centers()
    j, k = np.divmod(idx.reshape(20, 20), rays.n_rho)
    assert np.all(np.diff(k[:, 10]) >= 0)
    # cells outside the horizontal field of view are flagged
    theta = np.arctan2(rr, ff)
    assert np.all(valid.reshape(20, 20)[np.abs(theta) > cam.hfov / 2 + 1e-9] == False)  # noqa: E712
    bidx, w, bvalid = polar_gather_index(cam, spec, rays, bilinear=True)
    assert np.allclose(w.sum(-1), 1.0) and np.all(w >= -1e-12)
    assert np.array_equal(valid, bvalid)


def test_correspondence_floor_single_row_per_cell():
    # at 64 px the floor row spacing (>= 8 cm) exceeds the 5 cm ray cell, so each cell gets at most one row
    cam = PinholeCamera.from_fov(64, pose=Pose((0, 0, 1.5), 0.0))
    corr = ground_truth_correspondence(floor_depth(cam, 1.5), cam, BevSpec())
    for col in (0, 20, 32, 63):
        sets = corr.as_sets(col)
        assert sets and all(len(rows) == 1 for rows in sets.values())


def test_correspondence_floor_rows_ordered_at_full_resolution():
    # denser sampling puts several adjacent rows in one cell, but rows stay contiguous and ordered by range
    cam = PinholeCamera.from_fov(384, pose=Pose((0, 0, 1.5), 0.0))
    corr = ground_truth_correspondence(floor_depth(cam, 1.5), cam, BevSpec())
    for col in (0, 191, 383):
        sets = corr.as_sets(col)
        prev = None
        for k in sorted(sets):
            rows = sorted(sets[k])
            assert rows == list(range(rows[0], rows[-1] + 1))
            assert prev is None or rows[-1] < prev
            prev = rows[0]


def test_correspondence_wall_rows_share_one_cell():
    cam = PinholeCamera.from_fov(64, pose=Pose((0, 0, 1.5), 0.0))
    spec = BevSpec()
    d = 3.0  # fronto-parallel wall: every pixel has z-depth d
    depth = np.full((64, 64), d)
    corr = ground_truth_correspondence(depth, cam, spec)
    col = 32  # first column right of centre, ground distance ~ d
    sets = corr.as_sets(col)
    assert len(sets) == 1
    (k, rows), = sets.items()
    assert rows == set(range(64)) and k == int(np.hypot(d, (col + 0.5 - 32) * d / cam.focal) / 0.05)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_correspondence_partitions_valid_pixels(seed):
    rng = np.random.default_rng(seed)
    cam = PinholeCamera.from_fov(32, pose=Pose((0, 0, 1.5), rng.uniform(-3, 3)))
    spec = BevSpec()
    depth = rng.uniform(0.3, 6.0, (32, 32))
    depth[rng.random(depth.shape) < 0.2] = 0
    corr = ground_truth_correspondence(depth, cam, spec)
    cl = backproject(depth, cam)
    from bevlift.geometry import to_bev_frame
    f, r, _ = to_bev_frame(cl.world, cam.pose)
    _, _, inside = spec.cell_index(f, r)
    for col in range(32):
        sets = corr.as_sets(col)
        union = [y for rows in sets.values() for y in rows]
        assert len(union) == len(set(union))
        expect = {int(p[0]) for p, ok in zip(cl.pixels, inside) if ok and p[1] == col}
        assert set(union) == expect


def test_raster_io_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    depth = rng.uniform(0, 10, (7, 5))
    write_pgm(tmp_path / "d.pgm", depth, scale=1000.0)
    back = read_pgm(tmp_path / "d.pgm", scale=1000.0)
    assert back.shape == (7, 5) and np.max(np.abs(back - depth)) <= 0.5e-3 + 1e-12
    mask = rng.random((6, 9)) > 0.5
    write_mask(tmp_path / "m.pgm", mask)
    assert np.array_equal(read_mask(tmp_path / "m.pgm"), mask)
    write_raw(tmp_path / "r.raw", depth)
    assert np.array_equal(read_raw(tmp_path / "r.raw", depth.shape), depth)


def test_ortho_camera_sample_points():
    pose = Pose((1.0, 1.0, 1.5), math.pi / 2)  # facing +y, right is +x
    oc = OrthoCamera(BevSpec(rows=2, cols=2, extent_forward=1.0, extent_lateral=1.0), pose)
    pts = oc.cell_world_points()
    assert oc.sensor_height == pytest.approx(3.5)
    assert np.allclose(pts[0, 0, 0], [1.0 - 0.25, 1.25])
    assert np.allclose(pts[1, 1, 0], [1.0 + 0.25, 1.75])
