import math

import numpy as np
import pytest

from bevlift.geometry import BevSpec, OrthoCamera, PinholeCamera, Pose, backproject
from bevlift.scene import (
    FIRST_FURNITURE, FLOOR, WALL, RayCaster, SceneParams, TriMesh, ViewpointError, bev_aux,
    generate_scene, load_scene, moller_trumbore, obstacle_distance, read_image, render_bev,
    render_fpv, sample_viewpoint, save_scene, scene_from_boxes, texture_lookup, write_png, write_ppm,
)


def _sat_overlap(a, b) -> bool:
    """Separating-axis test for two axis-aligned rectangles (x0, y0, x1, y1)."""
    for lo, hi in ((0, 2), (1, 3)):
        if a[hi] <= b[lo] or b[hi] <= a[lo]:
            return False
    return True


def test_generate_is_deterministic():
    a, b = generate_scene(11), generate_scene(11)
    assert a.size == b.size and np.array_equal(a.boxes, b.boxes)
    assert np.array_equal(a.mesh.vertices, b.mesh.vertices) and np.array_equal(a.mesh.uv, b.mesh.uv)
    assert not np.array_equal(a.boxes, generate_scene(12).boxes)


def test_empty_room():
    s = generate_scene(5, SceneParams(furniture_min=0, furniture_max=0))
    assert len(s.boxes) == 0
    assert set(np.unique(s.mesh.labels)) == {FLOOR, WALL}
    assert len(s.mesh.faces) == 2 * (1 + 8)


def test_boxes_never_overlap_and_stay_in_room():
    for seed in range(100):
        s = generate_scene(seed)
        lx, ly = s.size
        assert s.mesh.vertices[:, 2].min() == 0.0
        for i, a in enumerate(s.boxes):
            assert 0 <= a[0] < a[2] <= lx and 0 <= a[1] < a[3] <= ly
            for b in s.boxes[i + 1:]:
                assert not _sat_overlap(a, b)
        assert s.provenance["placed_furniture"] == len(s.boxes)


def test_placement_failure_is_recorded():
    # a tiny room cannot hold many beds
    p = SceneParams(room_min=2.2, room_max=2.2, furniture_min=5, furniture_max=5, n_classes=4,
                    placement_tries=20)
    s = generate_scene(0, p)
    assert s.provenance["requested_furniture"] == 5
    assert len(s.boxes) < 5 and s.provenance["placement_failures"] == 5 - len(s.boxes)


def test_scene_params_validation():
    with pytest.raises(ValueError):
        generate_scene(0, SceneParams(room_min=-1))
    with pytest.raises(ValueError):
        generate_scene(0, SceneParams(furniture_min=3, furniture_max=1))


def test_chart_local_uv_is_affine_in_quad():
    s = generate_scene(4)
    qs = s.quads()
    mesh = s.mesh
    assert len(np.unique(mesh.charts)) == len(qs)
    for f, c in zip(mesh.faces, mesh.charts):
        q = qs[c]
        uv = mesh.uv[f]
        world = np.asarray(q.corner) + uv[:, :1] * np.asarray(q.edge_u) + uv[:, 1:] * np.asarray(q.edge_v)
        assert np.allclose(world, mesh.vertices[f])


def test_trimesh_validation():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    good = TriMesh(v, np.array([[0, 1, 2]]), np.array([1]), np.zeros((3, 2)), np.array([0]))
    good.validate()
    with pytest.raises(ValueError):
        TriMesh(v, np.array([[0, 1, 3]]), np.array([1]), np.zeros((3, 2)), np.array([0])).validate()
    with pytest.raises(ValueError):
        TriMesh(v, np.array([[0, 1, 1]]), np.array([1]), np.zeros((3, 2)), np.array([0])).validate()
    with pytest.raises(ValueError):
        TriMesh(v, np.array([[0, 1, 2]]), np.array([1]), np.full((3, 2), 1.5), np.array([0])).validate()


def _big_empty_room(size=20.0):
    return scene_from_boxes((size, size), [], SceneParams(furniture_min=0, furniture_max=0))


def test_depth_straight_down_is_height():
    s = _big_empty_room()
    h = 1.3
    cam = PinholeCamera.from_fov(33, pose=Pose((10.0, 10.0, h), 0.4, math.pi / 2))
    b = render_fpv(s, cam)
    assert b.depth[16, 16] == pytest.approx(h, abs=1e-12)
    assert np.all(b.semantics == FLOOR)


@pytest.mark.parametrize("pitch_deg", [45.0, 60.0, 80.0])
def test_floor_depth_matches_plane_intersection(pitch_deg):
    s = _big_empty_room()
    h = 1.5
    cam = PinholeCamera.from_fov(48, pose=Pose((10.0, 10.0, h), 0.3, math.radians(pitch_deg)))
    b = render_fpv(s, cam)
    dz = (cam.pixel_directions() @ cam.pose.rotation.T)[..., 2]
    expect = np.where(dz < 0, -h / np.where(dz < 0, dz, -1), 0.0)
    # keep pixels whose floor point is inside the room, the rest see walls
    ground = cam.cam_to_world(cam.pixel_directions() * expect[..., None])
    on_floor = (expect > 0) & np.all((ground[..., :2] > 0) & (ground[..., :2] < 20.0), axis=-1)
    assert on_floor.mean() > 0.5
    assert np.all(b.semantics[on_floor] == FLOOR)
    assert np.max(np.abs(b.depth[on_floor] - expect[on_floor])) < 1e-9


def test_box_occludes_floor():
    s = scene_from_boxes((6, 6), [(2.8, 2.8, 3.2, 3.2, 0.5, FIRST_FURNITURE + 1)])
    cam = PinholeCamera.from_fov(21, pose=Pose((3.0, 3.0, 1.5), 0.0, math.pi / 2))
    b = render_fpv(s, cam)
    assert b.semantics[10, 10] == FIRST_FURNITURE + 1
    assert b.depth[10, 10] == pytest.approx(1.0)


def test_raycaster_matches_moller_trumbore():
    s = generate_scene(4)
    rng = np.random.default_rng(0)
    caster = RayCaster(s.mesh)
    lx, ly = s.size
    origins = np.column_stack([rng.uniform(0.1, lx - 0.1, 300), rng.uniform(0.1, ly - 0.1, 300),
                               rng.uniform(0.1, 2.4, 300)])
    dirs = rng.normal(size=(300, 3))
    hits = caster.cast(origins, dirs)
    for o, d, t, f in zip(origins, dirs, hits.t, hits.face):
        t_ref, f_ref = moller_trumbore(o, d, s.mesh)
        if np.isinf(t_ref):
            assert f == -1
        else:
            assert t == pytest.approx(t_ref, rel=1e-9, abs=1e-12)
            assert s.mesh.labels[f] == s.mesh.labels[f_ref]


def _point_triangle_distance(p, a, b, c):
    """Brute force: distance to the plane if the projection is inside, else to the nearest edge."""
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    q = p - (p - a) @ n * n
    inside = all(np.cross(e1 - e0, q - e0) @ n >= -1e-12 for e0, e1 in ((a, b), (b, c), (c, a)))
    if inside:
        return abs((p - a) @ n)
    best = np.inf
    for e0, e1 in ((a, b), (b, c), (c, a)):
        t = np.clip((p - e0) @ (e1 - e0) / ((e1 - e0) @ (e1 - e0)), 0, 1)
        best = min(best, np.linalg.norm(p - (e0 + t * (e1 - e0))))
    return best


def test_backprojected_depth_lies_on_surfaces():
    s = generate_scene(7)
    cam = PinholeCamera.from_fov(64, pose=sample_viewpoint(s, 3))
    b = render_fpv(s, cam)
    cloud = backproject(b.depth, cam)
    tri = s.mesh.vertices[s.mesh.faces]
    rng = np.random.default_rng(1)
    for i in rng.choice(len(cloud), 150, replace=False):
        p = cloud.world[i]
        d = min(_point_triangle_distance(p, *t) for t in tri)
        assert d < 1e-6


def test_miss_is_background():
    s = _big_empty_room()
    cam = PinholeCamera.from_fov(16, pose=Pose((10.0, 10.0, 1.5), 0.0, -0.3))  # looking up, no ceiling
    b = render_fpv(s, cam)
    miss = ~b.hit
    assert miss.any()
    assert np.all(b.semantics[miss] == 0) and np.all(b.rgb[miss] == 0) and np.all(b.zero[miss] == 0)


def test_bev_navigable_and_obstacle():
    s = scene_from_boxes((6, 6), [(3.5, 2.5, 4.0, 3.5, 0.5, FIRST_FURNITURE)])
    pose = Pose((1.5, 3.0, 1.5), 0.0)
    oc = OrthoCamera(BevSpec(), pose)
    b = render_bev(s, oc)
    aux = bev_aux(b, oc)
    # cell centre 0.525 m ahead and on the centre line is plain floor
    assert tuple(aux[10, 50]) == (1.0, 0.0)
    # 2.25 m ahead lands on the box
    assert tuple(aux[45, 50]) == (0.0, 1.0) and b.semantics[45, 50] == FIRST_FURNITURE
    assert oc.sensor_height - b.depth[45, 50] == pytest.approx(0.5)
    # 4.575 m ahead is the top of the far wall (x in [6, 6.1]), beyond it nothing
    assert b.semantics[91, 50] == WALL and tuple(aux[91, 50]) == (0.0, 1.0)
    assert b.semantics[99, 50] == 0 and tuple(aux[99, 50]) == (0.0, 0.0)


def test_bev_floor_texture_matches_direct_lookup():
    s = generate_scene(9)
    assert s.chart_labels[0] == FLOOR
    tex = (np.random.default_rng(0).random((256, 256)) > 0.5).astype(float)
    pose = sample_viewpoint(s, 0)
    oc = OrthoCamera(BevSpec(rows=50, cols=50), pose)
    b = render_bev(s, oc, tex)
    floor = b.semantics == FLOOR
    xy = oc.cell_world_points()[:, :, 0]
    uv = np.stack([xy[..., 0] / s.size[0], xy[..., 1] / s.size[1]], -1)
    direct = texture_lookup(tex, uv) > 0.5
    assert floor.sum() > 100
    assert np.array_equal(b.zero[..., 0][floor] > 0.5, direct[floor])


def test_fpv_zero_channel_matches_uv_lookup():
    s = generate_scene(2)
    tex = (np.random.default_rng(1).random((128, 128)) > 0.7).astype(float)
    cam = PinholeCamera.from_fov(48, pose=sample_viewpoint(s, 5))
    b = render_fpv(s, cam, tex)
    assert np.array_equal(b.zero[..., 0][b.hit] > 0.5, texture_lookup(tex, b.uv[b.hit]) > 0.5)


def test_render_is_pure_function_of_scene_and_pose():
    s = generate_scene(3)
    pose = sample_viewpoint(s, 4)
    cam = PinholeCamera.from_fov(32, pose=pose)
    a, b = render_fpv(s, cam), render_fpv(generate_scene(3), cam)
    for f in ("rgb", "depth", "semantics", "zero", "uv"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_bev_footprint_moves_with_camera():
    pose = Pose((2.0, 3.0, 1.5), 0.9)
    moved = Pose((2.7, 2.4, 1.5), 0.9)
    spec = BevSpec(rows=10, cols=10)
    a = OrthoCamera(spec, pose).cell_world_points()
    b = OrthoCamera(spec, moved).cell_world_points()
    assert np.allclose(b - a, [0.7, -0.6])


def test_bev_fpv_floor_cross_check():
    s = generate_scene(21)
    pose = sample_viewpoint(s, 2)
    cam = PinholeCamera.from_fov(96, pose=pose)
    spec = BevSpec()
    oc = OrthoCamera(spec, pose)
    fpv, bev = render_fpv(s, cam), render_bev(s, oc)
    from bevlift.geometry import to_bev_frame
    fl = fpv.semantics == FLOOR
    f, r, _ = to_bev_frame(fpv.points[fl], pose)
    row, col, inside = spec.cell_index(f, r)
    row, col = row[inside], col[inside]
    # cells whose corners all sit on open floor must read floor from above
    corners = oc.cell_world_points(supersample=4)[row, col]
    open_floor = np.all(obstacle_distance(s, corners.reshape(-1, 2)).reshape(len(row), -1) > 0, axis=1)
    labels = bev.semantics[row, col]
    assert open_floor.sum() > 100
    assert np.all(labels[open_floor] == FLOOR)
    assert np.all(np.isin(labels, [FLOOR, WALL, 0]) | (labels >= FIRST_FURNITURE))


def test_viewpoint_empty_room_first_try():
    s = generate_scene(1, SceneParams(furniture_min=0, furniture_max=0))
    pose = sample_viewpoint(s, 0, max_tries=1) if _first_draw_ok(s) else None
    assert pose is not None
    x, y, z = pose.position
    assert 0 < x < s.size[0] and 0 < y < s.size[1] and z == 1.5 and pose.pitch == 0.0


def _first_draw_ok(s):
    try:
        sample_viewpoint(s, 0, max_tries=1)
        return True
    except ViewpointError:
        return False


def test_viewpoint_fully_furnished_raises():
    s = scene_from_boxes((4, 4), [(0, 0, 4, 4, 0.5, FIRST_FURNITURE)])
    with pytest.raises(ViewpointError):
        sample_viewpoint(s, 0, max_tries=50)


def test_viewpoints_keep_clearance():
    s = generate_scene(13)
    # brute-force distance field: obstacles rasterized at 1 cm
    lx, ly = s.size
    g = 0.01
    xs, ys = np.meshgrid(np.arange(-0.1, lx + 0.1, g), np.arange(-0.1, ly + 0.1, g), indexing="ij")
    occ = (xs <= 0) | (xs >= lx) | (ys <= 0) | (ys >= ly)
    for x0, y0, x1, y1, _, _ in s.boxes:
        occ |= (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
    obs = np.column_stack([xs[occ], ys[occ]])
    from scipy.spatial import cKDTree
    tree = cKDTree(obs)
    pos = np.array([sample_viewpoint(s, i).position[:2] for i in range(1000)])
    dist, _ = tree.query(pos)
    assert dist.min() >= 0.2 - g


def test_scene_file_round_trip(tmp_path):
    s = generate_scene(17)
    save_scene(tmp_path / "room.zbs", s)
    assert (tmp_path / "room.zbs").read_bytes()[:4] == b"ZBS1"
    back = load_scene(tmp_path / "room.zbs")
    assert back.seed == s.seed and back.size == s.size and np.array_equal(back.boxes, s.boxes)
    assert back.palette == s.palette


def test_rgb_files_round_trip(tmp_path):
    rgb = np.random.default_rng(0).random((5, 7, 3))
    write_png(tmp_path / "a.png", rgb)
    write_ppm(tmp_path / "a.ppm", rgb)
    for name in ("a.png", "a.ppm"):
        back = read_image(tmp_path / name)
        assert back.shape == (5, 7, 3) and np.max(np.abs(back - rgb)) <= 0.5 / 255 + 1e-12
