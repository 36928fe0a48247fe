"""Aligned first-person / overhead training samples for the three data variants."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..geometry import (
    BevSpec, OrthoCamera, PinholeCamera, Pose, backproject, fov_mask, pool_to_ground, voxelize,
)
from ..scene import SceneParams, bev_aux, generate_scene, render_bev, render_fpv, sample_viewpoint
from ..scene.generate import Scene
from .synth import TEXTURE_SIZE
from .textures import BANK_SIZE, ChartTextures, ModSemTextures, SynthTextures

VARIANTS = ("Synth", "ModSem", "DepthProj")


@dataclass(frozen=True)
class DataVariant:
    tag: str = "Synth"
    white_target: float = 0.2
    rect_range: tuple[int, int] = (10, 20)

    def __post_init__(self):
        if self.tag not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not (0.05 <= self.white_target <= 0.5):
            raise ValueError("white-matter target must lie in [0.05, 0.5]")
        lo, hi = self.rect_range
        if not (1 <= lo <= hi):
            raise ValueError("rectangle count range must be positive and ordered")


@dataclass(frozen=True)
class RenderConfig:
    fpv_res: int = 96
    bev_res: int = 64
    fov_deg: float = 79.0
    bev_extent: float = 5.0
    eye_height: float = 1.5
    ortho_above: float = 2.0
    texture_size: int = TEXTURE_SIZE
    bank_seed: int = 0
    bank_size: int = BANK_SIZE
    # depth is re-rendered this much finer for visibility and depth-projected targets, so
    # cells between coarse depth samples are not mistaken for hidden ones
    visibility_factor: int = 4

    def camera(self, pose: Pose) -> PinholeCamera:
        return PinholeCamera.from_fov(self.fpv_res, fov_deg=self.fov_deg, pose=pose)

    def bev_spec(self) -> BevSpec:
        return BevSpec(rows=self.bev_res, cols=self.bev_res, extent_forward=self.bev_extent,
                       extent_lateral=self.bev_extent)

    def ortho(self, pose: Pose) -> OrthoCamera:
        return OrthoCamera(self.bev_spec(), pose, self.ortho_above)


@dataclass
class DatasetTriplet:
    rgb: np.ndarray             # (H, W, 3) FPV colour
    zero: np.ndarray            # (H, W) FPV binary modality
    depth: np.ndarray           # (H, W) FPV z-depth, 0 = invalid
    semantics: np.ndarray       # (H, W) FPV labels
    m_zero: np.ndarray          # (R, C) BEV binary modality
    m_aux: np.ndarray           # (R, C, 2) navigable, obstacle
    bev_semantics: np.ndarray   # (R, C)
    fov: np.ndarray             # (R, C) bool
    observed: np.ndarray        # (R, C) bool, cells reached by an FPV depth point below the cutoff
    provenance: dict = field(default_factory=dict)

    ARRAYS = ("rgb", "zero", "depth", "semantics", "m_zero", "m_aux", "bev_semantics", "fov", "observed")

    @property
    def occluded(self) -> np.ndarray:
        return self.fov & ~self.observed

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in self.ARRAYS}


def observed_cells(depth: np.ndarray, cam: PinholeCamera, spec: BevSpec) -> np.ndarray:
    grid = voxelize(backproject(depth, cam), spec, cam.pose)
    return pool_to_ground(grid, "max", occupancy=True).values[..., 0] > 0


def fine_depth(scene: Scene, pose: Pose, cfg: RenderConfig) -> tuple[np.ndarray, PinholeCamera] | None:
    if cfg.visibility_factor <= 1:
        return None
    cam = PinholeCamera.from_fov(cfg.fpv_res * cfg.visibility_factor, fov_deg=cfg.fov_deg, pose=pose)
    return render_fpv(scene, cam).depth, cam


def visible_cells(depth: np.ndarray, cam: PinholeCamera, spec: BevSpec, fine=None) -> np.ndarray:
    """Cells reached by a depth point below the cutoff, at the native or the finer sampling."""
    seen = observed_cells(depth, cam, spec)
    return seen if fine is None else seen | observed_cells(*fine, spec)


def chart_textures(scene: Scene, variant: DataVariant, texture_seed: int, cfg: RenderConfig) -> ChartTextures:
    if variant.tag == "Synth":
        return SynthTextures(texture_seed, variant.white_target, cfg.texture_size, cfg.bank_seed, cfg.bank_size)
    if variant.tag == "ModSem":
        return ModSemTextures(scene.chart_labels, texture_seed, variant.white_target, cfg.texture_size,
                              cfg.bank_seed)
    raise ValueError(f"variant {variant.tag} carries no surface texture")


def make_triplet(scene: Scene, pose: Pose, variant: DataVariant, texture_seed: int,
                 cfg: RenderConfig = RenderConfig()) -> DatasetTriplet:
    """Texture the scene, render both views from the same pose and mask the overhead layers."""
    if variant.tag == "DepthProj":
        return make_depth_proj_triplet(scene, pose, variant, texture_seed, cfg)
    tex = chart_textures(scene, variant, texture_seed, cfg)
    prov = _provenance(scene, pose, variant, texture_seed, cfg, tex)
    cam, ortho, spec = cfg.camera(pose), cfg.ortho(pose), cfg.bev_spec()
    fpv = render_fpv(scene, cam, tex)
    bev = render_bev(scene, ortho, tex)
    fov = fov_mask(fpv.depth, cam, spec)
    aux = bev_aux(bev, ortho) * fov[..., None]
    seen = visible_cells(fpv.depth, cam, spec, fine_depth(scene, pose, cfg))
    return DatasetTriplet(fpv.rgb, fpv.zero[..., 0], fpv.depth, fpv.semantics, bev.zero[..., 0] * fov, aux,
                          bev.semantics, fov, seen, prov)


def random_rectangles(rng: np.random.Generator, shape, n_range=(10, 20)) -> tuple[np.ndarray, list]:
    """Union of n axis-aligned white rectangles; zero-area draws are redrawn."""
    h, w = shape
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    img = np.zeros(shape, dtype=bool)
    rects = []
    while len(rects) < n:
        r0, r1 = np.sort(rng.integers(0, h + 1, 2))
        c0, c1 = np.sort(rng.integers(0, w + 1, 2))
        if r1 == r0 or c1 == c0:
            continue
        img[r0:r1, c0:c1] = True
        rects.append((int(r0), int(c0), int(r1), int(c1)))
    return img, rects


def depth_proj_pair(seed: int, fpv_depth: np.ndarray, cam: PinholeCamera, spec: BevSpec,
                    n_range=(10, 20), fine=None) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """Random rectangles in the image, carried to the ground through the true depth.

    ``fine`` = (depth, camera) of the same view at an integer multiple of the
    resolution; the rectangles are then projected through that depth instead.
    Returns (I_zero, M_zero, fov, rects).
    """
    rng = np.random.default_rng([seed, 0xDE9])
    img, rects = random_rectangles(rng, fpv_depth.shape, n_range)
    fov = fov_mask(fpv_depth, cam, spec)
    depth, proj_cam, payload = fpv_depth, cam, img
    if fine is not None:
        depth, proj_cam = fine
        k = depth.shape[0] // fpv_depth.shape[0]
        payload = np.kron(img, np.ones((k, k), dtype=bool))
    grid = voxelize(backproject(depth, proj_cam, payload.astype(np.float64)), spec, cam.pose)
    m = pool_to_ground(grid, "max", mask=fov).values[..., 0]
    return img.astype(np.float64), m, fov, rects


def make_depth_proj_triplet(scene: Scene, pose: Pose, variant: DataVariant, seed: int,
                            cfg: RenderConfig = RenderConfig()) -> DatasetTriplet:
    cam, ortho, spec = cfg.camera(pose), cfg.ortho(pose), cfg.bev_spec()
    fpv = render_fpv(scene, cam)
    bev = render_bev(scene, ortho)
    fine = fine_depth(scene, pose, cfg)
    img, m, fov, rects = depth_proj_pair(seed, fpv.depth, cam, spec, variant.rect_range, fine)
    prov = _provenance(scene, pose, variant, seed, cfg, None)
    prov["rectangles"] = rects
    aux = bev_aux(bev, ortho) * fov[..., None]
    return DatasetTriplet(fpv.rgb, img, fpv.depth, fpv.semantics, m, aux, bev.semantics, fov,
                          visible_cells(fpv.depth, cam, spec, fine), prov)


def _provenance(scene, pose, variant, texture_seed, cfg, tex: ChartTextures | None) -> dict:
    return {"scene_seed": scene.seed, "scene_params": asdict(scene.params), "pose": pose.to_dict(),
            "variant": asdict(variant), "texture_seed": texture_seed, "render": asdict(cfg),
            "texture": None if tex is None else tex.provenance()}


def replay_triplet(prov: dict) -> DatasetTriplet:
    """Regenerate a triplet bit-identically from its provenance record."""
    scene = generate_scene(prov["scene_seed"], SceneParams(**prov["scene_params"]))
    v = prov["variant"]
    variant = DataVariant(v["tag"], v["white_target"], tuple(v["rect_range"]))
    return make_triplet(scene, Pose.from_dict(prov["pose"]), variant, prov["texture_seed"],
                        RenderConfig(**prov["render"]))


def sample_seeds(dataset_seed: int, index: int, views_per_scene: int = 1) -> dict[str, int]:
    """Independent per-sample streams; consecutive samples share a scene ``views_per_scene`` at a time."""
    scene_seed = int(np.random.SeedSequence([dataset_seed, index // views_per_scene, 1]).generate_state(1)[0])
    pose_seed, tex_seed = (int(v) for v in np.random.SeedSequence([dataset_seed, index, 2]).generate_state(2))
    return {"scene": scene_seed, "pose": pose_seed, "texture": tex_seed}


def generate_sample(dataset_seed: int, index: int, variant: DataVariant, cfg: RenderConfig = RenderConfig(),
                    scene_params: SceneParams = SceneParams(), views_per_scene: int = 1) -> DatasetTriplet:
    seeds = sample_seeds(dataset_seed, index, views_per_scene)
    scene = generate_scene(seeds["scene"], scene_params)
    pose = sample_viewpoint(scene, seeds["pose"], eye_height=cfg.eye_height)
    t = make_triplet(scene, pose, variant, seeds["texture"], cfg)
    t.provenance.update({"dataset_seed": dataset_seed, "index": index})
    return t
