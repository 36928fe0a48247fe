from .mesh import Quad, TriMesh
from .generate import (
    BACKGROUND, FIRST_FURNITURE, FLOOR, WALL, Scene, SceneParams, furniture_class, generate_scene,
    load_scene, save_scene, scene_from_boxes,
)
from .render import (
    NAVIGABLE_HEIGHT, RayCaster, RenderBundle, bev_aux, moller_trumbore, render_bev, render_fpv,
    texture_lookup,
)
from .viewpoint import EYE_HEIGHT, ViewpointError, obstacle_distance, sample_viewpoint
from .imageio import read_image, write_png, write_ppm
from .visibility import VisibleSurfaces, visible_surfaces

__all__ = [
    "Quad", "TriMesh", "BACKGROUND", "FIRST_FURNITURE", "FLOOR", "WALL", "Scene",
    "SceneParams", "furniture_class", "generate_scene", "load_scene", "save_scene", "scene_from_boxes",
    "NAVIGABLE_HEIGHT", "RayCaster", "RenderBundle", "bev_aux", "moller_trumbore", "render_bev",
    "render_fpv", "texture_lookup", "EYE_HEIGHT", "ViewpointError", "obstacle_distance",
    "sample_viewpoint", "read_image", "write_png", "write_ppm", "VisibleSurfaces", "visible_surfaces",
]
