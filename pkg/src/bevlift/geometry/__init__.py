from .cameras import BevSpec, OrthoCamera, PinholeCamera, Pose, to_bev_frame
from .projection import (
    BevGrid, PointCloud, VoxelGrid, backproject, geometric_projection, pool_to_ground,
    valid_depth, voxelize,
)
from .hull import convex_hull, fov_mask, ground_points, points_in_polygon, rasterize_hull
from .rays import (
    RayCorrespondence, RayGeometry, column_to_ray, ground_truth_correspondence, polar_gather_index,
)
from .rasterio import read_mask, read_pgm, read_raw, write_mask, write_pgm, write_raw

__all__ = [
    "BevSpec", "OrthoCamera", "PinholeCamera", "Pose", "to_bev_frame",
    "BevGrid", "PointCloud", "VoxelGrid", "backproject", "geometric_projection", "pool_to_ground",
    "valid_depth", "voxelize", "convex_hull", "fov_mask", "ground_points", "points_in_polygon",
    "rasterize_hull", "RayCorrespondence", "RayGeometry", "column_to_ray",
    "ground_truth_correspondence", "polar_gather_index",
    "read_mask", "read_pgm", "read_raw", "write_mask", "write_pgm", "write_raw",
]
