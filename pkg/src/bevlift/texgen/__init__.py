from .morphology import SHAPES, StructuringElement, closing, dilate, erode, opening, toroidal_distance
from .synth import BinaryTexture, TextureError, modsem_chart_texture, replay_texture, synth_texture, value_noise
from .textures import ChartTextures, ModSemTextures, SynthTextures, textures_from_provenance
from .triplet import (
    VARIANTS, DataVariant, DatasetTriplet, RenderConfig, chart_textures, depth_proj_pair, fine_depth,
    generate_sample, make_triplet, observed_cells, random_rectangles, replay_triplet, sample_seeds, visible_cells,
)
from .audit import AuditError, AuditReport, decorrelation_audit
from .dataset import (
    Dataset, DatasetConfig, DatasetError, decode_record, encode_record, generate_dataset, load_dataset, split_of,
)

__all__ = [
    "SHAPES", "StructuringElement", "closing", "dilate", "erode", "opening", "toroidal_distance",
    "BinaryTexture", "TextureError", "modsem_chart_texture", "replay_texture", "synth_texture", "value_noise",
    "ChartTextures", "ModSemTextures", "SynthTextures", "textures_from_provenance",
    "VARIANTS", "DataVariant", "DatasetTriplet", "RenderConfig", "chart_textures", "depth_proj_pair",
    "fine_depth", "generate_sample", "make_triplet", "observed_cells", "random_rectangles", "replay_triplet",
    "sample_seeds", "visible_cells",
    "AuditError", "AuditReport", "decorrelation_audit",
    "Dataset", "DatasetConfig", "DatasetError", "decode_record", "encode_record", "generate_dataset",
    "load_dataset", "split_of",
]
