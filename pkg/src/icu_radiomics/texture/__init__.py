from .discretize import GrayVolume, discretize, from_levels
from .extract import FAMILIES, TEXTURE_COUNT, WLR_COUNT, ExtractionConfig, extract_wlr, wlr_feature_names
from .firstorder import first_order_features
from .glcm import glcm_features, glcm_matrices
from .gldm import gldm_features, gldm_matrix
from .glrlm import glrlm_features, glrlm_matrices
from .glszm import glszm_features, glszm_matrix
from .ngtdm import ngtdm_features, ngtdm_matrix
from .shape import shape_features
from .vector import FeatureVector

__all__ = [
    "ExtractionConfig",
    "FAMILIES",
    "FeatureVector",
    "GrayVolume",
    "TEXTURE_COUNT",
    "WLR_COUNT",
    "discretize",
    "extract_wlr",
    "first_order_features",
    "from_levels",
    "glcm_features",
    "glcm_matrices",
    "gldm_features",
    "gldm_matrix",
    "glrlm_features",
    "glrlm_matrices",
    "glszm_features",
    "glszm_matrix",
    "ngtdm_features",
    "ngtdm_matrix",
    "shape_features",
    "wlr_feature_names",
]
