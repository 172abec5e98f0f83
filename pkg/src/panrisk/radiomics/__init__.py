"""Radiomics feature extraction: ROI discretization, texture matrices, the
107-feature vector, and the log / unit-variance feature scaler."""

from .discretize import DiscretizedRoi, discretize
from .features import (
    FEATURE_NAMES,
    FIRSTORDER_NAMES,
    GLCM_NAMES,
    GLDM_NAMES,
    GLRLM_NAMES,
    GLSZM_NAMES,
    NGTDM_NAMES,
    SHAPE_NAMES,
    FeatureVector,
    extract_feature_vector,
    firstorder_features,
    glcm_features,
    gldm_features,
    glrlm_features,
    glszm_features,
    ngtdm_features,
    shape_features,
)
from .scaling import FeatureScaler, apply_scaler, fit_scaler, signed_log1p

__all__ = [
    "DiscretizedRoi",
    "discretize",
    "FeatureVector",
    "extract_feature_vector",
    "shape_features",
    "firstorder_features",
    "glcm_features",
    "glrlm_features",
    "glszm_features",
    "gldm_features",
    "ngtdm_features",
    "FEATURE_NAMES",
    "SHAPE_NAMES",
    "FIRSTORDER_NAMES",
    "GLCM_NAMES",
    "GLRLM_NAMES",
    "GLSZM_NAMES",
    "GLDM_NAMES",
    "NGTDM_NAMES",
    "FeatureScaler",
    "fit_scaler",
    "apply_scaler",
    "signed_log1p",
]
