"""Desk-scale pancreatic cyst risk stratification from multi-contrast MRI.

The package covers the full batch pipeline: NIfTI volume handling,
preprocessing (bias correction, denoising, intensity standardization),
107-feature radiomics extraction, clinical-feature screening, a from-scratch
multiclass gradient-boosted classifier, and confidence-gated decision fusion
with externally supplied deep-learning probability vectors.
"""

from .errors import ConfigError, FormatError, LeakageError, PanriskError, ValidationError
from .volume import (
    Mask,
    RoiBox,
    Volume,
    crop_roi,
    mask_bounding_box,
    reorient_ras,
    resample_isotropic,
)
from .nifti import load_mask, load_volume, save_nifti
from .preprocess import NyulModel, correct_bias, denoise_median, nyul_apply, nyul_train
from .radiomics import (
    FEATURE_NAMES,
    DiscretizedRoi,
    FeatureScaler,
    FeatureVector,
    apply_scaler,
    discretize,
    extract_feature_vector,
    fit_scaler,
)
from .clinical import (
    CLINICAL_FEATURE_NAMES,
    ClinicalRecord,
    OlsResult,
    mask_diagonal_mm,
    mask_volume_ml,
    ols_fit,
    stepwise_select,
    welch_ttest,
)
from .gbt import (
    CvSplit,
    GbtModel,
    GbtParams,
    gbt_fit,
    gbt_predict_proba,
    grid_search,
    stratified_kfold,
)
from .fusion import FusionParams, fuse, fused_label, fusion_grid_search
from .metrics import accuracy, auc_ovr_macro, dice, hd95, macro_precision_recall
from .phantom import PhantomSpec, default_phantom_spec, generate_study
from .pipeline import PipelineConfig, load_config, run_pipeline
from .tables import FeatureTable

__version__ = "0.1.0"
