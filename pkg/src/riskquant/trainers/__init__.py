"""
Learning schemes for conditional VaR and ES and the fitted model types.
"""
from src.riskquant.trainers.fitting import (
    EsFitMode,
    fit_es_two_step,
    fit_joint,
    fit_var,
    fit_var_multi_continuum,
    fit_var_multi_interp,
    fit_var_single,
    upper_tail_grid,
)
from src.riskquant.trainers.models import (
    AlphaFeatureMap,
    AlphaMode,
    ArchitectureConfig,
    EsInput,
    EsModel,
    RiskModel,
    VarModel,
    load_model,
    model_from_dict,
    predict,
    save_model,
)
from src.riskquant.trainers.transforms import AffineTransform, FeatureScaler, TanhTransform

__all__ = [
    "EsFitMode",
    "fit_es_two_step",
    "fit_joint",
    "fit_var",
    "fit_var_multi_continuum",
    "fit_var_multi_interp",
    "fit_var_single",
    "upper_tail_grid",
    "AlphaFeatureMap",
    "AlphaMode",
    "ArchitectureConfig",
    "EsInput",
    "EsModel",
    "RiskModel",
    "VarModel",
    "load_model",
    "model_from_dict",
    "predict",
    "save_model",
    "AffineTransform",
    "FeatureScaler",
    "TanhTransform",
]
