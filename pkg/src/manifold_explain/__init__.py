"""Local explanations of black-box regressors over manifold-restricted neighborhoods."""

from manifold_explain.alpha_shape import AlphaShape, Triangulation, build_alpha_shape, circumradius, delaunay
from manifold_explain.explainer import Explanation, ExplanationRequest, evaluate_explanation, explain
from manifold_explain.sampling import SamplerConfig, sample_normal, sample_selected
from manifold_explain.spiral_data import Dataset, GenerationConfig, generate_dataset, spiral_target, split
from manifold_explain.surrogate import Coefficients, FeatureMap, PropertyFunction, SolverConfig, fit
from manifold_explain.tree import RegressionTree, TreeParams, fit_tree

__version__ = "0.1.0"

__all__ = [
    "AlphaShape",
    "Coefficients",
    "Dataset",
    "Explanation",
    "ExplanationRequest",
    "FeatureMap",
    "GenerationConfig",
    "PropertyFunction",
    "RegressionTree",
    "SamplerConfig",
    "SolverConfig",
    "TreeParams",
    "Triangulation",
    "build_alpha_shape",
    "circumradius",
    "delaunay",
    "evaluate_explanation",
    "explain",
    "fit",
    "fit_tree",
    "generate_dataset",
    "sample_normal",
    "sample_selected",
    "spiral_target",
    "split",
]
