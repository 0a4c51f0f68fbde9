"""Multi-objective policy learning: interpretable treatment-allocation
trees valued on doubly robust scores, with a Bayesian-optimization
sweep over outcome weightings to map the Pareto frontier."""

from .acquisition import AcquisitionConfig, nehvi_score, propose_candidates
from .data import (
    DGPSpec,
    Dataset,
    NuisanceEstimates,
    ScoreMatrix,
    aipw_scores,
    default_schema,
    load_dataset,
    load_nuisance,
    load_schema,
    load_scores,
    mean_tensor,
    propensity_matrix,
    save_dataset,
    save_nuisance,
    save_schema,
    save_scores,
    synth_generate,
    tradeoff_dgp,
)
from .driver import (
    FinalReport,
    MopolConfig,
    RunTrace,
    bootstrap_se,
    evaluate_rules,
    fit_final,
    run_mopol,
)
from .errors import FeasibilityError, MopolError, ValidationError
from .pareto import (
    EvaluatedPoint,
    ParetoSet,
    WeightVector,
    default_reference_point,
    dominates,
    frontier_to_frame,
    frontier_to_json,
    hypervolume,
    nondominated_mask,
    update_pareto,
)
from .surrogate import GPModel, gp_fit, gp_posterior, posterior_at_coords, sobol_init
from .trees import (
    Leaf,
    ObjectiveMetric,
    PolicyTree,
    Split,
    TreeFitConfig,
    apply,
    evaluate_outcomes,
    export_tree,
    fit_greedy,
    fit_hybrid,
    fit_optimal,
    fit_tree,
    parse_tree_text,
    tree_from_dict,
    tree_to_dict,
    value_binary,
    value_multi,
    value_weighted,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "DGPSpec",
    "Dataset",
    "EvaluatedPoint",
    "FeasibilityError",
    "FinalReport",
    "GPModel",
    "Leaf",
    "MopolConfig",
    "MopolError",
    "NuisanceEstimates",
    "ObjectiveMetric",
    "ParetoSet",
    "PolicyTree",
    "RunTrace",
    "ScoreMatrix",
    "Split",
    "TreeFitConfig",
    "ValidationError",
    "WeightVector",
    "aipw_scores",
    "apply",
    "bootstrap_se",
    "default_reference_point",
    "default_schema",
    "dominates",
    "evaluate_outcomes",
    "evaluate_rules",
    "export_tree",
    "fit_final",
    "fit_greedy",
    "fit_hybrid",
    "fit_optimal",
    "fit_tree",
    "frontier_to_frame",
    "frontier_to_json",
    "gp_fit",
    "gp_posterior",
    "hypervolume",
    "load_dataset",
    "load_nuisance",
    "load_schema",
    "load_scores",
    "mean_tensor",
    "nehvi_score",
    "nondominated_mask",
    "parse_tree_text",
    "posterior_at_coords",
    "propensity_matrix",
    "propose_candidates",
    "run_mopol",
    "save_dataset",
    "save_nuisance",
    "save_schema",
    "save_scores",
    "sobol_init",
    "synth_generate",
    "tradeoff_dgp",
    "tree_from_dict",
    "tree_to_dict",
    "update_pareto",
    "value_binary",
    "value_multi",
    "value_weighted",
]
