"""Shapley attribution of tool importance for tool-using agents."""

from toolshap.analysis import EstimatorChoice, analyze
from toolshap.core import (
    AgentResponse,
    Coalition,
    PromptCase,
    ShapleyReport,
    Tool,
    ToolCatalog,
    coalition_from_names,
    coalition_key,
    member_names,
)
from toolshap.shapley import (
    ValueTable,
    build_plan,
    evaluate_plan,
    exact_shapley,
    normalize_shares,
    permutation_mc_shapley,
    subset_mc_shapley,
)
from toolshap.similarity import SimilarityBackend, tf_cosine

__version__ = "0.1.0"
