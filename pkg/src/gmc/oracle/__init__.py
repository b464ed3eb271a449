"""Ground truth for costs and numerics."""

from .interpret import SingularMatrixError, evaluate_variant, reference_evaluate
from .matrices import condition_product, generate_test_matrices, relative_error
from .search import matrix_chain_dp, optimal_cost, optimal_costs

__all__ = [
    "SingularMatrixError",
    "condition_product",
    "evaluate_variant",
    "generate_test_matrices",
    "matrix_chain_dp",
    "optimal_cost",
    "optimal_costs",
    "reference_evaluate",
    "relative_error",
]
