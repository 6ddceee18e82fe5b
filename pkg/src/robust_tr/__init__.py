"""Robust tensor-ring decomposition and completion with correntropy weights."""

from .data import (
    NoiseSpec,
    add_gmm_noise,
    add_noise,
    add_salt_pepper,
    psnr,
    random_mask,
    relative_error,
    synth_tr_tensor,
)
from .gram import GramCache, core_q_matrix, gram_explicit, gram_via_chain
from .hq import KernelPolicy, adapt_kernel_width, correntropy_objective, hq_weight, update_weights
from .sketch import (
    SketchPlan,
    ablation_variant,
    make_sketch_plan,
    sample_cores,
    sample_subtensor,
    sampled_gradient,
    sawrtrd,
)
from .solver import (
    SolverConfig,
    SolverTrace,
    awrtrd,
    gradient_block,
    init_cores,
    line_search_step,
    scaled_gradient,
    unweighted_solve,
)
from .tensor import (
    fold_classical,
    fold_shifted,
    frobenius_norm,
    masked_weighted_residual,
    unfold_classical,
    unfold_shifted,
)
from .tr import (
    core_unfold_2,
    merge_cores,
    subchain_except,
    subchain_prefix,
    tr_entry,
    tr_reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "ablation_variant",
    "adapt_kernel_width",
    "add_gmm_noise",
    "add_noise",
    "add_salt_pepper",
    "awrtrd",
    "core_q_matrix",
    "core_unfold_2",
    "correntropy_objective",
    "fold_classical",
    "fold_shifted",
    "frobenius_norm",
    "gradient_block",
    "gram_explicit",
    "gram_via_chain",
    "GramCache",
    "hq_weight",
    "init_cores",
    "KernelPolicy",
    "line_search_step",
    "make_sketch_plan",
    "masked_weighted_residual",
    "merge_cores",
    "NoiseSpec",
    "psnr",
    "random_mask",
    "relative_error",
    "sample_cores",
    "sample_subtensor",
    "sampled_gradient",
    "sawrtrd",
    "scaled_gradient",
    "SketchPlan",
    "SolverConfig",
    "SolverTrace",
    "subchain_except",
    "subchain_prefix",
    "synth_tr_tensor",
    "tr_entry",
    "tr_reconstruct",
    "unfold_classical",
    "unfold_shifted",
    "unweighted_solve",
    "update_weights",
]
