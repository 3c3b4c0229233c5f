"""Multi-view CCA with robust matrix-elastic-net regularization.

Full-batch and minibatch momentum solvers, a kernelized variant, the
closed-form classical baseline, planted-correlation synthetic data,
evaluation metrics, and a batch CLI.
"""
from .baselines import CCASolution, appgrad_config, cca_closed_form, men_cca_mode
from .core import (
    CanonicalPair,
    FitReport,
    Hyperparams,
    Penalty,
    SolverState,
    Termination,
    TwoViewDataset,
    ViewMatrix,
    center,
    center_with_means,
    validate_dataset,
)
from .data_io import (
    MODEL_MAGIC,
    MODEL_VERSION,
    ModelFile,
    SyntheticSpec,
    load_dsv,
    load_mnist_halves,
    load_model,
    save_dsv,
    save_model,
    split_train_validation,
    synth_two_view,
)
from .errors import RmenccaError
from .kernel import (
    GramMatrix,
    KernelKind,
    KernelModel,
    KernelSpec,
    cross_gram,
    fit_kernel,
    gram_gaussian,
    gram_linear,
    project_kernel,
)
from .metrics import PccReport, constraint_residual, pcc, principal_angles
from .regularizers import (
    HQDiagonal,
    SInverseOperator,
    apply_s_inverse,
    build_s_inverse,
    hq_diagonal,
    l21_norm,
    nuclear_norm,
    surrogate_penalty,
)
from .solver import (
    IterationContext,
    build_context,
    fit_full,
    fit_stochastic,
    grad_u,
    grad_v,
    momentum_step,
    normalize,
    objective,
    project,
)

__version__ = "0.1.0"

__all__ = [
    "CCASolution",
    "CanonicalPair",
    "FitReport",
    "GramMatrix",
    "HQDiagonal",
    "Hyperparams",
    "IterationContext",
    "KernelKind",
    "KernelModel",
    "KernelSpec",
    "MODEL_MAGIC",
    "MODEL_VERSION",
    "ModelFile",
    "PccReport",
    "Penalty",
    "RmenccaError",
    "SInverseOperator",
    "SolverState",
    "SyntheticSpec",
    "Termination",
    "TwoViewDataset",
    "ViewMatrix",
    "appgrad_config",
    "apply_s_inverse",
    "build_context",
    "build_s_inverse",
    "cca_closed_form",
    "center",
    "center_with_means",
    "constraint_residual",
    "cross_gram",
    "fit_full",
    "fit_kernel",
    "fit_stochastic",
    "grad_u",
    "grad_v",
    "gram_gaussian",
    "gram_linear",
    "hq_diagonal",
    "l21_norm",
    "load_dsv",
    "load_mnist_halves",
    "load_model",
    "men_cca_mode",
    "momentum_step",
    "normalize",
    "nuclear_norm",
    "objective",
    "pcc",
    "principal_angles",
    "project",
    "project_kernel",
    "save_dsv",
    "save_model",
    "split_train_validation",
    "surrogate_penalty",
    "synth_two_view",
    "validate_dataset",
]
