from .mainnet import (
    MainNetArch,
    PAPER_HIDDEN_WIDTHS,
    init_params,
    main_forward,
    main_forward_batch,
    main_input_gradient,
    main_input_gradient_batch,
    normalize_state,
    param_count,
    softplus,
)

__all__ = [
    "MainNetArch",
    "PAPER_HIDDEN_WIDTHS",
    "init_params",
    "main_forward",
    "main_forward_batch",
    "main_input_gradient",
    "main_input_gradient_batch",
    "normalize_state",
    "param_count",
    "softplus",
]
