"""Calculus on Wasserstein space for discrete measures, with numerical checks."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .measures import (  # noqa: E402,F401
    DiscreteMeasure,
    RngStream,
    SmoothedMeasure,
    char_fn,
    make_discrete,
    sample,
    second_moment,
    smooth,
    translate_pushforward,
    uniform_empirical,
)
from .kernels import (  # noqa: E402,F401
    BumpProduct,
    ExponentialKernel,
    GenericCallback,
    RadialDifference,
    SymmetricKernel,
    TensorPolynomial,
    symmetrize,
)
from .calculus import (  # noqa: E402,F401
    empirical_laplacian,
    eval_F,
    grad_grad_w,
    grad_w,
    hess_offdiag,
    hess_quadratic_form,
    laplacian_w,
)
from .coupling import Coupling, optimal_coupling, p_gamma, taylor_first_order  # noqa: E402,F401
