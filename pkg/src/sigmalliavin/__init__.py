"""Signature-based Malliavin calculus and Monte Carlo Greeks.

Linear functionals of the time-augmented Brownian signature are represented
as sparse word polynomials (``TensorPoly``); Malliavin derivatives, Skorokhod
integrals and Ornstein-Uhlenbeck operators act on them algebraically.
"""

from .brownian_engine import EstimatorResult, MCConfig, expected_signature_mc, mc_expect
from .errors import *  # noqa: F401,F403
from .greeks import (
    DeltaReport,
    MalliavinWeight,
    ModelSpec,
    RationalFunctional,
    WeightChoice,
    bs_delta,
    delta_estimators,
    delta_finite_difference,
    delta_malliavin,
    weight_table1,
    weight_universal,
)
from .malliavin import PiercedChain, chaos_kernel, clark_ocone_integrand, pierced_pair, verify_iterated_integral
from .path_signature import SampledPath, batch_signature, expected_brownian_sig, signature_of_path
from .sig_operators import (
    KappaVector,
    SwitchSpec,
    diamond,
    diamond_cdc,
    diamond_direct,
    ou_generator_adjoint,
    ou_semigroup_adjoint,
    psi,
    skorokhod_coeff,
)
from .tensor_algebra import (
    GroupTensor,
    TensorPoly,
    chen_product,
    concat,
    group_inverse,
    pair,
    poly,
    shuffle,
    shuffle_exp,
    tensor_exp,
    word,
)

__version__ = "0.1.0"
