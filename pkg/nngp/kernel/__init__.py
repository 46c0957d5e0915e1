"""Induced kernel: activations, Gaussian expectations, specs and the layer recursion."""

from .activation import ActivationKind, parse_activation, eval_activation, apply_activation
from .gauss_expect import (
    GaussianMoments,
    BivariateGaussianMoments,
    ExpectationMethod,
    MethodTag,
    expect_phi,
    expect_phi_pair,
    expect_phi_batch,
    expect_phi_pair_batch,
    mc_expect_pair,
)
from .measures import (
    MeasureKind,
    FirstLayerMeasure,
    GaussianIID,
    L1SphereUniform,
    Empirical,
    sample_l1_sphere_batch,
)
from .spec import (
    LayerHyperparams,
    KernelSpec,
    FlatConfig,
    parse_flat_config,
    parse_kernel_spec,
    load_kernel_spec,
    dump_kernel_spec,
)
from .recursion import (
    PairState,
    first_layer_state,
    layer_step,
    kernel_value,
    gram,
    cross_kernel,
    cross_gram,
    two_layer_kernel,
)

__all__ = [
    "ActivationKind",
    "parse_activation",
    "eval_activation",
    "apply_activation",
    "GaussianMoments",
    "BivariateGaussianMoments",
    "ExpectationMethod",
    "MethodTag",
    "expect_phi",
    "expect_phi_pair",
    "expect_phi_batch",
    "expect_phi_pair_batch",
    "mc_expect_pair",
    "MeasureKind",
    "FirstLayerMeasure",
    "GaussianIID",
    "L1SphereUniform",
    "Empirical",
    "sample_l1_sphere_batch",
    "LayerHyperparams",
    "KernelSpec",
    "FlatConfig",
    "parse_flat_config",
    "parse_kernel_spec",
    "load_kernel_spec",
    "dump_kernel_spec",
    "PairState",
    "first_layer_state",
    "layer_step",
    "kernel_value",
    "gram",
    "cross_kernel",
    "cross_gram",
    "two_layer_kernel",
]
