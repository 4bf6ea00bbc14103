"""Kernel autoencoders.

Explicit models (:func:`fit_finite`) compose vector-valued RKHS layers over
points in R^d. K2AEs (:func:`fit_k2ae`) work from a Gram table of the inputs
alone and solve their last layer by kernel ridge regression.
"""

from kae._backend import NAME as BACKEND
from kae.datasets import SyntheticSpec, gen_dataset, toy_objective
from kae.errors import KaeError
from kae.kernels import ScalarKernelSpec, gram
from kae.kpca import k2ae_linear_closed_form, kpca
from kae.layers import LayerSpec, ModelState, forward_all, objective_finite
from kae.trainer import (
    K2aeState,
    TrainConfig,
    encode,
    fit_finite,
    fit_k2ae,
    reconstruct,
    test_distortion,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "K2aeState",
    "KaeError",
    "LayerSpec",
    "ModelState",
    "ScalarKernelSpec",
    "SyntheticSpec",
    "TrainConfig",
    "encode",
    "fit_finite",
    "fit_k2ae",
    "forward_all",
    "gen_dataset",
    "gram",
    "k2ae_linear_closed_form",
    "kpca",
    "objective_finite",
    "reconstruct",
    "test_distortion",
    "toy_objective",
]
