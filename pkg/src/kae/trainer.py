"""Gradient-descent training of explicit KAEs and alternating GD/KRR for K2AEs.

In a K2AE the last layer maps back into the (possibly infinite dimensional)
input feature space. Its coefficients are never formed: for fixed inner
layers they solve a kernel ridge regression, and everything the algorithm
needs from them is the matrix ``N_L`` of their pairwise inner products,

    N_L = W^-1 K_in W^-1,    W = K_L + n lam_L I.

At that optimum the residual of sample ``i`` is ``n lam_L phi_{L,i}``, which
gives the distortion ``n lam_L^2 tr(N_L)`` and the last-layer norm
``tr(K_L N_L)`` without touching feature space.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from kae.errors import (
    ConsistencyError,
    DivergenceError,
    ShapeError,
    SingularSystemError,
    SpecError,
)
from kae.gradients import cross_gradients, full_gradient, grad_norm_cross, grad_norm_own, jacobians
from kae.kernels import (
    ScalarKernelSpec,
    gram,
    gram_induced,
    grad1_pairs,
    median_gamma,
    median_gamma_from_gram,
    validate_gram,
)
from kae.layers import LayerSpec, ModelState, forward_all, layer_norm_sq, objective_finite

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12


@dataclass
class TrainConfig:
    """Plain gradient-descent settings.

    ``decay='inverse-t'`` uses ``step / (1 + t / epochs)`` at the 0-based
    epoch ``t``. ``jitter=None`` means ``1e-10 * trace(W) / n`` when the
    ridge system has to be regularized further. ``init='uniform'`` starts
    every coefficient at ``init_scale / n`` (each layer then averages its
    kernel sections), ``init='normal'`` draws i.i.d.
    ``normal(0, init_scale^2 / n)`` entries from ``seed``.
    """

    epochs: int = 100
    step: float = 0.1
    decay: str = "constant"
    seed: int = 0
    init_scale: float = 1.0
    jitter: float | None = None
    init: str = "normal"

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise SpecError("epochs must be a non-negative integer")
        if self.step < 0:
            raise SpecError("step must be non-negative")
        if self.decay not in ("constant", "inverse-t"):
            raise SpecError(f"unknown step decay {self.decay!r}")
        if self.init_scale < 0:
            raise SpecError("init_scale must be non-negative")
        if self.init not in ("normal", "uniform"):
            raise SpecError(f"unknown initialization {self.init!r}")

    def step_at(self, t):
        if self.decay == "constant":
            return self.step
        return self.step / (1.0 + t / max(self.epochs, 1))


@dataclass
class EpochRecord:
    epoch: int
    total: float
    distortion: float
    norms: list

    def row(self):
        return [self.epoch, self.total, self.distortion, *self.norms]


def init_coefficients(config, dims, n):
    """Starting coefficient matrices, one per layer dimension (see :class:`TrainConfig`)."""
    if config.init == "uniform":
        return [np.full((n, d), config.init_scale / n) for d in dims]
    rng = np.random.default_rng(config.seed)
    scale = config.init_scale / np.sqrt(n)
    return [rng.standard_normal((n, d)) * scale for d in dims]


def _check_finite(total, epoch):
    if not np.isfinite(total) or total > DIVERGENCE_LIMIT:
        raise DivergenceError(f"objective diverged at epoch {epoch} (total={total!r})", epoch=epoch)


# ---------------------------------------------------------------------------
# finite-dimensional KAE


def fit_finite(inputs, layers, config, coeffs=None, code_layer=None, callback=None):
    """Train an explicit KAE by full-gradient descent.

    Parameters
    ----------
    inputs : ndarray, shape (n, d0)
    layers : list of LayerSpec
        ``layers[-1].dim`` must equal ``d0``.
    config : TrainConfig
    coeffs : list of ndarray, optional
        Starting coefficients; drawn by :func:`init_coefficients` otherwise.
    callback : callable, optional
        Called with each :class:`EpochRecord` as it is produced.

    Returns
    -------
    state : ModelState
    trace : list of EpochRecord
        Entry 0 is the initialization, entry ``t`` follows the ``t``-th step.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or not np.all(np.isfinite(inputs)):
        raise ShapeError("inputs must be a finite n x d matrix")
    if layers[-1].dim != inputs.shape[1]:
        raise SpecError(f"last layer dim {layers[-1].dim} must equal input dim {inputs.shape[1]}")
    n = inputs.shape[0]
    if coeffs is None:
        coeffs = init_coefficients(config, [layer.dim for layer in layers], n)
    state = ModelState(list(layers), coeffs, inputs=inputs, code_layer=code_layer)

    def record(epoch):
        rec = EpochRecord(epoch, *objective_finite(state))
        _check_finite(rec.total, epoch)
        if callback is not None:
            callback(rec)
        return rec

    trace = [record(0)]
    for t in range(config.epochs):
        grads = full_gradient(state)
        gamma = config.step_at(t)
        for l, g in enumerate(grads, start=1):
            state.set_coeffs(l, state.coeffs[l - 1] - gamma * g)
        state.refresh()
        trace.append(record(t + 1))
        logger.debug("epoch %d total %.6g", t + 1, trace[-1].total)
    return state, trace


# ---------------------------------------------------------------------------
# K2AE


def _ridge_inverse(K_last, lam, jitter=None):
    n = K_last.shape[0]
    W = K_last + n * lam * np.eye(n)
    # Cholesky certifies positive definiteness; the inverse itself comes from
    # a symmetric LDL^T solve, which is exact on diagonal systems
    try:
        linalg.cho_factor(W, lower=True)
    except linalg.LinAlgError:
        eps = jitter if jitter is not None else 1e-10 * np.trace(W) / n
        logger.warning("ridge system not positive definite; retrying with jitter %.3g", eps)
        W = W + eps * np.eye(n)
        try:
            linalg.cho_factor(W, lower=True)
        except linalg.LinAlgError as exc:
            raise SingularSystemError("kernel ridge system is singular even after jitter") from exc
    w_inv = linalg.solve(W, np.eye(n), assume_a="sym")
    return 0.5 * (w_inv + w_inv.T)


def n_krr(reps_last, k_last, lambda_last, k_in, jitter=None):
    """Inner products of the implicit last-layer coefficients.

    Parameters
    ----------
    reps_last : ndarray, shape (n, d_{L-1})
        Training representations entering the last layer.
    k_last : ScalarKernelSpec
    lambda_last : float
    k_in : ndarray, shape (n, n)
        Input Gram table.

    Returns
    -------
    n_last : ndarray, shape (n, n)
        ``W^-1 K_in W^-1``.
    w_inv : ndarray, shape (n, n)
        ``W^-1`` with ``W = K_L + n lambda_last I``.
    """
    K_last = gram(k_last, reps_last)
    w_inv = _ridge_inverse(K_last, lambda_last, jitter)
    return _n_from(w_inv, k_in), w_inv


def _n_from(w_inv, k_in):
    N = w_inv @ k_in @ w_inv
    return 0.5 * (N + N.T)


@dataclass
class K2aeState:
    """Trained or in-training K2AE.

    ``inner`` holds the explicit layers ``1..L-1`` over the implicit input
    space described by ``k_in``; ``last`` is the implicit layer ``L``.
    """

    inner: ModelState
    last: LayerSpec
    k_in: np.ndarray | None
    n_last: np.ndarray = None
    w_inv: np.ndarray = None
    k_last: np.ndarray = field(default=None, repr=False)
    _inner_version: tuple | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.inner.n

    @property
    def depth(self):
        return self.inner.depth + 1

    @property
    def code_layer(self):
        return self.inner.code_layer

    @classmethod
    def restore(cls, inner, last, n_last, w_inv):
        """Evaluation-only K2AE around a restored inner state and saved ``N_L``, ``W^-1``."""
        n = inner.n
        n_last = np.asarray(n_last, dtype=np.float64)
        w_inv = np.asarray(w_inv, dtype=np.float64)
        if n_last.shape != (n, n) or w_inv.shape != (n, n):
            raise ShapeError(f"n_last and w_inv must be {(n, n)}")
        state = cls(inner, last, None, n_last=n_last, w_inv=w_inv)
        state.k_last = gram(last.kernel, inner.reps[-1])
        state._inner_version = _fingerprint(inner)
        return state

    def refresh_last(self, jitter=None):
        """Re-solve the last layer for the current inner coefficients."""
        if self.k_in is None:
            raise SpecError("a restored model cannot be retrained")
        self.inner.refresh()
        self.k_last = gram(self.last.kernel, self.inner.reps[-1])
        self.w_inv = _ridge_inverse(self.k_last, self.last.lam, jitter)
        self.n_last = _n_from(self.w_inv, self.k_in)
        self._inner_version = _fingerprint(self.inner)

    def check_fresh(self):
        self.inner.check_fresh()
        if self.n_last is None or self._inner_version != _fingerprint(self.inner):
            raise ConsistencyError("N_L is stale with respect to the inner coefficients")


def _fingerprint(state):
    return (id(state), state.version)


def k2ae_objective(state):
    """``(total, distortion, norms)`` of a K2AE at its current KRR solution.

    ``norms`` lists the squared norms of layers ``1..L``.
    """
    state.check_fresh()
    if state.k_in is None:
        raise SpecError("the training objective needs the full input Gram table")
    inner = state.inner
    lam = state.last.lam
    distortion = float(state.n * lam * lam * np.trace(state.n_last))
    norms = [layer_norm_sq(layer, phi, K) for layer, phi, K in zip(inner.layers, inner.coeffs, inner.grams)]
    norms.append(float(np.sum(state.k_last * state.n_last)))
    total = distortion + sum(layer.lam * v for layer, v in zip(inner.layers, norms)) + lam * norms[-1]
    return total, distortion, norms


def k2ae_frozen_objective(inner, last, k_in, n_last, w_inv):
    """K2AE objective with the last-layer coefficients held fixed.

    The fixed coefficients are described by their inner products with each
    other (``n_last``) and with the training points (``w_inv @ k_in``).
    Matches :func:`k2ae_objective` when ``n_last`` and ``w_inv`` come from
    the current inner coefficients; its gradient in the inner coefficients
    is what :func:`k2ae_gradient` computes.
    """
    inner.check_fresh()
    n = inner.n
    K_last = gram(last.kernel, inner.reps[-1])
    cross = K_last @ (w_inv @ k_in)
    quad = K_last @ n_last @ K_last
    distortion = float((np.trace(k_in) - 2.0 * np.trace(cross) + np.trace(quad)) / n)
    norms = [layer_norm_sq(layer, phi, K) for layer, phi, K in zip(inner.layers, inner.coeffs, inner.grams)]
    norms.append(float(np.sum(K_last * n_last)))
    total = distortion + sum(layer.lam * v for layer, v in zip(inner.layers, norms)) + last.lam * norms[-1]
    return total, distortion, norms


def _last_cross(state, jt, n_last):
    inner = state.inner
    G_last = grad1_pairs(state.last.kernel, inner.reps[-1], state.k_last)
    return cross_gradients(n_last, G_last, jt, inner.depth)


def grad_distortion_k2ae(state, jt, n_last=None):
    """Distortion gradient for every inner layer, ``N_L`` held fixed.

    Uses ``<x_i - x_i^(L), phi_{L,k}> = n lam_L N_L[i, k]`` so only inner
    products of the implicit coefficients appear.
    """
    n_last = state.n_last if n_last is None else n_last
    return [-2.0 * state.last.lam * g for g in _last_cross(state, jt, n_last)]


def k2ae_gradient(state, jt=None):
    """Gradient of the K2AE objective with respect to the inner coefficients."""
    state.check_fresh()
    if state.k_in is None:
        raise SpecError("the training objective needs the full input Gram table")
    inner = state.inner
    if jt is None:
        jt = jacobians(inner)
    lam = state.last.lam
    # distortion (-2 lam_L) and last-layer norm (+lam_L) share one contraction
    grads = [-lam * g for g in _last_cross(state, jt, state.n_last)]
    for l, layer in enumerate(inner.layers, start=1):
        if layer.lam != 0.0:
            grads[l - 1] = grads[l - 1] + layer.lam * grad_norm_own(layer, inner.coeffs[l - 1], inner.grams[l - 1])
            for l0, g in enumerate(grad_norm_cross(inner, l, jt), start=1):
                grads[l0 - 1] = grads[l0 - 1] + layer.lam * g
    return grads


def _split_k2ae_layers(layers):
    if len(layers) < 2:
        raise SpecError("a K2AE needs at least one inner layer and the implicit last layer")
    *inner, last = layers
    if last.dim is not None:
        last = LayerSpec(last.kernel, None, last.lam)
    if last.lam <= 0:
        raise SpecError("the implicit last layer needs lambda > 0")
    return inner, last


def init_k2ae(k_in, layers, config, coeffs=None, code_layer=None, validate=True):
    """Build the initial K2AE state (inner coefficients drawn, ``N_L`` solved)."""
    k_in = validate_gram(k_in) if validate else np.asarray(k_in, dtype=np.float64)
    inner_layers, last = _split_k2ae_layers(layers)
    n = k_in.shape[0]
    if coeffs is None:
        coeffs = init_coefficients(config, [layer.dim for layer in inner_layers], n)
    inner = ModelState(inner_layers, coeffs, k_in=k_in, code_layer=code_layer)
    state = K2aeState(inner, last, k_in)
    state.refresh_last(config.jitter)
    return state


def fit_k2ae(k_in, layers, config, coeffs=None, code_layer=None, validate=True, callback=None):
    """Alternate gradient steps on the inner layers with the closed-form last layer.

    Parameters
    ----------
    k_in : ndarray, shape (n, n)
        Gram table of the training points in the input feature space.
    layers : list of LayerSpec
        Inner layers followed by the implicit last layer (``dim=None``,
        ``lam > 0``). The first layer's kernel is evaluated from ``k_in``.
    config : TrainConfig

    Returns
    -------
    state : K2aeState
    trace : list of EpochRecord
        Entry 0 is the initialization; entry ``t`` is taken after the
        ``N_L`` refresh that closes epoch ``t``.
    """
    state = init_k2ae(k_in, layers, config, coeffs, code_layer, validate)

    def record(epoch):
        rec = EpochRecord(epoch, *k2ae_objective(state))
        _check_finite(rec.total, epoch)
        if callback is not None:
            callback(rec)
        return rec

    trace = [record(0)]
    inner = state.inner
    for t in range(config.epochs):
        grads = k2ae_gradient(state)
        gamma = config.step_at(t)
        for l, g in enumerate(grads, start=1):
            inner.set_coeffs(l, inner.coeffs[l - 1] - gamma * g)
        inner.refresh()
        state.refresh_last(config.jitter)
        trace.append(record(t + 1))
        logger.debug("epoch %d total %.6g", t + 1, trace[-1].total)
    return state, trace


def test_distortion(state, k_test_train, k_test_diag):
    """Squared reconstruction error of new points in the input feature space.

    Parameters
    ----------
    k_test_train : ndarray, shape (m, n)
        Inner products between test and training points (training order).
    k_test_diag : ndarray, shape (m,)
        Squared norms of the test points.
    """
    state.check_fresh()
    k_test_train = np.atleast_2d(np.asarray(k_test_train, dtype=np.float64))
    k_test_diag = np.asarray(k_test_diag, dtype=np.float64).reshape(-1)
    if k_test_train.shape != (k_test_diag.shape[0], state.n):
        raise ShapeError(
            f"k_test_train must be ({k_test_diag.shape[0]}, {state.n}), got {k_test_train.shape}"
        )
    x_prev = forward_all(state.inner, k_cross=k_test_train, k_diag=k_test_diag)[-1]
    kappa = gram(state.last.kernel, x_prev, state.inner.reps[-1])
    quad = np.einsum("mi,ij,mj->m", kappa, state.n_last, kappa)
    cross = np.einsum("mi,ij,mj->m", kappa, state.w_inv, k_test_train)
    return k_test_diag + quad - 2.0 * cross


test_distortion.__test__ = False


def encode(state, inputs=None, *, k_test_train=None, k_test_diag=None):
    """Codes of new points at the model's code layer.

    Explicit models take ``inputs``; K2AEs take inner products with the
    training points.
    """
    if isinstance(state, K2aeState):
        state.check_fresh()
        return forward_all(state.inner, k_cross=k_test_train, k_diag=k_test_diag, upto=state.code_layer)[-1]
    return forward_all(state, inputs, upto=state.code_layer)[-1]


def reconstruct(state, inputs):
    """Output of an explicit KAE on new points."""
    if isinstance(state, K2aeState):
        raise SpecError("reconstruction is only available for explicit models")
    return forward_all(state, inputs)[-1]


def resolve_median_bandwidths(layers, coeffs, marked, inputs=None, k_in=None):
    """Replace Gaussian bandwidths of the ``marked`` layers (1-based) by the median heuristic.

    Each marked layer gets ``1 / (2 median^2)`` of the pairwise distances of
    its input under the given coefficients, walking forward from the data.
    """
    layers = list(layers)
    marked = set(marked)
    if (inputs is None) == (k_in is None):
        raise SpecError("give exactly one of inputs or k_in")
    x = None if inputs is None else np.asarray(inputs, dtype=np.float64)
    for l, layer in enumerate(layers, start=1):
        if l in marked:
            if l == 1 and k_in is not None:
                gamma = median_gamma_from_gram(k_in)
            else:
                gamma = median_gamma(x)
            layer = LayerSpec(ScalarKernelSpec.gaussian(gamma), layer.dim, layer.lam,
                              None if layer.implicit else layer.a_diag)
            layers[l - 1] = layer
        if layer.implicit or l > len(coeffs):
            break
        if l == 1 and k_in is not None:
            d = np.diag(k_in)
            K = gram_induced(layer.kernel, k_in, d, d)
        else:
            K = gram(layer.kernel, x)
        x = K @ coeffs[l - 1] * layer.a_diag
    return layers


__all__ = [
    "TrainConfig",
    "EpochRecord",
    "K2aeState",
    "init_coefficients",
    "fit_finite",
    "n_krr",
    "k2ae_objective",
    "k2ae_frozen_objective",
    "grad_distortion_k2ae",
    "k2ae_gradient",
    "init_k2ae",
    "fit_k2ae",
    "test_distortion",
    "encode",
    "reconstruct",
    "resolve_median_bandwidths",
    "objective_finite",
]
