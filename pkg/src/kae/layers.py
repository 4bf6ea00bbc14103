"""Layer specifications, representer coefficients and forward propagation.

Layer ``l`` (1-based, as in the math) maps the training representations
``X^(l-1)`` to ``X^(l) = K_l Phi_l A_l`` where ``K_l`` is the kernel matrix of
``X^(l-1)`` and ``A_l`` a positive diagonal operator. In Python containers
layer ``l`` sits at index ``l - 1``; ``ModelState.reps[l]`` is ``X^(l)``.
"""

from dataclasses import dataclass, field

import numpy as np

from kae.errors import ConsistencyError, ShapeError, SpecError
from kae.kernels import ScalarKernelSpec, gram, gram_induced


@dataclass
class LayerSpec:
    """One vv-RKHS layer with decomposable kernel ``k(x, x') diag(a_diag)``.

    ``dim=None`` marks the implicit (feature-space valued) last layer of a
    K2AE; its operator is the identity.
    """

    kernel: ScalarKernelSpec
    dim: int | None
    lam: float = 0.0
    a_diag: np.ndarray | None = None

    def __post_init__(self):
        if self.lam < 0 or not np.isfinite(self.lam):
            raise SpecError("regularization weight must be finite and non-negative")
        if self.dim is None:
            if self.a_diag is not None:
                raise SpecError("the implicit layer uses the identity operator")
            return
        if int(self.dim) != self.dim or self.dim < 1:
            raise SpecError(f"layer dimension must be a positive integer, got {self.dim}")
        self.dim = int(self.dim)
        if self.a_diag is None:
            self.a_diag = np.ones(self.dim)
        else:
            self.a_diag = np.asarray(self.a_diag, dtype=np.float64).reshape(-1)
            if self.a_diag.shape != (self.dim,):
                raise SpecError(f"a_diag must have length {self.dim}")
            if np.any(self.a_diag <= 0):
                raise SpecError("a_diag entries must be positive")

    @property
    def implicit(self):
        return self.dim is None

    def to_dict(self):
        d = {"kernel": self.kernel.to_dict(), "dim": self.dim, "lambda": self.lam}
        if self.a_diag is not None:
            d["a_diag"] = self.a_diag.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            kernel=ScalarKernelSpec.from_dict(d["kernel"]),
            dim=d["dim"],
            lam=d["lambda"],
            a_diag=None if d.get("a_diag") is None else np.asarray(d["a_diag"], dtype=np.float64),
        )


@dataclass
class ModelState:
    """Explicit layers, their coefficients and cached training representations.

    Exactly one of ``inputs`` (explicit ``X^(0)``, finite KAE) and ``k_in``
    (Gram table of an implicit input space, inner layers of a K2AE) is set.
    With ``k_in`` the first layer's kernel matrix is computed from inner
    products only and ``reps[0]`` is ``None``. A state built by
    :meth:`restore` keeps only ``k_in_diag`` and supports evaluation on new
    points, not training.
    """

    layers: list
    coeffs: list
    inputs: np.ndarray | None = None
    k_in: np.ndarray | None = None
    code_layer: int | None = None
    k_in_diag: np.ndarray | None = field(default=None, repr=False)
    reps: list = field(default_factory=list, repr=False)
    grams: list = field(default_factory=list, repr=False)
    _stale_from: int | None = field(default=1, repr=False)
    version: int = field(default=0, repr=False)

    def __post_init__(self):
        if (self.inputs is None) == (self.k_in is None):
            raise SpecError("give exactly one of inputs or k_in")
        if not self.layers:
            raise SpecError("a model needs at least one explicit layer")
        if any(layer.implicit for layer in self.layers):
            raise SpecError("ModelState only holds explicit layers")
        if self.inputs is not None:
            self.inputs = np.asarray(self.inputs, dtype=np.float64)
            if self.inputs.ndim != 2 or 0 in self.inputs.shape:
                raise ShapeError(f"inputs must be a non-empty n x d matrix, got {self.inputs.shape}")
            n = self.inputs.shape[0]
        else:
            self.k_in = np.asarray(self.k_in, dtype=np.float64)
            n = self.k_in.shape[0]
            if n == 0:
                raise ShapeError("empty Gram table")
            self.k_in_diag = np.diag(self.k_in).copy()
        if len(self.coeffs) != len(self.layers):
            raise ShapeError("one coefficient matrix per layer is required")
        self.coeffs = [np.array(c, dtype=np.float64) for c in self.coeffs]
        for l, (layer, phi) in enumerate(zip(self.layers, self.coeffs), start=1):
            if phi.shape != (n, layer.dim):
                raise ShapeError(f"layer {l} coefficients must be {(n, layer.dim)}, got {phi.shape}")
        if self.code_layer is None:
            dims = [layer.dim for layer in self.layers]
            self.code_layer = int(np.argmin(dims)) + 1
        self.refresh()

    @classmethod
    def restore(cls, layers, coeffs, reps, k_in_diag, code_layer=None):
        """Rebuild an evaluation-only state over an implicit input space.

        ``reps`` are the saved ``X^(1), ..., X^(L)``; ``k_in_diag`` the
        training points' squared norms. Nothing is recomputed, so outputs on
        new points reproduce those of the state that was saved.
        """
        obj = cls.__new__(cls)
        obj.layers = list(layers)
        obj.coeffs = [np.array(c, dtype=np.float64) for c in coeffs]
        obj.inputs = None
        obj.k_in = None
        obj.k_in_diag = np.asarray(k_in_diag, dtype=np.float64).reshape(-1)
        n = obj.k_in_diag.shape[0]
        if len(obj.coeffs) != len(obj.layers) or len(reps) != len(obj.layers):
            raise ShapeError("one coefficient and one representation matrix per layer are required")
        for l, (layer, phi, x) in enumerate(zip(obj.layers, obj.coeffs, reps), start=1):
            if layer.implicit:
                raise SpecError("ModelState only holds explicit layers")
            if phi.shape != (n, layer.dim) or np.shape(x) != (n, layer.dim):
                raise ShapeError(f"layer {l} matrices must be {(n, layer.dim)}")
        obj.reps = [None] + [np.array(x, dtype=np.float64) for x in reps]
        obj.grams = [None] * len(obj.layers)
        obj.code_layer = code_layer if code_layer is not None else int(np.argmin([la.dim for la in obj.layers])) + 1
        obj._stale_from = None
        obj.version = 0
        return obj

    @property
    def evaluation_only(self):
        return self.inputs is None and self.k_in is None

    @property
    def n(self):
        return self.coeffs[0].shape[0]

    @property
    def depth(self):
        return len(self.layers)

    @property
    def stale(self):
        return self._stale_from is not None

    def set_coeffs(self, l, phi):
        """Replace ``Phi_l`` (1-based); caches of layers >= l become stale."""
        if self.evaluation_only:
            raise SpecError("a restored model cannot be retrained")
        phi = np.asarray(phi, dtype=np.float64)
        if phi.shape != self.coeffs[l - 1].shape:
            raise ShapeError(f"layer {l} coefficients must be {self.coeffs[l - 1].shape}")
        self.coeffs[l - 1] = phi
        self.version += 1
        self._stale_from = l if self._stale_from is None else min(self._stale_from, l)

    def refresh(self):
        """Recompute stale representations and kernel matrices."""
        start = self._stale_from
        if start is None:
            return
        if not self.reps:
            self.reps = [self.inputs] + [None] * self.depth
            self.grams = [None] * self.depth
        for l in range(start, self.depth + 1):
            layer = self.layers[l - 1]
            if self.grams[l - 1] is None or l > 1:
                self.grams[l - 1] = self._layer_gram(l)
            self.reps[l] = self.grams[l - 1] @ self.coeffs[l - 1] * layer.a_diag
        self._stale_from = None

    def check_fresh(self):
        if self.stale:
            raise ConsistencyError(f"cached representations are stale from layer {self._stale_from}")

    def _layer_gram(self, l):
        k = self.layers[l - 1].kernel
        if l == 1 and self.k_in is not None:
            d = np.diag(self.k_in)
            return gram_induced(k, self.k_in, d, d)
        return gram(k, self.reps[l - 1])

    def copy(self):
        if self.evaluation_only:
            raise SpecError("a restored model cannot be copied for training")
        return ModelState(
            layers=list(self.layers),
            coeffs=[c.copy() for c in self.coeffs],
            inputs=self.inputs,
            k_in=self.k_in,
            code_layer=self.code_layer,
        )


def forward_layer(layer, phi, support, inputs):
    """Evaluate ``f_l(x) = sum_i k_l(x, support_i) A_l phi_i`` on the rows of ``inputs``."""
    phi = np.asarray(phi, dtype=np.float64)
    support = np.asarray(support, dtype=np.float64)
    if support.ndim != 2 or support.shape[0] != phi.shape[0]:
        raise ShapeError(f"support has {support.shape[0]} rows, coefficients {phi.shape[0]}")
    if phi.shape[1] != layer.dim:
        raise ShapeError(f"coefficients have {phi.shape[1]} columns, layer dim is {layer.dim}")
    return gram(layer.kernel, inputs, support) @ phi * layer.a_diag


def forward_all(state, inputs=None, *, k_cross=None, k_diag=None, upto=None):
    """Propagate new points through layers ``1..upto``; return ``[X^(1), ..., X^(upto)]``.

    Explicit models take ``inputs``. Models over an implicit input space take
    ``k_cross`` (``m x n`` inner products with the training points) and
    ``k_diag`` (the ``m`` self inner products).
    """
    state.check_fresh()
    upto = state.depth if upto is None else upto
    out = []
    if state.inputs is None:
        if k_cross is None or k_diag is None:
            raise ShapeError("a model over an implicit input space needs k_cross and k_diag")
        k_cross = np.atleast_2d(np.asarray(k_cross, dtype=np.float64))
        if k_cross.shape[1] != state.n:
            raise ShapeError(f"k_cross must have {state.n} columns, got {k_cross.shape[1]}")
        layer = state.layers[0]
        K1 = gram_induced(layer.kernel, k_cross, k_diag, state.k_in_diag)
        x = K1 @ state.coeffs[0] * layer.a_diag
    else:
        if inputs is None:
            raise ShapeError("inputs are required")
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != state.inputs.shape[1]:
            raise ShapeError(f"inputs must have {state.inputs.shape[1]} columns")
        x = forward_layer(state.layers[0], state.coeffs[0], state.reps[0], x)
    out.append(x)
    for l in range(2, upto + 1):
        x = forward_layer(state.layers[l - 1], state.coeffs[l - 1], state.reps[l - 1], x)
        out.append(x)
    return out[:upto]


def layer_norm_sq(layer, phi, gram_l):
    """Squared RKHS norm ``trace(K_l Phi_l A_l Phi_l^T)``."""
    phi = np.asarray(phi, dtype=np.float64)
    gram_l = np.asarray(gram_l, dtype=np.float64)
    n = phi.shape[0]
    if gram_l.shape != (n, n):
        raise ShapeError(f"Gram matrix must be {(n, n)}, got {gram_l.shape}")
    return float(np.sum(gram_l * coeff_inner(layer, phi)))


def coeff_inner(layer, phi):
    """``N_l`` with ``N_l[i, j] = <phi_i, A_l phi_j>``."""
    return (phi * layer.a_diag) @ phi.T


def objective_finite(state, inputs=None):
    """Regularized reconstruction objective of an explicit KAE.

    Returns ``(total, distortion, norms)`` where ``norms`` holds the squared
    RKHS norm of every layer (unweighted).
    """
    state.check_fresh()
    if state.inputs is None:
        raise SpecError("objective_finite needs an explicit model")
    x = state.inputs if inputs is None else np.asarray(inputs, dtype=np.float64)
    out = state.reps[-1]
    if x.shape != out.shape:
        raise ShapeError(f"targets {x.shape} do not match the output layer {out.shape}")
    r = x - out
    distortion = float(np.sum(r * r) / state.n)
    norms = [layer_norm_sq(layer, phi, K) for layer, phi, K in zip(state.layers, state.coeffs, state.grams)]
    total = distortion + sum(layer.lam * v for layer, v in zip(state.layers, norms))
    return total, distortion, norms
