"""Seeded synthetic point clouds and the two-parameter toy objective.

Generators return ``(points, labels)``; labels are for evaluation only and
never enter training.
"""

from dataclasses import dataclass

import numpy as np

from kae.errors import SpecError

KINDS = ("circles", "moons", "gaussians")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic dataset.

    ``n_clusters`` is the number of circles (radii ``1, 2, ...``) or of
    Gaussian blobs (means ``0, 2, 4, ...`` on the real line); moons always
    have two clusters.
    """

    kind: str
    n_per_cluster: int
    noise: float = 0.1
    n_clusters: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown dataset kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if int(self.n_per_cluster) != self.n_per_cluster or self.n_per_cluster < 1:
            raise SpecError("n_per_cluster must be a positive integer")
        if not np.isfinite(self.noise) or self.noise < 0:
            raise SpecError("noise must be finite and non-negative")
        if int(self.n_clusters) != self.n_clusters or self.n_clusters < 1:
            raise SpecError("n_clusters must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise SpecError("seed must be an unsigned integer")

    @property
    def size(self):
        k = 2 if self.kind == "moons" else self.n_clusters
        return self.n_per_cluster * k


def gen_dataset(spec):
    """Draw the dataset described by ``spec``.

    Returns
    -------
    points : ndarray
        ``(size, 2)`` for circles and moons, ``(size, 1)`` for gaussians.
    labels : ndarray of int
        Cluster index of every point.
    """
    rng = np.random.default_rng(spec.seed)
    m = spec.n_per_cluster
    if spec.kind == "circles":
        parts = []
        for c in range(spec.n_clusters):
            t = rng.uniform(0.0, 2.0 * np.pi, m)
            parts.append((c + 1.0) * np.column_stack([np.cos(t), np.sin(t)]))
        points = np.vstack(parts)
        k = spec.n_clusters
    elif spec.kind == "moons":
        t = np.linspace(0.0, np.pi, m)
        outer = np.column_stack([np.cos(t), np.sin(t)])
        inner = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
        points = np.vstack([outer, inner])
        k = 2
    else:
        points = np.repeat(2.0 * np.arange(spec.n_clusters, dtype=np.float64), m)[:, None]
        k = spec.n_clusters
    points = points + spec.noise * rng.standard_normal(points.shape)
    labels = np.repeat(np.arange(k), m)
    return points, labels


def toy_objective(phi, psi, lam, mu):
    """``(1 - phi^2 psi)^2 + lam phi^2 + mu psi^2``.

    Works elementwise on arrays.
    """
    phi = np.asarray(phi, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    out = (1.0 - phi**2 * psi) ** 2 + lam * phi**2 + mu * psi**2
    return float(out) if out.ndim == 0 else out


def toy_grid(lam, mu, phi_range=(-2.0, 2.0), psi_range=(-2.0, 2.0), size=101):
    """Heatmap table of :func:`toy_objective`: rows ``(phi, psi, value)``."""
    if size < 2:
        raise SpecError("grid size must be at least 2")
    phis = np.linspace(*phi_range, size)
    psis = np.linspace(*psi_range, size)
    P, S = np.meshgrid(phis, psis, indexing="ij")
    return np.column_stack([P.ravel(), S.ravel(), toy_objective(P, S, lam, mu).ravel()])
