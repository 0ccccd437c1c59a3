"""Discrete Karhunen-Loeve expansion of a source group's covariance.

A group of ``m`` correlated inputs with mean ``mu`` and covariance ``C`` is
written as::

    y(xi) = mu + sum_{n<=d} sqrt(lambda_n) * phi_n * sqrt(3) * xi_n,   xi_n ~ U[-1, 1]

The ``sqrt(3)`` factor gives each ``sqrt(3) * xi_n`` unit variance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import IndefiniteBeyondTolerance, NotSymmetric, XiOutOfRange

SQRT3 = math.sqrt(3.0)
DEFAULT_ENERGY_FRACTION = 0.90


@dataclass(frozen=True, eq=False)
class KLBasis:
    group_name: str
    mean: np.ndarray
    eigenvalues: np.ndarray  # full spectrum, non-increasing
    eigenvectors: np.ndarray  # columns
    d: int
    scale: float = SQRT3

    def __post_init__(self):
        m = len(self.mean)
        if not 1 <= self.d <= m:
            raise ValueError(f"truncation order d={self.d} outside [1, {m}]")

    @property
    def m(self) -> int:
        return len(self.mean)

    def covariance(self, truncated: bool = True) -> np.ndarray:
        k = self.d if truncated else self.m
        phi = self.eigenvectors[:, :k]
        return (phi * self.eigenvalues[:k]) @ phi.T

    def to_document(self) -> dict:
        return {
            "group_name": self.group_name,
            "d": self.d,
            "scale": self.scale,
            "mean": [float(v) for v in self.mean],
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigenvectors": [[float(v) for v in row] for row in self.eigenvectors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "KLBasis":
        doc = json.loads(text)
        return cls(
            group_name=doc["group_name"],
            mean=np.array(doc["mean"], dtype=float),
            eigenvalues=np.array(doc["eigenvalues"], dtype=float),
            eigenvectors=np.array(doc["eigenvectors"], dtype=float).reshape(len(doc["mean"]), -1),
            d=int(doc["d"]),
            scale=float(doc["scale"]),
        )

    def __eq__(self, other):
        if not isinstance(other, KLBasis):
            return NotImplemented
        return (
            self.group_name == other.group_name
            and self.d == other.d
            and self.scale == other.scale
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.eigenvalues, other.eigenvalues)
            and np.array_equal(self.eigenvectors, other.eigenvectors)
        )


def decompose(covariance, mean, group_name: str = "group", sym_tol: float = 1e-12) -> KLBasis:
    """Full eigendecomposition (``d = m``) of a group covariance.

    Eigenpairs are sorted by decreasing eigenvalue and each eigenvector is
    signed so that its largest-magnitude entry is positive (lowest index wins
    ties).  Eigenvalues in ``[-1e-10 * lambda_1, 0)`` are clipped to zero.
    """
    c = np.array(covariance, dtype=float)
    mean = np.array(mean, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != len(mean):
        raise ValueError(f"covariance shape {c.shape} does not match mean of length {len(mean)}")
    asym = np.max(np.abs(c - c.T)) if c.size else 0.0
    if asym > sym_tol * max(1.0, np.max(np.abs(c))):
        raise NotSymmetric(f"covariance asymmetric by {asym:.3e}")
    c = 0.5 * (c + c.T)

    vals, vecs = np.linalg.eigh(c)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]

    top = max(vals[0], 0.0)
    if vals[-1] < -1e-10 * top:
        raise IndefiniteBeyondTolerance(f"smallest eigenvalue {vals[-1]:.3e} vs largest {top:.3e}")
    vals = np.where(vals < 0.0, 0.0, vals)

    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        j = int(np.argmax(np.abs(col)))  # argmax returns the first maximum
        if col[j] < 0:
            vecs[:, k] = -col

    for a in (mean, vals, vecs):
        a.setflags(write=False)
    return KLBasis(group_name, mean, vals, vecs, d=len(mean))


def truncation_order(eigenvalues, energy_fraction: float = DEFAULT_ENERGY_FRACTION) -> int:
    """Smallest ``d`` whose leading eigenvalues hold ``energy_fraction`` of the total."""
    if not 0.0 < energy_fraction <= 1.0:
        raise ValueError(f"energy_fraction must be in (0, 1], got {energy_fraction}")
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    if total <= 0.0:
        return 1
    cum = np.cumsum(lam)
    # d is the first index where cum/total >= fraction, tested without dividing
    hits = np.nonzero(cum >= energy_fraction * total)[0]
    return int(hits[0]) + 1 if len(hits) else len(lam)


def truncate(basis: KLBasis, energy_fraction: float = DEFAULT_ENERGY_FRACTION) -> KLBasis:
    return replace(basis, d=truncation_order(basis.eigenvalues, energy_fraction))


def variance_captured(basis: KLBasis) -> float:
    total = float(np.sum(basis.eigenvalues))
    if total <= 0.0:
        return 1.0
    return float(np.sum(basis.eigenvalues[: basis.d])) / total


def evaluate(basis: KLBasis, xi) -> np.ndarray:
    """Physical vector(s) for standardized coordinates ``xi`` in ``[-1, 1]^d``.

    ``xi`` may be a single vector of length ``d`` or an ``(n, d)`` array.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != basis.d:
        raise ValueError(f"xi has length {xi.shape[-1]}, basis keeps d={basis.d}")
    if np.any(np.abs(xi) > 1.0):
        raise XiOutOfRange("xi entries must lie in [-1, 1]")
    amp = np.sqrt(basis.eigenvalues[: basis.d]) * basis.scale
    modes = basis.eigenvectors[:, : basis.d] * amp
    return basis.mean + xi @ modes.T
