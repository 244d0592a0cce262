"""Named scalar fields used for data, coefficients and boundary values.

Scenarios refer to these by name with a parameter dictionary; there is no
expression language.  Each field evaluates on points of shape ``(..., 2)``
(or ``(..., d)``) and, where it is smooth, exposes its gradient and Hessian
for consistency probes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .norms import FinslerNorm


class Field:
    name = "field"

    def __call__(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError(f"{self.name} has no gradient")

    def hess(self, x):
        raise NotImplementedError(f"{self.name} has no Hessian")


@dataclass(frozen=True)
class Constant(Field):
    value: float
    name = "constant"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(self.value))

    def grad(self, x):
        return np.zeros(np.asarray(x).shape[-1])

    def hess(self, x):
        d = np.asarray(x).shape[-1]
        return np.zeros((d, d))


@dataclass(frozen=True, eq=False)
class Linear(Field):
    p: np.ndarray
    offset: float = 0.0
    name = "linear"

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.p, dtype=float) + self.offset

    def grad(self, x):
        return np.asarray(self.p, dtype=float)

    def hess(self, x):
        d = len(self.p)
        return np.zeros((d, d))


@dataclass(frozen=True, eq=False)
class Quadratic(Field):
    """``½<X x, x> + <p, x> + offset``."""

    X: np.ndarray
    p: np.ndarray
    offset: float = 0.0
    name = "quadratic"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        X = np.asarray(self.X, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, X, x) + x @ np.asarray(self.p, float) + self.offset

    def grad(self, x):
        X = np.asarray(self.X, dtype=float)
        return 0.5 * (X + X.T) @ np.asarray(x, dtype=float) + np.asarray(self.p, float)

    def hess(self, x):
        X = np.asarray(self.X, dtype=float)
        return 0.5 * (X + X.T)


@dataclass(frozen=True, eq=False)
class Cone(Field):
    """``slope · φ(x - v) + offset``."""

    norm: FinslerNorm
    v: np.ndarray
    slope: float = 1.0
    offset: float = 0.0
    name = "cone"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.slope * self.norm(x - np.asarray(self.v, dtype=float)) + self.offset


@dataclass(frozen=True)
class Product(Field):
    """``scale · x_1 x_2``."""

    scale: float = 1.0
    name = "product"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * x[..., 0] * x[..., 1]

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * np.array([x[1], x[0]])

    def hess(self, x):
        return self.scale * np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class Aronsson(Field):
    """``|x_1|^{4/3} - |x_2|^{4/3}``, infinity harmonic for the Euclidean norm."""

    scale: float = 1.0
    name = "aronsson"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * (np.abs(x[..., 0]) ** (4.0 / 3.0) - np.abs(x[..., 1]) ** (4.0 / 3.0))


REGISTRY = {
    "constant": ("value",),
    "linear": ("p",),
    "quadratic": ("X", "p"),
    "cone": ("v",),
    "product": (),
    "aronsson": (),
}


def make_field(name: str, params: dict | None = None, norm: FinslerNorm | None = None) -> Field:
    """Build a registered field from its name and parameters.

    Raises
    ------
    KeyError
        Unknown field name.
    ValueError
        Missing or unexpected parameters.
    """
    params = dict(params or {})
    if name not in REGISTRY:
        raise KeyError(f"unknown field {name!r}; choose from {sorted(REGISTRY)}")
    missing = [k for k in REGISTRY[name] if k not in params]
    if missing:
        raise ValueError(f"field {name!r} needs parameters {missing}")
    if name == "constant":
        return Constant(float(params.pop("value")), **_none(params))
    if name == "linear":
        return Linear(np.asarray(params.pop("p"), float), float(params.pop("offset", 0.0)), **_none(params))
    if name == "quadratic":
        return Quadratic(np.asarray(params.pop("X"), float), np.asarray(params.pop("p"), float),
                         float(params.pop("offset", 0.0)), **_none(params))
    if name == "cone":
        if norm is None:
            raise ValueError("cone field needs a norm")
        return Cone(norm, np.asarray(params.pop("v"), float), float(params.pop("slope", 1.0)),
                    float(params.pop("offset", 0.0)), **_none(params))
    if name == "product":
        return Product(float(params.pop("scale", 1.0)), **_none(params))
    return Aronsson(float(params.pop("scale", 1.0)), **_none(params))


def _none(params):
    if params:
        raise ValueError(f"unexpected field parameters {sorted(params)}")
    return {}
