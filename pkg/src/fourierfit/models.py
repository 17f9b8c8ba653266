"""Fitted model types, their evaluation and JSON round-trip."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import ShapeError, ValidationError
from .splines import LevelSetSpline, SplineModel, SplineSpace, levelset_eval, tensor_eval

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class PiecewiseModel1D:
    """Two splines joined at ``s``: ``a1`` on ``[s, 1]``, ``a2`` on ``[0, s)``.

    Piece 1 is the side ``x - s >= 0``, the same sign convention as the
    level-set split in 2-D.
    """

    space: SplineSpace
    a1: Array = field(repr=False)
    a2: Array = field(repr=False)
    s: float = 0.5

    def __post_init__(self) -> None:
        for name in ("a1", "a2"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if v.size != self.space.size:
                raise ShapeError(f"{name} needs {self.space.size} coefficients, got {v.size}")
            object.__setattr__(self, name, v)
        if not 0.0 < self.s < 1.0:
            raise ValidationError(f"cut point must lie in (0, 1), got {self.s}")

    @property
    def coefficients(self) -> Array:
        return np.concatenate([self.a1, self.a2])


@dataclass(frozen=True)
class LevelSetModel2D:
    """Two tensor splines split by the sign of a level-set spline.

    ``a1`` applies where ``D >= 0`` and ``a2`` where ``D < 0``.
    """

    space: SplineSpace
    a1: Array = field(repr=False)
    a2: Array = field(repr=False)
    levelset: LevelSetSpline = field(repr=False)

    def __post_init__(self) -> None:
        if self.space.axes != 2:
            raise ShapeError("LevelSetModel2D needs a 2-axis value space")
        for name in ("a1", "a2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.size != self.space.dim:
                raise ShapeError(f"{name} needs {self.space.dim} coefficients, got {v.size}")
            object.__setattr__(self, name, v.reshape(self.space.shape))

    @property
    def coefficients(self) -> Array:
        return np.concatenate([self.a1.ravel(), self.a2.ravel()])


Model = SplineModel | PiecewiseModel1D | LevelSetModel2D


def _points(points: npt.ArrayLike, axes: int) -> Array:
    P = np.asarray(points, dtype=float).reshape(-1, axes)
    if np.any(P < 0.0) or np.any(P > 1.0):
        raise ValidationError("evaluation points must lie in the unit cube")
    return P


def piece_mask(model: Model, points: npt.ArrayLike) -> npt.NDArray[np.bool_]:
    """True where the first piece is used (``x >= s`` or ``D >= 0``)."""
    if isinstance(model, PiecewiseModel1D):
        P = _points(points, 1)
        return P[:, 0] >= model.s
    if isinstance(model, LevelSetModel2D):
        P = _points(points, 2)
        return levelset_eval(model.levelset, P) >= 0
    P = _points(points, model.space.axes)
    return np.ones(len(P), dtype=bool)


def evaluate_model(model: Model, points: npt.ArrayLike) -> Array:
    """Evaluate a fitted model; points on the cut belong to piece 1."""
    if isinstance(model, SplineModel):
        P = _points(points, model.space.axes)
        return tensor_eval(model.space, model.coefficients, P)
    if isinstance(model, PiecewiseModel1D):
        P = _points(points, 1)
        first = P[:, 0] >= model.s
        v1 = tensor_eval(model.space, model.a1, P)
        v2 = tensor_eval(model.space, model.a2, P)
        return np.where(first, v1, v2)
    if isinstance(model, LevelSetModel2D):
        P = _points(points, 2)
        first = levelset_eval(model.levelset, P) >= 0
        v1 = tensor_eval(model.space, model.a1, P)
        v2 = tensor_eval(model.space, model.a2, P)
        return np.where(first, v1, v2)
    raise ValidationError(f"cannot evaluate {type(model).__name__}")


def model_to_dict(model: Model) -> dict:
    if isinstance(model, SplineModel):
        return {"kind": "smooth", "space": model.space.to_dict(),
                "coefficients": model.coefficients.ravel().tolist()}
    if isinstance(model, PiecewiseModel1D):
        return {"kind": "piecewise1d", "space": model.space.to_dict(), "s": model.s,
                "a1": model.a1.tolist(), "a2": model.a2.tolist()}
    if isinstance(model, LevelSetModel2D):
        return {"kind": "piecewise2d", "space": model.space.to_dict(),
                "a1": model.a1.ravel().tolist(), "a2": model.a2.ravel().tolist(),
                "levelset": {"space": model.levelset.space.to_dict(),
                             "coefficients": model.levelset.coefficients.ravel().tolist()}}
    raise ValidationError(f"cannot serialize {type(model).__name__}")


def _space(d: dict) -> SplineSpace:
    return SplineSpace(int(d["order"]), float(d["spacing"]), int(d.get("axes", 1)))


def model_from_dict(d: dict) -> Model:
    kind = d.get("kind")
    if kind == "smooth":
        return SplineModel(_space(d["space"]), np.array(d["coefficients"]))
    if kind == "piecewise1d":
        return PiecewiseModel1D(_space(d["space"]), np.array(d["a1"]), np.array(d["a2"]), float(d["s"]))
    if kind == "piecewise2d":
        ls = d["levelset"]
        D = LevelSetSpline(_space(ls["space"]), np.array(ls["coefficients"]))
        return LevelSetModel2D(_space(d["space"]), np.array(d["a1"]), np.array(d["a2"]), D)
    raise ValidationError(f"unknown model kind {kind!r}")
