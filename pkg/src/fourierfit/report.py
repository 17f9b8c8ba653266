"""Fit reports: objective, coefficient residuals, decay summary and error norms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from .linsolve import SolveReport

EXACT_OBJECTIVE = 1e-20


def reduction_orders(data: npt.ArrayLike, residuals: npt.ArrayLike) -> float:
    """``log10 max|f_n| - log10 max|f_n - S_n|``; ``inf`` for an exact fit."""
    fmax = float(np.max(np.abs(data))) if np.size(data) else 0.0
    rmax = float(np.max(np.abs(residuals))) if np.size(residuals) else 0.0
    if rmax == 0.0:
        return math.inf
    if fmax == 0.0:
        return -math.inf
    return math.log10(fmax) - math.log10(rmax)


def _clean(x: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return x


@dataclass
class ReconstructionReport:
    """Summary of one fit.

    ``indices`` are the fitted multi-indices, ``data`` the given coefficients
    and ``residuals`` the differences ``f_n - S_n`` at those indices.
    """

    kind: str
    objective: float
    indices: npt.NDArray[np.int64] = field(repr=False)
    data: npt.NDArray[np.complex128] = field(repr=False)
    residuals: npt.NDArray[np.complex128] = field(repr=False)
    solver: SolveReport | None = None
    objective_history: list[float] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    model: dict | None = field(default=None, repr=False)
    error: dict | None = None
    extra: dict = field(default_factory=dict)
    config: dict | None = field(default=None, repr=False)
    inputs: dict | None = field(default=None, repr=False)

    @property
    def reduction(self) -> float:
        return reduction_orders(self.data, self.residuals)

    @property
    def exact(self) -> bool:
        return self.objective <= EXACT_OBJECTIVE

    @property
    def residual_objective(self) -> float:
        """``sum |f_n - S_n|^2`` recomputed from the stored residuals."""
        r = np.asarray(self.residuals)
        return float(np.vdot(r, r).real)

    def residual_table(self) -> list[list]:
        idx = np.asarray(self.indices).reshape(len(self.residuals), -1)
        return [[*map(int, i), float(abs(r))] for i, r in zip(idx, self.residuals)]

    def to_dict(self) -> dict:
        return _clean({
            "kind": self.kind,
            "objective": self.objective,
            "exact": self.exact,
            "reduction_orders": self.reduction,
            "max_data": float(np.max(np.abs(self.data))) if np.size(self.data) else 0.0,
            "max_residual": float(np.max(np.abs(self.residuals))) if np.size(self.residuals) else 0.0,
            "solver": self.solver.to_dict() if self.solver is not None else None,
            "objective_history": list(self.objective_history),
            "flags": list(self.flags),
            "error": self.error,
            "extra": self.extra,
            "residuals": self.residual_table(),
            "model": self.model,
            "config": self.config,
            "inputs": self.inputs,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def decay_rows(self) -> list[tuple]:
        """Rows ``(index..., log10|f_n|, log10|f_n - S_n|)`` for plotting."""
        idx = np.asarray(self.indices).reshape(len(self.residuals), -1)
        tiny = np.finfo(float).tiny
        out = []
        for i, f, r in zip(idx, self.data, self.residuals):
            out.append((*map(int, i), math.log10(max(abs(f), tiny)), math.log10(max(abs(r), tiny))))
        return out


def render_text(report: dict) -> str:
    """Human-readable summary of a report dictionary (as written to JSON)."""
    lines = [f"kind: {report.get('kind', '?')}"]
    obj = report.get("objective")
    lines.append(f"objective: {obj:.6e}" if isinstance(obj, (int, float)) else f"objective: {obj}")
    if report.get("exact"):
        lines.append("reduction: exact (objective <= 1e-20)")
    else:
        red = report.get("reduction_orders")
        lines.append(f"reduction: {red:.2f} orders of magnitude" if isinstance(red, (int, float))
                     else f"reduction: {red}")
    solver = report.get("solver")
    if solver:
        lines.append(f"condition estimate: {solver.get('condition', float('nan')):.3e} "
                     f"(rank {solver.get('rank')}, cutoff {solver.get('cutoff')})")
        lines.append(f"refinement: {solver.get('iterations')} steps, final relative residual "
                     f"{solver.get('final_residual')}" + (" [diverged]" if solver.get("diverged") else "")
                     + (" [stalled]" if solver.get("stalled") else ""))
    hist = report.get("objective_history") or []
    if hist:
        lines.append("iteration history:")
        lines.extend(f"  {i}: {v:.6e}" if isinstance(v, (int, float)) else f"  {i}: {v}"
                     for i, v in enumerate(hist))
    for key, val in sorted((report.get("extra") or {}).items()):
        lines.append(f"{key}: {val}")
    err = report.get("error")
    if err:
        lines.append(f"error (grid {err.get('grid')}, exclusion radius {err.get('exclusion_radius')}): "
                     f"sup {err.get('sup'):.3e}, rms {err.get('rms'):.3e}")
    else:
        lines.append("error grid: omitted (no ground truth)")
    flags = report.get("flags") or []
    if flags:
        lines.append("flags: " + ", ".join(flags))
    if report.get("config") is not None:
        lines.append("config: " + json.dumps(report["config"], sort_keys=True))
    if report.get("inputs"):
        lines.append("inputs: " + json.dumps(report["inputs"], sort_keys=True))
    return "\n".join(lines) + "\n"
