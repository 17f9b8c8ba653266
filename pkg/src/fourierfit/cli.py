"""Command-line front end: ``gen``, ``detect``, ``fit`` and ``report``.

Every report embeds the :class:`RunConfig` it was produced with and the
sha256 digests of its input files, and contains no timings, so identical
runs give byte-identical JSON.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .detect import (DEFAULT_SMOOTHING, DEFAULT_THRESHOLD, ORIENTATION_RULES, CurveSeed, JumpEstimate,
                     detect_curve_2d, detect_jump_1d)
from .errors import FourierFitError, NumericError, ValidationError
from .fourier import REGISTRY, FourierTable, coeffs_from_function, get_function, load_table, save_table
from .linsolve import DEFAULT_CUTOFF, DEFAULT_MAX_ITER, DEFAULT_TARGET
from .models import Model
from .reconstruct import (SolverSettings, error_grid, error_report, fit_piecewise_1d, fit_piecewise_2d,
                          fit_smooth)
from .report import ReconstructionReport, render_text
from .splines import LevelSetSpline, SplineSpace

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3
MODES = ("auto", "smooth", "piecewise")


@dataclass
class RunConfig:
    """All parameters of one CLI invocation.

    ``table_M`` bounds the generated table; ``M`` bounds the fit index set
    (``0 <= M <= table_M``).  ``function`` names the registry function used
    by ``gen`` and, for ``fit``, as ground truth for the error grid.
    """

    command: str = ""
    preset: str | None = None
    function: str | None = None
    input: str | None = None
    seed: str | None = None
    output: str | None = None
    mode: str = "auto"
    order: int = 10
    spacing: float = 0.1
    levelset_order: int = 10
    levelset_spacing: float = 0.1
    table_M: int = 50
    M: int = 20
    resolution: int | None = None
    terms: int = 200
    grid: int = 20000
    lines: int = 50
    line_points: int = 400
    net: int = 11
    threshold: float = DEFAULT_THRESHOLD
    rule: str = "corner-ray"
    smoothing: float = DEFAULT_SMOOTHING
    s0: float | None = None
    cutoff: float = DEFAULT_CUTOFF
    max_refine: int = DEFAULT_MAX_ITER
    refine_target: float = DEFAULT_TARGET
    max_outer: int = 4
    method: str = "lbfgs"
    exclusion_radius: float = 0.0
    error_grid: int | None = None
    random_seed: int = 0

    def validate(self) -> None:
        def need(ok: bool, msg: str) -> None:
            if not ok:
                raise ValidationError(msg)

        need(self.mode in MODES, f"mode must be one of {', '.join(MODES)}")
        need(self.order >= 1 and self.levelset_order >= 1, "spline orders must be at least 1")
        for name in ("spacing", "levelset_spacing"):
            h = getattr(self, name)
            need(0 < h <= 1 and abs(round(1 / h) - 1 / h) < 1e-9, f"{name} must be 1/L for an integer L")
        need(self.table_M >= 0 and self.M >= 0, "M and table_M must be non-negative")
        need(self.terms >= 1 and self.grid >= 3, "terms >= 1 and grid >= 3 required")
        need(self.lines >= 1 and self.line_points >= 3, "lines >= 1 and line_points >= 3 required")
        need(self.net >= 3, "net size must be at least 3")
        need(self.threshold > 0, "threshold must be positive")
        need(self.rule in ORIENTATION_RULES, f"rule must be one of {', '.join(ORIENTATION_RULES)}")
        need(self.smoothing >= 0, "smoothing must be non-negative")
        need(self.s0 is None or 0 < self.s0 < 1, "s0 must lie in (0, 1)")
        need(0 < self.cutoff < 1, "cutoff must lie in (0, 1)")
        need(self.max_refine >= 1 and self.refine_target > 0, "refinement caps must be positive")
        need(self.max_outer >= 0, "max_outer must be non-negative")
        need(self.method in ("lbfgs", "gauss-newton"), "method must be lbfgs or gauss-newton")
        need(self.exclusion_radius >= 0, "exclusion radius must be non-negative")
        need(self.error_grid is None or self.error_grid >= 2, "error grid needs at least 2 points")
        need(self.resolution is None or self.resolution >= 1, "resolution must be positive")
        need(self.function is None or self.function in REGISTRY,
             f"unknown function {self.function!r}; known: {', '.join(sorted(REGISTRY))}")

    def settings(self) -> SolverSettings:
        return SolverSettings(self.cutoff, self.max_refine, self.refine_target)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# full-scale examples and their reduced CI variants
PRESETS: dict[str, dict] = {
    "smooth1d-paper": dict(function="smooth1d", mode="smooth", order=10, spacing=0.1, table_M=19, M=19),
    "pw1d-paper": dict(function="jump1d", mode="piecewise", order=10, spacing=0.1, table_M=999, M=999,
                       terms=200, grid=20000, exclusion_radius=1e-3),
    "smooth2d-paper": dict(function="smooth2d", mode="smooth", order=10, spacing=0.1, table_M=9, M=9),
    "smooth2d-reduced": dict(function="smooth2d", mode="smooth", order=6, spacing=0.2, table_M=12, M=12),
    "pw2d-paper": dict(function="circle2d", mode="piecewise", order=10, spacing=0.1, levelset_order=10,
                       levelset_spacing=0.1, table_M=50, M=40, lines=50, line_points=400, net=11,
                       max_outer=4, exclusion_radius=0.02),
    "pw2d-reduced": dict(function="circle2d", mode="piecewise", order=6, spacing=0.2, levelset_order=6,
                         levelset_spacing=0.2, table_M=50, M=20, lines=50, line_points=400, net=11,
                         max_outer=2, exclusion_radius=0.05),
    "smooth3d-paper": dict(function="smooth3d", mode="smooth", order=6, spacing=0.1, table_M=5, M=5),
    "smooth3d-reduced": dict(function="smooth3d", mode="smooth", order=4, spacing=0.25, table_M=3, M=3,
                             error_grid=21),
}


def make_config(command: str, preset: str | None = None, **overrides) -> RunConfig:
    """Defaults, then the preset, then explicit overrides."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}")
        values.update(PRESETS[preset])
    values.update({k: v for k, v in overrides.items() if v is not None})
    names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - names
    if unknown:
        raise ValidationError(f"unknown config fields: {', '.join(sorted(unknown))}")
    cfg = RunConfig(command=command, preset=preset, **values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# helpers


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _read_json(path: str | Path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(d, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return d


def _require(value, what: str):
    if value is None:
        raise ValidationError(f"{what} is required")
    return value


def _space(order: int, spacing: float, axes: int) -> SplineSpace:
    return SplineSpace(order, spacing, axes)


def _out(cfg: RunConfig, default: str) -> Path:
    return Path(cfg.output or default)


def _singular(table: FourierTable, cfg: RunConfig) -> bool:
    if cfg.mode != "auto":
        return cfg.mode == "piecewise"
    return cfg.seed is not None or cfg.s0 is not None


# ---------------------------------------------------------------------------
# commands


def cmd_gen(cfg: RunConfig, log=print) -> Path:
    """Synthesize a coefficient table for a registry function."""
    f = get_function(_require(cfg.function, "--function"))
    table = coeffs_from_function(f, cfg.table_M, resolution=cfg.resolution)
    out = _out(cfg, f"{f.name}_M{cfg.table_M}.json")
    save_table(table, out)
    # accuracy estimate: the same table at twice the quadrature resolution
    R = cfg.resolution or max(8 * cfg.table_M, 64)
    check = coeffs_from_function(f, cfg.table_M, resolution=2 * R, half_table=table.half_table)
    diff = float(np.max(np.abs(check.data - table.data)))
    log(f"wrote {out}: {f.name}, M={cfg.table_M}, {len(table)} entries"
        f"{' (half table)' if table.half_table else ''}")
    log(f"synthesis: resolution {R} cells/axis, max |change| at {2 * R}: {diff:.3e}, "
        f"hermitian defect {table.hermitian_defect():.3e}")
    return out


def cmd_detect(cfg: RunConfig, log=print) -> Path:
    """Seed for a piecewise fit: jump location (1-D) or curve seed (2-D)."""
    path = _require(cfg.input, "--input")
    table = load_table(path)
    out = _out(cfg, str(Path(path).with_suffix("")) + "_seed.json")
    if table.axes == 1:
        est = detect_jump_1d(table, cfg.terms, cfg.grid, cfg.threshold)
        record = est.to_dict()
        log(f"jump: s0={est.s0}" if est.found else "no interior singularity")
    elif table.axes == 2:
        space = _space(cfg.levelset_order, cfg.levelset_spacing, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            seed = detect_curve_2d(table, space, cfg.lines, cfg.line_points, cfg.net,
                                   rule=cfg.rule, threshold=cfg.threshold, smoothing=cfg.smoothing)
        record = seed.to_dict()
        if len(seed.P0):
            v = seed.Q0_values[: len(seed.Q0_values) - len(seed.P0)]
            log(f"curve: {len(seed.P0)} points, net values in [{v.min():.3f}, {v.max():.3f}]")
        else:
            log("no interior singularity")
    else:
        raise ValidationError("detection supports 1-D and 2-D tables")
    record["config"] = cfg.to_dict()
    record["inputs"] = {"table": file_digest(path)}
    out.write_text(_dump(record))
    log(f"wrote {out}")
    return out


def _load_seed(cfg: RunConfig, axes: int) -> tuple[dict, float | LevelSetSpline]:
    """(digests, seed) for a piecewise fit."""
    if axes == 1 and cfg.s0 is not None:
        return {}, float(cfg.s0)
    path = _require(cfg.seed, "--seed (or --s0 in 1-D)")
    d = _read_json(path)
    digest = {"seed": file_digest(path)}
    if axes == 1:
        if d.get("kind") != "jump1d":
            raise ValidationError(f"{path}: not a 1-D jump seed")
        est = JumpEstimate.from_dict(d)
        if not est.found:
            raise ValidationError(f"{path}: seed records no interior singularity")
        return digest, float(est.s0)
    if d.get("kind") != "curve2d":
        raise ValidationError(f"{path}: not a 2-D curve seed")
    seed = CurveSeed.from_dict(d)
    if seed.levelset is None:
        raise ValidationError(f"{path}: seed records no interior singularity")
    return digest, seed.levelset


def write_decay_csv(report: ReconstructionReport, path: Path) -> None:
    rows = report.decay_rows()
    axes = len(rows[0]) - 2 if rows else 1
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"n{a + 1}" for a in range(axes)] + ["log10_abs_data", "log10_abs_residual"])
        for r in rows:
            w.writerow(list(r[:axes]) + [f"{r[axes]:.10g}", f"{r[axes + 1]:.10g}"])


def write_error_csv(model: Model, cfg: RunConfig, path: Path) -> dict:
    f = get_function(cfg.function)
    grid = cfg.error_grid or {1: 2001, 2: 201, 3: 21}[f.axes]
    P, S, F, keep, radius = error_grid(model, f, grid, cfg.exclusion_radius)
    coords = ["x", "y", "z"][: f.axes]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coords + ["model", "truth", "error", "excluded"])
        for p, s, t, k in zip(P, S, F, keep):
            w.writerow([f"{c:.10g}" for c in p] + [f"{s:.12g}", f"{t:.12g}", f"{s - t:.6e}", int(not k)])
    return error_report(model, f, grid, radius)


def cmd_fit(cfg: RunConfig, log=print) -> dict[str, Path]:
    """Fit, then write model, report, decay CSV and (with a truth) error CSV."""
    path = _require(cfg.input, "--input")
    table = load_table(path)
    inputs = {"table": file_digest(path)}
    settings = cfg.settings()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if not _singular(table, cfg):
            model, report = fit_smooth(table, _space(cfg.order, cfg.spacing, table.axes), cfg.M, settings)
        elif table.axes == 1:
            digest, s0 = _load_seed(cfg, 1)
            inputs.update(digest)
            model, report = fit_piecewise_1d(table, _space(cfg.order, cfg.spacing, 1), cfg.M, s0, settings)
        elif table.axes == 2:
            digest, D = _load_seed(cfg, 2)
            inputs.update(digest)
            model, report = fit_piecewise_2d(
                table, _space(cfg.order, cfg.spacing, 2), D.space, cfg.M, D, max_outer=cfg.max_outer,
                method=cfg.method, settings=settings)
        else:
            raise ValidationError("piecewise fits support 1-D and 2-D tables")
    report.flags.extend(sorted({f"warning: {w.message}" for w in caught}))
    base = Path(cfg.output or str(Path(path).with_suffix("")) + "_fit")
    base.parent.mkdir(parents=True, exist_ok=True)
    paths = {"model": base.with_name(base.name + "_model.json"),
             "report": base.with_name(base.name + "_report.json"),
             "decay": base.with_name(base.name + "_decay.csv")}
    if cfg.function is not None:
        f = get_function(cfg.function)
        if f.jump is not None and "s" in report.extra:
            report.extra["s_true"] = f.jump
            report.extra["s_error"] = abs(report.extra["s"] - f.jump)
        paths["error"] = base.with_name(base.name + "_error.csv")
        report.error = write_error_csv(model, cfg, paths["error"])
    report.config = cfg.to_dict()
    report.inputs = inputs
    if not np.isfinite(report.objective):
        raise NumericError("fit produced a non-finite objective")
    paths["model"].write_text(_dump(report.model))
    paths["report"].write_text(report.to_json())
    write_decay_csv(report, paths["decay"])
    red = "exact" if report.exact else f"{report.reduction:.2f} orders"
    log(f"{report.kind}: objective {report.objective:.6e}, reduction {red}")
    for k in sorted(paths):
        log(f"wrote {paths[k]}")
    return paths


def cmd_report(cfg: RunConfig, log=print) -> str:
    path = _require(cfg.input, "--input")
    d = _read_json(path)
    if "kind" not in d or "objective" not in d:
        raise ValidationError(f"{path}: not a report (missing 'kind' or 'objective')")
    try:
        text = render_text(d)
    except (TypeError, ValueError, AttributeError) as exc:
        raise ValidationError(f"{path}: malformed report ({exc})") from None
    log(text.rstrip("\n"))
    return text


COMMANDS = {"gen": cmd_gen, "detect": cmd_detect, "fit": cmd_fit, "report": cmd_report}


def run_preset(preset: str, workdir: str | Path, log=print, **overrides) -> dict:
    """``gen``, ``detect`` (piecewise presets) and ``fit`` for a preset in ``workdir``."""
    work = Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    table = work / f"{preset}_table.json"
    cmd_gen(make_config("gen", preset, output=str(table), **overrides), log)
    seed = None
    if PRESETS[preset].get("mode") == "piecewise":
        seed = work / f"{preset}_seed.json"
        cmd_detect(make_config("detect", preset, input=str(table), output=str(seed), **overrides), log)
    paths = cmd_fit(make_config("fit", preset, input=str(table), seed=str(seed) if seed else None,
                                output=str(work / preset), **overrides), log)
    paths["table"] = table
    if seed is not None:
        paths["seed"] = seed
    return paths


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fourierfit",
                                     description="Spline reconstruction from Fourier coefficients.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"gen": "synthesize a coefficient table for a registry function",
             "detect": "locate the jump (1-D) or singularity curve (2-D)",
             "fit": "fit a smooth or piecewise spline model",
             "report": "print a report JSON as text"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--preset", choices=sorted(PRESETS))
        for f in fields(RunConfig):
            if f.name in ("command", "preset"):
                continue
            flag = "--" + f.name.replace("_", "-")
            kind = str(f.type)
            if "int" in kind:
                conv = int
            elif "float" in kind:
                conv = float
            else:
                conv = str
            kwargs = {"dest": f.name, "type": conv, "default": None}
            if f.name == "mode":
                kwargs["choices"] = MODES
            elif f.name == "method":
                kwargs["choices"] = ("lbfgs", "gauss-newton")
            elif f.name == "rule":
                kwargs["choices"] = sorted(ORIENTATION_RULES)
            p.add_argument(flag, **kwargs)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    values = {k: v for k, v in vars(args).items() if k not in ("command", "preset")}
    try:
        cfg = make_config(args.command, args.preset, **values)
        COMMANDS[args.command](cfg)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FourierFitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
