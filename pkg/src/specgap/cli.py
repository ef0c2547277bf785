"""Command-line driver.

Commands: ``hyperbolic``, ``torus``, ``beta``, ``zeta``, ``convergence`` and
``torsion``. Settings come from flags and optionally from a flat
``key = value`` file (``--config``) whose keys carry a ``geometry.``,
``numeric.`` or ``output.`` prefix; flags override file values.

Exit status: 0 on success, 2 on invalid configuration, 3 on numerical
failure.

Structured report format (``--format structured``)::

    schema = specgap-report/1
    <path> = <value>

Paths are ``/``-separated. Containers appear as ``@dict``, ``@list``,
``@tuple`` or ``@<ReportClass>`` before their children; dictionary keys and
leaf values are written as JSON scalars, floats with 17 significant digits
(``nan``, ``inf`` and ``-inf`` spelled out), complex numbers as
``complex(re, im)``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._errors import ConfigError, NumericalError, SpecgapError

SCHEMA = "specgap-report/1"

__all__ = ["RunConfig", "ThetaTable", "TorsionResult", "serialize_report", "parse_structured",
           "load_config_file", "run", "main"]


# ----------------------------------------------------------------------
# small report containers owned by the cli


@dataclass(frozen=True)
class ThetaTable:
    """Rows ``(t, theta_comb, theta_ref, abs_error)``."""

    t: tuple
    theta_comb: tuple
    theta_ref: tuple
    abs_error: tuple


@dataclass(frozen=True)
class TorsionResult:
    log_torsion: float
    log_determinants: tuple


def _report_types():
    from .bloch import SpectrumSummary
    from .lab import ConvergenceReport, ConvergenceRow
    from .spectral import BetaEstimate
    from .zeta import ZetaReport

    return {cls.__name__: cls for cls in (
        ConvergenceReport, ConvergenceRow, ZetaReport, BetaEstimate, SpectrumSummary,
        ThetaTable, TorsionResult,
    )}


# ----------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"complex({_fmt_float(v.real)}, {_fmt_float(v.imag)})"
    if isinstance(v, str):
        return json.dumps(v)
    raise ConfigError(f"cannot serialize value of type {type(v).__name__}")


def _unscalar(text: str):
    text = text.strip()
    if text == "true":
        return True
    if text == "false":
        return False
    if text == "null":
        return None
    if text in ("nan", "inf", "-inf"):
        return float(text)
    if text.startswith("complex(") and text.endswith(")"):
        re, im = text[8:-1].split(",")
        return complex(float(re), float(im))
    if text.startswith('"'):
        return json.loads(text)
    try:
        return int(text)
    except ValueError:
        return float(text)


def _flatten(obj, path, out):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out.append((path, "@" + type(obj).__name__))
        for f in dataclasses.fields(obj):
            _flatten(getattr(obj, f.name), f"{path}/{f.name}", out)
    elif isinstance(obj, dict):
        out.append((path, "@dict"))
        for k, v in obj.items():
            key = _scalar(k)
            if "/" in key:
                raise ConfigError(f"dictionary key {k!r} contains '/'")
            _flatten(v, f"{path}/{key}", out)
    elif isinstance(obj, (list, tuple)):
        out.append((path, "@tuple" if isinstance(obj, tuple) else "@list"))
        for i, v in enumerate(obj):
            _flatten(v, f"{path}/{i}", out)
    elif isinstance(obj, np.ndarray):
        _flatten(obj.tolist(), path, out)
    else:
        out.append((path, _scalar(obj)))


def _rows_csv(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_scalar(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue().encode()


def _csv(report) -> bytes:
    from .bloch import SpectrumSummary
    from .lab import ConvergenceReport
    from .spectral import BetaEstimate
    from .zeta import ZetaReport

    if isinstance(report, ConvergenceReport):
        return _rows_csv(["level", "mesh", "metric_name", "value", "error", "order"],
                         [(r.level, r.mesh, r.metric_name, r.value, r.error, r.order) for r in report.rows])
    if isinstance(report, ZetaReport):
        report = [report]
    if isinstance(report, (list, tuple)) and report and all(isinstance(r, ZetaReport) for r in report):
        return _rows_csv(["degree", "zeta0", "zeta_prime0", "log_det"],
                         [(r.degree, r.zeta_at_0, r.zeta_prime_at_0, r.log_determinant) for r in report])
    if isinstance(report, BetaEstimate):
        return _rows_csv(["beta", "beta_bar", "window_min", "window_max", "residual", "lambda0"],
                         [(report.beta, report.beta_bar, report.window_min, report.window_max,
                           report.residual, report.lambda0)])
    if isinstance(report, SpectrumSummary):
        return _rows_csv(["degree", "lambda0", "kernel_dim", "kappa0"],
                         [(j, report.lambda0[j], report.kernel_dim[j], report.kappa0[j]) for j in report.degrees])
    if isinstance(report, ThetaTable):
        return _rows_csv(["t", "theta_comb", "theta_ref", "abs_error"],
                         zip(report.t, report.theta_comb, report.theta_ref, report.abs_error))
    if isinstance(report, TorsionResult):
        return _rows_csv(["log_torsion"], [(report.log_torsion,)])
    raise ConfigError(f"no CSV schema for {type(report).__name__}")


def serialize_report(report, format: str = "csv") -> bytes:
    """Serialize a report as CSV or as the structured key/value text."""
    if format == "csv":
        return _csv(report)
    if format == "structured":
        lines = [("schema", SCHEMA)]
        _flatten(report, "", lines)
        text = [f"{lines[0][0]} = {lines[0][1]}"]
        text += [f"{p or '/'} = {v}" for p, v in lines[1:]]
        return ("\n".join(text) + "\n").encode()
    raise ConfigError(f"unknown format {format!r}; expected 'csv' or 'structured'")


def parse_structured(data: bytes):
    """Inverse of ``serialize_report(..., "structured")``."""
    lines = [ln for ln in data.decode().splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != f"schema={SCHEMA}":
        raise ConfigError("missing or unsupported schema line")
    types = _report_types()
    nodes: dict = {}
    order: list = []
    for ln in lines[1:]:
        path, _, value = ln.partition(" = ")
        path = "" if path == "/" else path
        nodes[path] = value
        order.append(path)

    children: dict = {p: [] for p in order}
    for p in order:
        if p:
            parent = p.rsplit("/", 1)[0]
            children[parent].append(p)

    def build(p):
        marker = nodes[p]
        kids = children[p]
        names = [k.rsplit("/", 1)[1] for k in kids]
        if marker == "@dict":
            return {_unscalar(n): build(k) for n, k in zip(names, kids)}
        if marker in ("@list", "@tuple"):
            items = [build(k) for k in kids]
            return tuple(items) if marker == "@tuple" else items
        if marker.startswith("@"):
            cls = types.get(marker[1:])
            if cls is None:
                raise ConfigError(f"unknown report type {marker[1:]!r}")
            return cls(**{n: build(k) for n, k in zip(names, kids)})
        return _unscalar(marker)

    return build("")


# ----------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Validated settings of one command invocation."""

    command: str
    geometry: dict = field(default_factory=dict)
    numeric: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        kinds = [k for k in ("torus", "hyperbolic", "product") if self.geometry.get(k)]
        needs_geometry = self.command != "convergence"
        if needs_geometry and len(kinds) != 1:
            raise ConfigError("exactly one geometry block (torus, hyperbolic or product) is required")
        for key in ("tol", "kernel_tol"):
            if key in self.numeric and self.numeric[key] is not None and not self.numeric[key] > 0:
                raise ConfigError(f"numeric.{key} must be positive")
        if self.output.get("format", "csv") not in ("csv", "structured"):
            raise ConfigError("output.format must be csv or structured")
        return self

    @property
    def geometry_kind(self) -> str:
        for k in ("torus", "hyperbolic", "product"):
            if self.geometry.get(k):
                return k
        return ""


def load_config_file(path) -> dict:
    """Read a flat ``section.key = value`` file into a dict."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key.split(".", 1)[0] not in ("geometry", "numeric", "output") or "." not in key:
            raise ConfigError(f"{path}:{n}: key {key!r} lacks a geometry./numeric./output. prefix")
        out[key] = value
    return out


def _range(text: str, name: str):
    try:
        a, b = (float(x) for x in str(text).split(":"))
    except ValueError as exc:
        raise ConfigError(f"{name} must look like A:B, got {text!r}") from exc
    if not 0 < a < b:
        raise ConfigError(f"{name} must satisfy 0 < A < B")
    return a, b


def _basis(text, g):
    if text is None:
        return None
    try:
        rows = [[float(x) for x in r.split(",")] for r in str(text).split(";")]
        arr = np.array(rows, float)
    except ValueError as exc:
        raise ConfigError(f"basis must look like '1,0;0,1', got {text!r}") from exc
    if arr.shape != (g, g):
        raise ConfigError(f"basis must be {g}x{g}")
    return arr


# flag name -> (section, key, converter)
_FIELDS = {
    "d": ("geometry", "d", int),
    "vol": ("geometry", "vol", float),
    "product": ("geometry", "product", str),
    "g": ("geometry", "g", int),
    "n": ("geometry", "n", int),
    "basis": ("geometry", "basis", str),
    "preset": ("geometry", "preset", str),
    "degree": ("numeric", "degree", int),
    "resolution": ("numeric", "resolution", int),
    "t_window": ("numeric", "t_window", str),
    "n_t": ("numeric", "n_t", int),
    "window": ("numeric", "window", str),
    "n_points": ("numeric", "n_points", int),
    "levels": ("numeric", "levels", int),
    "mass_shift": ("numeric", "mass_shift", float),
    "kernel_tol": ("numeric", "kernel_tol", float),
    "s_probes": ("numeric", "s_probes", str),
    "out": ("output", "dir", str),
    "format": ("output", "format", str),
}


def _build_config(args) -> RunConfig:
    merged: dict = {}
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            section, name = key.split(".", 1)
            merged[(section, name)] = value
    for flag, (section, name, _) in _FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            merged[(section, name)] = v
    converters = {(s, n): conv for s, n, conv in _FIELDS.values()}
    cfg = RunConfig(command=args.command)
    for (section, name), value in merged.items():
        conv = converters.get((section, name), str)
        try:
            value = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}.{name}: cannot parse {value!r}") from exc
        getattr(cfg, section)[name] = value
    geo = cfg.geometry
    if args.command != "convergence":
        geo["hyperbolic"] = "d" in geo and "product" not in geo
        geo["product"] = geo.get("product") or False
        geo["torus"] = ("g" in geo or "preset" in geo) and not geo["hyperbolic"] and not geo["product"]
        if ("g" in geo or "preset" in geo) and (geo["hyperbolic"] or geo["product"]):
            raise ConfigError("torus and hyperbolic geometry given together")
    cfg.output.setdefault("format", getattr(args, "format", None) or "csv")
    cfg.output.setdefault("dir", "specgap-out")
    cfg.numeric["threads"] = args.threads
    cfg.numeric.update({k: getattr(args, k) for k in ("determinant", "theta", "spectrum", "gaps", "check")
                        if getattr(args, k, None) is not None})
    return cfg.validate()


# ----------------------------------------------------------------------
# command implementations


def _torus_complex(cfg: RunConfig):
    from .complex import build_torus_complex
    from .lab import torus_preset

    geo = cfg.geometry
    if "preset" in geo:
        return torus_preset(geo["preset"])
    g = geo["g"]
    return build_torus_complex(g, geo.get("n", 8), _basis(geo.get("basis"), g))


def _torus_sample(cfg: RunConfig, c):
    from .bloch import laplacian_families, sample_spectrum

    res = cfg.numeric.get("resolution", 32 if c.rank == 1 else 16 if c.rank == 2 else 8)
    return sample_spectrum(laplacian_families(c, cfg.numeric.get("mass_shift", 0.0)), res,
                           threads=cfg.numeric.get("threads"))


def _hyperbolic_thetas(cfg: RunConfig):
    from .closed_form import ClosedFormTheta
    from .hyperbolic import HyperbolicModel, product_theta, theta_hyperbolic

    geo = cfg.geometry
    vol = geo.get("vol", 1.0)
    if geo.get("product"):
        try:
            d1, d2 = (int(x) for x in str(geo["product"]).split(","))
        except ValueError as exc:
            raise ConfigError("product must look like D1,D2") from exc
        A = [theta_hyperbolic(HyperbolicModel(d1, vol), j) for j in range(d1 + 1)]
        B = [theta_hyperbolic(HyperbolicModel(d2, vol), j) for j in range(d2 + 1)]
        return [product_theta(A, B, k) for k in range(d1 + d2 + 1)]
    m = HyperbolicModel(geo["d"], vol)
    return [theta_hyperbolic(m, j) for j in range(m.d + 1)]


def _thetas(cfg: RunConfig):
    """ThetaFunction per degree for the configured geometry."""
    from .spectral import ThetaFunction

    if cfg.geometry_kind == "torus":
        c = _torus_complex(cfg)
        sample = _torus_sample(cfg, c)
        return [ThetaFunction.from_sample(sample, j, cfg.numeric.get("kernel_tol"))
                for j in range(c.rank + 1)], sample
    forms = _hyperbolic_thetas(cfg)
    return [ThetaFunction.from_closed_form(f, j) for j, f in enumerate(forms)], None


def _degree_list(cfg, n_degrees):
    if "degree" in cfg.numeric:
        j = cfg.numeric["degree"]
        if not 0 <= j < n_degrees:
            raise ConfigError(f"degree must lie in 0..{n_degrees - 1}")
        return [j]
    return list(range(n_degrees))


def _emit(cfg: RunConfig, name: str, report, stdout):
    fmt = cfg.output["format"]
    data = serialize_report(report, fmt)
    out_dir = Path(cfg.output["dir"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{name}.{'csv' if fmt == 'csv' else 'txt'}"
        path.write_bytes(data)
    except OSError as exc:
        raise ConfigError(f"cannot write output to {out_dir}: {exc}") from exc
    print(f"wrote {path}", file=stdout)


def _cmd_zeta(cfg, stdout, name="zeta"):
    from .zeta import determinant

    thetas, _ = _thetas(cfg)
    reports = []
    for j in _degree_list(cfg, len(thetas)):
        r = determinant(thetas[j], check=bool(cfg.numeric.get("check", False)))
        reports.append(r)
        print(f"degree {j}: zeta(0) = {_fmt_float(r.zeta_at_0)}  log_det = {_fmt_float(r.log_determinant)}",
              file=stdout)
    _emit(cfg, name, reports, stdout)
    return reports


def _cmd_hyperbolic(cfg, stdout):
    from .hyperbolic import HyperbolicModel, gap_table

    if cfg.geometry_kind not in ("hyperbolic", "product"):
        raise ConfigError("the hyperbolic command needs --d (or --product)")
    did = False
    if cfg.numeric.get("gaps") and cfg.geometry_kind == "hyperbolic":
        gaps = gap_table(HyperbolicModel(cfg.geometry["d"], cfg.geometry.get("vol", 1.0)))
        print("gaps: " + ", ".join(_fmt_float(g) for g in gaps), file=stdout)
        did = True
    if cfg.numeric.get("theta"):
        thetas, _ = _thetas(cfg)
        for j in _degree_list(cfg, len(thetas)):
            print(f"theta_{j}(t) = " + " + ".join(
                f"{_fmt_float(a)} t^-{_fmt_float(p)} exp(-{_fmt_float(r)} t)"
                for a, p, r in thetas[j].backing.terms), file=stdout)
        did = True
    if cfg.numeric.get("determinant") or not did:
        _cmd_zeta(cfg, stdout, "hyperbolic_zeta")


def _cmd_torus(cfg, stdout):
    from .lab import theta_table, torus_theta_reference
    from .bloch import spectrum_summary

    if cfg.geometry_kind != "torus":
        raise ConfigError("the torus command needs --g or --preset")
    c = _torus_complex(cfg)
    sample = _torus_sample(cfg, c)
    did = False
    if cfg.numeric.get("theta"):
        j = cfg.numeric.get("degree", 0)
        if not 0 <= j <= c.rank:
            raise ConfigError(f"degree must lie in 0..{c.rank}")
        t1, t2 = _range(cfg.numeric.get("t_window", "0.5:5"), "t-window")
        ts = np.geomspace(t1, t2, cfg.numeric.get("n_t", 50))
        t, comb, ref, err = theta_table(sample, j, ts, torus_theta_reference(c.rank, j, c.volume))
        table = ThetaTable(tuple(t.tolist()), tuple(comb.tolist()), tuple(ref.tolist()), tuple(err.tolist()))
        print(f"max abs error {_fmt_float(float(err.max()))}", file=stdout)
        _emit(cfg, "theta", table, stdout)
        did = True
    if cfg.numeric.get("spectrum") or not did:
        summary = spectrum_summary(sample, cfg.numeric.get("kernel_tol"))
        for j in summary.degrees:
            print(f"degree {j}: lambda0 = {_fmt_float(summary.lambda0[j])}  "
                  f"kernel_dim = {_fmt_float(summary.kernel_dim[j])}", file=stdout)
        _emit(cfg, "spectrum", summary, stdout)


def _cmd_beta(cfg, stdout):
    from .spectral import estimate_beta

    thetas, _ = _thetas(cfg)
    j = cfg.numeric.get("degree", 0)
    if not 0 <= j < len(thetas):
        raise ConfigError(f"degree must lie in 0..{len(thetas) - 1}")
    window = _range(cfg.numeric.get("window", "10:1000"), "window")
    est = estimate_beta(thetas[j], window=window, n_points=cfg.numeric.get("n_points", 60))
    print(f"beta = {_fmt_float(est.beta)}  beta_bar = {_fmt_float(est.beta_bar)}  "
          f"residual = {_fmt_float(est.residual)}", file=stdout)
    _emit(cfg, "beta", est, stdout)


def _cmd_torsion(cfg, stdout):
    from .zeta import beta_torsion, determinant

    thetas, _ = _thetas(cfg)
    reports = [determinant(th) for th in thetas]
    log_t = beta_torsion(reports)
    print(f"log_torsion = {_fmt_float(log_t)}", file=stdout)
    _emit(cfg, "torsion", TorsionResult(log_t, tuple(r.log_determinant for r in reports)), stdout)


def _cmd_convergence(cfg, stdout):
    from .lab import run_preset

    preset = cfg.geometry.get("preset")
    if not preset:
        raise ConfigError("the convergence command needs --preset")
    report = run_preset(preset, levels=cfg.numeric.get("levels"), threads=cfg.numeric.get("threads"),
                        grid_resolution=cfg.numeric.get("resolution"))
    for r in report.rows:
        print(f"level {r.level} mesh {_fmt_float(r.mesh)} {r.metric_name} "
              f"value {_fmt_float(r.value)} error {_fmt_float(r.error)}", file=stdout)
    _emit(cfg, "convergence", report, stdout)


_COMMANDS = {
    "hyperbolic": _cmd_hyperbolic,
    "torus": _cmd_torus,
    "beta": _cmd_beta,
    "zeta": _cmd_zeta,
    "torsion": _cmd_torsion,
    "convergence": _cmd_convergence,
}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute a validated configuration; returns the exit status."""
    _COMMANDS[cfg.command](cfg, stdout or sys.stdout)
    return 0


# ----------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file with geometry./numeric./output. keys")
    common.add_argument("--out", help="output directory (default specgap-out)")
    common.add_argument("--format", choices=["csv", "structured"])
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, default=None, help="reserved; all computations are deterministic")

    geo = argparse.ArgumentParser(add_help=False)
    geo.add_argument("--d", type=int, help="odd dimension of a hyperbolic model")
    geo.add_argument("--vol", type=float, help="hyperbolic volume")
    geo.add_argument("--product", help="product of two hyperbolic models, D1,D2")
    geo.add_argument("--g", type=int, help="torus rank")
    geo.add_argument("--n", type=int, help="grid cells per lattice direction")
    geo.add_argument("--basis", help="lattice basis rows, e.g. '1,0;0.5,0.866'")
    geo.add_argument("--preset", help="named torus or experiment preset")
    geo.add_argument("--degree", type=int)
    geo.add_argument("--resolution", type=int, help="character grid points per axis")
    geo.add_argument("--mass-shift", dest="mass_shift", type=float)
    geo.add_argument("--kernel-tol", dest="kernel_tol", type=float)

    p = argparse.ArgumentParser(prog="specgap", description="L2 spectral invariants of periodic complexes "
                                "and hyperbolic models.")
    sub = p.add_subparsers(dest="command", required=True)

    h = sub.add_parser("hyperbolic", parents=[common, geo], help="closed-form hyperbolic models")
    h.add_argument("--determinant", action="store_true", default=None)
    h.add_argument("--theta", action="store_true", default=None)
    h.add_argument("--gaps", action="store_true", default=None)
    h.add_argument("--check", action="store_true", default=None,
                   help="cross-check zeta values by finite differences in s")

    t = sub.add_parser("torus", parents=[common, geo], help="periodic flat-torus complexes")
    t.add_argument("--theta", action="store_true", default=None)
    t.add_argument("--spectrum", action="store_true", default=None)
    t.add_argument("--t-window", dest="t_window")
    t.add_argument("--n-t", dest="n_t", type=int)

    b = sub.add_parser("beta", parents=[common, geo], help="decay exponents of a theta function")
    b.add_argument("--window")
    b.add_argument("--n-points", dest="n_points", type=int)

    z = sub.add_parser("zeta", parents=[common, geo], help="zeta values and determinants")
    z.add_argument("--check", action="store_true", default=None)

    sub.add_parser("torsion", parents=[common, geo], help="beta-torsion")

    c = sub.add_parser("convergence", parents=[common, geo], help="mesh-refinement experiments")
    c.add_argument("--levels", type=int)
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        cfg = _build_config(args)
        return run(cfg)
    except NumericalError as exc:
        print(f"specgap: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SpecgapError) as exc:
        print(f"specgap: configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
