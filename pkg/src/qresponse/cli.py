"""Command line runner: ``qresponse <kind> --config <path> [--out <dir>] [--threads N]``.

Configs are INI files with one section per experiment kind; the section
named after the subcommand is read and every other section must also be a
known kind.  Unknown keys are rejected.  Each run writes into ``--out``:

* ``<kind>.csv``: comma-separated results with ``#`` metadata lines (version,
  kind and a config echo that is itself a valid config),
* ``<kind>.dat``: whitespace-separated plot data with a ``#`` header,
* ``<kind>.json``: summary with checks and the wall time,
* ``<kind>.svg``: line chart when ``plot = true`` and matplotlib is available.

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 I/O failure.
Outputs are staged and only moved into place when the whole run succeeds.
"""

import argparse
import configparser
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bath import polarization_sweep
from .berry import HamiltonianFamily, cartesian_family, curvature_cartesian_analytic, curvature_numeric
from .eig3 import eig3_exact
from .exceptions import DegeneracyError, NumericalError, SingularSystemError, UnidentifiableError
from .inversion import (EnsembleConfig, analytic_observables, ramp_path, response_components, sensitivity_bound,
                        solve_motion, solve_vector, susceptibility)
from .linalg import spin_operators
from .nv_model import FieldVector, NvParams, hamiltonian_cartesian, spherical_derivatives
from .propagator import response_sweep, retrieval_target

log = logging.getLogger("qresponse")

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 2, 3, 4
KINDS = ("eig", "berry", "quench", "bath", "invert", "bound", "sweep")


class ConfigError(ValueError):
    pass


class EmptyTableError(NumericalError):
    pass


# -- schema -----------------------------------------------------------------

REQUIRED = object()


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _bool(text):
    value = configparser.ConfigParser.BOOLEAN_STATES.get(text.strip().lower())
    if value is None:
        raise ValueError(f"not a boolean: {text!r}")
    return value


def _choice(*options):
    def parse(text):
        if text.strip() not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text.strip()
    parse.options = options
    return parse


_ANGLE = {"theta_min": (float, 0.0), "theta_max": (float, np.pi / 2), "points": (int, 91)}
_FIELD = {"D": (float, REQUIRED), "E": (float, 0.0), "h": (float, 1.0), "phi": (float, 0.0)}
_VGRID = {"v": (_floats, None), "v_min": (float, 0.01), "v_max": (float, 0.5), "points": (int, 16),
          "spacing": (_choice("log", "linear"), "log")}

SCHEMA = {
    "eig": {**_FIELD, **_ANGLE},
    "berry": {**_FIELD, **_ANGLE, "band": (int, 0)},
    "quench": {"D": (float, REQUIRED), **_VGRID, "tol": (float, 1e-8)},
    "bath": {"D": (float, REQUIRED), "N": (int, REQUIRED), "A": (float, REQUIRED), "P": (_floats, [0.0, 0.2]),
             **_VGRID, "v_min": (float, 0.02), "v_max": (float, 0.4), "points": (int, 12), "tol": (float, 1e-6)},
    "invert": {"D": (float, REQUIRED), "E": (float, 0.0), "hy": (float, REQUIRED), "hz": (_floats, REQUIRED),
               "hx_true": (float, REQUIRED), "vx_true": (float, REQUIRED), "hy_known": (_bool, True),
               "source": (_choice("analytic", "dynamics"), "analytic"), "tol": (float, 1e-8)},
    "bound": {"generator": (_choice("D", "hx", "hy", "hz"), "D"), "scale": (float, 1.0), "t": (_floats, REQUIRED)},
    "sweep": {"D": (float, 1.0), "theta": (_floats, [0.2, 0.1, 0.05, 0.02]), "step": (float, 1e-4)},
}
for _section in SCHEMA.values():
    _section["plot"] = (_bool, False)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(float(v)) for v in value)
    return str(value)


def parse_config(text, kind):
    """Validate an INI config and return the typed parameters for ``kind``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    unknown = [s for s in parser.sections() if s not in SCHEMA]
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if not parser.has_section(kind):
        raise ConfigError(f"config has no [{kind}] section")
    for section in parser.sections():
        extra = sorted(set(parser[section]) - set(SCHEMA[section]))
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")
    params = {}
    for key, (parse, default) in SCHEMA[kind].items():
        if key in parser[kind]:
            try:
                params[key] = parse(parser[kind][key])
            except ValueError as exc:
                raise ConfigError(f"[{kind}] {key}: {exc}") from exc
        elif default is REQUIRED:
            raise ConfigError(f"[{kind}] missing required key {key!r}")
        else:
            params[key] = default
    return params


def config_echo(kind, params):
    """Canonical config text reproducing ``params`` exactly."""
    lines = [f"[{kind}]"]
    lines += [f"{k} = {_format_value(v)}" for k, v in params.items() if v is not None]
    return "\n".join(lines) + "\n"


# -- tables -----------------------------------------------------------------

@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(float(v) for v in values))

    def as_array(self):
        return np.array(self.rows, dtype=float).reshape(len(self.rows), len(self.columns))


def _number(x):
    return f"{x:.17g}"


def _metadata_lines(table):
    lines = [f"# {k}: {v}" for k, v in table.metadata.items() if k != "config"]
    if "config" in table.metadata:
        lines.append("# config:")
        lines += [f"# {line}" for line in table.metadata["config"].splitlines()]
    return lines


def table_to_csv(table):
    lines = _metadata_lines(table)
    lines.append(",".join(table.columns))
    lines += [",".join(_number(x) for x in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def extract_config(csv_text):
    """Config echo embedded in a CSV written by this tool."""
    lines = csv_text.splitlines()
    start = lines.index("# config:") + 1
    out = []
    for line in lines[start:]:
        if not line.startswith("# "):
            break
        out.append(line[2:])
    return "\n".join(out) + "\n"


def emit_plot_data(table, path, svg_path=None):
    """Write a whitespace-separated numeric file (header prefixed ``#``).

    With ``svg_path`` the columns after the first are also drawn as line
    charts against the first column (needs matplotlib).
    """
    if not table.rows:
        raise EmptyTableError("refusing to write plot data for an empty table")
    lines = _metadata_lines(table)
    lines.append("# " + " ".join(table.columns))
    lines += [" ".join(_number(x) for x in row) for row in table.rows]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if svg_path is not None:
        _render_svg(table, svg_path)
    return path


def _render_svg(table, path):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", path)
        return None
    data = table.as_array()
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, name in enumerate(table.columns[1:], start=1):
        ax.plot(data[:, 0], data[:, k], label=name)
    ax.set_xlabel(table.columns[0])
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# -- experiments ------------------------------------------------------------

def _velocities(params):
    if params.get("v"):
        v = np.asarray(params["v"], float)
    elif params["spacing"] == "log":
        v = np.geomspace(params["v_min"], params["v_max"], params["points"])
    else:
        v = np.linspace(params["v_min"], params["v_max"], params["points"])
    if np.any(v <= 0):
        raise ConfigError("quench velocities must be positive")
    return v


def _thetas(params):
    if params["points"] < 1:
        raise ConfigError("points must be at least 1")
    return np.linspace(params["theta_min"], params["theta_max"], params["points"])


def run_eig(params, threads):
    p = NvParams(params["D"], params["E"])
    theta = _thetas(params)
    fields = [FieldVector.from_spherical(params["h"], t, params["phi"]) for t in theta]
    h = hamiltonian_cartesian(p, (np.array([f.hx for f in fields]), np.array([f.hy for f in fields]),
                                  np.array([f.hz for f in fields])))
    values, vectors = eig3_exact(h)
    resid = np.linalg.norm(h @ vectors - vectors * values[:, None, :], axis=-2).max(axis=-1)
    table = ResultTable(["theta", "E1", "E2", "E3", "residual"])
    for t, e, r in zip(theta, values, resid):
        table.add(t, *e, r)
    return table, {"max_residual": float(resid.max())}


def _spherical_field_family(p, h):
    return HamiltonianFamily(
        hamiltonian=lambda x: hamiltonian_cartesian(p, FieldVector.from_spherical(h, x[1], x[0])),
        derivatives=lambda x: [h * d for d in spherical_derivatives(x[1], x[0])],
        names=("phi", "theta"),
    )


def run_berry(params, threads):
    p = NvParams(params["D"], params["E"])
    band, phi, h = params["band"], params["phi"], params["h"]
    family = _spherical_field_family(p, h)
    cartesian = cartesian_family(p)
    table = ResultTable(["theta", "hx", "hy", "hz", "F_xy", "F_xz", "F_yz", "F_phitheta"])
    fallback = []
    for t in _thetas(params):
        f = FieldVector.from_spherical(h, t, phi)
        try:
            c = curvature_cartesian_analytic(p, f, band)
            comps = (c.f_xy, c.f_xz, c.f_yz)
        except DegeneracyError:
            raise
        except NumericalError:
            # closed form is 0/0 where the field lies on the z axis
            x = f.as_array()
            comps = tuple(curvature_numeric(cartesian, x, i, j, band) for i, j in ((0, 1), (0, 2), (1, 2)))
            fallback.append(float(t))
        table.add(t, f.hx, f.hy, f.hz, *comps, curvature_numeric(family, (phi, t), 0, 1, band))
    return table, {"sum_over_states_at_theta": fallback}


def run_quench(params, threads):
    d = params["D"]
    target = retrieval_target(d)
    results = response_sweep(d, _velocities(params), params["tol"], threads)
    table = ResultTable(["v", "S_y", "F_retrieved", "F_analytic", "fidelity"])
    for r in results:
        table.add(r.v, r.observable_value, r.retrieved_curvature, target, r.adiabatic_fidelity)
    errors = [abs(r.retrieved_curvature - target) for r in sorted(results, key=lambda r: r.v)]
    checks = {"analytic": target}
    if errors:
        checks["relative_error_at_smallest_v"] = errors[0] / abs(target)
        checks["error_monotone_in_v"] = bool(np.all(np.diff(errors) >= 0))
    return table, checks


def run_bath(params, threads):
    d = params["D"]
    target = retrieval_target(d)
    v = np.sort(_velocities(params))
    sweeps = polarization_sweep(params["N"], params["A"], d, v, params["P"], params["tol"], threads)
    table = ResultTable(["v", "P", "F_retrieved", "F_analytic", "abs_error"])
    checks = {"analytic": target, "optimal_v": {}, "interior_minimum": {}, "error_at_smallest_v": {}}
    for p, results in sweeps.items():
        err = np.array([abs(r.retrieved_curvature - target) for r in results])
        for r, e in zip(results, err):
            table.add(r.v, p, r.retrieved_curvature, target, e)
        k = int(np.argmin(err))
        checks["optimal_v"][repr(p)] = float(v[k])
        checks["interior_minimum"][repr(p)] = bool(0 < k < len(v) - 1)
        checks["error_at_smallest_v"][repr(p)] = float(err[0])
    return table, checks


def run_invert(params, threads):
    p = NvParams(params["D"], params["E"])
    hz = params["hz"]
    hx, vx, hy = params["hx_true"], params["vx_true"], params["hy"]
    truth = EnsembleConfig(p, hz, hy)
    if params["source"] == "analytic":
        measured = analytic_observables(truth, hx, vx)
    else:
        path, t_final = ramp_path(hx, vx)
        measured = response_components(truth, path, t_final, params["tol"])
    if params["hy_known"]:
        if len(hz) != 2:
            raise ConfigError("hy_known = true needs exactly two hz values")
        est = solve_motion(measured, truth)
        hy_hat = hy
    else:
        if len(hz) != 3:
            raise ConfigError("hy_known = false needs exactly three hz values")
        est = solve_vector(measured, EnsembleConfig(p, hz, 0.0, hy_known=False))
        hy_hat = est.hy_hat
    table = ResultTable(["hx_true", "vx_true", "hy_true", "hx_hat", "vx_hat", "hy_hat", "residual"])
    table.add(hx, vx, hy, est.hx_hat, est.vx_hat, hy_hat, est.residual)
    checks = {"relative_error_hx": abs(est.hx_hat / hx - 1), "relative_error_vx": abs(est.vx_hat / vx - 1),
              "method": est.method, "measured": [float(m) for m in measured]}
    return table, checks


def _generator(name):
    s = spin_operators(1)
    return {"D": s.sz @ s.sz, "hx": s.sx, "hy": s.sy, "hz": s.sz}[name]


def run_bound(params, threads):
    a = params["scale"] * _generator(params["generator"])
    table = ResultTable(["t", "bound"])
    for t in params["t"]:
        table.add(t, sensitivity_bound(a, t))
    return table, {}


def run_sweep(params, threads):
    d, step = params["D"], params["step"]
    table = ResultTable(["theta", "dF_dD", "dF_dD_pair13"])
    for t in params["theta"]:
        table.add(t, susceptibility(d, t, step), susceptibility(d, t, step, pair=(0, 2)))
    return table, {"pair13_limit": -1 / (8 * np.sqrt(2))}


RUNNERS = {"eig": run_eig, "berry": run_berry, "quench": run_quench, "bath": run_bath,
           "invert": run_invert, "bound": run_bound, "sweep": run_sweep}


# -- driver -----------------------------------------------------------------

def run(kind, config_path, out_dir=".", threads=1):
    """Execute one experiment; returns the paths written.  Raises on failure."""
    with open(config_path) as fh:
        text = fh.read()
    params = parse_config(text, kind)
    echo = config_echo(kind, params)
    start = time.perf_counter()
    table, checks = RUNNERS[kind](params, threads)
    wall = time.perf_counter() - start
    if not table.rows:
        raise EmptyTableError(f"{kind} produced an empty table")
    table.metadata = {"qresponse": __version__, "kind": kind, "config": echo}
    summary = {"kind": kind, "version": __version__, "config": echo, "columns": table.columns,
               "rows": len(table.rows), "checks": checks, "wall_time_s": wall}
    os.makedirs(out_dir, exist_ok=True)
    targets = {ext: os.path.join(out_dir, f"{kind}.{ext}") for ext in ("csv", "dat", "json", "svg")}
    staging = tempfile.mkdtemp(prefix=".qresponse-", dir=out_dir)
    staged = {ext: os.path.join(staging, os.path.basename(p)) for ext, p in targets.items()}
    try:
        with open(staged["csv"], "w") as fh:
            fh.write(table_to_csv(table))
        emit_plot_data(table, staged["dat"], staged["svg"] if params["plot"] else None)
        with open(staged["json"], "w") as fh:
            json.dump(summary, fh, indent=2, default=float)
            fh.write("\n")
        written = []
        for ext, path in staged.items():
            if os.path.exists(path):
                os.replace(path, targets[ext])
                written.append(targets[ext])
    finally:
        for name in os.listdir(staging):
            os.remove(os.path.join(staging, name))
        os.rmdir(staging)
    return written


def build_parser():
    parser = argparse.ArgumentParser(prog="qresponse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("kind", choices=KINDS, help="experiment to run")
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads; 1 is the reference mode")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.threads < 1:
        print("qresponse: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for path in run(args.kind, args.config, args.out, args.threads):
            log.info("wrote %s", path)
    except (ConfigError, SingularSystemError, UnidentifiableError, NumericalError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            code = EXIT_CONFIG
        elif isinstance(exc, OSError):
            code = EXIT_IO
        else:
            code = EXIT_NUMERIC
        print(f"qresponse: error: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
