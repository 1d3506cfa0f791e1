"""Command-line front end.

    ptot cell            --config CFG   f_hom table over a (rho, j) grid
    ptot minimal-action  --config CFG   boundary-value minimal action
    ptot converge        --config CFG   epsilon sweep against the continuum benchmark
    ptot mesh            --config CFG   finite-volume diagnostics
    ptot validate FILE...               graph / cost / mesh validators

Common flags: --config, --out, --format csv|json, --threads, --seed, --tol.
Every flag can also be set through an environment variable ``PTOT_<FLAG>``
(e.g. ``PTOT_THREADS=4``); precedence is flag > environment > config > default.

Exit codes: 0 success, 2 flagged numerical non-convergence, 64 usage error,
65 infeasible or invalid data, 70 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .catalog import CATALOG
from .cell import _fmt, f_hom_table, solution_record, table_to_csv
from .costs import CostDomainError, WpMeanCost, check_growth, cost_from_dict
from .divergence import InfeasibleError
from .graph import GraphError, graph_from_dict
from .finite_volume import (MESHES, MeshError, MobilitySpec, fv_identity, half_selector, isometry_check,
                            isotropy_check, partition_from_dict, triangle_selector)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_NONCONVERGED, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 64, 65, 70
ENV_PREFIX = "PTOT_"
DEFAULTS = {"format": "csv", "threads": 1, "seed": 0, "tol": 1e-10, "out": None}
COMMANDS = ("cell", "minimal-action", "converge", "mesh", "validate")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--threads", type=int, help="worker threads for independent solves")
    common.add_argument("--seed", type=int, help="seed for all randomised checks")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--timing", action="store_true", help="include wall-clock runtimes (breaks byte-identical output)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = _Parser(prog="ptot", description="Dynamical optimal transport on periodic graphs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp_ = sub.add_parser(name, parents=[common])
        if name == "validate":
            sp_.add_argument("paths", nargs="+", help="graph, cost or mesh files")
    return p


# ------------------------------------------------------------ settings
def _env(name):
    return os.environ.get(ENV_PREFIX + name.upper())


def resolve_settings(args, config: dict) -> dict:
    out = {}
    casts = {"format": str, "threads": int, "seed": int, "tol": float, "out": str}
    for key, cast in casts.items():
        val = getattr(args, key, None)
        if val is None and _env(key) is not None:
            try:
                val = cast(_env(key))
            except ValueError:
                raise UsageError(f"environment variable {ENV_PREFIX}{key.upper()} has an invalid value") from None
        if val is None:
            val = config.get(key, DEFAULTS[key])
        out[key] = val
    if out["format"] not in ("csv", "json"):
        raise UsageError(f"unknown format {out['format']!r}")
    if out["threads"] is None or int(out["threads"]) < 1:
        raise UsageError("--threads must be at least 1")
    if not float(out["tol"]) > 0:
        raise UsageError("--tol must be positive")
    out["threads"], out["seed"], out["tol"] = int(out["threads"]), int(out["seed"]), float(out["tol"])
    out["timing"] = bool(getattr(args, "timing", False))
    return out


def load_config(path) -> tuple[dict, Path]:
    if path is None:
        path = _env("config")
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        with open(p) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise DataError("config must be a JSON object")
    return data, p.parent


def _read_json(spec, base: Path):
    p = Path(spec)
    if not p.is_absolute():
        p = base / p
    try:
        with open(p) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"file {p} is not valid JSON: {exc}") from None


def resolve_graph(spec, base: Path):
    """Catalog name, path to a stencil file, or inline mapping -> (graph, validation report)."""
    if spec is None:
        raise UsageError("config needs a 'graph' entry")
    if isinstance(spec, str) and spec in CATALOG:
        g = CATALOG[spec]()
        return g, g.validate()
    data = _read_json(spec, base) if isinstance(spec, str) else spec
    g, errors = graph_from_dict(data)
    return g, g.validate(errors)


def resolve_cost(graph, spec, base: Path):
    if spec is None:
        return WpMeanCost(graph, 2.0, "arithmetic")
    data = _read_json(spec, base) if isinstance(spec, str) else spec
    return cost_from_dict(graph, data)


def resolve_mesh(spec, base: Path):
    if spec is None:
        raise UsageError("config needs a 'mesh' entry")
    if isinstance(spec, str) and spec in MESHES:
        return MESHES[spec]()
    data = _read_json(spec, base) if isinstance(spec, str) else spec
    return partition_from_dict(data)


def _require_valid(report):
    if not report.ok:
        raise DataError("graph validation failed: " + "; ".join(report.errors))


# ------------------------------------------------------------ output
def _header(command: str, settings: dict, extra=()) -> list[str]:
    lines = [f"periodic_transport {command}", f"tol: {settings['tol']!r}", f"seed: {settings['seed']}"]
    return lines + list(extra)


def _csv_rows(header_lines, columns, rows) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _emit(text: str, settings: dict) -> None:
    if settings["out"]:
        with open(settings["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


# ------------------------------------------------------------ commands
def _j_grid(config, d):
    if "j" not in config:
        raise UsageError("config needs a 'j' list")
    raw = config["j"]
    if not isinstance(raw, list) or not raw:
        raise UsageError("the j list is empty")
    grid = []
    for v in raw:
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        if arr.size != d:
            raise UsageError(f"flux {v} does not have dimension {d}")
        grid.append(arr)
    return grid


def cmd_cell(config: dict, base: Path, settings: dict) -> int:
    g, rep = resolve_graph(config.get("graph"), base)
    _require_valid(rep)
    F = resolve_cost(g, config.get("cost"), base)
    rho = config.get("rho")
    if not isinstance(rho, list) or not rho:
        raise UsageError("config needs a nonempty 'rho' list")
    if any(float(r) < 0 for r in rho):
        raise DataError("rho values must be nonnegative")
    grid = _j_grid(config, g.d)
    t0 = time.perf_counter()
    sols = f_hom_table(g, F, [float(r) for r in rho], grid, tol=settings["tol"], threads=settings["threads"],
                       max_iter=int(config.get("max_iter", 100_000)))
    runtime = time.perf_counter() - t0
    header = _header("cell", settings, [
        f"graph: d={g.d} |V|={g.n_fibers} S={g.n_edges} R0={g.R0}", f"cost: {F!r}",
        "units: rho = mass per unit volume; j = mass*length/time per unit volume; value = energy per unit volume",
    ] + ([f"runtime_s: {runtime:.3f}"] if settings["timing"] else []))
    if settings["format"] == "csv":
        _emit(table_to_csv(sols, g.d, header, graph=g), settings)
    else:
        out = {"header": header, "rows": [solution_record(s, g) for s in sols]}
        if settings["timing"]:
            out["runtime"] = runtime
        _emit(_json(out), settings)
    bad = [s for s in sols if not s.converged]
    for s in bad:
        log.warning("not converged at rho=%g j=%s: %s", s.rho, s.j, s.diagnostic)
    return EXIT_NONCONVERGED if bad else EXIT_OK


def _resolve_N(config) -> int:
    from .transport.sweep import parse_eps
    if "N" in config:
        N = int(config["N"])
    elif "eps" in config:
        try:
            N = parse_eps(config["eps"]).denominator
        except ValueError as exc:
            raise DataError(str(exc)) from None
    else:
        raise UsageError("config needs 'N' or 'eps'")
    if N < 1:
        raise DataError("1/eps must be a positive integer")
    return N


def _boundary_masses(spec, rg, F, name):
    from .transport.continuum import BumpDensity, discretise_density
    if spec is None:
        raise UsageError(f"config needs boundary masses '{name}'")
    if isinstance(spec, dict):
        if "bump" not in spec:
            raise UsageError(f"boundary {name}: expected an array or {{'bump': {{...}}}}")
        try:
            return discretise_density(rg, BumpDensity(**spec["bump"]), F.reference_m)
        except (TypeError, ValueError) as exc:
            raise DataError(f"boundary {name}: {exc}") from None
    arr = np.asarray(spec, dtype=float)
    if arr.size != rg.n_vertices:
        raise DataError(f"boundary {name} has {arr.size} entries, expected {rg.n_vertices}")
    return arr.reshape(rg.mass_shape())


def cmd_minimal_action(config: dict, base: Path, settings: dict) -> int:
    from .transport.minimal import minimal_action
    g, rep = resolve_graph(config.get("graph"), base)
    _require_valid(rep)
    F = resolve_cost(g, config.get("cost"), base)
    N = _resolve_N(config)
    K = int(config.get("K", 8))
    if K < 1:
        raise UsageError("K must be at least 1")
    rg = g.rescaled(N)
    m0 = _boundary_masses(config.get("m0"), rg, F, "m0")
    m1 = _boundary_masses(config.get("m1"), rg, F, "m1")
    rule = config.get("rule", "trapezoid")
    interval = tuple(config.get("interval", (0.0, 1.0)))
    res = minimal_action(rg, F, m0, m1, K, tol=settings["tol"], interval=interval, rule=rule,
                         max_iter=int(config.get("max_iter", 20000)))
    status = "converged" if res.converged else "not_converged"
    header = _header("minimal-action", settings, [
        f"graph: d={g.d} |V|={g.n_fibers} S={g.n_edges}", f"cost: {F!r}", f"time rule: {rule}",
        "units: value = energy*time; residuals = mass per time (ce), mass (endpoint)",
    ])
    cols = ["eps", "N", "K", "value", "ce_residual", "endpoint_residual", "active_masses", "iterations", "status"]
    row = [f"1/{N}", N, K, res.value, res.ce_residual, res.endpoint_residual, res.active_masses, res.iterations, status]
    if settings["timing"]:
        cols.append("runtime_s")
        row.append(round(res.runtime, 3))
    if settings["format"] == "csv":
        _emit(_csv_rows(header, cols, [row]), settings)
    else:
        out = {"header": header, **dict(zip(cols, row))}
        if config.get("save_path", False):
            out["path"] = res.path.to_dict()
        _emit(_json(out), settings)
    if config.get("path_out"):
        p = Path(config["path_out"])
        p = p if p.is_absolute() else base / p
        p.write_text(res.path.to_json())
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_converge(config: dict, base: Path, settings: dict) -> int:
    from .transport.continuum import BumpDensity, cell_evaluator, power_closed_form
    from .transport.sweep import epsilon_sweep
    g, rep = resolve_graph(config.get("graph", "lattice1"), base)
    _require_valid(rep)
    F = resolve_cost(g, config.get("cost"), base)
    eps = config.get("eps")
    if not isinstance(eps, list) or not eps:
        raise UsageError("config needs a nonempty 'eps' list")
    try:
        rho0 = BumpDensity(**config.get("rho0", {"center": 0.3, "kappa": 6.0, "floor": 0.3}))
        rho1 = BumpDensity(**config.get("rho1", {"center": 0.6, "kappa": 2.0, "floor": 0.4}))
    except (TypeError, ValueError) as exc:
        raise DataError(f"boundary densities: {exc}") from None
    ref_kind = config.get("reference", "closed_form")
    if ref_kind == "closed_form":
        f_hom = power_closed_form(float(config.get("p", 2.0)))
    elif ref_kind == "cell":
        f_hom = cell_evaluator(g, F, tol=settings["tol"])
    else:
        raise UsageError(f"unknown reference {ref_kind!r}; choose 'closed_form' or 'cell'")
    K = int(config.get("K", 32))
    grid = tuple(int(v) for v in config.get("reference_grid", (256, 128)))
    try:
        res = epsilon_sweep(g, F, rho0, rho1, eps, K, f_hom, tol=float(config.get("solver_tol", 1e-12)),
                            rule=config.get("rule", "trapezoid"), reference_grid=grid, threads=settings["threads"],
                            max_iter=int(config.get("max_iter", 20000)))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    trend = res.trend()
    header = _header("converge", settings, [
        f"graph: d={g.d} |V|={g.n_fibers} S={g.n_edges}", f"cost: {F!r}",
        f"rho0: {rho0.to_dict()}", f"rho1: {rho1.to_dict()}", f"reference: {ref_kind} on grid {grid}",
        "units: MA_eps and reference = energy*time; relative_gap dimensionless",
    ])
    cols = ["eps", "N", "K", "MA_eps", "reference", "relative_gap", "converged", "iterations"]
    rows = [[str(r.eps), r.eps.denominator, r.K, r.value, r.reference, r.relative_gap, r.converged, r.iterations]
            for r in res.rows]
    if settings["timing"]:
        cols.append("runtime_s")
        for row, r in zip(rows, res.rows):
            row.append(round(r.runtime, 3))
    if settings["format"] == "csv":
        _emit(_csv_rows(header, cols, rows) + f"# trend: {trend}\n", settings)
    else:
        _emit(_json({"header": header, "rows": [dict(zip(cols, r)) for r in rows], "trend": trend}), settings)
    print(f"relative gap trend: {trend}", file=sys.stderr)
    return EXIT_OK if res.all_converged else EXIT_NONCONVERGED


def mesh_report(config: dict, base: Path, settings: dict) -> list[tuple[str, object]]:
    part = resolve_mesh(config.get("mesh"), base)
    part.validate()
    items = [("cells", part.n_cells), ("d", part.d), ("stencil_edges", len(part.adjacency))]
    _, dev = fv_identity(part)
    items += [("identity_deviation", dev), ("identity", "PASS" if dev <= 1e-12 else "FAIL")]
    spec_data = config.get("mobility", {"mobility": "linear", "version": "weighted_linear", "lam": 0.5})
    try:
        spec = MobilitySpec(**spec_data)
    except TypeError as exc:
        raise DataError(f"mobility: {exc}") from None
    if config.get("isometry", True) and spec.version == "weighted_linear":
        rep = isometry_check(part, spec.lam, solve=True)
        items += [("isometry_deviation_at_given_lambda", rep.deviation), ("isometry", rep.verdict)]
        if rep.certificate is not None:
            items.append(("isometry_certificate_y", " ".join(str(v) for v in rep.certificate["y"])))
        if rep.solution is not None:
            items.append(("isometry_lambda", " ".join(str(v) for v in rep.solution)))
    selector_name = config.get("selector", "auto")
    if selector_name == "auto":
        selector_name = "triangle" if set(part.labels) == set("NSEW") and spec.version == "minimum" else "half"
    selector = triangle_selector(part) if selector_name == "triangle" else half_selector
    points = list(config.get("isotropy_points", []))
    n_random = int(config.get("random_points", 0))
    rng = np.random.default_rng(settings["seed"])
    for _ in range(n_random):
        points.append({"rho": float(rng.uniform(0.1, 5.0)), "j": rng.normal(size=part.d).tolist()})
    spreads = []
    for k, pt in enumerate(points):
        j = np.asarray(pt["j"], dtype=float)
        rep = isotropy_check(part, selector, float(pt["rho"]), j, spec if spec.version == "minimum" else None)
        spreads.append(rep.spread)
        items.append((f"isotropy_{k}", f"rho={_fmt(pt['rho'])} j=({', '.join(_fmt(v) for v in j)}) "
                                        f"a={_fmt(rep.a.mean())} spread={_fmt(rep.spread)}"))
    if points:
        items += [("isotropy_selector", selector_name), ("isotropy_max_spread", max(spreads))]
    return items


def cmd_mesh(config: dict, base: Path, settings: dict) -> int:
    items = mesh_report(config, base, settings)
    header = _header("mesh", settings)
    if settings["format"] == "csv":
        _emit(_csv_rows(header, ["quantity", "value"], items), settings)
    else:
        _emit(_json({"header": header, **{k: v for k, v in items}}), settings)
    return EXIT_OK


def _classify(data: dict) -> str:
    if "edges" in data and "V" in data:
        return "graph"
    if "cells" in data:
        return "mesh"
    if "cost" in data and "graph" in data:
        return "cost"
    return "unknown"


def validate_file(path: str, settings: dict) -> tuple[bool, list[str]]:
    p = Path(path)
    try:
        data = _read_json(p, Path.cwd())
    except DataError as exc:
        return False, [f"status: FAIL", f"error: {exc}"]
    kind = _classify(data) if isinstance(data, dict) else "unknown"
    try:
        if kind == "graph":
            g, errors = graph_from_dict(data)
            rep = g.validate(errors)
            return rep.ok, ["type: graph"] + rep.lines()
        if kind == "mesh":
            part = partition_from_dict(data)
            part.validate()
            _, dev = fv_identity(part)
            ok = dev <= 1e-12
            rep = part.graph.validate()
            return ok and rep.ok, ["type: mesh", f"status: {'PASS' if ok and rep.ok else 'FAIL'}",
                                   f"cells: {part.n_cells}", f"identity_deviation: {_fmt(dev)}"] + rep.lines()[1:]
        if kind == "cost":
            g, rep = resolve_graph(data["graph"], p.parent)
            lines = ["type: cost"] + rep.lines()
            if not rep.ok:
                return False, lines
            F = cost_from_dict(g, data["cost"])
            cert = check_growth(F, n_samples=int(data.get("n_samples", 300)), seed=settings["seed"])
            lines[1] = f"status: {'PASS' if cert.ok else 'FAIL'}"
            lines += [f"growth: c={_fmt(cert.c)} C={_fmt(cert.C)} samples={cert.n_samples} "
                      f"max_violation={_fmt(cert.max_violation)} stress_violation={_fmt(cert.stress_violation)}"]
            return cert.ok, lines
    except (GraphError, MeshError, CostDomainError, KeyError, TypeError, ValueError) as exc:
        return False, [f"type: {kind}", "status: FAIL", f"error: {exc}"]
    return False, ["type: unknown", "status: FAIL", "error: not a graph, cost or mesh description"]


def cmd_validate(paths, settings: dict) -> int:
    all_ok = True
    blocks = {}
    for path in paths:
        ok, lines = validate_file(path, settings)
        all_ok &= ok
        blocks[path] = lines
    if settings["format"] == "json":
        _emit(_json({p: lines for p, lines in blocks.items()}), settings)
    else:
        text = "".join(f"== {p}\n" + "".join(f"{line}\n" for line in lines) for p, lines in blocks.items())
        _emit(text, settings)
    return EXIT_OK if all_ok else EXIT_DATA


# ------------------------------------------------------------ entry point
def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config, base = load_config(args.config)
        settings = resolve_settings(args, config)
        if args.command == "validate":
            return cmd_validate(args.paths, settings)
        handler = {"cell": cmd_cell, "minimal-action": cmd_minimal_action, "converge": cmd_converge,
                   "mesh": cmd_mesh}[args.command]
        return handler(config, base, settings)
    except UsageError as exc:
        print(f"ptot: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InfeasibleError, GraphError, CostDomainError, MeshError) as exc:
        print(f"ptot: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - reported as internal error
        log.debug("internal error", exc_info=True)
        print(f"ptot: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
