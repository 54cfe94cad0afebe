"""Batch command-line front end.

Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure
(singular or resonant immittance data), 4 acceptance-metric failure in
``check``.  A TOML file given with ``--config`` mirrors the flags; flags on
the command line win.
"""

from __future__ import annotations

import csv
import inspect
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import click
import numpy as np

from . import acceptance
from . import cauer
from . import dissipation as ds
from . import effective as ef
from . import immittance as im
from . import netlist as nl
from . import scenarios as sc
from .errors import (
    ConfigError,
    DslSyntaxError,
    ImqedError,
    MissingParam,
    NumericalError,
    SemanticError,
    SingularDcResidue,
)
from .units import ghz_to_rad

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("imqed")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

EXAMPLE_ALIASES = {
    "g1": nl.ExampleName.TL_RESONATOR_2PORT,
    "g2": nl.ExampleName.INDUCTIVE_COUPLING_2PORT,
    "g3": nl.ExampleName.PURCELL_CHAIN_3PORT,
    "g4": nl.ExampleName.CIRCULATOR_CAPACITIVE,
    "g5": nl.ExampleName.CIRCULATOR_RESONATOR,
    "isolator": nl.ExampleName.ISOLATOR,
}


class CheckFailed(Exception):
    pass


@dataclass
class RunConfig:
    """Merged view of the configuration file and the command-line flags."""

    input: str | None = None
    route: str = "auto"
    direct: str = "numeric"
    scenario: str | None = None
    out: str | None = None
    nph: int | None = None
    seed: int = 0
    params: dict[str, str] = field(default_factory=dict)

    def merged(self, **flags) -> "RunConfig":
        out = RunConfig(**{**self.__dict__, "params": dict(self.params)})
        for k, v in flags.items():
            if v is None or v == ():
                continue
            if k == "params":
                out.params.update(v)
            else:
                setattr(out, k, v)
        return out


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}") from exc
    params = data.pop("param", {})
    known = {"input", "route", "direct", "scenario", "out", "nph", "seed"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    if not isinstance(params, dict):
        raise ConfigError("[param] must be a table")
    return RunConfig(**data, params={k: str(v) for k, v in params.items()})


def parse_assignments(items) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _number(text: str) -> float:
    try:
        return float(nl._safe_expr(text))
    except (ValueError, SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad number {text!r}") from exc


def coerce(text: str, default: Any) -> Any:
    """Convert ``text`` to the type of ``default``."""
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"bad integer {text!r}") from exc
    if isinstance(default, float):
        return _number(text)
    if isinstance(default, tuple):
        return tuple(_number(t) for t in text.split(":"))
    return text


def scenario_kwargs(name: str, params: dict[str, str], nph: int | None = None) -> dict:
    fn = sc.SCENARIOS[name]
    sig = inspect.signature(fn).parameters
    kw = {}
    for k, v in params.items():
        if k not in sig:
            raise ConfigError(f"scenario {name} has no parameter {k!r}; known: {sorted(sig)}")
        kw[k] = coerce(v, sig[k].default)
    if nph is not None:
        if "n_ph" not in sig:
            raise ConfigError(f"scenario {name} has no photon cutoff")
        kw["n_ph"] = nph
    return kw


# ---------------------------------------------------------------------------
# model inputs


@dataclass
class Source:
    circuit: nl.Circuit | None
    response: im.PoleResidueResponse | None
    label: str


def resolve_example(name: str) -> nl.ExampleName | None:
    low = name.lower()
    if low in EXAMPLE_ALIASES:
        return EXAMPLE_ALIASES[low]
    for e in nl.ExampleName:
        if e.value.lower() == low:
            return e
    return None


def load_source(inp: str | None, params: dict[str, str]) -> Source:
    if not inp:
        raise ConfigError("no input: give -i FILE.ckt, a response JSON or an example name")
    path = Path(inp)
    if path.suffix == ".ckt" or (path.exists() and path.suffix != ".json"):
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {inp}: {exc}") from exc
        if params:
            raise ConfigError("--param applies to example names and response JSON only")
        return Source(nl.parse(text), None, str(path))
    if path.suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read response JSON {inp}: {exc}") from exc
        return Source(None, im.from_json(data), str(path))
    name = resolve_example(inp)
    if name is None:
        raise ConfigError(f"{inp!r} is neither a file nor an example ({', '.join(sorted(EXAMPLE_ALIASES))})")
    defaults = nl.DEFAULT_PARAMS[name]
    over = {}
    for k, v in params.items():
        if k not in defaults:
            raise ConfigError(f"example {name.value} has no parameter {k!r}; known: {sorted(defaults)}")
        over[k] = _number(v)
    ex = nl.build_example(nl.ExampleSpec.default(name, **over))
    return Source(ex.circuit, None, name.value)


def response_for(src: Source, kind: str) -> im.PoleResidueResponse:
    if src.response is not None:
        if src.response.kind.value != kind:
            raise ConfigError(f"input holds a {src.response.kind.value} response, route needs {kind}")
        return src.response
    return nl.extract_pole_residue(src.circuit, kind)


def _junctions(src: Source, resp, params: dict[str, str]):
    if src.circuit is not None:
        return (
            ef.junctions_from_circuit(src.circuit, resp),
            src.circuit.junction_indices,
            src.circuit.drive_indices,
        )
    if "E_J" not in params:
        raise MissingParam("a response JSON input needs --param E_J=<GHz> (and optionally n_junctions)")
    n = int(params.get("n_junctions", resp.n_ports))
    ej = _number(params["E_J"])
    jp = list(range(n))
    return [ef.JunctionPortParams(ej, 1.0) for _ in jp], jp, list(range(n, resp.n_ports))


def build_model(src: Source, route: str, direct: str, params: dict[str, str]) -> ef.EffectiveModel:
    """Effective model of ``src``; route ``auto`` tries Z and falls back to Y on a singular A_0."""
    if route not in ("y", "z", "auto"):
        raise ConfigError(f"route must be y, z or auto, not {route!r}")
    if direct not in [m.value for m in ef.DirectMode]:
        raise ConfigError(f"direct mode must be one of {[m.value for m in ef.DirectMode]}")
    order = {"y": ["y"], "z": ["z"], "auto": ["z", "y"]}[route]
    last: Exception | None = None
    for r in order:
        kind = "Impedance" if r == "z" else "Admittance"
        try:
            resp = response_for(src, kind)
            junctions, jp, dp = _junctions(src, resp, params)
            model = ef.build_effective_model(resp, junctions, jp, dp, direct_mode=direct)
        except SingularDcResidue as exc:
            last = exc
            if route == "auto":
                log.info("Z route unavailable (%s); using the admittance route", exc)
                continue
            raise
        model.meta["route_requested"] = route
        return model
    assert last is not None
    raise last


def add_dissipation(model: ef.EffectiveModel, src: Source, drives, z0: float | None) -> ef.EffectiveModel:
    n_drive = len(model.drive_ports)
    if n_drive == 0:
        raise ConfigError("the circuit has no drive ports")
    if z0 is not None:
        params = ds.DrivePortParams.uniform(z0, n_drive)
    elif src.circuit is not None:
        params = ds.DrivePortParams(tuple(src.circuit.ports[k].z0 for k in model.drive_ports))
    else:
        raise ConfigError("give --z0 for a response JSON input")
    tones = []
    for spec in drives:
        kv = parse_assignments(spec.split(","))
        try:
            port = int(kv.get("d", "1")) - 1
            tones.append(ds.DriveTone(port, _number(kv.get("v", "1")), ghz_to_rad(_number(kv["f"]))))
        except KeyError as exc:
            raise ConfigError(f"drive {spec!r} needs f=<GHz>") from exc
        if not 0 <= port < n_drive:
            raise ConfigError(f"drive port {port + 1} out of range 1..{n_drive}")
    return ds.with_dissipation(model, params, tones)


# ---------------------------------------------------------------------------
# output helpers


def dump_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path is None or path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([_fmt(r.get(k, "")) for k in keys])
    return buf.getvalue()


def write_scenario(result: sc.ScenarioResult, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, traj in sorted(result.trajectories.items()):
        p = out / f"trajectory_{name}.csv"
        p.write_text(traj.to_csv())
        written.append(p)
    if result.table:
        p = out / "table.csv"
        p.write_text(rows_to_csv(result.table))
        written.append(p)
    p = out / "summary.json"
    dump_json({"scenario": result.name, **result.summary}, str(p))
    written.append(p)
    return written


# ---------------------------------------------------------------------------
# commands


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML file mirroring the flags.")
@click.option("--seed", type=int, default=None, help="Seed for randomized commands.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, seed: int | None) -> None:
    """Effective dispersive models of (nonreciprocal) superconducting circuits."""
    level = os.environ.get("IMQED_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(config_path)
    ctx.obj = cfg.merged(seed=seed)


@cli.group()
def model() -> None:
    """Build and inspect effective models."""


_input = click.option("-i", "--input", "inp", default=None, help="Netlist .ckt, response.v1 JSON or example name.")
_route = click.option("--route", type=click.Choice(["y", "z", "auto"]), default=None)
_direct = click.option("--direct", type=click.Choice([m.value for m in ef.DirectMode]), default=None)
_param = click.option("--param", "params", multiple=True, help="key=value override (repeatable).")
_out = click.option("--out", default=None, help="Output path (default: stdout).")


@model.command("build")
@_input
@_route
@_direct
@_param
@_out
@click.option("--with-dissipation", is_flag=True, help="Add decay matrix and drive coefficients.")
@click.option("--drive", "drives", multiple=True, help="Drive tone d=<port>,f=<GHz>,v=<amplitude>.")
@click.option("--z0", type=float, default=None, help="Drive-port impedance in ohm (overrides the netlist).")
@click.pass_obj
def model_build(cfg: RunConfig, inp, route, direct, params, out, with_dissipation, drives, z0) -> None:
    """Write the effective model as model.v1 JSON."""
    cfg = cfg.merged(input=inp, route=route, direct=direct, out=out, params=parse_assignments(params))
    src = load_source(cfg.input, cfg.params)
    m = build_model(src, cfg.route, cfg.direct, cfg.params)
    if with_dissipation or drives:
        m = add_dissipation(m, src, drives, z0)
    dump_json(ef.to_json(m), cfg.out)


@model.command("inspect")
@_input
@click.option("--cauer", "what", flag_value="cauer", help="Cauer synthesis of the response.")
@click.option("--parts", "what", flag_value="parts", default=True, help="Pole-residue parts of the response.")
@_route
@_param
@_out
@click.pass_obj
def model_inspect(cfg: RunConfig, inp, what, route, params, out) -> None:
    """Dump the synthesis or the reciprocal/nonreciprocal parts of a response."""
    cfg = cfg.merged(input=inp, route=route, out=out, params=parse_assignments(params))
    src = load_source(cfg.input, cfg.params)
    kind = "Impedance" if cfg.route == "z" else "Admittance"
    resp = response_for(src, kind)
    if what == "cauer":
        doc = cauer.to_json(cauer.synthesize(resp))
    else:
        doc = {
            "response": im.to_json(resp),
            "pole_frequency_ghz": [p.omega / (2 * math.pi) for p in resp.ac_poles],
            "pole_reciprocal": im.classify_poles(resp),
            "violations": [str(v) for v in im.validate(resp)],
        }
    dump_json(doc, cfg.out)


@model.command("example")
@click.argument("name")
@_param
@_out
def model_example(name, params, out) -> None:
    """Write a built-in example circuit as netlist text."""
    src = load_source(name, parse_assignments(params))
    text = nl.to_text(src.circuit)
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


@cli.command()
@click.argument("scenario", required=False, type=click.Choice(sorted(sc.SCENARIOS)))
@click.option("--scenario", "scenario_opt", default=None, type=click.Choice(sorted(sc.SCENARIOS)))
@click.option("--nph", type=int, default=None, help="Photon cutoff per qubit mode.")
@_param
@click.option("--out", default=None, help="Output directory (default: ./out/<scenario>).")
@click.pass_obj
def simulate(cfg: RunConfig, scenario, scenario_opt, nph, params, out) -> None:
    """Run one of the built-in scenarios and write CSV/JSON data."""
    cfg = cfg.merged(scenario=scenario or scenario_opt, nph=nph, out=out, params=parse_assignments(params))
    if cfg.scenario is None:
        raise ConfigError("no scenario given")
    if cfg.scenario not in sc.SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    kw = scenario_kwargs(cfg.scenario, cfg.params, cfg.nph)
    result = sc.SCENARIOS[cfg.scenario](**kw)
    target = Path(cfg.out or Path("out") / cfg.scenario)
    for p in write_scenario(result, target):
        log.info("wrote %s", p)
    click.echo(json.dumps({"scenario": result.name, **result.summary}, sort_keys=True, default=_json_default))


def _numeric_items(summary: dict) -> list[tuple[str, Any]]:
    return [(k, v) for k, v in sorted(summary.items()) if isinstance(v, (int, float, str, bool, np.generic))]


@cli.command()
@click.argument("scenario", required=False, type=click.Choice(sorted(sc.SCENARIOS)))
@click.option("--scenario", "scenario_opt", default=None, type=click.Choice(sorted(sc.SCENARIOS)))
@click.option("--param", "params", multiple=True, help="name=v1,v2,... swept values (repeat for a grid).")
@click.option("--fixed", multiple=True, help="key=value held fixed.")
@click.option("--nph", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Worker threads (default: CPU count).")
@_out
@click.pass_obj
def sweep(cfg: RunConfig, scenario, scenario_opt, params, fixed, nph, workers, out) -> None:
    """Run a scenario over a parameter grid; long-format CSV (one row per metric)."""
    cfg = cfg.merged(scenario=scenario or scenario_opt, nph=nph, out=out, params=parse_assignments(fixed))
    if cfg.scenario is None:
        raise ConfigError("no scenario given")
    axes = parse_assignments(params)
    if not axes:
        raise ConfigError("sweep needs at least one --param name=v1,v2")
    names = sorted(axes)
    grid = list(itertools.product(*[axes[n].split(",") for n in names]))
    jobs = []
    for values in grid:
        p = dict(cfg.params)
        p.update(zip(names, values))
        jobs.append(scenario_kwargs(cfg.scenario, p, cfg.nph))
    fn = sc.SCENARIOS[cfg.scenario]
    with ThreadPoolExecutor(max_workers=workers or os.cpu_count() or 1) as pool:
        results = list(pool.map(lambda kw: fn(**kw), jobs))
    rows = []
    for k, (values, res) in enumerate(zip(grid, results)):
        point = dict(zip(names, values))
        for metric, value in _numeric_items(res.summary):
            rows.append({"point": k, **point, "metric": metric, "value": value})
    text = rows_to_csv(rows)
    if cfg.out is None or cfg.out == "-":
        click.echo(text, nl=False)
    else:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)


@cli.command()
@click.option("--criterion", "criteria", multiple=True, type=int, help="Run only these criteria (repeatable).")
@_out
@click.pass_obj
def check(cfg: RunConfig, criteria, out) -> None:
    """Run the acceptance suite; exit 4 if any criterion fails."""
    selected = set(criteria) if criteria else None
    unknown = (selected or set()) - set(acceptance.CRITERIA)
    if unknown:
        raise ConfigError(f"unknown criteria {sorted(unknown)}")
    checks = []
    for k, fn in acceptance.CRITERIA.items():
        if selected is not None and k not in selected:
            continue
        kw = {"seed": cfg.seed} if "seed" in inspect.signature(fn).parameters else {}
        for c in fn(**kw):
            click.echo(c.line())
            checks.append(c)
    if out:
        dump_json([c.__dict__ for c in checks], out)
    failed = [c for c in checks if not c.passed]
    if failed:
        labels = ", ".join(f"{c.criterion}{c.label}" for c in failed)
        raise CheckFailed(f"{len(failed)} of {len(checks)} checks failed: {labels}")


def run(argv: list[str] | None = None) -> int:
    """Run the CLI on ``argv`` and return the exit code."""
    try:
        cli.main(args=argv, prog_name="imqed", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except CheckFailed as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CHECK
    except NumericalError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_NUMERICAL
    except (DslSyntaxError, SemanticError, MissingParam, ConfigError, ImqedError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    return 0


def main() -> None:
    sys.exit(run())
