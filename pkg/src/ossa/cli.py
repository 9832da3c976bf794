"""Command-line front end: a thin client over the service handlers.

By default requests are executed in-process; with --server (or the
OSSA_SERVER environment variable) they are POSTed to a running service
instead.  Exit codes: 0 all-pass, 1 any Fail/Infeasible, 2 any
Inconclusive, 3 usage or parse errors.
"""
from __future__ import annotations

import json
import sys

import click
from fastapi import HTTPException
from pydantic import ValidationError

from . import __version__, schemas, service

_IN_PROCESS = {
    "check": service.handle_check,
    "dist": service.handle_dist,
    "unitise": service.handle_unitise,
    "corpus": service.handle_corpus,
}


def _fail_usage(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(3)


def _load_space_file(path: str) -> schemas.SpaceFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        _fail_usage(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        _fail_usage(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    try:
        return schemas.SpaceFile.model_validate(data)
    except ValidationError as exc:
        lines = "; ".join(f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}"
                          for e in exc.errors())
        _fail_usage(f"{path}: {lines}")


def _config(max_level, samples, seed, tol) -> schemas.ConfigEcho:
    kwargs = {}
    if max_level is not None:
        kwargs["max_level"] = max_level
    if samples is not None:
        kwargs["samples"] = samples
    if seed is not None:
        kwargs["seed"] = seed
    if tol is not None:
        # one knob scales the whole tolerance family
        kwargs["tol_dist"] = tol
        kwargs["tol_gap"] = 5.0 * tol
        kwargs["tol_unit_gap"] = 10.0 * tol
        kwargs["kappa_tol"] = 10.0 * tol
    return schemas.ConfigEcho(**kwargs)


def _call(command: str, request, server: str | None) -> schemas.Report:
    if server:
        import httpx

        url = server.rstrip("/") + "/" + command
        try:
            resp = httpx.post(url, json=request.model_dump(mode="json"), timeout=3600.0)
        except httpx.HTTPError as exc:
            _fail_usage(f"server request failed: {exc}")
        if resp.status_code != 200:
            _fail_usage(f"server returned {resp.status_code}: {resp.text}")
        return schemas.Report.model_validate(resp.json())
    try:
        return _IN_PROCESS[command](request)
    except HTTPException as exc:
        _fail_usage(str(exc.detail))


def _emit(report: schemas.Report, fmt: str, output: str | None) -> None:
    if fmt == "json":
        text = report.model_dump_json(indent=2)
    else:
        lines = [f"ossa {report.version}  command={report.command}"
                 + (f"  space={report.space_name}" if report.space_name else "")]
        for v in report.verdicts:
            extra = f" [{v.theorem}]" if v.theorem else ""
            gap = f" gap={v.gap:.6g}" if v.gap is not None else ""
            lines.append(f"  {v.question}: {v.status}{extra}{gap}")
            for k, val in v.values.items():
                lines.append(f"    {k} = {val:.9g}")
            for f in v.flags:
                lines.append(f"    flag: {f}")
        for q in report.quantities:
            if q.value is not None:
                lines.append(f"  {q.name} = {q.value:.9g}")
            else:
                lines.append(f"  {q.name}: {q.text}")
            for f in q.flags:
                lines.append(f"    flag: {f}")
        for r in report.corpus_rows:
            mark = "PASS" if r.passed else "FAIL"
            delta = "" if r.delta is None else f"  |d|={r.delta:.3g}"
            lines.append(f"  [{mark}] {r.case} :: {r.quantity}: expected {r.expected}"
                         f" got {r.computed}{delta}")
        for f in report.flags:
            lines.append(f"  flag: {f}")
        lines.append(f"  exit_code={report.exit_code}")
        text = "\n".join(lines)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _common_options(fn):
    fn = click.option("--max-level", type=int, default=None,
                      help="highest matrix level checked")(fn)
    fn = click.option("--samples", type=int, default=None,
                      help="samples per level in searches")(fn)
    fn = click.option("--seed", type=int, default=None, help="RNG seed")(fn)
    fn = click.option("--tol", type=float, default=None,
                      help="distance tolerance (scales the gap tolerances)")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["json", "text"]),
                      default="json", help="report format")(fn)
    fn = click.option("--output", type=click.Path(dir_okay=False), default=None,
                      help="write the report to a file")(fn)
    fn = click.option("--server", default=None, envvar="OSSA_SERVER",
                      help="run against a remote service instead of in-process")(fn)
    return fn


@click.group(name="ossa")
@click.version_option(version=__version__, prog_name="ossa")
def cli() -> None:
    """Numeric verdicts for selfadjoint operator spaces."""


def main(argv=None) -> None:
    """Entry point mapping usage errors to exit code 3."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:          # --help, --version
        sys.exit(exc.exit_code)
    except (click.UsageError, click.Abort) as exc:
        message = getattr(exc, "message", None) or str(exc)
        click.echo(f"error: {message}", err=True)
        sys.exit(3)


@cli.command()
@click.argument("space_file", type=click.Path(exists=False))
@click.option("--embedding", "questions", flag_value="embedding", multiple=True)
@click.option("--apg", "questions", flag_value="apg", multiple=True)
@click.option("--separating", "questions", flag_value="separating", multiple=True)
@click.option("--kappa", type=float, default=None,
              help="check complete kappa-generation at this kappa")
@click.option("--all", "run_all", is_flag=True, help="run every question")
@_common_options
def check(space_file, questions, kappa, run_all, max_level, samples, seed, tol,
          fmt, output, server):
    """Run the selected verdict questions on a space file."""
    space = _load_space_file(space_file)
    qs = list(dict.fromkeys(questions))
    if kappa is not None and "kappa" not in qs:
        qs.append("kappa")
    if run_all or not qs:
        qs = ["all"]
    try:
        req = schemas.CheckRequest(space=space, questions=qs, kappa=kappa,
                                   config=_config(max_level, samples, seed, tol))
    except ValidationError as exc:
        _fail_usage(str(exc))
    report = _call("check", req, server)
    _emit(report, fmt, output)
    sys.exit(report.exit_code)


@cli.command()
@click.argument("space_file", type=click.Path(exists=False))
@click.option("--coords", required=True,
              help="comma-separated real coordinates against the level sa basis")
@click.option("--level", type=int, default=1, show_default=True)
@_common_options
def dist(space_file, coords, level, max_level, samples, seed, tol, fmt, output, server):
    """Cone distance, gauge and spectral data for one element."""
    space = _load_space_file(space_file)
    try:
        values = [float(c) for c in coords.split(",") if c.strip() != ""]
    except ValueError:
        _fail_usage(f"bad --coords {coords!r}: expected comma-separated reals")
    try:
        req = schemas.DistRequest(space=space, coords=values, level=level,
                                  config=_config(max_level, samples, seed, tol))
    except ValidationError as exc:
        _fail_usage(str(exc))
    report = _call("dist", req, server)
    _emit(report, fmt, output)
    sys.exit(report.exit_code)


@cli.command()
@click.argument("space_file", type=click.Path(exists=False))
@click.option("--coords", required=True,
              help="comma-separated real coordinates against the level sa basis")
@click.option("--scalar", type=float, default=None,
              help="scalar part s (shortcut for s times the identity)")
@click.option("--scalar-json", default=None,
              help="full n x n scalar part as JSON [[ [re,im], ... ], ...]")
@click.option("--level", type=int, default=1, show_default=True)
@_common_options
def unitise(space_file, coords, scalar, scalar_json, level, max_level, samples,
            seed, tol, fmt, output, server):
    """Werner membership trace and unitised norms for one pair (x, a)."""
    space = _load_space_file(space_file)
    try:
        values = [float(c) for c in coords.split(",") if c.strip() != ""]
    except ValueError:
        _fail_usage(f"bad --coords {coords!r}: expected comma-separated reals")
    if scalar_json is not None:
        try:
            scalar_part = json.loads(scalar_json)
        except json.JSONDecodeError as exc:
            _fail_usage(f"bad --scalar-json: {exc.msg}")
    else:
        s = scalar if scalar is not None else 0.0
        scalar_part = [[(s if i == j else 0.0, 0.0) for j in range(level)]
                       for i in range(level)]
    try:
        req = schemas.UnitiseRequest(space=space, coords=values,
                                     scalar_part=scalar_part, level=level,
                                     config=_config(max_level, samples, seed, tol))
    except ValidationError as exc:
        _fail_usage(str(exc))
    report = _call("unitise", req, server)
    _emit(report, fmt, output)
    sys.exit(report.exit_code)


@cli.command()
@click.option("--filter", "name_filter", default=None,
              help="run only corpus cases whose name contains this substring")
@_common_options
def corpus(name_filter, max_level, samples, seed, tol, fmt, output, server):
    """Run the built-in worked-example corpus."""
    req = schemas.CorpusRequest(filter=name_filter,
                                config=_config(max_level, samples, seed, tol))
    report = _call("corpus", req, server)
    _emit(report, fmt, output)
    sys.exit(report.exit_code)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(service.app, host=host, port=port)


@cli.command()
def schema():
    """Print the JSON schema of the report format."""
    click.echo(json.dumps(schemas.Report.model_json_schema(), indent=2))


if __name__ == "__main__":
    main()
