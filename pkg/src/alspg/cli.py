"""Command-line front end: run experiments, fold suites, serve the playground.

The CLI is a thin client. `run` and `suite` talk to the HTTP service,
in-process by default or a remote instance via --server, so a result is
identical whether it was produced locally or by a deployed service. `serve`
starts that service.

Exit codes: 0 success, 2 validation problem, 3 solver did not converge
(suites exit with their worst member).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from alspg import __version__
from alspg.bench.runner import (
    EXIT_NONCONVERGED,
    EXIT_OK,
    EXIT_VALIDATION,
    ConfigError,
    apply_overrides,
    load_config,
    load_suite,
    resolve_members,
    summarize,
    format_summary,
    write_record,
)
from alspg.bench.schema import ProblemConfig, ResultRecord, canonical_json


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # in-process: the same service, no socket
    from fastapi.testclient import TestClient

    from alspg.service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _fail_validation(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_VALIDATION)


@click.group()
@click.version_option(version=__version__, prog_name="alspg")
def main() -> None:
    """Constrained trajectory optimization benchmarks and playground service."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config's seed.")
@click.option("--solver", type=str, default=None, help="Override the config's solver.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory to write the result record into.")
@click.option("--server", type=str, default=None,
              help="Run against a remote service instead of in-process.")
def run(config_path: str, seed: Optional[int], solver: Optional[str],
        out_dir: Optional[str], server: Optional[str]) -> None:
    """Run one experiment config and print its outcome."""
    try:
        config = load_config(config_path)
        config = apply_overrides(config, seed=seed, solver=solver)
    except ConfigError as exc:
        _fail_validation(str(exc))

    with _client(server) as client:
        resp = client.post("/experiments/run",
                           json=config.model_dump(mode="json", exclude_none=True))
    if resp.status_code == 422:
        _fail_validation(json.dumps(resp.json()["detail"]))
    resp.raise_for_status()
    record = ResultRecord.model_validate(resp.json())

    if out_dir is not None:
        path = write_record(record, out_dir)
        click.echo(f"record: {path}")
    click.echo(
        f"{record.kind}/{record.solver} seed={record.seed} "
        f"termination={record.termination} objective={record.objective} "
        f"residual={record.residual} n_f={record.counters['n_f']} "
        f"n_grad={record.counters['n_grad']} n_jac={record.counters['n_jac']} "
        f"wall={record.wall_time_s:.3f}s"
    )
    sys.exit(EXIT_OK if record.converged else EXIT_NONCONVERGED)


@main.command()
@click.argument("suite_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Directory for per-record files, records.jsonl, summary.json.")
@click.option("--server", type=str, default=None,
              help="Run against a remote service instead of in-process.")
def suite(suite_path: str, out_dir: Optional[str], server: Optional[str]) -> None:
    """Run every member of a suite and print the aggregate table."""
    try:
        suite_cfg = load_suite(suite_path)
    except ConfigError as exc:
        _fail_validation(str(exc))

    # paths resolve client-side; the service only ever sees inline configs
    resolved = resolve_members(suite_cfg, Path(suite_path).parent)
    local_errors = [(label, str(err)) for label, err in resolved
                    if isinstance(err, ConfigError)]
    runnable = [(label, cfg) for label, cfg in resolved
                if isinstance(cfg, ProblemConfig)]

    records: list[ResultRecord] = []
    server_errors: list[dict] = []
    exit_code = EXIT_VALIDATION if local_errors else EXIT_OK
    if runnable:
        body = {
            "name": suite_cfg.name,
            "parallel": suite_cfg.parallel,
            "configs": [cfg.model_dump(mode="json", exclude_none=True)
                        for _, cfg in runnable],
        }
        with _client(server) as client:
            resp = client.post("/suites/run", json=body)
        if resp.status_code == 422:
            _fail_validation(json.dumps(resp.json()["detail"]))
        resp.raise_for_status()
        doc = resp.json()
        records = [ResultRecord.model_validate(r) for r in doc["records"]]
        server_errors = doc["errors"]
        exit_code = max(exit_code, doc["exit_code"])

    summary = summarize(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = []
        for i, record in enumerate(records):
            write_record(record, out, index=i)
            lines.append(canonical_json(record.model_dump(mode="json")))
        (out / "records.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
        summary_doc = {
            "suite": suite_cfg.name,
            "groups": summary,
            "errors": [{"member": m, "error": e} for m, e in local_errors]
                      + server_errors,
        }
        (out / "summary.json").write_text(canonical_json(summary_doc) + "\n")
        click.echo(f"wrote {len(records)} records to {out}")

    click.echo(format_summary(summary), nl=False)
    for member, error in local_errors:
        click.echo(f"failed {member}: {error}", err=True)
    for item in server_errors:
        click.echo(f"failed {item['member']}: {item['error']}", err=True)
    sys.exit(exit_code)


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--model", "model_spec", type=str, default="planar_arm",
              show_default=True,
              help="Arm model: a model name or a path to a JSON spec file.")
def serve(port: int, host: str, model_spec: str) -> None:
    """Start the experiment + playground service."""
    import uvicorn

    from alspg.bench.schema import PlanarArmSpec
    from alspg.service import create_app

    if model_spec.endswith(".json") or Path(model_spec).exists():
        try:
            doc = json.loads(Path(model_spec).read_text())
            arm = PlanarArmSpec.model_validate(doc)
        except (OSError, ValueError) as exc:
            _fail_validation(f"--model {model_spec}: {exc}")
    elif model_spec == "planar_arm":
        arm = PlanarArmSpec(name="planar_arm")
    else:
        _fail_validation(f"--model {model_spec}: unknown model "
                         "(use 'planar_arm' or a JSON spec file)")

    uvicorn.run(create_app(arm), host=host, port=port)


if __name__ == "__main__":
    main()
