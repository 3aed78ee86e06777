"""Execute configs, persist sealed records, and fold suites into summaries.

The contract this module keeps:

* every run of the same config is byte-identical after stripping wall-clock
  fields (records carry a digest over exactly that deterministic view),
* a summary is a pure fold over its records, so parallel and sequential
  suite runs produce the same summary,
* a nonconverged solve still writes its record; only the exit code differs.

Exit codes: 0 success, 2 config/validation error, 3 solver did not converge
(or a member of a suite failed). A suite's exit code is the worst of its
members'.
"""

from __future__ import annotations

import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from .problems import ExperimentOutcome, run_config
from .schema import (
    ProblemConfig,
    ResultRecord,
    SuiteConfig,
    SuiteMember,
    canonical_json,
    config_digest,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGED = 3


class ConfigError(ValueError):
    """A config that failed to load or validate; message names the field."""


def _format_validation_error(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def load_config(path: Union[str, Path]) -> ProblemConfig:
    """Read and validate one experiment config from a JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return ProblemConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_format_validation_error(exc)}") from exc


def load_suite(path: Union[str, Path]) -> SuiteConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return SuiteConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_format_validation_error(exc)}") from exc


def apply_overrides(config: ProblemConfig, **overrides) -> ProblemConfig:
    """Rebuild a config with some top-level fields replaced, re-validating."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return config
    doc = config.model_dump(mode="json", exclude_none=True)
    doc.update(updates)
    try:
        return ProblemConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def environment_stamp() -> dict:
    from alspg import __version__

    return {
        "package": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _clean(x) -> Optional[float]:
    """Non-finite floats have no JSON form; record them as null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return _clean(obj)
    return obj


def execute(config: ProblemConfig) -> ResultRecord:
    """Run one experiment and build its sealed record."""
    t0 = time.perf_counter()
    outcome: ExperimentOutcome = run_config(config)
    wall = time.perf_counter() - t0
    rep = outcome.report
    record = ResultRecord(
        kind=config.kind,
        solver=config.solver,
        seed=config.seed,
        config_digest=config_digest(config),
        converged=rep.converged,
        termination=rep.termination.name,
        objective=_clean(rep.f),
        residual=_clean(rep.residual),
        iterations=rep.iterations,
        counters=rep.counters.as_dict(),
        name=config.name,
        group=config.group,
        f_trace=[_clean(v) for v in rep.f_trace],
        residual_trace=[_clean(v) for v in rep.residual_trace],
        solution=_jsonable(outcome.solution),
        environment=environment_stamp(),
        wall_time_s=wall,
    )
    return record.seal()


def exit_code_for(record: ResultRecord) -> int:
    return EXIT_OK if record.converged else EXIT_NONCONVERGED


def _record_filename(record: ResultRecord, index: Optional[int] = None) -> str:
    base = record.name or f"{record.kind}-{record.solver}-{record.config_digest[:12]}"
    slug = "".join(c if (c.isalnum() or c in "-_.") else "-" for c in base)
    if index is not None:
        slug = f"{index:03d}-{slug}"
    return slug + ".json"


def write_record(record: ResultRecord, out_dir: Union[str, Path],
                 index: Optional[int] = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / _record_filename(record, index)
    path.write_text(canonical_json(record.model_dump(mode="json")) + "\n")
    return path


def run_experiment(config: ProblemConfig,
                   out_dir: Optional[Union[str, Path]] = None) -> tuple[ResultRecord, int]:
    """Run one config; optionally persist the record. Returns (record, exit code)."""
    record = execute(config)
    if out_dir is not None:
        write_record(record, out_dir)
    return record, exit_code_for(record)


# ------------------------------------------------------------------- suites


@dataclass
class MemberResult:
    """Outcome of one suite member: a record, or the error that stopped it.

    failed_in_solver separates a crash during the solve (exit 3) from a
    config that never validated (exit 2).
    """

    label: str
    record: Optional[ResultRecord] = None
    error: Optional[str] = None
    failed_in_solver: bool = False

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_NONCONVERGED if self.failed_in_solver else EXIT_VALIDATION
        assert self.record is not None
        return exit_code_for(self.record)


@dataclass
class SuiteResult:
    name: str
    members: list[MemberResult] = field(default_factory=list)

    @property
    def records(self) -> list[ResultRecord]:
        return [m.record for m in self.members if m.record is not None]

    @property
    def exit_code(self) -> int:
        return max((m.exit_code for m in self.members), default=EXIT_OK)

    def summary(self) -> dict:
        return summarize(self.records)


def resolve_members(suite: SuiteConfig,
                    base_dir: Union[str, Path]) -> list[tuple[str, Union[ProblemConfig, ConfigError]]]:
    """Turn suite entries into (label, config) pairs.

    Entries that fail to load or validate resolve to (label, ConfigError)
    so one bad member does not keep the rest of the suite from running.
    """
    base_dir = Path(base_dir)
    resolved: list[tuple[str, Union[ProblemConfig, ConfigError]]] = []
    for i, entry in enumerate(suite.configs):
        overrides: dict = {}
        if isinstance(entry, SuiteMember):
            overrides = entry.overrides()
            entry = entry.config
        if isinstance(entry, str):
            label = entry
            try:
                config = load_config(base_dir / entry)
            except ConfigError as exc:
                resolved.append((label, exc))
                continue
        else:
            config = entry
            label = config.name or f"inline-{i}"
        try:
            config = apply_overrides(config, **overrides)
        except ConfigError as exc:
            resolved.append((label, exc))
            continue
        if overrides:
            label = f"{label}#{'-'.join(str(v) for v in overrides.values())}"
        resolved.append((label, config))
    return resolved


def _run_member(label: str, config: ProblemConfig) -> MemberResult:
    try:
        return MemberResult(label=label, record=execute(config))
    except Exception as exc:  # noqa: BLE001 - a member crash must not kill the suite
        return MemberResult(label=label,
                            error=f"{type(exc).__name__}: {exc}",
                            failed_in_solver=True)


def run_suite(suite: SuiteConfig,
              base_dir: Union[str, Path] = ".",
              out_dir: Optional[Union[str, Path]] = None,
              parallel: Optional[bool] = None) -> SuiteResult:
    """Run every member, optionally in parallel, and fold the summary.

    Member order in the result always matches the suite file, whatever the
    scheduling, so records.jsonl and the summary are scheduling-independent.
    """
    resolved = resolve_members(suite, base_dir)
    use_parallel = suite.parallel if parallel is None else parallel

    results: list[MemberResult] = [MemberResult(label=lbl, error=str(cfg))
                                   if isinstance(cfg, ConfigError) else MemberResult(label=lbl)
                                   for lbl, cfg in resolved]
    runnable = [(i, lbl, cfg) for i, (lbl, cfg) in enumerate(resolved)
                if not isinstance(cfg, ConfigError)]

    if use_parallel and len(runnable) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(runnable))) as pool:
            futures = [(i, pool.submit(_run_member, lbl, cfg)) for i, lbl, cfg in runnable]
            for i, fut in futures:
                results[i] = fut.result()
    else:
        for i, lbl, cfg in runnable:
            results[i] = _run_member(lbl, cfg)

    suite_result = SuiteResult(name=suite.name, members=results)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = []
        for i, member in enumerate(results):
            if member.record is None:
                continue
            write_record(member.record, out_dir, index=i)
            lines.append(canonical_json(member.record.model_dump(mode="json")))
        (out_dir / "records.jsonl").write_text("\n".join(lines) + ("\n" if lines else ""))
        summary_doc = {
            "suite": suite.name,
            "groups": suite_result.summary(),
            "errors": [{"member": m.label, "error": m.error}
                       for m in results if m.error is not None],
        }
        (out_dir / "summary.json").write_text(canonical_json(summary_doc) + "\n")
    return suite_result


# ------------------------------------------------------------------ summary


_SUMMARY_FIELDS = ("objective", "wall_time_s")
_COUNTER_FIELDS = ("n_f", "n_grad", "n_jac")
_SOLUTION_FIELDS = ("goal_error", "final_cost")


def _stats(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n": int(arr.size)}


def summarize(records: list[ResultRecord]) -> dict:
    """Group records and report mean/std per metric.

    Grouping key: record.group if set, else solver. A pure function of the
    record list; running a suite twice (or in parallel) summarizes the same.
    """
    groups: dict[str, list[ResultRecord]] = {}
    for rec in records:
        groups.setdefault(rec.group or rec.solver, []).append(rec)

    out: dict[str, dict] = {}
    for key in sorted(groups):
        recs = groups[key]
        entry: dict = {"count": len(recs),
                       "converged": sum(1 for r in recs if r.converged)}
        for fname in _SUMMARY_FIELDS:
            vals = [getattr(r, fname) for r in recs if getattr(r, fname) is not None]
            if vals:
                entry[fname] = _stats(vals)
        for cname in _COUNTER_FIELDS:
            vals = [r.counters[cname] for r in recs if cname in r.counters]
            if vals:
                entry[cname] = _stats(vals)
        for sname in _SOLUTION_FIELDS:
            vals = [r.solution[sname] for r in recs
                    if isinstance(r.solution.get(sname), (int, float))]
            if vals:
                entry[sname] = _stats(vals)
        out[key] = entry
    return out


def format_summary(summary: dict) -> str:
    """Human-readable table of a summarize() result."""
    if not summary:
        return "(no records)\n"
    lines = []
    for group, entry in summary.items():
        lines.append(f"{group}  ({entry['converged']}/{entry['count']} converged)")
        for metric, stats in entry.items():
            if metric in ("count", "converged"):
                continue
            lines.append(f"  {metric:<12s} {stats['mean']:>12.6g} +/- {stats['std']:.6g}"
                         f"  (n={stats['n']})")
    return "\n".join(lines) + "\n"
