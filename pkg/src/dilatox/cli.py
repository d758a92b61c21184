"""Batch driver: run configurations in, machine-readable reports out.

Subcommands ``check-axioms``, ``tangent``, ``menelaos`` and ``normalize``
share a config layer: an optional JSON config file plus flag overrides.
Reports are JSON (or CSV for iteration traces), written atomically, with a
stable field ordering; identical config and seed reproduce the output
byte for byte.  Wall time goes to stderr so it never perturbs the payload.

Sampling uses numpy's seeded PCG64 generator (``numpy.random.default_rng``),
so reports reproduce across platforms.  The default seed comes from the
``DILATOX_SEED`` environment variable when set.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration or usage
error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import axioms, menelaos, semigroup, tangent
from .axioms import ToleranceSchedule
from .core import LINEARITY_EXACT
from .errors import (
    ConfigParseError,
    DilatoxError,
    NoConvergence,
    UnsupportedFormat,
)
from .models import make_dilatation_structure, model_from_descriptor

TASKS = ("check-axioms", "tangent", "menelaos", "normalize")


@dataclass(frozen=True)
class RunConfig:
    model: dict
    task: str
    seed: int = 0
    tol: float = 1e-9
    samples: int = 2000
    grid: int = 3
    schedule: tuple | None = None
    out: str | None = None
    format: str = "json"
    inputs: dict = field(default_factory=dict)

    def schedule_obj(self) -> ToleranceSchedule | None:
        if self.schedule is None:
            return None
        eps0, ratio, steps = self.schedule
        return ToleranceSchedule(float(eps0), float(ratio), int(steps))


@dataclass(frozen=True)
class Report:
    config: dict
    payload: dict
    passed: bool
    wall_time_s: float

    def body(self) -> dict:
        return {"config": self.config, "payload": self.payload, "pass": self.passed}


def _config_dict(config: RunConfig) -> dict:
    d = dataclasses.asdict(config)
    d.pop("out", None)
    if d["schedule"] is not None:
        d["schedule"] = list(d["schedule"])
    return d


def run(config: RunConfig) -> Report:
    """Execute one task and assemble its report."""
    start = time.perf_counter()
    model = model_from_descriptor(config.model)
    S = make_dilatation_structure(model)
    rng = np.random.default_rng(config.seed)
    handler = {
        "check-axioms": _run_check_axioms,
        "tangent": _run_tangent,
        "menelaos": _run_menelaos,
        "normalize": _run_normalize,
    }.get(config.task)
    if handler is None:
        raise ConfigParseError(f"unknown task {config.task!r}; expected one of {TASKS}")
    payload, passed = handler(S, rng, config)
    return Report(
        config=_config_dict(config),
        payload=payload,
        passed=passed,
        wall_time_s=time.perf_counter() - start,
    )


def _report_dict(rep: axioms.CheckReport) -> dict:
    return {
        "check": rep.check,
        "samples": rep.samples,
        "max_residual": rep.max_residual,
        "witness": rep.witness,
        "pass": rep.passed,
        "tolerance": rep.tolerance,
    }


def _estimate_dict(est: axioms.LimitEstimate) -> dict:
    return {
        "limit": est.limit,
        "order": est.order if math.isfinite(est.order) else "constant",
        "converged": est.converged,
        "fit_residual": est.fit_residual,
        "samples": [[e, v] for e, v in est.samples],
    }


def _run_check_axioms(S, rng, config: RunConfig):
    tol = config.tol
    samples = axioms.draw_samples(S, rng, config.samples)
    checks = [
        axioms.check_a1(S, samples, tol=max(tol, 1e-10)),
        axioms.check_a2(S, samples, tol=max(tol, 1e-10)),
        axioms.check_linearity(S, samples, tol=max(tol, 1e-10)),
    ]
    if S.linearity_flag == LINEARITY_EXACT:
        gs, hs, eps = axioms.draw_norm_samples(S.model, rng, config.samples)
        checks.append(axioms.check_norm_axioms(S.model, gs, hs, eps, tol=max(tol, 1e-10)))

    est3 = axioms.grid_limits(S, rng, "a3", n=config.grid, sched=config.schedule_obj())
    est4 = axioms.grid_limits(S, rng, "a4", n=config.grid, sched=config.schedule_obj())
    limits = {
        "a3_converged": all(e.converged for e in est3),
        "a4_converged": all(e.converged for e in est4),
        "a3_order_spread": axioms.order_spread(est3),
        "a4_order_spread": axioms.order_spread(est4),
        "grid": config.grid,
    }
    payload = {"checks": [_report_dict(c) for c in checks], "limits": limits}
    passed = all(c.passed for c in checks) and limits["a3_converged"] and limits["a4_converged"]
    return payload, passed


def _run_tangent(S, rng, config: RunConfig):
    x = _input_point(S, config, "x", default=S.identity_point())
    n = min(config.samples, 200)
    samples = tangent.draw_conical_samples(S, rng, x, n)
    op_sched = config.schedule_obj()
    if op_sched is None and S.linearity_flag == LINEARITY_EXACT \
            and float(S.coord_dist(x, S.identity_point())) == 0.0:
        # At the group identity the second-order compositions stay
        # scale-relative, so a deeper schedule costs no accuracy.
        op_sched = ToleranceSchedule(1.0, 0.5, 20)
    tol = config.tol if S.linearity_flag == LINEARITY_EXACT else max(config.tol, 1e-5)
    rep = tangent.verify_conical(S, x, samples, op_sched=op_sched, tol=tol)
    space = tangent.tangent_space(S, x, op_sched=op_sched)
    u = samples.us[0]
    v = samples.vs[0]
    payload = {
        "base": list(space.base),
        "conical": _report_dict(rep),
        "example": {
            "u": u.tolist(),
            "v": v.tolist(),
            "metric": float(space.metric(u, v)),
            "op": np.asarray(space.op(u, v)).tolist(),
            "inv": np.asarray(space.inv(u)).tolist(),
        },
    }
    return payload, rep.passed


def _run_menelaos(S, rng, config: RunConfig):
    x = _input_point(S, config, "x", default=None)
    y = _input_point(S, config, "y", default=None)
    if x is None or y is None:
        x = S.sample(rng, 1, 0.4 * S.domain.closeness)[0]
        y = S.sample_near(rng, x[None], 0.4 * S.domain.closeness)[0]
    eps = float(config.inputs.get("eps", 0.5))
    mu = float(config.inputs.get("mu", 0.5))
    trace = menelaos.menelaos_iteration(S, x, y, eps, mu, tol=min(config.tol, 1e-10))
    zs = S.sample_near(rng, np.broadcast_to(x, (100, S.dimension)).copy(),
                       0.4 * S.domain.closeness)
    ver = menelaos.verify_menelaos(S, x, y, eps, mu, trace.w, zs, tol=config.tol)
    inv = menelaos.check_invariance(S, trace, eps, mu, zs[:20], tol=config.tol)
    wb = menelaos.banach_iteration(S, x, y, eps, mu, x)
    payload = {
        "x": x.tolist(),
        "y": y.tolist(),
        "eps": eps,
        "mu": mu,
        "w": list(trace.w),
        "iterations": trace.iterations,
        "converged": trace.converged,
        "gaps": trace.gaps().tolist(),
        "banach_agreement": float(np.linalg.norm(np.asarray(trace.w) - wb)),
        "verify": _report_dict(ver),
        "invariance": _report_dict(inv),
        "trace": [[r.n, list(r.x), list(r.y), r.gap] for r in trace.rows],
    }
    passed = trace.converged and ver.passed and inv.passed
    return payload, passed


def _run_normalize(S, rng, config: RunConfig):
    text = config.inputs.get("word")
    if not text:
        raise ConfigParseError("normalize needs a word, e.g. --word 'D(0;0.5) D(1;2.0)'")
    word = semigroup.word_from_text(text, S.dimension)
    element = semigroup.normalize_word(S, word, tol=config.tol)
    zs = S.sample_near(
        rng,
        np.broadcast_to(np.asarray(word.factors[0].center), (100, S.dimension)).copy(),
        0.3 * S.domain.closeness,
    )
    rep = semigroup.verify_normal_form(S, word, element, zs)
    payload = {
        "word": semigroup.word_to_text(word),
        "canonical": semigroup.canonical_to_text(element),
        "kind": type(element).__name__,
        "coefficient_product": word.coefficient_product(),
        "verify": _report_dict(rep),
    }
    return payload, rep.passed


def _input_point(S, config: RunConfig, key: str, default):
    raw = config.inputs.get(key)
    if raw is None:
        return default
    if isinstance(raw, str):
        coords = [float(c) for c in raw.split(";")]
    else:
        coords = [float(c) for c in raw]
    return S.as_point(coords)


def emit(report: Report, fmt: str = "json") -> bytes:
    """Serialize a report with stable field ordering.

    JSON covers every task; CSV applies only to iteration-trace payloads.
    Wall time is deliberately not part of the emitted bytes, so identical
    config and seed reproduce the file exactly.
    """
    if fmt == "json":
        return (json.dumps(report.body(), sort_keys=True, indent=2) + "\n").encode()
    if fmt == "csv":
        trace = report.payload.get("trace")
        if trace is None:
            raise UnsupportedFormat("csv output applies only to iteration traces")
        rows = tuple(
            menelaos.TraceRow(n, tuple(x), tuple(y), gap) for n, x, y, gap in trace
        )
        tr = menelaos.IterationTrace(rows, tuple(report.payload["w"]),
                                     report.payload["iterations"],
                                     report.payload["converged"])
        return menelaos.trace_to_csv(tr).encode()
    raise UnsupportedFormat(f"unknown format {fmt!r}")


def _write_atomic(path: str, data: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dilatox-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _parse_model_flag(text: str) -> dict:
    parts = text.split(",")
    desc: dict = {"kind": parts[0].strip()}
    for part in parts[1:]:
        if "=" not in part:
            raise ConfigParseError(f"bad model parameter {part!r}; expected key=value")
        key, value = part.split("=", 1)
        try:
            desc[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            desc[key.strip()] = value.strip()
    return desc


def _parse_schedule_flag(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigParseError("schedule must be eps0:ratio:steps")
    return (float(parts[0]), float(parts[1]), int(parts[2]))


def build_config(args: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigParseError(f"cannot read config file: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigParseError("config file must hold a JSON object")

    model = base.get("model")
    if args.model:
        model = _parse_model_flag(args.model)
    if model is None:
        raise ConfigParseError("no model given (use --model or a config file)")

    seed = base.get("seed", int(os.environ.get("DILATOX_SEED", "0")))
    if args.seed is not None:
        seed = args.seed

    schedule = base.get("schedule")
    if isinstance(schedule, dict):
        schedule = (schedule["eps0"], schedule["ratio"], schedule["steps"])
    elif isinstance(schedule, list):
        schedule = tuple(schedule)
    if args.schedule:
        schedule = _parse_schedule_flag(args.schedule)

    inputs = dict(base.get("inputs", {}))
    for key in ("x", "y", "word"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            inputs[key] = val
    for key in ("eps", "mu"):
        val = getattr(args, key, None)
        if val is not None:
            inputs[key] = val

    try:
        return RunConfig(
            model=model,
            task=args.task,
            seed=int(seed),
            tol=args.tol if args.tol is not None else float(base.get("tol", 1e-9)),
            samples=args.samples if args.samples is not None else int(base.get("samples", 2000)),
            grid=args.grid if args.grid is not None else int(base.get("grid", 3)),
            schedule=schedule,
            out=args.out if args.out is not None else base.get("out"),
            format=args.format if args.format is not None else base.get("format", "json"),
            inputs=inputs,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"bad configuration value: {exc}") from exc


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dilatox",
        description="Verify dilatation-structure axioms, tangent limits, "
        "Menelaos fixed points, and semigroup normal forms on concrete models.",
    )
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--model", help="model spec, e.g. euclidean,dim=2,p=2 or heisenberg")
        p.add_argument("--seed", type=int, help="PRNG seed (default: DILATOX_SEED or 0)")
        p.add_argument("--tol", type=float, help="check tolerance")
        p.add_argument("--samples", type=int, help="sample count for batched checks")
        p.add_argument("--grid", type=int, help="grid side for limit checks")
        p.add_argument("--schedule", help="coefficient schedule eps0:ratio:steps")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), help="report format")
        if task == "menelaos":
            p.add_argument("--x", help="first center, ;-separated coordinates")
            p.add_argument("--y", help="second center, ;-separated coordinates")
            p.add_argument("--eps", type=float, help="first coefficient")
            p.add_argument("--mu", type=float, help="second coefficient")
        if task == "normalize":
            p.add_argument("--word", help="word text, e.g. 'D(1;2.0) D(0;0.5)'")
    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        config = build_config(args)
        report = run(config)
        data = emit(report, config.format)
    except ConfigParseError as exc:
        print(f"dilatox: configuration error: {exc}", file=sys.stderr)
        return 2
    except NoConvergence as exc:
        print(f"dilatox: no convergence: {exc}", file=sys.stderr)
        return 3
    except DilatoxError as exc:
        print(f"dilatox: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    if config.out:
        _write_atomic(config.out, data)
    else:
        sys.stdout.buffer.write(data)
    print(
        f"dilatox: task={config.task} pass={report.passed} "
        f"wall={report.wall_time_s:.3f}s",
        file=sys.stderr,
    )
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
