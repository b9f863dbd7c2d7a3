"""Command-line entry point ``qlc0``.

Every subcommand is turned into an :class:`ExperimentConfig` and executed by
:func:`run_config`, so ``qlc0 run config.json`` and the direct subcommands
share one code path. Exit codes: 0 success, 2 validation error, 3 capacity or
I/O error, 4 a guarantee check failed under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from .circuit import ChannelSpec, build_unitary, choi, load_circuit
from .config import qubit_limit
from .dilation import cz_low_degree_approx
from .errors import CapacityError, InfeasibleError, Qlc0Error, ValidationError
from .learning import channel_learn, choi_norm_from_purity, degree_schedule_report, tolerant_test
from .lowdeg import approx_circuit
from .pauli import PauliExpansion, expand, parse_label, spectrum_rows, truncate_degree
from .reduction import run_reduction
from .reports import ExperimentConfig, RunReport, check, emit_report, versions
from .shadows import estimate_purity, read_shadows, write_shadows

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_STRICT = 0, 2, 3, 4
DENSE_ORACLE_MAX_QUBITS = 10

_REQUIRED = object()
# command -> {param: default}; _REQUIRED marks mandatory params
COMMON_PARAMS = {"strict": False, "max_qubits": None, "kappa": 1.0, "csv_path": None, "workers": 1}
PARAMS: dict[str, dict[str, Any]] = {
    "spectrum": {"target": "unitary"},
    "approx-cz": {"k": _REQUIRED, "r": _REQUIRED},
    "approx-circuit": {"observable": _REQUIRED, "r": _REQUIRED, "fallback": True},
    "choi": {},
    "learn": {
        "D": None,
        "eps": 0.1,
        "delta": 0.05,
        "samples": None,
        "shadows_in": None,
        "shadows_out": None,
    },
    "tolerant-test": {
        "D": 1,
        "eps1": _REQUIRED,
        "eps2": _REQUIRED,
        "delta": 0.05,
        "purity_mode": "exact",
        "max_samples": 50_000_000,
    },
    "reduce": {"mode": "exact", "eps": 0.02, "delta": 0.05},
}
NEEDS_CIRCUIT = {"spectrum", "approx-circuit", "choi", "learn", "tolerant-test", "reduce"}


def resolve_params(cfg: ExperimentConfig) -> dict[str, Any]:
    allowed = {**COMMON_PARAMS, **PARAMS[cfg.command]}
    unknown = set(cfg.params) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown parameters for {cfg.command}: {sorted(unknown)}")
    out = {}
    for key, default in allowed.items():
        if key in cfg.params and cfg.params[key] is not None:
            out[key] = cfg.params[key]
        elif default is _REQUIRED:
            raise ValidationError(f"{cfg.command} needs parameter {key!r}")
        else:
            out[key] = default
    return out


def _number(p: dict, key: str, kind=float):
    try:
        return kind(p[key])
    except (TypeError, ValueError):
        raise ValidationError(f"parameter {key!r} must be a {kind.__name__}") from None


def parse_observable(text: str, qubits: int) -> PauliExpansion:
    """A Pauli label such as ``ZIII`` or a JSON file mapping labels to coefficients."""
    letters = text.strip().upper()
    if letters and set(letters) <= set("IXYZ"):
        if len(letters) != qubits:
            raise ValidationError(f"observable {text!r} must have {qubits} letters")
        return PauliExpansion(qubits, {parse_label(letters): 1.0})
    path = Path(text)
    if not path.exists():
        raise ValidationError(f"observable {text!r} is neither a Pauli label nor a file")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"observable file is not valid JSON: {exc}") from exc
    terms = {}
    for key, val in doc.items():
        terms[key] = complex(val[0], val[1]) if isinstance(val, list) else complex(val)
    exp = PauliExpansion.from_labels(terms)
    if exp.qubits != qubits:
        raise ValidationError(f"observable acts on {exp.qubits} qubits, circuit has {qubits}")
    return exp


def _spectrum_table(p: PauliExpansion) -> list[list]:
    return [["sigma_string", "weight", "re", "im"]] + [list(r) for r in spectrum_rows(p)]


def _cmd_spectrum(spec: ChannelSpec, p: dict, seed: int, timings: dict):
    target = p["target"]
    if target == "unitary":
        op = build_unitary(spec.circuit)
    elif target == "choi":
        op = choi(spec).representation
    else:
        raise ValidationError("target must be 'unitary' or 'choi'")
    exp = expand(op)
    results = {"target": target, "qubits": exp.qubits, "degree": exp.degree, "terms": len(exp), "checks": []}
    return results, {"spectrum": _spectrum_table(exp)}


def _cmd_approx_cz(spec, p: dict, seed: int, timings: dict):
    k = _number(p, "k", int)
    rs = p["r"] if isinstance(p["r"], list) else [p["r"]]
    rows = [["r", "degree", "spectral_error", "bound"]]
    points, checks = [], []
    for r in rs:
        res = cz_low_degree_approx(k, float(r))
        points.append(res.as_dict())
        rows.append([float(r), res.degree, res.spectral_error, res.paper_bound])
        cap = min(k, math.ceil(math.sqrt(k * float(r)) - 1e-12))
        checks.append(check(f"degree r={r}", res.degree, cap, "ceil(sqrt(k r))"))
        checks.append(check(f"norm r={r}", float(np.abs(res.poly_values).max()), 1.0, "contraction"))
        if res.bound_nonvacuous:
            checks.append(check(f"error r={r}", res.spectral_error, res.paper_bound, "2^(1-r/256) log2 e"))
    return {"k": k, "points": points, "checks": checks}, {"sweep": rows}


def _cmd_approx_circuit(spec: ChannelSpec, p: dict, seed: int, timings: dict):
    c = spec.circuit
    obs = parse_observable(str(p["observable"]), c.wires)
    rep = approx_circuit(c, obs, _number(p, "r"), fallback=bool(p["fallback"]))
    results = rep.as_dict()
    checks = []
    for i, layer in enumerate(rep.per_layer):
        checks.append(check(f"layer {i} degree", layer.achieved_degree, math.ceil(layer.degree_bound), "4 sqrt(n ell r)"))
    for i, (nrm, bound) in enumerate(zip(rep.norms, rep.norm_bounds)):
        if bound <= 2:
            checks.append(check(f"norm M_{i}", nrm, bound, "(1+p)^i"))
    if rep.bound_nonvacuous:
        checks.append(check("total error", rep.total_error, rep.total_error_bound, "d C n 2^(-r/512)"))
    results["checks"] = checks
    rows = [["layer", "branch", "achieved_degree", "degree_bound", "spectral_error", "error_bound"]]
    for i, layer in enumerate(rep.per_layer):
        rows.append([i, layer.branch, layer.achieved_degree, layer.degree_bound, layer.spectral_error, layer.error_bound])
    return results, {"layers": rows}


def _cmd_choi(spec: ChannelSpec, p: dict, seed: int, timings: dict):
    ch = choi(spec)
    exp = expand(ch.representation)
    purity = estimate_purity(state=ch.state, exact=True)
    norm_direct = exp.l2_norm()
    norm_purity = choi_norm_from_purity(purity, ch.n, ch.m)
    trace_out = float(np.real(np.trace(ch.state)))
    results = {
        "n": ch.n,
        "m": ch.m,
        "purity": purity,
        "choi_l2_norm": norm_direct,
        "degree": exp.degree,
        "checks": [
            check("norm identity", abs(norm_direct - norm_purity), 1e-9, "||J||_2^2 = 2^(n-m) Tr rho^2"),
            check("state trace", abs(trace_out - 1), 1e-9, "Tr rho = 1"),
        ],
    }
    return results, {"spectrum": _spectrum_table(exp)}


def _cmd_learn(spec: ChannelSpec, p: dict, seed: int, timings: dict):
    eps, delta = _number(p, "eps"), _number(p, "delta")
    q = spec.n + spec.m
    schedule = None
    if p["D"] is None:
        c = spec.circuit
        schedule = degree_schedule_report(spec.n, spec.m, c.a, max(c.depth, 1), eps, kappa=_number(p, "kappa"))
        D = schedule.D
    else:
        D = _number(p, "D", int)
    if p["shadows_in"]:
        shadows = read_shadows(p["shadows_in"])
        if shadows.qubits != q:
            raise ValidationError(f"shadow file has {shadows.qubits} qubits, the Choi state has {q}")
        if shadows.choi_dims is None:
            shadows = shadows.__class__(q, shadows.codes, shadows.outcome_bits, shadows.seed, shadows.batches, (spec.n, spec.m))
        hyp = channel_learn(shadows, D, eps, delta)
    else:
        samples = None if p["samples"] is None else _number(p, "samples", int)
        hyp = channel_learn(spec, D, eps, delta, seed=seed, n_samples=samples, workers=_number(p, "workers", int))
    results = hyp.as_dict()
    if schedule is not None:
        results["degree_schedule"] = schedule.as_dict()
    checks = []
    if q <= DENSE_ORACLE_MAX_QUBITS:
        t0 = time.perf_counter()
        j = expand(choi(spec).representation)
        trunc = truncate_degree(j, D)
        results["l2_to_truncation_exact"] = hyp.l2_distance(trunc)
        results["l2_to_choi_exact"] = hyp.l2_distance(j)
        best = (j - trunc).l2_norm()
        checks.append(check("learner accuracy", results["l2_to_truncation_exact"], eps, "dense truncation"))
        checks.append(check("agnostic guarantee", results["l2_to_choi_exact"], best + eps, "||J - J^{<=D}||_2 + eps"))
        timings["oracle"] = (time.perf_counter() - t0) * 1000
    results["checks"] = checks
    if p["shadows_out"]:
        from .shadows import collect_shadows

        shadows = collect_shadows(choi(spec).state, hyp.samples_used, seed, batches=hyp.batches, choi_dims=(spec.n, spec.m))
        write_shadows(shadows, p["shadows_out"])
    rows = [["sigma_string", "weight", "re", "im"]] + [
        [c["sigma"], sum(1 for ch in c["sigma"] if ch != "I"), c["re"], c["im"]] for c in results["coeffs"]
    ]
    return results, {"coeffs": rows}


def _cmd_tolerant(spec: ChannelSpec, p: dict, seed: int, timings: dict):
    verdict = tolerant_test(
        spec,
        _number(p, "D", int),
        _number(p, "eps1"),
        _number(p, "eps2"),
        _number(p, "delta"),
        p["purity_mode"],
        seed=seed,
        max_samples=_number(p, "max_samples", int),
        workers=_number(p, "workers", int),
        oracle=spec.n + spec.m <= DENSE_ORACLE_MAX_QUBITS,
    )
    results = verdict.as_dict()
    checks = []
    if verdict.true_distance is not None:
        checks.append(
            check("distance sandwich", verdict.true_distance, verdict.upper, "dense truncation", lower=verdict.lower)
        )
    results["checks"] = checks
    return results, {}


def _cmd_reduce(spec: ChannelSpec, p: dict, seed: int, timings: dict):
    mode = p["mode"]
    eps = _number(p, "eps") if mode == "sampled" else 0.0
    rep = run_reduction(
        spec.circuit, eps, _number(p, "delta"), mode=mode, seed=seed, workers=_number(p, "workers", int)
    )
    results = rep.as_dict()
    if mode == "exact":
        checks = [check("final error", rep.final_error, 1e-7, "U (x) U^dag")]
    else:
        checks = [check("final error", rep.final_error, rep.paper_bound, "9 n eps")]
    if rep.hybrid_bound is not None:
        checks.append(check("hybrid bound", rep.final_error, rep.hybrid_bound, "3 n eps_V"))
    results["checks"] = checks
    return results, {}


HANDLERS = {
    "spectrum": _cmd_spectrum,
    "approx-cz": _cmd_approx_cz,
    "approx-circuit": _cmd_approx_circuit,
    "choi": _cmd_choi,
    "learn": _cmd_learn,
    "tolerant-test": _cmd_tolerant,
    "reduce": _cmd_reduce,
}


def run_config(cfg: ExperimentConfig) -> RunReport:
    p = resolve_params(cfg)
    timings: dict[str, float] = {}
    limit = None if p["max_qubits"] is None else _number(p, "max_qubits", int)
    with qubit_limit(limit):
        spec = None
        if cfg.command in NEEDS_CIRCUIT:
            if not cfg.circuit_path:
                raise ValidationError(f"{cfg.command} needs a circuit file")
            t0 = time.perf_counter()
            spec = load_circuit(cfg.circuit_path)
            timings["load"] = (time.perf_counter() - t0) * 1000
        t0 = time.perf_counter()
        results, tables = HANDLERS[cfg.command](spec, p, cfg.seed, timings)
        timings["run"] = (time.perf_counter() - t0) * 1000
    return RunReport(cfg.as_dict(), results, timings, versions(_number(p, "kappa")), tables)


def _add_common(sub: argparse.ArgumentParser, circuit: bool = True) -> None:
    if circuit:
        sub.add_argument("--circuit", required=True, help="circuit JSON file")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", help="JSON report path (stdout if omitted)")
    sub.add_argument("--csv", dest="csv_path", help="CSV path for tabular results")
    sub.add_argument("--strict", action="store_true", help="exit 4 if a guarantee check fails")
    sub.add_argument("--max-qubits", type=int, help="override the dense-simulation qubit ceiling")
    sub.add_argument("--kappa", type=float, default=1.0, help="hidden-constant knob of the degree schedule")
    sub.add_argument("--workers", type=int, default=1, help="threads for shadow collection")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlc0", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("spectrum", help="Pauli spectrum of the circuit unitary or its Choi representation")
    _add_common(s)
    s.add_argument("--target", choices=["unitary", "choi"], default="unitary")

    s = subs.add_parser("approx-cz", help="low-degree approximation of CZ_k, optionally swept over r")
    _add_common(s, circuit=False)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--r", type=float, nargs="+", required=True)

    s = subs.add_parser("approx-circuit", help="layer-by-layer low-degree approximation of U A U^dag")
    _add_common(s)
    s.add_argument("--observable", required=True, help="Pauli label or JSON file of label -> coefficient")
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--no-fallback", dest="fallback", action="store_false")

    s = subs.add_parser("choi", help="Choi representation summary and spectrum")
    _add_common(s)

    s = subs.add_parser("learn", help="learn the low-degree part of the Choi representation")
    _add_common(s)
    s.add_argument("--D", type=int)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--samples", type=int)
    s.add_argument("--shadows-in")
    s.add_argument("--shadows-out")

    s = subs.add_parser("tolerant-test", help="tolerant test of distance to degree-D operators")
    _add_common(s)
    s.add_argument("--D", type=int, default=1)
    s.add_argument("--eps1", type=float, required=True)
    s.add_argument("--eps2", type=float, required=True)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--purity-mode", choices=["exact", "sampled"], default="exact")
    s.add_argument("--max-samples", type=int, default=50_000_000)

    s = subs.add_parser("reduce", help="rebuild U (x) U^dag from per-wire channels")
    _add_common(s)
    s.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    s.add_argument("--eps", type=float, default=0.02)
    s.add_argument("--delta", type=float, default=0.05)

    s = subs.add_parser("run", help="run a stored ExperimentConfig JSON file")
    s.add_argument("config")
    s.add_argument("--strict", action="store_true")
    s.add_argument("--out", help="override the config's out_path")
    return parser


_GLOBAL_ARGS = {"command", "circuit", "seed", "out", "config"}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "run":
        cfg = ExperimentConfig.load(args.config)
        if args.strict:
            cfg.params["strict"] = True
        if args.out:
            cfg.out_path = args.out
        return cfg
    params = {k: v for k, v in vars(args).items() if k not in _GLOBAL_ARGS}
    if args.command == "approx-cz" and len(params["r"]) == 1:
        params["r"] = params["r"][0]
    return ExperimentConfig(args.command, getattr(args, "circuit", None), params, args.seed, args.out)


def _error(exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, InfeasibleError):
        doc["required_samples"] = exc.required_samples
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run_config(cfg)
        strict = bool(cfg.params.get("strict"))
        emit_report(report, cfg.out_path, cfg.params.get("csv_path"))
    except CapacityError as exc:
        return _error(exc, EXIT_CAPACITY)
    except (ValidationError, InfeasibleError) as exc:
        return _error(exc, EXIT_VALIDATION)
    except OSError as exc:
        return _error(exc, EXIT_CAPACITY)
    except Qlc0Error as exc:
        return _error(exc, EXIT_VALIDATION)
    if strict and not report.guarantees_met:
        failed = [c["name"] for c in report.checks if not c["passed"]]
        sys.stderr.write(json.dumps({"error": "GuaranteeMiss", "failed_checks": failed, "exit_code": EXIT_STRICT}) + "\n")
        return EXIT_STRICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
