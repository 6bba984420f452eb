"""Command line front end: validate | exact | verify | sample | entropy.

Model documents are JSON.  Energies are exact rationals written as strings
("3", "-7/2"); floats are rejected so that shell membership never depends
on binary rounding.  Temperatures and angles are ordinary numbers.

    {
      "system": {"energies": ["0", "1"], "beta": 1.0},
      "ancillas": [
        {"energies": ["0", "1"], "beta": 2.0,
         "unitary": {"kind": "partial_swap", "theta": 0.7853981633974483}}
      ],
      "master_seed": 7,
      "tolerance": 1e-9,
      "enumeration_cap": 100000000
    }

Unitary kinds and their parameters:
    haar          optional "stream_tag" (defaults to the collision number)
    partial_swap  "theta" in radians (resonant two-level subsystems only)
    permutation   "cycles": {"num/den": [[member indices], ...]} or "shift"
    explicit      "blocks": {"num/den": [[[re, im], ...], ...]}
    identity      no parameters

Exit codes: 0 all requested checks passed, 1 a check failed, 2 unusable
input or usage error.  Reports and exports are byte-identical across runs
with the same document, seed and worker count; wall-clock time is printed
separately and never written into them.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .chain import assert_detailed_balance, realize_model
from .heatstats import (
    DEFAULT_ENUMERATION_CAP,
    compare_distributions,
    distribution_to_csv,
    distribution_to_json,
    exact_backward_joint,
    exact_forward_joint,
    exact_forward_joint_via_ancilla_paths,
    single_collision_distribution,
    verify_joint_ft,
    verify_partial_decomposition,
    verify_product_relation,
)
from .model import (
    AncillaSpec,
    EnumerationCapError,
    ModelConfig,
    ModelError,
    Spectrum,
    format_rational,
    parse_rational,
)
from .sampler import (
    SamplerConfig,
    average_entropy_production,
    iter_trajectories,
    summarize_samples,
)
from .unitaries import UnitarySpec, validate_energy_preservation

__all__ = ["parse_model", "load_model_file", "RunSettings", "dispatch", "main"]

ROUTE_EQUIVALENCE_TOL = 1e-12
DEFAULT_DETAILED_BALANCE_TOL = 1e-10


@dataclass(frozen=True)
class RunSettings:
    """Document-level defaults that individual commands may override."""

    tolerance: float = 1e-9
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP


def _fail(path: str, message: str) -> ModelError:
    return ModelError(f"{path}: {message}")


def _number(value: object, path: str) -> float:
    if isinstance(value, bool):
        raise _fail(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        result = float(value)
    elif isinstance(value, str):
        try:
            result = float(value)
        except ValueError:
            raise _fail(path, f"expected a number, got {value!r}") from None
    else:
        raise _fail(path, f"expected a number, got {value!r}")
    if not math.isfinite(result):
        raise _fail(path, "must be finite")
    return result


def _spectrum(values: object, path: str) -> Spectrum:
    if not isinstance(values, list) or not values:
        raise _fail(path, "expected a non-empty list of exact energies")
    levels = []
    for idx, raw in enumerate(values):
        if isinstance(raw, float):
            raise _fail(
                f"{path}[{idx}]",
                f"floats are not exact; write {raw!r} as a 'num/den' string",
            )
        try:
            levels.append(parse_rational(raw))
        except ModelError as exc:
            raise _fail(f"{path}[{idx}]", str(exc)) from None
    try:
        return Spectrum(tuple(levels))
    except ModelError as exc:
        raise _fail(path, str(exc)) from None


def _complex_matrix(raw: object, path: str) -> list[list[complex]]:
    if not isinstance(raw, list) or not raw:
        raise _fail(path, "expected a matrix as a list of rows")
    matrix = []
    for r, row in enumerate(raw):
        if not isinstance(row, list):
            raise _fail(f"{path}[{r}]", "expected a list of [re, im] pairs")
        entries = []
        for c, cell in enumerate(row):
            if (
                not isinstance(cell, list)
                or len(cell) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in cell)
            ):
                raise _fail(f"{path}[{r}][{c}]", "expected an [re, im] pair")
            entries.append(complex(cell[0], cell[1]))
        matrix.append(entries)
    return matrix


def _unitary(raw: object, path: str) -> UnitarySpec:
    if not isinstance(raw, Mapping):
        raise _fail(path, "expected an object with a 'kind' field")
    kind = raw.get("kind")
    if kind == "haar":
        tag = raw.get("stream_tag")
        if tag is not None and (isinstance(tag, bool) or not isinstance(tag, int)):
            raise _fail(f"{path}.stream_tag", "expected an integer")
        return UnitarySpec.haar(stream_tag=tag)
    if kind == "partial_swap":
        if "theta" not in raw:
            raise _fail(f"{path}.theta", "partial_swap requires an angle")
        return UnitarySpec.partial_swap(_number(raw["theta"], f"{path}.theta"))
    if kind == "permutation":
        cycles_raw = raw.get("cycles")
        cycles = None
        if cycles_raw is not None:
            if not isinstance(cycles_raw, Mapping):
                raise _fail(f"{path}.cycles", "expected {'num/den': [[...], ...]}")
            cycles = {}
            for total, cycs in cycles_raw.items():
                try:
                    key = parse_rational(total)
                except ModelError as exc:
                    raise _fail(f"{path}.cycles", str(exc)) from None
                cycles[key] = cycs
        shift = raw.get("shift", 0)
        if isinstance(shift, bool) or not isinstance(shift, int):
            raise _fail(f"{path}.shift", "expected an integer")
        return UnitarySpec.permutation(cycles=cycles, shift=shift)
    if kind == "explicit":
        blocks_raw = raw.get("blocks")
        if not isinstance(blocks_raw, Mapping) or not blocks_raw:
            raise _fail(f"{path}.blocks", "expected {'num/den': matrix} entries")
        blocks = {}
        for total, mat in blocks_raw.items():
            try:
                key = parse_rational(total)
            except ModelError as exc:
                raise _fail(f"{path}.blocks", str(exc)) from None
            blocks[key] = _complex_matrix(mat, f"{path}.blocks[{total}]")
        return UnitarySpec.explicit(blocks)
    if kind == "identity":
        return UnitarySpec.identity()
    raise _fail(f"{path}.kind", f"unknown unitary kind {kind!r}")


def parse_model(document: Mapping) -> ModelConfig:
    """Validate a model document and build the configuration."""
    if not isinstance(document, Mapping):
        raise ModelError("model document must be a JSON object")
    if "system" not in document or not isinstance(document["system"], Mapping):
        raise _fail("system", "missing or not an object")
    system = document["system"]
    spectrum = _spectrum(system.get("energies"), "system.energies")
    beta_s = _number(system.get("beta", 0.0), "system.beta")

    raw_ancillas = document.get("ancillas")
    if not isinstance(raw_ancillas, list) or not raw_ancillas:
        raise _fail("ancillas", "expected a non-empty list")
    ancillas = []
    for idx, raw in enumerate(raw_ancillas):
        path = f"ancillas[{idx}]"
        if not isinstance(raw, Mapping):
            raise _fail(path, "expected an object")
        ancillas.append(
            AncillaSpec(
                spectrum=_spectrum(raw.get("energies"), f"{path}.energies"),
                beta=_number(raw.get("beta", 0.0), f"{path}.beta"),
                unitary=_unitary(raw.get("unitary", {"kind": "identity"}), f"{path}.unitary"),
            )
        )

    seed = document.get("master_seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise _fail("master_seed", "expected an unsigned 64-bit integer")
    config = ModelConfig(
        system=spectrum,
        system_beta=beta_s,
        ancillas=tuple(ancillas),
        master_seed=seed,
    )
    # Surface structural problems (non-resonant partial swap, bad explicit
    # blocks) at load time rather than on first use.
    realize_model(config)
    return config


def _settings(document: Mapping) -> RunSettings:
    tolerance = _number(document.get("tolerance", 1e-9), "tolerance")
    cap = document.get("enumeration_cap", DEFAULT_ENUMERATION_CAP)
    if isinstance(cap, bool) or not isinstance(cap, int) or cap < 1:
        raise _fail("enumeration_cap", "expected a positive integer")
    return RunSettings(tolerance=tolerance, enumeration_cap=cap)


def load_model_file(path: str | Path) -> tuple[ModelConfig, RunSettings]:
    """Read a JSON model document from disk."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from None
    return parse_model(document), _settings(document)


# ---------------------------------------------------------------------------
# Output helpers


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def _print_check(name: str, passed: bool, detail: str) -> None:
    print(f"{name}: {'pass' if passed else 'FAIL'} ({detail})")


def _backward_path(out: Path) -> Path:
    return out.with_name(out.stem + ".backward" + out.suffix)


def _distribution_text(dist, fmt: str) -> str:
    if fmt == "json":
        return _report_json(distribution_to_json(dist))
    return distribution_to_csv(dist, include_exact=True)


# ---------------------------------------------------------------------------
# Commands


def _cmd_validate(args: argparse.Namespace) -> int:
    config, _ = load_model_file(args.model)
    tolerance = args.tolerance if args.tolerance is not None else DEFAULT_DETAILED_BALANCE_TOL
    realized = realize_model(config)
    checks = []
    for stage in realized.stages:
        unit = validate_energy_preservation(stage.unitary, tolerance=1e-10)
        checks.append(
            {
                "name": f"unitarity[collision {stage.index}]",
                "passed": unit.passed,
                "max_residual": unit.max_residual,
                "tolerance": unit.tolerance,
            }
        )
        balance = assert_detailed_balance(
            stage.propagator, stage.beta, config.system, tolerance
        )
        checks.append(
            {
                "name": f"detailed_balance[collision {stage.index}]",
                "passed": balance.passed,
                "max_residual": balance.max_residual,
                "worst_pair": list(balance.worst_pair),
                "tolerance": balance.tolerance,
            }
        )
    report = {
        "command": "validate",
        "model": str(args.model),
        "master_seed": config.master_seed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    for check in checks:
        _print_check(check["name"], check["passed"], f"max residual {check['max_residual']:.3e}")
    if args.out:
        _write_text(Path(args.out), _report_json(report))
    return 0 if report["passed"] else 1


def _cmd_exact(args: argparse.Namespace) -> int:
    config, settings = load_model_file(args.model)
    cap = args.cap if args.cap is not None else settings.enumeration_cap
    forward = exact_forward_joint(config, cap)
    backward = exact_backward_joint(config, cap)
    print(
        f"forward: {len(forward)} heat tuples, mass {forward.total_mass():.12f}, "
        f"pruned {forward.pruned_mass:.3e}"
    )
    print(
        f"backward: {len(backward)} heat tuples, mass {backward.total_mass():.12f}, "
        f"pruned {backward.pruned_mass:.3e}"
    )
    if args.out:
        out = Path(args.out)
        _write_text(out, _distribution_text(forward, args.format))
        _write_text(_backward_path(out), _distribution_text(backward, args.format))
        print(f"wrote {out} and {_backward_path(out)}")
    else:
        sys.stdout.write("# forward\n" + _distribution_text(forward, args.format))
        sys.stdout.write("# backward\n" + _distribution_text(backward, args.format))
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    config, settings = load_model_file(args.model)
    tolerance = args.tolerance if args.tolerance is not None else settings.tolerance
    cap = args.cap if args.cap is not None else settings.enumeration_cap

    forward = exact_forward_joint(config, cap)
    backward = exact_backward_joint(config, cap)
    via_ancillas = exact_forward_joint_via_ancilla_paths(config, cap)
    singles = [
        single_collision_distribution(config, i, cap)
        for i in range(1, config.n_collisions + 1)
    ]

    checks = []
    route_gap = compare_distributions(forward, via_ancillas)
    checks.append(
        {
            "name": "route_equivalence",
            "passed": route_gap <= ROUTE_EQUIVALENCE_TOL,
            "max_residual": route_gap,
            "tolerance": ROUTE_EQUIVALENCE_TOL,
        }
    )
    joint = verify_joint_ft(forward, backward, config, tolerance)
    checks.append(
        {
            "name": "joint_ft",
            "passed": joint.passed,
            "max_residual": joint.max_log_residual,
            "checked_pairs": joint.checked_pairs,
            "support_mismatches": len(joint.support_mismatches),
            "tolerance": tolerance,
        }
    )
    product = verify_product_relation(forward, backward, singles, tolerance)
    checks.append(
        {
            "name": "product_relation",
            "passed": product.passed,
            "max_residual": product.max_log_residual,
            "checked_pairs": product.checked_pairs,
            "support_mismatches": len(product.support_mismatches),
            "tolerance": tolerance,
        }
    )
    if config.n_collisions >= 2:
        partial = verify_partial_decomposition(config, tolerance, cap)
        checks.append(
            {
                "name": "partial_decomposition",
                "passed": partial.passed,
                "max_residual": partial.max_log_residual,
                "checked_pairs": partial.checked_pairs,
                "support_mismatches": len(partial.support_mismatches),
                "tolerance": tolerance,
            }
        )
    report = {
        "command": "verify",
        "model": str(args.model),
        "master_seed": config.master_seed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    for check in checks:
        _print_check(check["name"], check["passed"], f"max residual {check['max_residual']:.3e}")
    if args.out:
        _write_text(Path(args.out), _report_json(report))
    return 0 if report["passed"] else 1


def _dump_line(record) -> str:
    return json.dumps(
        {
            "alphas": list(record.trajectory.alphas),
            "ancilla_pairs": [list(pair) for pair in record.trajectory.ancilla_pairs],
            "heats": [format_rational(q) for q in record.heats],
            "sigma": record.sigma,
        }
    )


def _cmd_sample(args: argparse.Namespace) -> int:
    config, _ = load_model_file(args.model)
    seed = args.seed if args.seed is not None else config.master_seed
    sampler_config = SamplerConfig(
        shots=args.shots, master_seed=seed, worker_count=args.workers
    )
    records = iter_trajectories(config, sampler_config)
    if args.dump:
        dump_path = Path(args.dump)
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        with dump_path.open("w", encoding="utf-8", newline="\n") as sink:

            def tee():
                for record in records:
                    sink.write(_dump_line(record) + "\n")
                    yield record

            summary = summarize_samples(tee(), args.shots)
    else:
        summary = summarize_samples(records, args.shots)

    print(
        f"sampled {summary.shots} trajectories with seed {seed} "
        f"across {args.workers} worker streams"
    )
    print(
        f"mean exp(-entropy production) = {summary.integral_ft_mean:.6f} "
        f"+- {summary.integral_ft_stderr:.6f} (expected 1)"
    )
    print(f"distinct heat tuples: {len(summary.empirical.distribution)}")
    if args.out:
        _write_text(Path(args.out), _distribution_text(summary.empirical.distribution, args.format))
        print(f"wrote {args.out}")
    return 0


def _cmd_entropy(args: argparse.Namespace) -> int:
    config, settings = load_model_file(args.model)
    tolerance = args.tolerance if args.tolerance is not None else settings.tolerance
    cap = args.cap if args.cap is not None else settings.enumeration_cap
    report = average_entropy_production(config, tolerance, cap)
    print(f"heat-average form:      {report.heat_average:.12f}")
    print(f"trajectory-average form: {report.trajectory_average:.12f}")
    print(f"information form:        {report.information_form:.12f}")
    _print_check(
        "entropy_consistency", report.passed, f"max pairwise gap {report.max_pairwise_gap:.3e}"
    )
    if args.out:
        _write_text(
            Path(args.out),
            _report_json(
                {
                    "command": "entropy",
                    "model": str(args.model),
                    "master_seed": config.master_seed,
                    "heat_average": report.heat_average,
                    "trajectory_average": report.trajectory_average,
                    "information_form": report.information_form,
                    "max_pairwise_gap": report.max_pairwise_gap,
                    "tolerance": report.tolerance,
                    "passed": report.passed,
                }
            ),
        )
    return 0 if report.passed else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatchain",
        description="Exact and Monte Carlo heat statistics for collision chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, cap: bool = True, tol: bool = False) -> None:
        p.add_argument("model", help="path to a JSON model document")
        p.add_argument("--out", help="write the report or export here")
        if cap:
            p.add_argument("--cap", type=int, default=None, help="enumeration path cap")
        if tol:
            p.add_argument("--tolerance", type=float, default=None)

    p = sub.add_parser("validate", help="unitarity and detailed-balance checks")
    common(p, cap=False, tol=True)
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("exact", help="write forward and backward joint heat laws")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(handler=_cmd_exact)

    p = sub.add_parser("verify", help="fluctuation-theorem and route checks")
    common(p, tol=True)
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("sample", help="Monte Carlo trajectory sampling")
    common(p, cap=False)
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None, help="sampler seed (defaults to master_seed)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump", help="write one JSON record per trajectory here")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("entropy", help="three-way average entropy production check")
    common(p, tol=True)
    p.set_defaults(handler=_cmd_entropy)

    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Run one command line; returns the exit code instead of exiting."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    started = time.perf_counter()
    try:
        code = args.handler(args)
    except (ModelError, EnumerationCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"elapsed: {time.perf_counter() - started:.3f}s")
    return code


def main() -> None:
    sys.exit(dispatch())
