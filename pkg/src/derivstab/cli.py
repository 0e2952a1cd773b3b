"""Scenario runner: build, extrapolate, check, and report.

A scenario is a strict JSON document (schema 1, unknown keys rejected)
naming an algebra, an exact map, perturbation models, a control function,
an extrapolation depth, and a list of checks. `run` executes it and writes
a canonical report atomically; the report is byte-identical across runs of
the same scenario, seed, and package version, so wall time goes to stderr,
never into the file.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 the
scenario could not be parsed, 3 construction or validation rejected the
configuration.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._linalg import ConvergenceError
from .algebra import (
    AlgebraDescriptor,
    AlgebraError,
    BimoduleDescriptor,
    Element,
    ModuleElement,
    algebra_from_json,
    coords_from_pairs,
    coords_to_pairs,
    make_matrix_algebra,
    make_self_bimodule,
)
from .control import Constant, ControlError, ControlFunction, Power, SeparablePowerSum
from .hyers import (
    HyersError,
    assemble_mu,
    default_depth,
    extract_delta_algebraic,
    identity_check_thresholds,
)
from .maps import (
    ApproximateMapPair,
    BoundedNoise,
    MapError,
    PerturbationSpec,
    PowerNoise,
    SlotTargeted,
    Zero,
    inner_generalized,
    right_multiplier,
    zero_pair,
)
from .verify import (
    BASIS_IDENTITY_TOL,
    CHECK_NAMES,
    ONE_AND_I,
    SampleConfig,
    VerifyError,
    certify_stability_bound,
    check_generalized_derivation,
    check_leibniz,
    check_star_preservation,
    full_t,
    residual_master_inequality,
    superstability_probe,
)

__all__ = ["main", "ScenarioError", "load_scenario", "run_scenario"]

_SCHEMA = 1
_PRESET_PACKAGE = "derivstab.scenarios"
_THREADS_ENV = "DERIVSTAB_THREADS"

_CHECK_HELP = {
    "master_inequality": "sampled excess of the five-term inequality over phi",
    "stability_bound": "||f(a) - mu(a)|| against the extrapolated control limit",
    "generalized_derivation": "basis residual of mu(cd) - c.mu(d) - delta(c).d",
    "leibniz": "basis residual of delta(cd) - c.delta(d) - delta(c).d",
    "star_preservation": "sampled star hypothesis plus basis star conclusion",
    "superstability": "homogeneity bound plus c-ladder growth profile",
}

_CONSTRUCTION_ERRORS = (AlgebraError, ControlError, MapError, HyersError,
                        VerifyError, ConvergenceError)


class ScenarioError(ValueError):
    """The scenario document is malformed (exit code 2)."""


def _fail(what: str, message: str) -> ScenarioError:
    return ScenarioError(f"{what}: {message}")


def _as_object(value, what: str) -> dict:
    if not isinstance(value, dict):
        raise _fail(what, f"expected an object, got {type(value).__name__}")
    return value


def _no_extra(obj: dict, allowed: set[str], what: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise _fail(what, f"unknown keys {extra}; allowed keys are {sorted(allowed)}")


def _require_key(obj: dict, key: str, what: str):
    if key not in obj:
        raise _fail(what, f"missing required key {key!r}")
    return obj[key]


def _as_int(value, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise _fail(what, f"expected an integer, got {value!r}")
    return value


def _as_number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(what, f"expected a number, got {value!r}")
    return float(value)


def _as_bool(value, what: str) -> bool:
    if not isinstance(value, bool):
        raise _fail(what, f"expected a boolean, got {value!r}")
    return value


def _as_text(value, what: str) -> str:
    if not isinstance(value, str):
        raise _fail(what, f"expected a string, got {value!r}")
    return value


def _parse_element(obj, algebra: AlgebraDescriptor, what: str) -> Element:
    try:
        coords = coords_from_pairs(obj, what)
    except AlgebraError as exc:
        raise _fail(what, str(exc)) from exc
    if coords.shape != (algebra.dim,):
        raise _fail(what, f"expected {algebra.dim} [re, im] pairs, "
                          f"got shape {coords.shape}")
    return Element(algebra, coords)


def _parse_algebra(obj, base_dir: str) -> AlgebraDescriptor:
    obj = _as_object(obj, "algebra")
    kind = _as_text(_require_key(obj, "kind", "algebra"), "algebra.kind")
    if kind == "matrix":
        _no_extra(obj, {"kind", "n"}, "algebra")
        n = _as_int(_require_key(obj, "n", "algebra"), "algebra.n")
        return make_matrix_algebra(n)
    if kind == "structure_constants":
        _no_extra(obj, {"kind", "file"}, "algebra")
        name = _as_text(_require_key(obj, "file", "algebra"), "algebra.file")
        path = name if os.path.isabs(name) else os.path.join(base_dir, name)
        if not os.path.exists(path):
            resource = importlib.resources.files(_PRESET_PACKAGE) / name
            if resource.is_file():
                return algebra_from_json(resource.read_text(encoding="utf-8"))
            raise _fail("algebra.file", f"no such file: {name!r}")
        with open(path, encoding="utf-8") as handle:
            return algebra_from_json(handle.read())
    raise _fail("algebra.kind", f"expected 'matrix' or 'structure_constants', "
                                f"got {kind!r}")


def _parse_exact_map(obj, bimod: BimoduleDescriptor):
    obj = _as_object(obj, "exact_map")
    kind = _as_text(_require_key(obj, "kind", "exact_map"), "exact_map.kind")
    algebra = bimod.algebra
    if kind == "inner":
        _no_extra(obj, {"kind", "x", "y"}, "exact_map")
        x = _parse_element(_require_key(obj, "x", "exact_map"), algebra, "exact_map.x")
        y = _parse_element(_require_key(obj, "y", "exact_map"), algebra, "exact_map.y")
        return inner_generalized(ModuleElement(bimod, x.coords),
                                 ModuleElement(bimod, y.coords))
    if kind == "right_multiplier":
        _no_extra(obj, {"kind", "z"}, "exact_map")
        z = _parse_element(_require_key(obj, "z", "exact_map"), algebra, "exact_map.z")
        return right_multiplier(z, bimod)
    if kind == "zero":
        _no_extra(obj, {"kind"}, "exact_map")
        return zero_pair(bimod)
    raise _fail("exact_map.kind", f"expected 'inner', 'right_multiplier', "
                                  f"or 'zero', got {kind!r}")


def _parse_perturbation(obj, what: str) -> PerturbationSpec:
    obj = _as_object(obj, what)
    kind = _as_text(_require_key(obj, "kind", what), f"{what}.kind")
    common = {"kind", "seed", "scale_mode"}
    kwargs = {}
    if "seed" in obj:
        kwargs["seed"] = _as_int(obj["seed"], f"{what}.seed")
    if "scale_mode" in obj:
        kwargs["scale_mode"] = _as_text(obj["scale_mode"], f"{what}.scale_mode")
    if kind == "zero":
        _no_extra(obj, common, what)
        return Zero(**kwargs)
    if kind == "bounded_noise":
        _no_extra(obj, common | {"epsilon"}, what)
        eps = _as_number(_require_key(obj, "epsilon", what), f"{what}.epsilon")
        return BoundedNoise(epsilon=eps, **kwargs)
    if kind == "power_noise":
        _no_extra(obj, common | {"beta", "p"}, what)
        beta = _as_number(_require_key(obj, "beta", what), f"{what}.beta")
        p = _as_number(_require_key(obj, "p", what), f"{what}.p")
        return PowerNoise(beta=beta, p=p, **kwargs)
    if kind == "slot_targeted":
        _no_extra(obj, common | {"slot", "inner"}, what)
        slot = _as_text(_require_key(obj, "slot", what), f"{what}.slot")
        inner = _parse_perturbation(_require_key(obj, "inner", what),
                                    f"{what}.inner")
        return SlotTargeted(slot=slot, inner=inner, **kwargs)
    raise _fail(f"{what}.kind", f"expected 'zero', 'bounded_noise', "
                                f"'power_noise', or 'slot_targeted', got {kind!r}")


def _parse_control(obj) -> ControlFunction:
    obj = _as_object(obj, "control")
    kind = _as_text(_require_key(obj, "kind", "control"), "control.kind")
    if kind == "constant":
        _no_extra(obj, {"kind", "epsilon"}, "control")
        return Constant(epsilon=_as_number(_require_key(obj, "epsilon", "control"),
                                           "control.epsilon"))
    if kind == "power":
        _no_extra(obj, {"kind", "beta", "p"}, "control")
        return Power(beta=_as_number(_require_key(obj, "beta", "control"),
                                     "control.beta"),
                     p=_as_number(_require_key(obj, "p", "control"), "control.p"))
    if kind == "separable_power_sum":
        _no_extra(obj, {"kind", "slots"}, "control")
        slots = _require_key(obj, "slots", "control")
        if not isinstance(slots, list) or len(slots) != 4:
            raise _fail("control.slots", "expected a list of four [beta, p] pairs")
        parsed = []
        for idx, pair in enumerate(slots):
            if not isinstance(pair, list) or len(pair) != 2:
                raise _fail(f"control.slots[{idx}]", "expected [beta, p]")
            parsed.append((_as_number(pair[0], f"control.slots[{idx}].beta"),
                           _as_number(pair[1], f"control.slots[{idx}].p")))
        return SeparablePowerSum(slots=tuple(parsed))
    raise _fail("control.kind", f"expected 'constant', 'power', or "
                                f"'separable_power_sum', got {kind!r}")


def _parse_lambda_set(obj) -> tuple[complex, ...]:
    obj = _as_object(obj, "lambda_set")
    kind = _as_text(_require_key(obj, "kind", "lambda_set"), "lambda_set.kind")
    if kind == "full_t":
        _no_extra(obj, {"kind", "k"}, "lambda_set")
        k = _as_int(_require_key(obj, "k", "lambda_set"), "lambda_set.k")
        if k < 1:
            raise _fail("lambda_set.k", f"expected a positive integer, got {k}")
        return full_t(k)
    if kind == "one_and_i":
        _no_extra(obj, {"kind"}, "lambda_set")
        return ONE_AND_I
    raise _fail("lambda_set.kind", f"expected 'full_t' or 'one_and_i', got {kind!r}")


def _parse_samples(obj) -> SampleConfig:
    if obj is None:
        return SampleConfig()
    obj = _as_object(obj, "samples")
    _no_extra(obj, {"count", "ladder", "zero_cd", "unitaries", "scale_max"},
              "samples")
    kwargs = {}
    if "count" in obj:
        kwargs["count"] = _as_int(obj["count"], "samples.count")
    if "ladder" in obj:
        kwargs["ladder"] = _as_bool(obj["ladder"], "samples.ladder")
    if "zero_cd" in obj:
        kwargs["zero_cd"] = _as_bool(obj["zero_cd"], "samples.zero_cd")
    if "unitaries" in obj:
        kwargs["unitaries"] = _as_int(obj["unitaries"], "samples.unitaries")
    if "scale_max" in obj:
        kwargs["scale_max"] = _as_int(obj["scale_max"], "samples.scale_max")
    return SampleConfig(**kwargs)


_SCENARIO_KEYS = {"schema", "name", "seed", "algebra", "bimodule", "exact_map",
                  "f_perturbation", "g_perturbation", "control", "N",
                  "lambda_set", "samples", "checks", "output"}


def load_scenario(path_or_preset: str) -> tuple[dict, str]:
    """Resolve a path or bundled preset name to (parsed JSON, base dir)."""
    if os.path.exists(path_or_preset):
        base_dir = os.path.dirname(os.path.abspath(path_or_preset))
        with open(path_or_preset, encoding="utf-8") as handle:
            text = handle.read()
    else:
        resource = importlib.resources.files(_PRESET_PACKAGE) / (
            path_or_preset + ".json")
        if not resource.is_file():
            raise _fail("scenario", f"{path_or_preset!r} is neither a file nor "
                                    f"a bundled preset")
        base_dir = ""
        text = resource.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail("scenario", f"invalid JSON: {exc}") from exc
    return _as_object(doc, "scenario"), base_dir


def _normalize_scenario(doc: dict) -> dict:
    """Validate types and fill defaults; construction happens later."""
    _no_extra(doc, _SCENARIO_KEYS, "scenario")
    if _require_key(doc, "schema", "scenario") != _SCHEMA:
        raise _fail("scenario.schema", f"expected {_SCHEMA}, got {doc['schema']!r}")
    out = {
        "schema": _SCHEMA,
        "name": _as_text(_require_key(doc, "name", "scenario"), "scenario.name"),
        "seed": _as_int(_require_key(doc, "seed", "scenario"), "scenario.seed"),
        "algebra": _as_object(_require_key(doc, "algebra", "scenario"), "algebra"),
        "bimodule": _as_text(_require_key(doc, "bimodule", "scenario"),
                             "scenario.bimodule"),
        "exact_map": _as_object(_require_key(doc, "exact_map", "scenario"),
                                "exact_map"),
        "f_perturbation": _as_object(_require_key(doc, "f_perturbation",
                                                  "scenario"), "f_perturbation"),
        "g_perturbation": _as_object(_require_key(doc, "g_perturbation",
                                                  "scenario"), "g_perturbation"),
        "control": _as_object(_require_key(doc, "control", "scenario"), "control"),
        "N": _require_key(doc, "N", "scenario"),
        "lambda_set": _as_object(_require_key(doc, "lambda_set", "scenario"),
                                 "lambda_set"),
        "samples": doc.get("samples"),
        "checks": _require_key(doc, "checks", "scenario"),
    }
    if out["bimodule"] != "self":
        raise _fail("scenario.bimodule", f"expected 'self', got {out['bimodule']!r}")
    n_value = out["N"]
    if n_value != "auto":
        n_value = _as_int(n_value, "scenario.N")
        if not 1 <= n_value <= 512:
            raise _fail("scenario.N", f"expected 'auto' or 1..512, got {n_value}")
        out["N"] = n_value
    checks = out["checks"]
    if not isinstance(checks, list) or not checks:
        raise _fail("scenario.checks", "expected a nonempty list of check names")
    for name in checks:
        if name not in CHECK_NAMES:
            raise _fail("scenario.checks", f"unknown check {name!r}; available: "
                                           f"{list(CHECK_NAMES)}")
    if len(set(checks)) != len(checks):
        raise _fail("scenario.checks", "duplicate check names")
    if "output" in doc:
        out["output"] = _as_text(doc["output"], "scenario.output")
    return out


class _BuiltScenario:
    """All constructed objects for one normalized scenario."""

    def __init__(self, norm: dict, base_dir: str):
        self.norm = norm
        self.algebra = _parse_algebra(norm["algebra"], base_dir)
        self.bimodule = make_self_bimodule(self.algebra)
        self.exact = _parse_exact_map(norm["exact_map"], self.bimodule)
        self.pair = ApproximateMapPair(
            exact=self.exact,
            f_perturbation=_parse_perturbation(norm["f_perturbation"],
                                               "f_perturbation"),
            g_perturbation=_parse_perturbation(norm["g_perturbation"],
                                               "g_perturbation"))
        self.control = _parse_control(norm["control"])
        self.depth = (default_depth(self.control) if norm["N"] == "auto"
                      else norm["N"])
        self.lambda_set = _parse_lambda_set(norm["lambda_set"])
        self.samples = _parse_samples(norm["samples"])
        self.checks = list(norm["checks"])
        self.seed = norm["seed"]

    def scenario_echo(self) -> dict:
        echo = {key: value for key, value in self.norm.items() if key != "output"}
        if self.samples is not None:
            echo["samples"] = {
                "count": self.samples.count,
                "ladder": self.samples.ladder,
                "zero_cd": self.samples.zero_cd,
                "unitaries": self.samples.unitaries,
                "scale_max": self.samples.scale_max,
            }
        echo["N"] = self.depth
        return echo


def _superstability_epsilon(control: ControlFunction) -> float:
    if not isinstance(control, Constant):
        raise VerifyError("the superstability check needs a constant control "
                          "function")
    return control.epsilon


def run_scenario(built: _BuiltScenario) -> dict:
    """Execute the scenario and return the report document."""
    assembled = assemble_mu(built.pair, built.depth, built.control)
    delta = extract_delta_algebraic(assembled)
    gen_budget, lei_budget = identity_check_thresholds(assembled, delta)
    rows = []
    for name in built.checks:
        if name == "master_inequality":
            rows.append(residual_master_inequality(
                built.pair, built.control, built.seed, built.samples,
                built.lambda_set))
        elif name == "stability_bound":
            rows.append(certify_stability_bound(
                built.pair, built.control, assembled, built.seed, built.samples))
        elif name == "generalized_derivation":
            rows.append(check_generalized_derivation(
                assembled.linear_map, delta.linear_map,
                threshold=max(gen_budget, BASIS_IDENTITY_TOL)))
        elif name == "leibniz":
            rows.append(check_leibniz(
                delta.linear_map, threshold=max(lei_budget, BASIS_IDENTITY_TOL)))
        elif name == "star_preservation":
            hypothesis, conclusion = check_star_preservation(
                built.pair, built.control, assembled, built.seed, built.samples)
            rows.extend([hypothesis, conclusion])
        elif name == "superstability":
            homogeneity, profile = superstability_probe(
                built.pair, _superstability_epsilon(built.control),
                16, 48, built.seed, built.samples)
            rows.extend([homogeneity, profile.as_report()])
        else:   # unreachable after normalization
            raise VerifyError(f"unknown check {name!r}")
    report = {
        "schema": _SCHEMA,
        "version": __version__,
        "scenario": built.scenario_echo(),
        "algebra_digest": built.algebra.digest,
        "mu": {"matrix": coords_to_pairs(assembled.linear_map.matrix)},
        "delta": {"matrix": coords_to_pairs(delta.linear_map.matrix)},
        "certificates": {
            "depth": built.depth,
            "mu_column_gaps": assembled.column_gaps.tolist(),
            "delta_column_gaps": delta.column_gaps.tolist(),
            "j_commutation_residual": assembled.j_commutation_residual,
            "generalized_derivation_budget": gen_budget,
            "leibniz_budget": lei_budget,
        },
        "checks": [row.as_dict() for row in rows],
    }
    report["all_passed"] = all(row["passed"] for row in report["checks"])
    return report


def _canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.{os.getpid()}.tmp")
    try:
        with open(tmp, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_threads_env() -> None:
    raw = os.environ.get(_THREADS_ENV)
    if raw is None:
        return
    try:
        value = int(raw)
    except ValueError:
        raise _fail(_THREADS_ENV, f"expected a positive integer, got {raw!r}")
    if value < 1:
        raise _fail(_THREADS_ENV, f"expected a positive integer, got {raw!r}")
    # Evaluation is sequential with a deterministic max-reduction; the cap
    # is accepted for compatibility and never increases parallelism.


def _cmd_run(args) -> int:
    _check_threads_env()
    doc, base_dir = load_scenario(args.scenario)
    norm = _normalize_scenario(doc)
    if args.seed is not None:
        norm["seed"] = args.seed
    built = _BuiltScenario(norm, base_dir)
    out_path = args.out or norm.get("output") or f"{norm['name']}.report.json"
    started = time.perf_counter()
    report = run_scenario(built)
    elapsed = time.perf_counter() - started
    _atomic_write(out_path, _canonical_json(report))
    print(f"wrote {out_path} in {elapsed:.2f}s", file=sys.stderr)
    for row in report["checks"]:
        status = "PASS" if row["passed"] else "FAIL"
        print(f"{status} {row['check']}: max_residual {row['max_residual']:.6e} "
              f"(threshold {row['threshold']:.6e}, {row['samples']} samples)")
    return 0 if report["all_passed"] else 1


def _cmd_validate(args) -> int:
    _check_threads_env()
    doc, base_dir = load_scenario(args.scenario)
    norm = _normalize_scenario(doc)
    built = _BuiltScenario(norm, base_dir)
    print(f"scenario {norm['name']!r} is valid:")
    print(f"  algebra: dim {built.algebra.dim}, norm {built.algebra.norm_kind}, "
          f"digest {built.algebra.digest[:16]}")
    print(f"  control: {type(built.control).__name__}, depth {built.depth}")
    print(f"  perturbations: f {type(built.pair.f_perturbation).__name__}, "
          f"g {type(built.pair.g_perturbation).__name__}")
    print(f"  checks: {', '.join(built.checks)}")
    return 0


def _cmd_list_checks(_args) -> int:
    for name in CHECK_NAMES:
        print(f"{name}: {_CHECK_HELP[name]}")
    return 0


def _cmd_render(args) -> int:
    try:
        with open(args.report, encoding="utf-8") as handle:
            report = json.load(handle)
    except OSError as exc:
        raise _fail("report", str(exc))
    except json.JSONDecodeError as exc:
        raise _fail("report", f"invalid JSON: {exc}")
    if not isinstance(report, dict) or report.get("schema") != _SCHEMA:
        raise _fail("report", "not a schema-1 report document")
    scenario = report.get("scenario", {})
    print(f"scenario: {scenario.get('name', '?')}   "
          f"version: {report.get('version', '?')}   "
          f"depth: {report.get('certificates', {}).get('depth', '?')}")
    header = f"{'check':34} {'status':6} {'max_residual':>14} {'threshold':>12} {'samples':>8}"
    print(header)
    print("-" * len(header))
    for row in report.get("checks", []):
        status = "PASS" if row.get("passed") else "FAIL"
        print(f"{row.get('check', '?'):34} {status:6} "
              f"{row.get('max_residual', float('nan')):>14.6e} "
              f"{row.get('threshold', float('nan')):>12.3e} "
              f"{row.get('samples', 0):>8}")
        witness = row.get("witness") or {}
        if row.get("check") == "stability_bound" and "deviation" in witness:
            print(f"{'':34} observed deviation {witness['deviation']:.6e} "
                  f"vs bound {witness['bound']:.6e}")
        if row.get("check") == "superstability_growth" and "slope" in witness:
            print(f"{'':34} log-log slope {witness['slope']:.4f}")
    print("result:", "PASS" if report.get("all_passed") else "FAIL")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="derivstab",
        description="Construct exact generalized derivations from approximate "
                    "ones and certify the claimed bounds and identities.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write its report")
    p_run.add_argument("scenario", help="scenario file path or bundled preset name")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="override the output path")
    p_run.set_defaults(handler=_cmd_run)

    p_val = sub.add_parser("validate", help="parse and construct a scenario "
                                            "without running checks")
    p_val.add_argument("scenario", help="scenario file path or bundled preset name")
    p_val.set_defaults(handler=_cmd_validate)

    p_list = sub.add_parser("list-checks", help="list available check names")
    p_list.set_defaults(handler=_cmd_list_checks)

    p_render = sub.add_parser("render", help="print a report as a table")
    p_render.add_argument("report", help="report JSON path")
    p_render.set_defaults(handler=_cmd_render)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _CONSTRUCTION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
