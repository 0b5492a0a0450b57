"""Named, seeded experiment runs producing deterministic reports.

Each command wires a few core operations together, echoes its full
configuration (defaults filled in), reports derived quantities, and
evaluates pass/fail checks against the relevant bound.  Reports are
rendered to CSV or JSON lines with stable ordering and repr-exact floats,
so identical configs give byte-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import boxes, jamming, modular, polytope, quantum, spacetime

__all__ = [
    "COMMANDS",
    "ConfigError",
    "Report",
    "render_report",
    "run",
    "sweep",
]

Scalar = bool | int | float | str


class ConfigError(ValueError):
    """The run configuration cannot be executed as given."""


@dataclass(frozen=True)
class Report:
    """One experiment's inputs, derived values, and bound checks."""

    command: str
    config: dict[str, Scalar | None]
    values: dict[str, Scalar]
    checks: dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: type
    default: Scalar
    choices: tuple[Scalar, ...] | None = None


@dataclass(frozen=True)
class CommandSpec:
    params: tuple[ParamSpec, ...]
    stochastic: bool
    handler: Callable[..., tuple[dict, dict]]


def _coerce(spec: ParamSpec, value: Scalar) -> Scalar:
    if spec.kind is bool:
        if isinstance(value, bool):
            coerced: Scalar = value
        elif isinstance(value, str) and value.lower() in ("true", "false"):
            coerced = value.lower() == "true"
        else:
            raise ConfigError(f"{spec.name} must be true or false, got {value!r}")
    elif spec.kind is int:
        if isinstance(value, bool) or not (
            isinstance(value, int)
            or (isinstance(value, float) and value.is_integer())
            or isinstance(value, str)
        ):
            raise ConfigError(f"{spec.name} must be an integer, got {value!r}")
        try:
            coerced = int(value)
        except ValueError:
            raise ConfigError(f"{spec.name} must be an integer, got {value!r}")
    elif spec.kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"{spec.name} must be a number, got {value!r}")
        try:
            coerced = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{spec.name} must be a number, got {value!r}")
    else:
        coerced = str(value)
    if spec.choices is not None and coerced not in spec.choices:
        raise ConfigError(
            f"{spec.name} must be one of {list(spec.choices)}, got {coerced!r}"
        )
    return coerced


# ---------------------------------------------------------------------------
# command handlers


def _run_chsh(p: dict, rng) -> tuple[dict, dict]:
    box = quantum.quantum_box(
        quantum.singlet(), p["a0"], p["a1"], p["b0"], p["b1"]
    )
    variants = boxes.chsh_all_variants(box)
    max_abs = float(np.max(np.abs(variants)))
    values = {
        "chsh_value": boxes.chsh_value(box),
        "max_abs_variant": max_abs,
        "local_bound": boxes.LOCAL_BOUND,
        "quantum_bound": boxes.QUANTUM_BOUND,
        "exceeds_local_bound": max_abs > boxes.LOCAL_BOUND + 1e-9,
    }
    checks = {
        "within_quantum_bound": max_abs <= boxes.QUANTUM_BOUND + 1e-9,
        "no_signaling": boxes.is_no_signaling(box),
    }
    return values, checks


def _run_prbox(p: dict, rng) -> tuple[dict, dict]:
    noise = p["noise"]
    pure = boxes.pr_box_variant(p["alpha"], p["beta"], p["gamma"])
    box = boxes.mix([pure, boxes.uniform_box()], [1.0 - noise, noise])
    variants = boxes.chsh_all_variants(box)
    max_abs = float(np.max(np.abs(variants)))
    bias = max(
        float(np.max(np.abs(boxes.marginal(box, party, setting) - 0.5)))
        for party in ("alice", "bob")
        for setting in (0, 1)
    )
    slack = polytope.local_mixture_slack(box)
    # the noisy box sits on the segment toward the uniform box, so its
    # distance to the local set is the excess over the facet, spread over
    # the 16 table entries
    expected_slack = max(0.0, max_abs - boxes.LOCAL_BOUND) / 16.0
    values = {
        "chsh_value": boxes.chsh_value(box),
        "max_abs_variant": max_abs,
        "marginal_bias": bias,
        "lp_slack": slack,
        "algebraic_bound": boxes.ALGEBRAIC_BOUND,
    }
    checks = {
        "no_signaling_exact": boxes.is_no_signaling(box, tol=0.0),
        "uniform_marginals_exact": bias == 0.0,
        "chsh_matches_mixture": abs(
            max_abs - boxes.ALGEBRAIC_BOUND * (1.0 - noise)
        )
        <= 1e-9,
        "lp_slack_matches_mixture": abs(slack - expected_slack) <= 1e-7,
    }
    if noise == 0.0:
        checks["reaches_algebraic_bound"] = max_abs == boxes.ALGEBRAIC_BOUND
        checks["nonlocal_by_lp"] = not polytope.in_local_polytope(box)
    return values, checks


def _run_tsirelson(p: dict, rng) -> tuple[dict, dict]:
    result = quantum.tsirelson_optimize(
        resolution=p["resolution"], refine_iters=p["refine"]
    )
    values = {
        "s_max": result.s_max,
        "grid_max": result.grid_max,
        "angle_a0": result.angles[0],
        "angle_a1": result.angles[1],
        "angle_b0": result.angles[2],
        "angle_b1": result.angles[3],
        "quantum_bound": quantum.QUANTUM_BOUND,
    }
    checks = {
        "reaches_quantum_bound": abs(result.s_max - quantum.QUANTUM_BOUND) <= 1e-6,
        "grid_within_quantum_bound": result.grid_max
        <= quantum.QUANTUM_BOUND + 1e-9,
    }
    return values, checks


_GEOMETRIES = {
    # jammer at the origin: the receivers' overlap starts inside its cone
    "a": spacetime.Event(0.0, (0.0,)),
    # jammer far in the future: the overlap has already begun
    "b": spacetime.Event(10.0, (0.0,)),
}


def _run_jamming(p: dict, rng) -> tuple[dict, dict]:
    cfg = spacetime.CausalConfig(c=p["c"])
    j = _GEOMETRIES[p["geometry"]]
    a = spacetime.Event(1.0, (-5.0,))
    b = spacetime.Event(1.0, (5.0,))
    s = jamming.pr_scenario(j, a, b, cfg)
    allowed = spacetime.jamming_allowed(j, a, b, cfg)
    expected = p["geometry"] == "a"
    values = {
        "geometry": p["geometry"],
        "signal_to_individual": jamming.signal_to_individual(s),
        "signal_to_pair": jamming.signal_to_pair(s),
        "min_slack": spacetime.min_jamming_slack(j, a, b, cfg),
        "jamming_allowed": allowed,
        "admissible": jamming.admissible(s),
    }
    checks = {
        "scenario_valid": s.is_valid,
        "marginals_preserved": values["signal_to_individual"] <= 1e-9,
        "admissible_matches_geometry": values["admissible"] == expected,
    }
    if p["falsifier_samples"] > 0:
        if rng is None:
            raise ConfigError("jamming with falsifier_samples requires a seed")
        witness = spacetime.containment_falsifier(
            j, a, b, cfg, samples=p["falsifier_samples"], rng=rng
        )
        values["falsifier_found_violation"] = witness is not None
        checks["falsifier_agrees"] = (witness is None) == allowed
    return values, checks


def _run_ghz(p: dict, rng) -> tuple[dict, dict]:
    basis = p["jim_basis"]
    transcript = quantum.ghz_jamming_run(basis, p["rounds"], rng)
    outcomes = np.array(transcript)
    jim, alice, bob = outcomes[:, 0], outcomes[:, 1], outcomes[:, 2]
    product_fraction = float(np.mean(alice * bob == -jim))
    pair_correlation = float(np.mean(alice * bob))
    # marginal from the state itself: Jim's choice cancels as an operator
    # identity before any arithmetic, so the halves come out exact
    alice_dist = quantum.marginal_distribution(
        quantum.ghz(), quantum.SpinMeasurement(quantum.BASIS_ANGLES["x"], qubit=0)
    )
    alice_plus = float(alice_dist[0])
    exact = quantum.ghz_round_distribution(basis)
    alice_plus_conditional = sum(prob for (_, a, _), prob in exact.items() if a == 1)
    deduction = quantum.deduce_jim_basis(transcript)
    values = {
        "rounds": p["rounds"],
        "jim_basis": basis,
        "product_rule_fraction": product_fraction,
        "pair_correlation": pair_correlation,
        "alice_marginal_plus": alice_plus,
        "deduced_basis": deduction.basis,
        "deduction_error_probability": deduction.error_probability,
    }
    checks = {
        "alice_marginal_exact": alice_plus == 0.5,
        "conditional_marginal_consistent": abs(alice_plus_conditional - 0.5) <= 1e-12,
        "deduced_basis_correct": deduction.basis == basis,
    }
    if basis == "x":
        checks["product_rule_always"] = product_fraction == 1.0
    else:
        checks["correlation_below_noise"] = abs(pair_correlation) < 3.0 / math.sqrt(
            p["rounds"]
        )
    return values, checks


def _run_piston(p: dict, rng) -> tuple[dict, dict]:
    m = p["mass_ratio"] * p["big_mass"]
    exp = modular.PistonExperiment(
        m_A=m,
        m_B=m,
        M=p["big_mass"],
        p_A=p["p_a"],
        p_B=p["p_b"],
        L=p["length"],
        gap_fraction=p["gap_fraction"],
    )
    delta_with, trace = modular.piston_simulate(exp, release_particle=True)
    delta_without, _ = modular.piston_simulate(exp, release_particle=False)
    ratio = abs(delta_with) / exp.energy_shift_scale
    ball_energy = 0.5 * exp.m_B * (exp.p_B / exp.m_B) ** 2
    values = {
        "delta_e_b": delta_with,
        "delta_e_b_no_release": delta_without,
        "energy_shift_scale": exp.energy_shift_scale,
        "shift_ratio": ratio,
        "transit_time": exp.T,
        "detection_threshold": 4.0 * exp.m_A * exp.L * exp.p_B / (exp.M * exp.T),
        "collisions": len(trace),
    }
    checks = {
        "shift_matches_scale": abs(ratio - 1.0) <= 10.0 * p["mass_ratio"],
        "no_release_is_null": abs(delta_without) <= 1e-9 * ball_energy,
    }
    return values, checks


def _run_modular(p: dict, rng) -> tuple[dict, dict]:
    if p["dist_path"]:
        try:
            dist = modular.read_distribution(p["dist_path"])
        except (OSError, modular.DistributionFormatError) as exc:
            raise ConfigError(f"cannot load distribution: {exc}")
    else:
        n = p["bins"] * p["periods"]
        dist = modular.EnergyDistribution(p["grid_step"], np.full(n, 1.0 / n))
    cfg = modular.ModularConfig.from_grid(dist.grid_step, p["bins"])
    deltas = [k * dist.grid_step for k in range(cfg.bins)]
    check3 = modular.flatness_theorem_check(dist, cfg, deltas)
    sigma = modular.energy_std(dist)
    values = {
        "bins": cfg.bins,
        "e0": cfg.e0,
        "grid_points": dist.n_points,
        "flat": check3.flat,
        "invariant_under_all_shifts": check3.invariant_under_all,
        "energy_std": sigma,
        "support_width": modular.support_width(dist),
        "std_over_e0": sigma / cfg.e0,
    }
    if check3.flat:
        values["std_reaches_period"] = modular.flat_implies_uncertainty(dist, cfg)
    checks = {
        "flat_iff_invariant": check3.flat == check3.invariant_under_all,
        "residues_covered": check3.conclusive,
    }
    return values, checks


def _run_audit(p: dict, rng) -> tuple[dict, dict]:
    violations = modular.causality_audit(
        p["k"], p["trials"], rng, enforce=p["enforce"]
    )
    values = {
        "trials": p["trials"],
        "violations": violations,
        "k": p["k"],
        "enforce": p["enforce"],
    }
    checks = {"no_detection_before_arrival": violations == 0}
    return values, checks


COMMANDS: dict[str, CommandSpec] = {
    "chsh": CommandSpec(
        params=(
            ParamSpec("a0", float, 0.0),
            ParamSpec("a1", float, math.pi / 2),
            ParamSpec("b0", float, math.pi / 4),
            ParamSpec("b1", float, -math.pi / 4),
        ),
        stochastic=False,
        handler=_run_chsh,
    ),
    "prbox": CommandSpec(
        params=(
            ParamSpec("alpha", int, 0, choices=(0, 1)),
            ParamSpec("beta", int, 0, choices=(0, 1)),
            ParamSpec("gamma", int, 0, choices=(0, 1)),
            ParamSpec("noise", float, 0.0),
        ),
        stochastic=False,
        handler=_run_prbox,
    ),
    "tsirelson": CommandSpec(
        params=(
            ParamSpec("resolution", int, 24),
            ParamSpec("refine", int, 8),
        ),
        stochastic=False,
        handler=_run_tsirelson,
    ),
    "jamming": CommandSpec(
        params=(
            ParamSpec("geometry", str, "a", choices=("a", "b")),
            ParamSpec("c", float, 1.0),
            ParamSpec("falsifier_samples", int, 0),
        ),
        stochastic=False,
        handler=_run_jamming,
    ),
    "ghz": CommandSpec(
        params=(
            ParamSpec("rounds", int, 10_000),
            ParamSpec("jim_basis", str, "x", choices=("x", "z")),
        ),
        stochastic=True,
        handler=_run_ghz,
    ),
    "piston": CommandSpec(
        params=(
            ParamSpec("mass_ratio", float, 1e-3),
            ParamSpec("big_mass", float, 1e4),
            ParamSpec("p_a", float, 1.0),
            ParamSpec("p_b", float, 1.0),
            ParamSpec("length", float, 10.0),
            ParamSpec("gap_fraction", float, 1.0),
        ),
        stochastic=False,
        handler=_run_piston,
    ),
    "modular": CommandSpec(
        params=(
            ParamSpec("bins", int, 8),
            ParamSpec("periods", int, 4),
            ParamSpec("grid_step", float, 0.25),
            ParamSpec("dist_path", str, ""),
        ),
        stochastic=False,
        handler=_run_modular,
    ),
    "audit": CommandSpec(
        params=(
            ParamSpec("trials", int, 100_000),
            ParamSpec("k", float, modular.PLANCK),
            ParamSpec("enforce", bool, True),
        ),
        stochastic=True,
        handler=_run_audit,
    ),
}


def run(config: dict) -> Report:
    """Execute one command from a flat config dict.

    Recognized keys: command, seed, and the command's own parameters.
    Unknown keys are rejected.  Stochastic commands require a seed; it is
    echoed in the report either way so every report self-reproduces.
    """
    config = dict(config)
    command = config.pop("command", None)
    if command is None:
        raise ConfigError("config is missing 'command'")
    spec = COMMANDS.get(command)
    if spec is None:
        raise ConfigError(
            f"unknown command {command!r}; expected one of {sorted(COMMANDS)}"
        )
    seed = config.pop("seed", None)
    if seed is not None:
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        if not -(2**63) <= seed < 2**64:
            raise ConfigError(f"seed out of 64-bit range: {seed}")
    if spec.stochastic and seed is None:
        raise ConfigError(f"command {command!r} is stochastic and requires a seed")

    by_name = {p.name: p for p in spec.params}
    unknown = sorted(set(config) - set(by_name))
    if unknown:
        raise ConfigError(
            f"unknown parameters for {command!r}: {unknown};"
            f" allowed: {sorted(by_name)}"
        )
    params = {p.name: p.default for p in spec.params}
    for name, value in config.items():
        params[name] = _coerce(by_name[name], value)

    rng = np.random.default_rng(seed) if seed is not None else None
    try:
        values, checks = spec.handler(params, rng)
    except ConfigError:
        raise
    except (ValueError, modular.OrderingError) as exc:
        raise ConfigError(f"{command}: {exc}")
    return Report(
        command=command,
        config={"command": command, "seed": seed, **params},
        values={name: _pythonize(v) for name, v in values.items()},
        checks={name: bool(v) for name, v in checks.items()},
    )


def sweep(config: dict, parameter: str, values: list) -> str:
    """Run one command repeatedly, varying a single parameter.

    Returns a CSV table: the swept parameter first, then every report
    value and check column seen across the rows, sorted by name.  The
    seed, if any, is reused for every row.
    """
    command = config.get("command")
    spec = COMMANDS.get(command) if command is not None else None
    if spec is None:
        raise ConfigError(f"unknown command {command!r}")
    by_name = {p.name: p for p in spec.params}
    if parameter not in by_name:
        raise ConfigError(
            f"{command!r} has no parameter {parameter!r}; allowed: {sorted(by_name)}"
        )
    if not values:
        raise ConfigError("sweep needs at least one value")

    rows = []
    for value in values:
        coerced = _coerce(by_name[parameter], value)
        report = run({**config, parameter: coerced})
        rows.append((coerced, report))

    value_cols = sorted({name for _, r in rows for name in r.values})
    check_cols = sorted({name for _, r in rows for name in r.checks})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([parameter] + value_cols + [f"check_{c}" for c in check_cols])
    for swept, report in rows:
        row = [_format_value(swept)]
        row += [_format_value(report.values.get(c, "")) for c in value_cols]
        row += [_format_value(report.checks.get(c, "")) for c in check_cols]
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# rendering


def _pythonize(value):
    # numpy scalars are not JSON-serializable and repr differently
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report(report: Report, fmt: str) -> str:
    """Render to 'csv' (section,name,value) or 'jsonl' (one object per line)."""
    sections = [
        ("config", report.config),
        ("values", report.values),
        ("checks", report.checks),
    ]
    if fmt == "jsonl":
        lines = []
        for section, mapping in sections:
            for name in sorted(mapping):
                lines.append(
                    json.dumps(
                        {"section": section, "name": name, "value": mapping[name]},
                        sort_keys=True,
                    )
                )
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["section", "name", "value"])
        for section, mapping in sections:
            for name in sorted(mapping):
                writer.writerow([section, name, _format_value(mapping[name])])
        return buf.getvalue()
    raise ConfigError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
