"""Jamming protocol: a third party turns a nonlocal box into a local one.

The intervention keeps every single-party marginal fixed, so neither receiver
alone can tell whether it happened.  The pair together can: comparing joint
statistics against the two hypotheses distinguishes jammed from unjammed.
That pair-level signal is only admissible when the light-cone geometry of
the spacetime module permits it.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boxes import (
    BipartiteBox,
    BoxFormatError,
    SignalingBoxError,
    is_local,
    is_no_signaling,
    marginal,
    outcome_index,
    pr_box,
    read_box,
    validate_box,
    write_box,
)
from .spacetime import (
    CausalConfig,
    Event,
    ScenarioFormatError,
    jamming_allowed,
    read_scenario,
    write_scenario,
)

__all__ = [
    "JammingFormatError",
    "JammingScenario",
    "admissible",
    "deduce_jammed",
    "jam",
    "pr_scenario",
    "read_jamming_scenario",
    "signal_to_individual",
    "signal_to_pair",
    "total_variation",
    "write_jamming_scenario",
]

MARGINAL_MATCH_TOL = 1e-9


class JammingFormatError(ValueError):
    """A jamming scenario file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total-variation distance between two distributions on the same support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    return float(np.abs(p - q).sum() / 2.0)


def jam(box: BipartiteBox) -> BipartiteBox:
    """Replace every joint block by the product of its own marginals.

    Single-party statistics are untouched; all correlation between the
    parties is erased.  Product boxes are fixed points.
    """
    validate_box(box.table)
    if not is_no_signaling(box):
        raise SignalingBoxError("jam requires a no-signaling box")
    table = np.empty((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            table[x, y] = np.outer(
                marginal(box, "alice", x), marginal(box, "bob", y)
            )
    return BipartiteBox(table)


@dataclass(frozen=True)
class JammingScenario:
    """One jamming setup: the box pair plus the spacetime geometry.

    Deliberately not validated on construction.  The signal measures below
    are defined for any pair of boxes, and validation_errors() reports
    everything wrong at once instead of refusing to build the object.
    """

    unjammed: BipartiteBox
    jammed: BipartiteBox
    j: Event
    a: Event
    b: Event
    cfg: CausalConfig

    def validation_errors(self) -> list[str]:
        errors: list[str] = []
        for label, box in (("unjammed", self.unjammed), ("jammed", self.jammed)):
            try:
                validate_box(box.table)
            except ValueError as exc:
                errors.append(f"{label} box is malformed: {exc}")
                continue
            if not is_no_signaling(box):
                errors.append(f"{label} box is signaling")
        if not errors:
            if is_local(self.unjammed):
                errors.append("unjammed box is local")
            if not is_local(self.jammed):
                errors.append("jammed box is not local")
            if signal_to_individual(self) > MARGINAL_MATCH_TOL:
                errors.append("jamming changes a single-party marginal")
        dims = {self.j.dimension, self.a.dimension, self.b.dimension}
        if len(dims) != 1:
            errors.append("events have mixed dimensions")
        return errors

    @property
    def is_valid(self) -> bool:
        return not self.validation_errors()


def signal_to_individual(s: JammingScenario) -> float:
    """Largest marginal disturbance any single receiver could ever see.

    Maximum over party, setting and (held fixed) other-party setting of the
    total-variation distance between that marginal before and after jamming.
    Zero for a proper jam.
    """
    worst = 0.0
    for party in ("alice", "bob"):
        for setting in range(2):
            for other in range(2):
                before = marginal(s.unjammed, party, setting, other_setting=other)
                after = marginal(s.jammed, party, setting, other_setting=other)
                worst = max(worst, total_variation(before, after))
    return worst


def signal_to_pair(s: JammingScenario) -> float:
    """Distinguishability of the joint statistics: max block-wise TV distance.

    Positive whenever the receivers, comparing notes, could in principle
    tell jammed from unjammed at some setting pair.
    """
    worst = 0.0
    for x in range(2):
        for y in range(2):
            worst = max(
                worst,
                total_variation(s.unjammed.table[x, y], s.jammed.table[x, y]),
            )
    return worst


def admissible(
    s: JammingScenario,
    signal_tol: float = 1e-12,
    geometry_tol: float = 1e-9,
) -> bool:
    """A pair-level signal is permitted only under the light-cone condition.

    True when there is no pair-level signal at all, or when the overlap of
    the receivers' future cones lies inside the jammer's future cone.
    """
    if signal_to_pair(s) <= signal_tol:
        return True
    return jamming_allowed(s.j, s.a, s.b, s.cfg, tol=geometry_tol)


def deduce_jammed(
    s: JammingScenario, x: int, y: int, outcomes: Sequence[tuple[int, int]]
) -> bool:
    """Classify observed rounds at setting pair (x, y) by log-likelihood.

    outcomes is a sequence of (a, b) pairs in {+1, -1}.  Returns True when
    the jammed hypothesis fits better.  An outcome impossible under one
    hypothesis sends that hypothesis to -inf; ties resolve to unjammed.
    """
    ll_unjammed = 0.0
    ll_jammed = 0.0
    for a, b in outcomes:
        ia, ib = outcome_index(a), outcome_index(b)
        pu = s.unjammed.table[x, y, ia, ib]
        pj = s.jammed.table[x, y, ia, ib]
        ll_unjammed += math.log(pu) if pu > 0.0 else -math.inf
        ll_jammed += math.log(pj) if pj > 0.0 else -math.inf
    return ll_jammed > ll_unjammed


def pr_scenario(j: Event, a: Event, b: Event, cfg: CausalConfig) -> JammingScenario:
    """The canonical scenario: a PR box jammed down to the uniform box."""
    box = pr_box()
    return JammingScenario(unjammed=box, jammed=jam(box), j=j, a=a, b=b, cfg=cfg)


# ---------------------------------------------------------------------------
# scenario files
#
# Layout, in order, ignoring blank and # comment lines:
#   unjammed = <box file path, relative to this file>
#   jammed = <box file path> | product
#   c = <speed>
#   <label> <t> <x> [y] [z]      for labels j, a, b exactly
# "product" means the jammed box is jam(unjammed).


def write_jamming_scenario(s: JammingScenario, path: str | os.PathLike) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    stem = os.path.splitext(os.path.basename(path))[0]

    unjammed_name = f"{stem}.unjammed.box"
    write_box(s.unjammed, os.path.join(directory, unjammed_name))
    if np.array_equal(s.jammed.table, jam(s.unjammed).table):
        jammed_ref = "product"
    else:
        jammed_ref = f"{stem}.jammed.box"
        write_box(s.jammed, os.path.join(directory, jammed_ref))

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"unjammed = {unjammed_name}\n")
        fh.write(f"jammed = {jammed_ref}\n")
        buf = io.StringIO()
        write_scenario(s.cfg, {"j": s.j, "a": s.a, "b": s.b}, buf)
        fh.write(buf.getvalue())


def _next_content_line(lines: list[str], start: int) -> int:
    i = start
    while i < len(lines):
        stripped = lines[i].strip()
        if stripped and not stripped.startswith("#"):
            return i
        i += 1
    return -1


def read_jamming_scenario(path: str | os.PathLike) -> JammingScenario:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    refs: dict[str, str] = {}
    cursor = 0
    for key in ("unjammed", "jammed"):
        i = _next_content_line(lines, cursor)
        if i < 0:
            raise JammingFormatError(f"missing '{key} =' line")
        parts = lines[i].split("=", 1)
        if len(parts) != 2 or parts[0].strip() != key:
            raise JammingFormatError(f"expected '{key} = <ref>'", i + 1)
        value = parts[1].strip()
        if not value:
            raise JammingFormatError(f"empty {key} reference", i + 1)
        refs[key] = value
        cursor = i + 1

    block_start = _next_content_line(lines, cursor)
    if block_start < 0:
        raise JammingFormatError("missing spacetime block")
    block = "\n".join(lines[block_start:]) + "\n"
    try:
        cfg, events = read_scenario(io.StringIO(block))
    except ScenarioFormatError as exc:
        line = exc.line + block_start if exc.line is not None else None
        raise JammingFormatError(str(exc), line) from exc
    if set(events) != {"j", "a", "b"}:
        raise JammingFormatError(
            f"expected events labeled j, a, b; got {sorted(events)}"
        )

    def load_box(ref: str, key: str) -> BipartiteBox:
        box_path = os.path.join(directory, ref)
        try:
            return read_box(box_path)
        except OSError as exc:
            raise JammingFormatError(f"cannot read {key} box {ref!r}: {exc}") from exc
        except BoxFormatError as exc:
            raise JammingFormatError(f"{key} box {ref!r}: {exc}") from exc

    unjammed = load_box(refs["unjammed"], "unjammed")
    if refs["jammed"] == "product":
        jammed = jam(unjammed)
    else:
        jammed = load_box(refs["jammed"], "jammed")
    return JammingScenario(
        unjammed=unjammed,
        jammed=jammed,
        j=events["j"],
        a=events["a"],
        b=events["b"],
        cfg=cfg,
    )
