"""Bipartite correlation boxes with two settings and two outcomes per side.

A box is the conditional table P(a, b | x, y) for outcomes a, b in {+1, -1}
and settings x, y in {0, 1}.  This module provides the standard zoo: the 16
deterministic local boxes, the maximally nonlocal box that wins the CHSH game
with certainty, convex mixing, sampling, marginals, the no-signaling check,
and the CHSH functional with all eight of its sign variants.

The three numbers that organize everything here are 2 (the local bound),
2*sqrt(2) (the quantum bound) and 4 (the algebraic maximum).  Deterministic
boxes and their mixtures stay at or below 2 on every variant; the maximally
nonlocal box reaches 4 exactly while still being exactly no-signaling.

Tables are numpy arrays of shape (2, 2, 2, 2) indexed [x, y, ia, ib] where
index 0 maps to outcome +1 and index 1 to outcome -1.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Sequence

import numpy as np

OUTCOMES = (1, -1)

LOCAL_BOUND = 2.0
QUANTUM_BOUND = 2.0 * np.sqrt(2.0)
ALGEBRAIC_BOUND = 4.0


class BoxValidationError(ValueError):
    """A table failed the box invariants (shape, positivity, normalization)."""


class SignalingBoxError(BoxValidationError):
    """An operation that presumes no-signaling was given a signaling box."""


class BoxFormatError(ValueError):
    """A box table file is malformed.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def outcome_index(outcome: int) -> int:
    if outcome == 1:
        return 0
    if outcome == -1:
        return 1
    raise ValueError(f"outcome must be +1 or -1, got {outcome!r}")


@dataclass(frozen=True, eq=False)
class BipartiteBox:
    """A validated conditional-probability table P(a, b | x, y)."""

    table: np.ndarray

    def __post_init__(self):
        if self.table.shape != (2, 2, 2, 2):
            raise BoxValidationError(
                f"box table must have shape (2, 2, 2, 2), got {self.table.shape}"
            )
        self.table.flags.writeable = False

    def prob(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.table[x, y, outcome_index(a), outcome_index(b)])

    def allclose(self, other: "BipartiteBox", tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.table - other.table) <= tol))


def validate_box(table, tol: float = 1e-9) -> BipartiteBox:
    """Check box invariants and return the table wrapped as a BipartiteBox.

    Entries must be nonnegative (within tol) and every (x, y) block must sum
    to 1 within tol.  Blocks that pass the check are renormalized so each sum
    is exactly 1.0; entry dust below zero is clipped.  Raises
    BoxValidationError otherwise.
    """
    arr = np.array(table, dtype=float)
    if arr.shape != (2, 2, 2, 2):
        raise BoxValidationError(
            f"box table must have shape (2, 2, 2, 2), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise BoxValidationError("box table contains non-finite entries")
    if np.any(arr < -tol):
        worst = float(arr.min())
        raise BoxValidationError(f"negative probability entry {worst}")
    arr[arr < 0.0] = 0.0
    for x in (0, 1):
        for y in (0, 1):
            s = float(arr[x, y].sum())
            if abs(s - 1.0) > tol:
                raise BoxValidationError(
                    f"block (x={x}, y={y}) sums to {s}, expected 1 within {tol}"
                )
            if s != 1.0:
                arr[x, y] /= s
    return BipartiteBox(arr)


def marginal(
    box: BipartiteBox, party: str, setting: int, other_setting: int | None = None
) -> np.ndarray:
    """Outcome distribution (p_plus, p_minus) for one party at one setting.

    party is "alice" or "bob".  For a no-signaling box the result does not
    depend on the other party's setting; other_setting=None averages the two
    slices (their common value in that case), an explicit 0 or 1 selects one
    slice, which is what signaling detectors compare.
    """
    if party not in ("alice", "bob"):
        raise ValueError(f"party must be 'alice' or 'bob', got {party!r}")
    if setting not in (0, 1):
        raise ValueError(f"setting must be 0 or 1, got {setting!r}")
    t = box.table
    if party == "alice":
        blocks = [t[setting, oy].sum(axis=1) for oy in (0, 1)]
    else:
        blocks = [t[ox, setting].sum(axis=0) for ox in (0, 1)]
    if other_setting is None:
        return (blocks[0] + blocks[1]) / 2.0
    if other_setting not in (0, 1):
        raise ValueError(f"other_setting must be 0, 1 or None, got {other_setting!r}")
    return blocks[other_setting]


def is_no_signaling(box: BipartiteBox, tol: float = 1e-9) -> bool:
    """True iff each party's marginals are independent of the other's setting."""
    for party in ("alice", "bob"):
        for setting in (0, 1):
            m0 = marginal(box, party, setting, other_setting=0)
            m1 = marginal(box, party, setting, other_setting=1)
            if np.max(np.abs(m0 - m1)) > tol:
                return False
    return True


def correlation(box: BipartiteBox, x: int, y: int) -> float:
    """Expectation of the product a*b at settings (x, y)."""
    t = box.table[x, y]
    return float(t[0, 0] - t[0, 1] - t[1, 0] + t[1, 1])


def chsh_value(box: BipartiteBox) -> float:
    """The signed combination C(0,0) + C(0,1) + C(1,0) - C(1,1).

    Callers interested in the bound hierarchy take the absolute value, or use
    chsh_all_variants to scan every placement of the minus sign.
    """
    return (
        correlation(box, 0, 0)
        + correlation(box, 0, 1)
        + correlation(box, 1, 0)
        - correlation(box, 1, 1)
    )


def chsh_all_variants(box: BipartiteBox) -> np.ndarray:
    """All 8 CHSH combinations: minus sign at each setting pair, then negated.

    Order: minus at (0,0), (0,1), (1,0), (1,1), followed by the four
    negations in the same order.  chsh_value equals element 3.
    """
    c = np.array(
        [
            correlation(box, 0, 0),
            correlation(box, 0, 1),
            correlation(box, 1, 0),
            correlation(box, 1, 1),
        ]
    )
    variants = []
    for k in range(4):
        signs = np.ones(4)
        signs[k] = -1.0
        variants.append(float(signs @ c))
    variants.extend([-v for v in variants])
    return np.array(variants)


def deterministic_boxes() -> list[BipartiteBox]:
    """The 16 local deterministic boxes a = f(x), b = g(y).

    Enumerated by the outcome pairs (f(0), f(1)) and (g(0), g(1)); both
    parties answer deterministically and independently, so every CHSH variant
    sits exactly on the local bound 2 in absolute value.
    """
    boxes = []
    for a0 in OUTCOMES:
        for a1 in OUTCOMES:
            for b0 in OUTCOMES:
                for b1 in OUTCOMES:
                    table = np.zeros((2, 2, 2, 2))
                    f = (a0, a1)
                    g = (b0, b1)
                    for x in (0, 1):
                        for y in (0, 1):
                            table[x, y, outcome_index(f[x]), outcome_index(g[y])] = 1.0
                    boxes.append(BipartiteBox(table))
    return boxes


def pr_box() -> BipartiteBox:
    """The maximally nonlocal no-signaling box.

    Outcomes are perfectly correlated at settings (0,0), (0,1), (1,0) and
    perfectly anticorrelated at (1,1); within each block the two allowed
    outcome pairs are equally likely, so both marginals are uniform.  The
    CHSH value is exactly 4 and the box is exactly no-signaling.
    """
    return pr_box_variant(0, 0, 0)


def pr_box_variant(alpha: int, beta: int, gamma: int) -> BipartiteBox:
    """One of the 8 extremal nonlocal boxes: a xor b = x*y xor ax xor by xor g.

    In bit form (bit 0 for outcome +1, bit 1 for -1) the allowed outcome
    pairs satisfy the xor condition above, each with probability 1/2.
    pr_box_variant(0, 0, 0) is the canonical maximally nonlocal box.
    """
    if {alpha, beta, gamma} - {0, 1}:
        raise ValueError("alpha, beta, gamma must be bits")
    table = np.zeros((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            target = (x * y) ^ (alpha * x) ^ (beta * y) ^ gamma
            for ia in (0, 1):
                ib = ia ^ target
                table[x, y, ia, ib] = 0.5
    return BipartiteBox(table)


def uniform_box() -> BipartiteBox:
    """Outcomes uniform and independent at every setting pair."""
    return BipartiteBox(np.full((2, 2, 2, 2), 0.25))


def is_local(box: BipartiteBox, tol: float = 1e-6) -> bool:
    """Membership in the local polytope, decided by the CHSH facets.

    For no-signaling boxes with binary settings and outcomes, positivity plus
    the eight CHSH inequalities characterize the local set, so the test is
    max |variant| <= 2 + tol.  Signaling boxes are refused (the facet
    characterization does not apply to them): SignalingBoxError.
    """
    if not is_no_signaling(box, tol=tol):
        raise SignalingBoxError("is_local requires a no-signaling box")
    return float(np.max(np.abs(chsh_all_variants(box)))) <= LOCAL_BOUND + tol


def product_determination(box: BipartiteBox, x: int) -> float:
    """Product C(x,0) * C(x,1) of Bob's two correlations at Alice setting x.

    For the maximally nonlocal box this is +1 at x=0 and -1 at x=1: no choice
    of the pair (C(x,0), C(x,1)) with a fixed product reproduces both rows,
    which is the obstruction to determinism arguments that multiply
    correlations independently.
    """
    return correlation(box, x, 0) * correlation(box, x, 1)


def mix(boxes: Sequence[BipartiteBox], weights: Sequence[float], tol: float = 1e-9) -> BipartiteBox:
    """Convex combination of boxes.  Weights must be nonnegative and sum to 1."""
    if len(boxes) != len(weights):
        raise ValueError("boxes and weights must have the same length")
    if len(boxes) == 0:
        raise ValueError("mix of zero boxes")
    w = np.asarray(weights, dtype=float)
    if np.any(w < -tol):
        raise ValueError(f"negative mixing weight {float(w.min())}")
    if abs(float(w.sum()) - 1.0) > tol:
        raise ValueError(f"mixing weights sum to {float(w.sum())}, expected 1")
    table = np.zeros((2, 2, 2, 2))
    for box, wi in zip(boxes, w):
        table = table + wi * box.table
    return validate_box(table, tol=tol)


def sample(box: BipartiteBox, x: int, y: int, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one outcome pair (a, b) at settings (x, y)."""
    if x not in (0, 1) or y not in (0, 1):
        raise ValueError(f"settings must be bits, got ({x!r}, {y!r})")
    probs = box.table[x, y].reshape(4)
    idx = int(rng.choice(4, p=probs / probs.sum()))
    return OUTCOMES[idx // 2], OUTCOMES[idx % 2]


# ---------------------------------------------------------------------------
# plain-text serialization: 16 lines of "x y a b p"
# ---------------------------------------------------------------------------


def write_box(box: BipartiteBox, destination: str | os.PathLike | IO[str]) -> None:
    """Write the 16-line tabular form, one "x y a b p" record per line."""
    lines = ["# box table: x y a b p"]
    for x in (0, 1):
        for y in (0, 1):
            for a in OUTCOMES:
                for b in OUTCOMES:
                    lines.append(f"{x} {y} {a} {b} {box.prob(a, b, x, y)!r}")
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


def _parse_probability(token: str) -> float:
    if "/" in token:
        return float(Fraction(token))
    return float(token)


def read_box(source: str | os.PathLike | IO[str], tol: float = 1e-9) -> BipartiteBox:
    """Parse a 16-line box table.  Malformed lines are rejected by number.

    Accepts decimal or rational (p/q) probabilities, blank lines and
    #-comments.  All 16 (x, y, a, b) combinations must appear exactly once.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()

    table = np.zeros((2, 2, 2, 2))
    seen: dict[tuple[int, int, int, int], int] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 5:
            raise BoxFormatError(
                f"expected 5 fields 'x y a b p', got {len(tokens)}", line=lineno
            )
        try:
            x = int(tokens[0])
            y = int(tokens[1])
            a = int(tokens[2])
            b = int(tokens[3])
        except ValueError as exc:
            raise BoxFormatError(f"non-integer setting or outcome: {exc}", line=lineno)
        if x not in (0, 1) or y not in (0, 1):
            raise BoxFormatError(f"settings must be 0 or 1, got {x} {y}", line=lineno)
        if a not in OUTCOMES or b not in OUTCOMES:
            raise BoxFormatError(f"outcomes must be +1 or -1, got {a} {b}", line=lineno)
        try:
            p = _parse_probability(tokens[4])
        except (ValueError, ZeroDivisionError) as exc:
            raise BoxFormatError(f"bad probability {tokens[4]!r}: {exc}", line=lineno)
        key = (x, y, a, b)
        if key in seen:
            raise BoxFormatError(
                f"duplicate record for x={x} y={y} a={a} b={b}"
                f" (first seen on line {seen[key]})",
                line=lineno,
            )
        seen[key] = lineno
        table[x, y, outcome_index(a), outcome_index(b)] = p

    if len(seen) != 16:
        missing = [
            f"x={x} y={y} a={a} b={b}"
            for x in (0, 1)
            for y in (0, 1)
            for a in OUTCOMES
            for b in OUTCOMES
            if (x, y, a, b) not in seen
        ]
        raise BoxFormatError(f"missing records: {', '.join(missing)}")
    try:
        return validate_box(table, tol=tol)
    except BoxValidationError as exc:
        raise BoxFormatError(str(exc))


def box_to_text(box: BipartiteBox) -> str:
    buf = io.StringIO()
    write_box(box, buf)
    return buf.getvalue()


def box_from_text(text: str, tol: float = 1e-9) -> BipartiteBox:
    return read_box(io.StringIO(text), tol=tol)
