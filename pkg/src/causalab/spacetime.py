"""Future light cones, causal joins and the jamming-geometry predicate.

Events live in d = 1, 2 or 3 spatial dimensions plus time, with a single
propagation speed c (or the nonrelativistic flag c = inf, which flattens
every future cone into the half-space t >= t_apex).  Cone membership is
inclusive: the null boundary counts.

The question this module answers: given a jammer event j and two receiver
events a and b, is the entire overlap of the a- and b-future-cones contained
in the future cone of j?  In 1+1 dimensions the overlap has a unique
earliest point, the causal join of a and b, and containment reduces to one
cone test there.  In higher dimensions the overlap's extreme points form a
seam where both cone boundaries are tight (its spatial projection is a
hyperboloid sheet with foci at the two apexes), and containment holds iff
the j-cone slack is nonnegative over that seam; we minimize the slack
numerically over a seam parameterization plus its asymptotic directions.

A Monte Carlo falsifier with no geometry knowledge beyond rejection sampling
provides the independent check: it hunts for overlap points outside the
j-cone in a bounding slab.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import IO

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "Event",
    "CausalConfig",
    "DegenerateOverlapError",
    "ScenarioFormatError",
    "in_future_cone",
    "causal_join_1d",
    "min_jamming_slack",
    "jamming_allowed",
    "containment_falsifier",
    "read_scenario",
    "write_scenario",
]


class DegenerateOverlapError(ValueError):
    """The cone overlap cannot be sampled (no finite bounding slab)."""


class ScenarioFormatError(ValueError):
    """A scenario file is malformed.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Event:
    """A labeled point of spacetime: time plus 1 to 3 spatial coordinates."""

    t: float
    pos: tuple[float, ...]

    def __post_init__(self):
        pos = self.pos
        if isinstance(pos, (int, float)):
            pos = (float(pos),)
        else:
            pos = tuple(float(x) for x in pos)
        if len(pos) not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {len(pos)}")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "pos", pos)

    @property
    def dimension(self) -> int:
        return len(self.pos)


@dataclass(frozen=True)
class CausalConfig:
    """Propagation speed.  c = math.inf selects the nonrelativistic limit."""

    c: float = 1.0

    def __post_init__(self):
        if not (self.c > 0.0):
            raise ValueError(f"c must be positive (or inf), got {self.c}")

    @property
    def infinite(self) -> bool:
        return math.isinf(self.c)


def _check_same_dimension(*events: Event) -> int:
    dims = {e.dimension for e in events}
    if len(dims) != 1:
        raise ValueError(f"events have mixed spatial dimensions {sorted(dims)}")
    return dims.pop()


def in_future_cone(apex: Event, p: Event, cfg: CausalConfig, tol: float = 0.0) -> bool:
    """Inclusive membership of p in the future cone of apex."""
    _check_same_dimension(apex, p)
    dt = p.t - apex.t
    if dt < -tol:
        return False
    if cfg.infinite:
        return True
    return cfg.c * dt - math.dist(p.pos, apex.pos) >= -tol


def causal_join_1d(a: Event, b: Event, cfg: CausalConfig) -> Event:
    """Earliest event in the overlap of the two future cones, d = 1 only.

    If one event already lies in the other's cone the join is that event;
    otherwise it is the crossing of the facing null rays.
    """
    if _check_same_dimension(a, b) != 1:
        raise ValueError("causal_join_1d requires 1-dimensional events")
    if in_future_cone(a, b, cfg):
        return b
    if in_future_cone(b, a, cfg):
        return a
    # neither contains the other, so c is finite and the positions differ
    left, right = (a, b) if a.pos[0] <= b.pos[0] else (b, a)
    xl, xr = left.pos[0], right.pos[0]
    x_join = (xl + xr) / 2.0 + cfg.c * (right.t - left.t) / 2.0
    t_join = left.t + (x_join - xl) / cfg.c
    return Event(t_join, (x_join,))


def _cone_slack(apex: Event, t: float, x: np.ndarray, c: float) -> float:
    return c * (t - apex.t) - float(np.linalg.norm(x - np.asarray(apex.pos)))


def _seam_min_slack(j: Event, a: Event, b: Event, cfg: CausalConfig) -> float:
    """Minimum j-cone slack over the seam of the a/b cone overlap, d >= 2.

    Preconditions: finite c and neither of a, b inside the other's cone, so
    the seam's spatial projection is a nondegenerate hyperboloid branch
    |x - xa| - |x - xb| = c (tb - ta) with foci at the two positions.
    """
    c = cfg.c
    xa = np.asarray(a.pos)
    xb = np.asarray(b.pos)
    xj = np.asarray(j.pos)
    d = xa.shape[0]

    kappa = c * (b.t - a.t)
    mid = (xa + xb) / 2.0
    focal = float(np.linalg.norm(xb - xa)) / 2.0
    axis = (xb - xa) / (2.0 * focal)
    a_h = abs(kappa) / 2.0
    b_sq = focal * focal - a_h * a_h
    # containment was excluded by the caller, so the branch is nondegenerate
    b_h = math.sqrt(max(b_sq, 0.0))
    sign = 1.0 if kappa >= 0.0 else -1.0

    # orthonormal completion of the axis
    helper = np.zeros(d)
    helper[int(np.argmin(np.abs(axis)))] = 1.0
    e1 = helper - np.dot(helper, axis) * axis
    e1 = e1 / np.linalg.norm(e1)
    if d == 3:
        e2 = np.cross(axis, e1)

    base = c * (a.t - j.t)

    def slack_of_points(points: np.ndarray) -> np.ndarray:
        d_a = np.linalg.norm(points - xa, axis=1)
        d_j = np.linalg.norm(points - xj, axis=1)
        return base + d_a - d_j

    s_grid = np.linspace(-12.0, 12.0, 481)
    if d == 2:
        pts = (
            mid
            + sign * a_h * np.cosh(s_grid)[:, None] * axis
            + b_h * np.sinh(s_grid)[:, None] * e1
        )
        params = s_grid[:, None]
    else:
        s_mesh, phi_mesh = np.meshgrid(
            np.linspace(0.0, 12.0, 161), np.linspace(0.0, 2.0 * math.pi, 72, endpoint=False)
        )
        s_flat = s_mesh.ravel()
        phi_flat = phi_mesh.ravel()
        w = np.outer(np.cos(phi_flat), e1) + np.outer(np.sin(phi_flat), e2)
        pts = (
            mid
            + sign * a_h * np.cosh(s_flat)[:, None] * axis
            + b_h * np.sinh(s_flat)[:, None] * w
        )
        params = np.column_stack([s_flat, phi_flat])

    values = slack_of_points(pts)
    best_idx = int(np.argmin(values))
    best = float(values[best_idx])

    # local refinement from the best grid point
    def objective(q: np.ndarray) -> float:
        if d == 2:
            s = q[0]
            point = mid + sign * a_h * math.cosh(s) * axis + b_h * math.sinh(s) * e1
        else:
            s, phi = q
            wdir = math.cos(phi) * e1 + math.sin(phi) * e2
            point = mid + sign * a_h * math.cosh(s) * axis + b_h * math.sinh(s) * wdir
        return base + float(np.linalg.norm(point - xa)) - float(np.linalg.norm(point - xj))

    res = minimize(objective, params[best_idx], method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14})
    if res.fun < best:
        best = float(res.fun)

    # asymptotic directions: unit u with u . axis = kappa / (2 focal)
    alpha = kappa / (2.0 * focal)
    beta = b_h / focal
    v = xj - xa
    v_axis = float(np.dot(v, axis))
    v_perp = v - v_axis * axis
    asymptotic = base + alpha * v_axis - beta * float(np.linalg.norm(v_perp))
    if asymptotic < best:
        best = asymptotic
    return best


def min_jamming_slack(j: Event, a: Event, b: Event, cfg: CausalConfig) -> float:
    """Minimum j-cone slack over the a/b cone overlap.

    Nonnegative iff the overlap is contained in j's future cone.  For finite
    c the slack is in length units (c dt - distance); for c = inf it
    degenerates to the time margin max(ta, tb) - tj.
    """
    _check_same_dimension(j, a, b)
    if cfg.infinite:
        return max(a.t, b.t) - j.t
    if in_future_cone(a, b, cfg):
        apex = b
    elif in_future_cone(b, a, cfg):
        apex = a
    else:
        apex = None
    if apex is not None:
        # whole-cone containment reduces to the apex by transitivity
        return _cone_slack(j, apex.t, np.asarray(apex.pos), cfg.c)
    if j.dimension == 1:
        join = causal_join_1d(a, b, cfg)
        return _cone_slack(j, join.t, np.asarray(join.pos), cfg.c)
    return _seam_min_slack(j, a, b, cfg)


def jamming_allowed(
    j: Event, a: Event, b: Event, cfg: CausalConfig, tol: float = 1e-9
) -> bool:
    """True iff every event causally reachable from both a and b lies in j's cone."""
    return min_jamming_slack(j, a, b, cfg) >= -tol


def containment_falsifier(
    j: Event,
    a: Event,
    b: Event,
    cfg: CausalConfig,
    samples: int,
    rng: np.random.Generator,
    violation_tol: float = 1e-12,
) -> Event | None:
    """Search the cone overlap for a point outside j's future cone.

    Rejection-samples candidate points in a bounding slab above the overlap
    and returns the first accepted point whose j-cone slack is below
    -violation_tol, or None.  Knows nothing about joins or seams, which
    makes it an independent check on jamming_allowed.

    Raises DegenerateOverlapError for c = inf, where the overlap is a
    spatially unbounded half-space and no bounding slab exists.
    """
    d = _check_same_dimension(j, a, b)
    if cfg.infinite:
        raise DegenerateOverlapError(
            "c = inf makes the cone overlap spatially unbounded; no bounding slab"
        )
    if samples <= 0:
        raise ValueError("samples must be positive")

    xa = np.asarray(a.pos)
    xb = np.asarray(b.pos)
    xj = np.asarray(j.pos)
    t_lo = max(a.t, b.t)
    t_span = t_lo - min(a.t, b.t)
    scene = max(
        float(np.linalg.norm(xa - xb)),
        float(np.linalg.norm(xa - xj)),
        float(np.linalg.norm(xb - xj)),
        1.0,
    )
    width = t_span + 2.0 * scene / cfg.c + 1.0
    t_hi = t_lo + width
    center = (xa + xb) / 2.0
    radius = cfg.c * (t_hi - min(a.t, b.t)) + 1.0

    chunk = 200_000
    remaining = samples
    while remaining > 0:
        n = min(chunk, remaining)
        remaining -= n
        ts = rng.uniform(t_lo, t_hi, size=n)
        xs = center + rng.uniform(-radius, radius, size=(n, d))
        slack_a = cfg.c * (ts - a.t) - np.linalg.norm(xs - xa, axis=1)
        slack_b = cfg.c * (ts - b.t) - np.linalg.norm(xs - xb, axis=1)
        inside = (slack_a >= 0.0) & (slack_b >= 0.0)
        if not np.any(inside):
            continue
        slack_j = cfg.c * (ts[inside] - j.t) - np.linalg.norm(xs[inside] - xj, axis=1)
        bad = np.nonzero(slack_j < -violation_tol)[0]
        if bad.size:
            k = int(bad[0])
            idx = int(np.nonzero(inside)[0][k])
            return Event(float(ts[idx]), tuple(xs[idx]))
    return None


# ---------------------------------------------------------------------------
# scenario files: a "c = <value|inf>" header, then "label t x [y z]" lines
# ---------------------------------------------------------------------------


def write_scenario(
    cfg: CausalConfig, events: dict[str, Event], destination: str | os.PathLike | IO[str]
) -> None:
    lines = ["# spacetime scenario: c header, then 'label t x [y z]' events"]
    lines.append(f"c = {'inf' if cfg.infinite else repr(cfg.c)}")
    for label, event in events.items():
        coords = " ".join(repr(x) for x in event.pos)
        lines.append(f"{label} {event.t!r} {coords}")
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_scenario(
    source: str | os.PathLike | IO[str],
) -> tuple[CausalConfig, dict[str, Event]]:
    """Parse a scenario file.  Malformed lines are rejected by number."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()

    cfg: CausalConfig | None = None
    events: dict[str, Event] = {}
    dimension: int | None = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if cfg is None:
            parts = [p.strip() for p in line.split("=")]
            if len(parts) != 2 or parts[0] != "c":
                raise ScenarioFormatError(
                    f"expected 'c = <value|inf>' header before events, got {line!r}",
                    line=lineno,
                )
            try:
                c = math.inf if parts[1] == "inf" else float(parts[1])
            except ValueError as exc:
                raise ScenarioFormatError(f"bad speed {parts[1]!r}: {exc}", line=lineno)
            try:
                cfg = CausalConfig(c=c)
            except ValueError as exc:
                raise ScenarioFormatError(str(exc), line=lineno)
            continue
        tokens = line.split()
        if not 3 <= len(tokens) <= 5:
            raise ScenarioFormatError(
                f"expected 'label t x [y z]', got {len(tokens)} fields", line=lineno
            )
        label = tokens[0]
        if label in events:
            raise ScenarioFormatError(f"duplicate event label {label!r}", line=lineno)
        try:
            values = [float(tok) for tok in tokens[1:]]
        except ValueError as exc:
            raise ScenarioFormatError(f"non-numeric coordinate: {exc}", line=lineno)
        event = Event(values[0], tuple(values[1:]))
        if dimension is None:
            dimension = event.dimension
        elif event.dimension != dimension:
            raise ScenarioFormatError(
                f"event {label!r} has dimension {event.dimension}, expected {dimension}",
                line=lineno,
            )
        events[label] = event
    if cfg is None:
        raise ScenarioFormatError("missing 'c = <value|inf>' header")
    if not events:
        raise ScenarioFormatError("scenario defines no events")
    return cfg, events
