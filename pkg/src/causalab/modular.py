"""Modular energy on a discrete grid, plus the piston double-collision model.

Energy random variables live on a commensurate grid k * grid_step, so
folding modulo a period E0 = bins * grid_step is an exact index operation
and the flatness criterion below is an exact theorem, not an approximate
one: the folded distribution is flat iff it is invariant under every
on-grid exchange of energy.

The piston half of the module is classical mechanics.  A ball reflects
twice off a free piston assembly; a particle released down the shaft
strikes the piston between those reflections and shifts the ball's final
energy by about 4 p_A p_B / M.  An audit then checks that given the
uncertainty-product constraint, the shift is never detectable before the
particle could have arrived.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, NamedTuple, Sequence

import numpy as np

__all__ = [
    "PLANCK",
    "CollisionEvent",
    "DistributionFormatError",
    "EnergyDistribution",
    "FlatnessCheck",
    "GridError",
    "ModularConfig",
    "OrderingError",
    "PistonExperiment",
    "TraceFormatError",
    "causality_audit",
    "detection_before_arrival",
    "detection_condition",
    "distribution_from_text",
    "distribution_to_text",
    "energy_std",
    "flat_implies_uncertainty",
    "flatness_theorem_check",
    "is_flat",
    "modular_reduce",
    "piston_simulate",
    "read_distribution",
    "read_trace",
    "shift",
    "sum_distribution",
    "support_width",
    "uncertainty_product",
    "write_distribution",
    "write_trace",
]

PLANCK = 6.62607015e-34  # J*s, the default action constant


class GridError(ValueError):
    """An energy does not sit on the distribution's grid."""


class OrderingError(RuntimeError):
    """The simulated collision sequence differs from the required one."""


class DistributionFormatError(ValueError):
    """An energy-distribution file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TraceFormatError(ValueError):
    """A collision-trace file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# ---------------------------------------------------------------------------
# distributions and modular arithmetic


@dataclass(frozen=True)
class EnergyDistribution:
    """Probabilities over energies k * grid_step for k = 0 .. K-1."""

    grid_step: float
    probabilities: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.grid_step) and self.grid_step > 0.0):
            raise ValueError(f"grid_step must be positive, got {self.grid_step!r}")
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probabilities must be a nonempty 1-d array")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite")
        if np.any(probs < 0.0):
            raise ValueError(f"negative probability {probs.min()!r}")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probabilities", probs)

    @property
    def n_points(self) -> int:
        return int(self.probabilities.size)

    @property
    def energies(self) -> np.ndarray:
        return np.arange(self.n_points) * self.grid_step

    def allclose(self, other: "EnergyDistribution", tol: float = 1e-12) -> bool:
        if self.n_points != other.n_points:
            return False
        if self.grid_step != other.grid_step:
            return False
        return bool(np.all(np.abs(self.probabilities - other.probabilities) <= tol))


@dataclass(frozen=True)
class ModularConfig:
    """A folding period: e0 spans exactly `bins` grid cells."""

    e0: float
    bins: int

    def __post_init__(self):
        if not (math.isfinite(self.e0) and self.e0 > 0.0):
            raise ValueError(f"e0 must be positive, got {self.e0!r}")
        if not isinstance(self.bins, int) or self.bins < 1:
            raise ValueError(f"bins must be a positive integer, got {self.bins!r}")

    @classmethod
    def from_grid(cls, grid_step: float, bins: int) -> "ModularConfig":
        """Build a config whose divisibility invariant holds by construction."""
        if not (math.isfinite(grid_step) and grid_step > 0.0):
            raise ValueError(f"grid_step must be positive, got {grid_step!r}")
        return cls(e0=grid_step * bins, bins=bins)


def _check_grid(dist: EnergyDistribution, cfg: ModularConfig) -> None:
    expected = cfg.bins * dist.grid_step
    if abs(expected - cfg.e0) > 1e-12 * max(cfg.e0, expected):
        raise GridError(
            f"e0 = {cfg.e0!r} is not {cfg.bins} grid steps of {dist.grid_step!r}"
        )


def _delta_index(dist: EnergyDistribution, delta: float) -> int:
    steps = delta / dist.grid_step
    nearest = round(steps)
    if abs(delta - nearest * dist.grid_step) > 1e-12 * max(abs(delta), dist.grid_step):
        raise GridError(f"delta = {delta!r} is off the {dist.grid_step!r} grid")
    return int(nearest)


def modular_reduce(dist: EnergyDistribution, cfg: ModularConfig) -> EnergyDistribution:
    """Fold the distribution to one period: index k goes to k mod bins.

    The output always has exactly `bins` points, padding unreached
    residues with zero, so its support is the whole of [0, e0).
    """
    _check_grid(dist, cfg)
    folded = np.zeros(cfg.bins)
    np.add.at(folded, np.arange(dist.n_points) % cfg.bins, dist.probabilities)
    return EnergyDistribution(dist.grid_step, folded)


def is_flat(dist: EnergyDistribution, tol: float = 1e-12) -> bool:
    """True iff every probability is within tol of 1/K over the K-point grid.

    The distribution is read as covering one full period, which is what
    modular_reduce produces.
    """
    if tol < 0.0:
        raise ValueError(f"tol must be nonnegative, got {tol!r}")
    target = 1.0 / dist.n_points
    return bool(np.max(np.abs(dist.probabilities - target)) <= tol)


def shift(dist: EnergyDistribution, delta: float) -> EnergyDistribution:
    """Translate the distribution by delta along the energy axis.

    delta must be an integer number of grid steps.  Negative shifts are
    allowed only when no probability would be pushed below zero energy.
    """
    m = _delta_index(dist, delta)
    probs = dist.probabilities
    if m >= 0:
        shifted = np.concatenate([np.zeros(m), probs])
    else:
        if -m >= probs.size or np.any(probs[:-m] != 0.0):
            raise GridError(
                f"shift by {delta!r} would move probability below zero energy"
            )
        shifted = probs[-m:].copy()
    return EnergyDistribution(dist.grid_step, shifted)


class FlatnessCheck(NamedTuple):
    flat: bool
    invariant_under_all: bool
    conclusive: bool


def flatness_theorem_check(
    dist: EnergyDistribution,
    cfg: ModularConfig,
    deltas: Sequence[float],
    tol: float = 1e-12,
) -> FlatnessCheck:
    """Evaluate both sides of: folded flat iff folded invariant under shifts.

    flat tests the folded distribution against uniform; invariant_under_all
    tests that every supplied exchange delta leaves the folded distribution
    unchanged.  conclusive marks whether the deltas cover every residue
    class mod e0, which the only-if direction needs.
    """
    _check_grid(dist, cfg)
    folded = modular_reduce(dist, cfg)
    residues = set()
    invariant = True
    for delta in deltas:
        residues.add(_delta_index(dist, delta) % cfg.bins)
        moved = modular_reduce(shift(dist, delta), cfg)
        if np.max(np.abs(moved.probabilities - folded.probabilities)) > tol:
            invariant = False
    return FlatnessCheck(
        flat=is_flat(folded, tol),
        invariant_under_all=invariant,
        conclusive=residues == set(range(cfg.bins)),
    )


def energy_std(dist: EnergyDistribution) -> float:
    """Standard deviation of the energy random variable."""
    e = dist.energies
    mean = float(np.dot(dist.probabilities, e))
    var = float(np.dot(dist.probabilities, (e - mean) ** 2))
    return math.sqrt(max(var, 0.0))


def support_width(dist: EnergyDistribution) -> float:
    """Length of the smallest grid-aligned interval containing the support.

    Counts whole cells: a point mass has width one grid step, and a
    distribution positive on all K points has width K * grid_step.
    """
    positive = np.nonzero(dist.probabilities > 0.0)[0]
    return float((positive[-1] - positive[0] + 1) * dist.grid_step)


def flat_implies_uncertainty(
    dist: EnergyDistribution, cfg: ModularConfig, tol: float = 1e-9
) -> bool:
    """Does a distribution with a flat fold have standard deviation >= e0?

    Requires the folded distribution to be flat within tol, then returns
    energy_std(dist) >= e0 * (1 - tol).  Deliberately falsifiable: the
    uniform distribution on a single period has sigma = e0/sqrt(12) < e0,
    so the standard-deviation reading of the uncertainty claim fails there
    while the support-width reading (see support_width) holds.
    """
    folded = modular_reduce(dist, cfg)
    if not is_flat(folded, tol):
        raise ValueError("folded distribution is not flat")
    return energy_std(dist) >= cfg.e0 * (1.0 - tol)


def sum_distribution(
    a: EnergyDistribution, b: EnergyDistribution
) -> EnergyDistribution:
    """Distribution of the sum of two independent energies on one grid."""
    if abs(a.grid_step - b.grid_step) > 1e-12 * max(a.grid_step, b.grid_step):
        raise GridError(
            f"grid steps differ: {a.grid_step!r} vs {b.grid_step!r}"
        )
    return EnergyDistribution(a.grid_step, np.convolve(a.probabilities, b.probabilities))


# ---------------------------------------------------------------------------
# the piston experiment


@dataclass(frozen=True)
class PistonExperiment:
    """Masses, momenta and geometry for the double-collision run.

    The particle (m_A, momentum p_A) is released from x = 0 down a shaft
    of length L, reaching the piston after the transit time T = m_A L / p_A.
    The ball (m_B, momentum p_B) bounces inside the assembly's gap of
    width gap_fraction * (p_B / m_B) * T; the default width centers the
    particle's arrival between the ball's two reflections.  k is the
    action constant used by the detection bound.
    """

    m_A: float
    m_B: float
    M: float
    p_A: float
    p_B: float
    L: float
    k: float = PLANCK
    gap_fraction: float = 1.0
    T: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        for name in ("m_A", "m_B", "M", "p_A", "p_B", "L", "k", "gap_fraction"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        transit = self.m_A * self.L / self.p_A
        if self.T is None:
            object.__setattr__(self, "T", transit)
        elif abs(self.p_A - self.m_A * self.L / self.T) > 1e-9 * self.p_A:
            raise ValueError(
                f"T = {self.T!r} inconsistent with m_A L / p_A = {transit!r}"
            )

    @property
    def energy_shift_scale(self) -> float:
        """The predicted magnitude of the ball's energy change."""
        return 4.0 * self.p_A * self.p_B / self.M


@dataclass(frozen=True)
class CollisionEvent:
    """One elastic collision: which pair, and their velocities around it."""

    time: float
    pair: tuple[str, str]
    before: tuple[float, float]
    after: tuple[float, float]


def _elastic(m1: float, v1: float, m2: float, v2: float) -> tuple[float, float]:
    total = m1 + m2
    return (
        ((m1 - m2) * v1 + 2.0 * m2 * v2) / total,
        ((m2 - m1) * v2 + 2.0 * m1 * v1) / total,
    )


def piston_simulate(
    exp: PistonExperiment, release_particle: bool
) -> tuple[float, list[CollisionEvent]]:
    """Run the collision sequence; return the ball's energy change and trace.

    The assembly (mass M) is one rigid body carrying the piston face and,
    a gap G to its right, an outer wall.  The ball starts mid-gap moving
    toward the face; the run covers exactly the ball's two reflections,
    with the particle's strike on the face in between when released.  A
    different sequence than that raises OrderingError rather than being
    reported as if it were the modeled experiment.
    """
    u = exp.p_B / exp.m_B
    w = exp.p_A / exp.m_A
    gap = exp.gap_fraction * u * exp.T

    t = 0.0
    face = exp.L  # wall rides at face + gap
    ball = exp.L + gap / 2.0
    particle = 0.0
    v_assembly = 0.0
    v_ball = -u
    v_particle = w

    expected = [("ball", "face"), ("ball", "wall")]
    if release_particle:
        expected.insert(1, ("particle", "face"))

    trace: list[CollisionEvent] = []
    particle_active = release_particle
    for _ in range(len(expected)):
        candidates: list[tuple[float, tuple[str, str]]] = []
        rel_v = v_ball - v_assembly
        if rel_v < 0.0 and ball > face:
            candidates.append(((ball - face) / -rel_v, ("ball", "face")))
        if rel_v > 0.0 and ball < face + gap:
            candidates.append(((face + gap - ball) / rel_v, ("ball", "wall")))
        if particle_active:
            rel_p = v_particle - v_assembly
            if rel_p > 0.0 and particle < face:
                candidates.append(((face - particle) / rel_p, ("particle", "face")))
        if not candidates:
            raise OrderingError(
                f"no further collisions after {[e.pair for e in trace]}"
            )
        dt, pair = min(candidates)
        t += dt
        face += v_assembly * dt
        ball += v_ball * dt
        particle += v_particle * dt
        if pair[0] == "ball":
            before = (v_ball, v_assembly)
            v_ball, v_assembly = _elastic(exp.m_B, v_ball, exp.M, v_assembly)
            after = (v_ball, v_assembly)
        else:
            before = (v_particle, v_assembly)
            v_particle, v_assembly = _elastic(exp.m_A, v_particle, exp.M, v_assembly)
            after = (v_particle, v_assembly)
            particle_active = False  # recoils away, out of the story
        trace.append(CollisionEvent(time=t, pair=pair, before=before, after=after))

    sequence = [e.pair for e in trace]
    if sequence != expected:
        raise OrderingError(f"collision sequence {sequence}, required {expected}")
    delta_e_b = 0.5 * exp.m_B * (v_ball * v_ball - u * u)
    return delta_e_b, trace


def detection_condition(exp: PistonExperiment, delta_e_b_uncertainty: float) -> bool:
    """Can Bob resolve the energy shift?  Strict inequality; boundary is no.

    The threshold 4 m_A L p_B / (M T) equals 4 p_A p_B / M after
    eliminating p_A = m_A L / T.
    """
    if not (math.isfinite(delta_e_b_uncertainty) and delta_e_b_uncertainty > 0.0):
        raise ValueError(
            f"uncertainty must be positive, got {delta_e_b_uncertainty!r}"
        )
    threshold = 4.0 * exp.m_A * exp.L * exp.p_B / (exp.M * exp.T)
    return delta_e_b_uncertainty < threshold


# ---------------------------------------------------------------------------
# the causality audit


def detection_before_arrival(
    delta_e: float, delta_t: float, transit_time: float, k: float
) -> bool:
    """Would a measurement with this resolution and duration beat the particle?

    True when the resolution beats the modular period k / transit_time and
    the measurement still finishes before the transit completes.  This is
    the forbidden outcome the audit counts.
    """
    return delta_e < k / transit_time and delta_t < transit_time


def causality_audit(
    k: float, trials: int, rng: np.random.Generator, enforce: bool = True
) -> int:
    """Count detection-before-arrival cases over random measurement setups.

    Transit times span 10^-3 .. 10^3 time units and resolutions span two
    decades around k/T.  With enforce=True every sampled measurement obeys
    delta_t >= k / delta_e, and the count is 0 for any k: a resolution
    below k/T forces delta_t > T.  enforce=False admits faster
    measurements (down to a tenth of the bound) and violations appear.
    """
    if not (math.isfinite(k) and k > 0.0):
        raise ValueError(f"k must be positive, got {k!r}")
    if trials < 0:
        raise ValueError(f"trials must be nonnegative, got {trials!r}")
    transit = 10.0 ** rng.uniform(-3.0, 3.0, size=trials)
    delta_e = (k / transit) * 10.0 ** rng.uniform(-2.0, 2.0, size=trials)
    low = 1.0 if enforce else 0.1
    delta_t = (k / delta_e) * rng.uniform(low, 10.0, size=trials)
    violating = (delta_e < k / transit) & (delta_t < transit)
    return int(np.count_nonzero(violating))


def uncertainty_product(delta_e: float, delta_t: float, k: float = PLANCK) -> bool:
    """Check delta_e * delta_t >= k with a relative floor for the boundary.

    Products within one part in 10^12 of k count as satisfying the bound,
    so (k/T, T) passes despite rounding.
    """
    for name, value in (("delta_e", delta_e), ("delta_t", delta_t), ("k", k)):
        if not (math.isfinite(value) and value > 0.0):
            raise ValueError(f"{name} must be positive, got {value!r}")
    return delta_e * delta_t >= k * (1.0 - 1e-12)


# ---------------------------------------------------------------------------
# serialization
#
# Distribution files: "grid_step = <value>" then one "index probability"
# line per grid point.  Trace files: "time pair v1_before v2_before
# v1_after v2_after" with pair like ball-face.


def write_distribution(
    dist: EnergyDistribution, destination: str | os.PathLike | IO[str]
) -> None:
    lines = [f"grid_step = {dist.grid_step!r}"]
    for k, p in enumerate(dist.probabilities):
        lines.append(f"{k} {float(p)!r}")
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_distribution(source: str | os.PathLike | IO[str]) -> EnergyDistribution:
    """Parse a distribution file.  Every grid index must appear exactly once."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()

    grid_step: float | None = None
    entries: dict[int, float] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if grid_step is None:
            parts = line.split("=", 1)
            if len(parts) != 2 or parts[0].strip() != "grid_step":
                raise DistributionFormatError(
                    "first line must be 'grid_step = <value>'", line=lineno
                )
            try:
                grid_step = float(parts[1])
            except ValueError as exc:
                raise DistributionFormatError(f"bad grid_step: {exc}", line=lineno)
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise DistributionFormatError(
                f"expected 'index probability', got {len(tokens)} fields", line=lineno
            )
        try:
            index = int(tokens[0])
            p = float(tokens[1])
        except ValueError as exc:
            raise DistributionFormatError(str(exc), line=lineno)
        if index < 0:
            raise DistributionFormatError(f"negative index {index}", line=lineno)
        if index in entries:
            raise DistributionFormatError(f"duplicate index {index}", line=lineno)
        entries[index] = p

    if grid_step is None:
        raise DistributionFormatError("missing 'grid_step = <value>' header")
    if not entries:
        raise DistributionFormatError("no probability entries")
    size = max(entries) + 1
    missing = sorted(set(range(size)) - set(entries))
    if missing:
        raise DistributionFormatError(f"missing indices: {missing}")
    probs = np.array([entries[k] for k in range(size)])
    try:
        return EnergyDistribution(grid_step, probs)
    except ValueError as exc:
        raise DistributionFormatError(str(exc))


def distribution_to_text(dist: EnergyDistribution) -> str:
    buf = io.StringIO()
    write_distribution(dist, buf)
    return buf.getvalue()


def distribution_from_text(text: str) -> EnergyDistribution:
    return read_distribution(io.StringIO(text))


def write_trace(
    trace: Sequence[CollisionEvent], destination: str | os.PathLike | IO[str]
) -> None:
    lines = ["# time pair v1_before v2_before v1_after v2_after"]
    for event in trace:
        lines.append(
            f"{event.time!r} {event.pair[0]}-{event.pair[1]} "
            f"{event.before[0]!r} {event.before[1]!r} "
            f"{event.after[0]!r} {event.after[1]!r}"
        )
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_trace(source: str | os.PathLike | IO[str]) -> list[CollisionEvent]:
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()

    trace: list[CollisionEvent] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 6:
            raise TraceFormatError(
                f"expected 6 fields, got {len(tokens)}", line=lineno
            )
        pair = tuple(tokens[1].split("-"))
        if len(pair) != 2:
            raise TraceFormatError(f"bad pair {tokens[1]!r}", line=lineno)
        try:
            time = float(tokens[0])
            values = [float(tok) for tok in tokens[2:]]
        except ValueError as exc:
            raise TraceFormatError(str(exc), line=lineno)
        trace.append(
            CollisionEvent(
                time=time,
                pair=pair,  # type: ignore[arg-type]
                before=(values[0], values[1]),
                after=(values[2], values[3]),
            )
        )
    return trace
