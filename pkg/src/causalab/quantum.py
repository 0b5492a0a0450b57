"""State-vector simulation for up to three qubits, measured in the x-z plane.

Everything here runs through one Born-rule path: a spin measurement at angle
theta is the observable cos(theta)*sigma_z + sin(theta)*sigma_x, outcomes are
+1 and -1, and measuring projects and renormalizes the state.  On top of that
sit the two states this laboratory cares about:

* the two-qubit singlet, whose measurement statistics reproduce the
  correlation -cos(theta_a - theta_b) and saturate the quantum CHSH bound
  2*sqrt(2) at the right angles, and
* the three-qubit GHZ state (|up,up,up> - |down,down,down>)/sqrt(2) in the
  qubit order (alice, bob, jim), whose third party can steer the alice-bob
  pair between "mixture of product states" and "mixture of entangled states"
  by choosing the z or x measurement basis.

The GHZ protocol and its transcript serialization live here too, together
with the basis-deduction rule that compares Jim's announced outcomes with the
product of Alice's and Bob's.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.stats import binom

from .boxes import OUTCOMES, BipartiteBox, validate_box

NORM_TOL = 1e-12
ZERO_PROBABILITY_TOL = 1e-12

QUANTUM_BOUND = 2.0 * math.sqrt(2.0)

BASIS_ANGLES = {"z": 0.0, "x": math.pi / 2.0}


class ZeroProbabilityError(ValueError):
    """A zero-probability measurement branch was requested."""


class TranscriptFormatError(ValueError):
    """A transcript or answer-key file is malformed.  Carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes of a pure state of 1 to 3 qubits, normalized within 1e-12."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] not in (2, 4, 8):
            raise ValueError(
                f"amplitudes must be a vector of length 2, 4 or 8, got shape {amps.shape}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1 by more than {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)
        amps.flags.writeable = False

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1


@dataclass(frozen=True)
class SpinMeasurement:
    """A +-1-valued spin measurement at angle theta in the x-z plane."""

    angle: float
    qubit: int = 0


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    outcome: int
    post_state: StateVector
    probability: float


def observable(angle: float) -> np.ndarray:
    """The matrix cos(angle)*sigma_z + sin(angle)*sigma_x."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [s, -c]])


def projector(angle: float, outcome: int) -> np.ndarray:
    if outcome not in OUTCOMES:
        raise ValueError(f"outcome must be +1 or -1, got {outcome!r}")
    return (np.eye(2) + outcome * observable(angle)) / 2.0


def _apply_single_qubit(op: np.ndarray, state: StateVector, qubit: int) -> np.ndarray:
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n}-qubit state")
    psi = state.amplitudes.reshape([2] * n)
    out = np.tensordot(op, psi, axes=([1], [qubit]))
    out = np.moveaxis(out, 0, qubit)
    return out.reshape(2**n)


def branch_probability(state: StateVector, m: SpinMeasurement, outcome: int) -> float:
    """Born probability of one outcome, without collapsing."""
    projected = _apply_single_qubit(projector(m.angle, outcome), state, m.qubit)
    return float(np.real(np.vdot(projected, projected)))


def expectation(state: StateVector, m: SpinMeasurement) -> float:
    """Expectation value of the measurement's observable in this state."""
    applied = _apply_single_qubit(observable(m.angle), state, m.qubit)
    return float(np.real(np.vdot(state.amplitudes, applied)))


def marginal_distribution(state: StateVector, m: SpinMeasurement) -> np.ndarray:
    """Outcome distribution (p_plus, p_minus) via p = (1 +- <O>)/2.

    Algebraically identical to the two branch probabilities, but built
    from a single expectation value, so structural zeros survive: a state
    whose observable expectation is exactly 0.0 yields exactly (0.5, 0.5),
    where squaring branch amplitudes would leave rounding dust.
    """
    e = expectation(state, m)
    return np.array([(1.0 + e) / 2.0, (1.0 - e) / 2.0])


def measure(state: StateVector, m: SpinMeasurement, outcome: int) -> MeasurementRecord:
    """Project onto the requested outcome and renormalize.

    Raises ZeroProbabilityError when the branch probability is below 1e-12;
    the post-state is undefined there.
    """
    projected = _apply_single_qubit(projector(m.angle, outcome), state, m.qubit)
    probability = float(np.real(np.vdot(projected, projected)))
    if probability < ZERO_PROBABILITY_TOL:
        raise ZeroProbabilityError(
            f"outcome {outcome} at angle {m.angle} has probability {probability}"
        )
    post = StateVector(projected / math.sqrt(probability))
    return MeasurementRecord(outcome=outcome, post_state=post, probability=probability)


def sample_measurement(
    state: StateVector, m: SpinMeasurement, rng: np.random.Generator
) -> MeasurementRecord:
    """Draw an outcome by the Born rule and collapse.

    Branches below the zero-probability tolerance are never drawn, so
    floating-point dust in a projector cannot produce impossible outcomes.
    """
    p_plus = branch_probability(state, m, 1)
    if p_plus < ZERO_PROBABILITY_TOL:
        outcome = -1
    elif 1.0 - p_plus < ZERO_PROBABILITY_TOL:
        outcome = 1
    else:
        outcome = 1 if rng.random() < p_plus else -1
    return measure(state, m, outcome)


def singlet() -> StateVector:
    """(|up,down> - |down,up>)/sqrt(2), qubit 0 for Alice, 1 for Bob."""
    amps = np.zeros(4, dtype=complex)
    amps[1] = 1.0 / math.sqrt(2.0)
    amps[2] = -1.0 / math.sqrt(2.0)
    return StateVector(amps)


def ghz() -> StateVector:
    """(|up,up,up> - |down,down,down>)/sqrt(2), qubits (alice, bob, jim)."""
    amps = np.zeros(8, dtype=complex)
    amps[0] = 1.0 / math.sqrt(2.0)
    amps[7] = -1.0 / math.sqrt(2.0)
    return StateVector(amps)


def quantum_box(
    state: StateVector,
    theta_a0: float,
    theta_a1: float,
    theta_b0: float,
    theta_b1: float,
) -> BipartiteBox:
    """Measurement statistics of a two-qubit state as a bipartite box.

    Setting x selects Alice's angle (theta_a0 or theta_a1) on qubit 0 and y
    selects Bob's on qubit 1; the table entries are Born probabilities.
    """
    if state.n_qubits != 2:
        raise ValueError("quantum_box requires a two-qubit state")
    alice_angles = (theta_a0, theta_a1)
    bob_angles = (theta_b0, theta_b1)
    table = np.empty((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            for ia, a in enumerate(OUTCOMES):
                once = _apply_single_qubit(projector(alice_angles[x], a), state, 0)
                for ib, b in enumerate(OUTCOMES):
                    twice = np.tensordot(
                        projector(bob_angles[y], b), once.reshape(2, 2), axes=([1], [1])
                    )
                    table[x, y, ia, ib] = float(np.real(np.vdot(twice, twice)))
    return validate_box(table, tol=1e-9)


@dataclass(frozen=True)
class TsirelsonResult:
    angles: tuple[float, float, float, float]
    s_max: float
    grid_max: float


def _singlet_correlation_born(theta_a: float, theta_b: float) -> float:
    """Correlation of one angle pair, evaluated through the Born path."""
    state = singlet()
    total = 0.0
    for a in OUTCOMES:
        once = _apply_single_qubit(projector(theta_a, a), state, 0)
        for b in OUTCOMES:
            twice = np.tensordot(projector(theta_b, b), once.reshape(2, 2), axes=([1], [1]))
            total += a * b * float(np.real(np.vdot(twice, twice)))
    return total


def _chsh_objective(angles: Sequence[float]) -> float:
    a0, a1, b0, b1 = angles
    box = quantum_box(singlet(), a0, a1, b0, b1)
    t = box.table

    def corr(x, y):
        blk = t[x, y]
        return float(blk[0, 0] - blk[0, 1] - blk[1, 0] + blk[1, 1])

    return abs(corr(0, 0) + corr(0, 1) + corr(1, 0) - corr(1, 1))


def tsirelson_optimize(resolution: int = 24, refine_iters: int = 8) -> TsirelsonResult:
    """Maximize |CHSH| of the singlet over the four measurement angles.

    Coarse grid search (resolution points per axis over [0, 2*pi)) followed
    by rounds of per-coordinate bounded refinement.  The best value is
    monotone nondecreasing in refine_iters, converges to 2*sqrt(2), and no
    grid point ever exceeds that bound.
    """
    if resolution < 8:
        raise ValueError(f"resolution must be at least 8, got {resolution}")
    if refine_iters < 0:
        raise ValueError("refine_iters must be nonnegative")

    grid = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
    corr = np.empty((resolution, resolution))
    for i, ta in enumerate(grid):
        for j, tb in enumerate(grid):
            corr[i, j] = _singlet_correlation_born(ta, tb)

    s = (
        corr[:, None, :, None]
        + corr[:, None, None, :]
        + corr[None, :, :, None]
        - corr[None, :, None, :]
    )
    np.abs(s, out=s)
    grid_max = float(s.max())
    flat_index = int(s.argmax())
    ia, ia2, ib, ib2 = np.unravel_index(flat_index, s.shape)
    angles = [grid[ia], grid[ia2], grid[ib], grid[ib2]]
    best = _chsh_objective(angles)

    from scipy.optimize import minimize_scalar

    window = 2.0 * math.pi / resolution
    for _ in range(refine_iters):
        for k in range(4):
            def along(t, k=k):
                trial = list(angles)
                trial[k] = t
                return -_chsh_objective(trial)

            res = minimize_scalar(
                along,
                bounds=(angles[k] - window, angles[k] + window),
                method="bounded",
                options={"xatol": 1e-10},
            )
            if -res.fun > best:
                best = -res.fun
                angles[k] = float(res.x)
        window *= 0.5

    return TsirelsonResult(angles=tuple(angles), s_max=best, grid_max=grid_max)


class EntanglementClass(Enum):
    PRODUCT = "product"
    ENTANGLED = "entangled"


def entanglement_class(state: StateVector, tol: float = 1e-9) -> tuple[EntanglementClass, float]:
    """Classify a two-qubit pure state by reduced purity.

    The purity Tr(rho_alice^2) is computed by direct amplitude summation; it
    is 1 for product states and 1/2 for maximally entangled ones.  Returns
    (label, purity) with label PRODUCT iff purity >= 1 - tol.
    """
    if state.n_qubits != 2:
        raise ValueError("entanglement_class requires a two-qubit state")
    psi = state.amplitudes.reshape(2, 2)
    rho = psi @ psi.conj().T
    purity = float(np.real(np.trace(rho @ rho)))
    label = EntanglementClass.PRODUCT if purity >= 1.0 - tol else EntanglementClass.ENTANGLED
    return label, purity


# ---------------------------------------------------------------------------
# the GHZ protocol: Jim's basis choice vs the Alice-Bob statistics
# ---------------------------------------------------------------------------


def _basis_angle(jim_basis: str) -> float:
    try:
        return BASIS_ANGLES[jim_basis]
    except KeyError:
        raise ValueError(f"jim_basis must be 'z' or 'x', got {jim_basis!r}")


def ghz_jamming_run(
    jim_basis: str, rounds: int, rng: np.random.Generator
) -> list[tuple[int, int, int]]:
    """Run the three-party protocol and return (jim, alice, bob) outcome rows.

    Each round prepares a fresh GHZ state; Jim measures qubit 2 in the given
    basis, then Alice and Bob measure sigma_x on qubits 0 and 1 of the
    collapsed state.  With jim_basis "x" the product alice*bob equals
    -jim_outcome in every round; with "z" it is an independent fair coin.
    """
    if rounds <= 0:
        raise ValueError("rounds must be positive")
    jim_m = SpinMeasurement(_basis_angle(jim_basis), qubit=2)
    alice_m = SpinMeasurement(BASIS_ANGLES["x"], qubit=0)
    bob_m = SpinMeasurement(BASIS_ANGLES["x"], qubit=1)
    transcript = []
    for _ in range(rounds):
        state = ghz()
        jim_rec = sample_measurement(state, jim_m, rng)
        alice_rec = sample_measurement(jim_rec.post_state, alice_m, rng)
        bob_rec = sample_measurement(alice_rec.post_state, bob_m, rng)
        transcript.append((jim_rec.outcome, alice_rec.outcome, bob_rec.outcome))
    return transcript


def ghz_round_distribution(jim_basis: str) -> dict[tuple[int, int, int], float]:
    """Exact Born distribution of (jim, alice, bob) for one protocol round."""
    jim_m = SpinMeasurement(_basis_angle(jim_basis), qubit=2)
    alice_m = SpinMeasurement(BASIS_ANGLES["x"], qubit=0)
    bob_m = SpinMeasurement(BASIS_ANGLES["x"], qubit=1)
    dist: dict[tuple[int, int, int], float] = {}
    state = ghz()
    for j in OUTCOMES:
        try:
            jim_rec = measure(state, jim_m, j)
        except ZeroProbabilityError:
            continue
        for a in OUTCOMES:
            try:
                alice_rec = measure(jim_rec.post_state, alice_m, a)
            except ZeroProbabilityError:
                continue
            for b in OUTCOMES:
                try:
                    bob_rec = measure(alice_rec.post_state, bob_m, b)
                except ZeroProbabilityError:
                    continue
                dist[(j, a, b)] = (
                    jim_rec.probability * alice_rec.probability * bob_rec.probability
                )
    return dist


def ghz_conditional_joint(jim_basis: str, jim_outcome: int) -> np.ndarray:
    """Alice-Bob joint outcome table P(a, b | jim announced this outcome).

    Indexed [ia, ib] with index 0 for +1.  Conditioned on basis "z" the table
    is uniform (product-state mixture); conditioned on basis "x" it is the
    perfectly anticorrelated or correlated block, depending on the outcome.
    """
    dist = ghz_round_distribution(jim_basis)
    p_j = sum(p for (j, _, _), p in dist.items() if j == jim_outcome)
    if p_j <= 0.0:
        raise ZeroProbabilityError(f"jim outcome {jim_outcome} has probability 0")
    joint = np.zeros((2, 2))
    for (j, a, b), p in dist.items():
        if j == jim_outcome:
            joint[(1 - a) // 2, (1 - b) // 2] = p / p_j
    return joint


@dataclass(frozen=True)
class DeductionResult:
    basis: str
    error_probability: float


def deduce_jim_basis(transcript: Sequence[tuple[int, int, int]]) -> DeductionResult:
    """Deduce Jim's basis from outcome rows alone.

    Decision statistic: the empirical correlation r of alice*bob with
    jim_outcome.  An x-basis source gives r = -1 exactly, a z-basis source
    gives a fair-coin r near 0, so declare "x" iff |r| > 1/2.

    The reported number is the probability that this rule misclassifies a
    source of the declared basis under the binomial model: 0 for "x" (the
    per-round product is deterministic), 2*P(Bin(N, 1/2) > 3N/4) for "z".
    """
    n = len(transcript)
    if n == 0:
        raise ValueError("empty transcript")
    products = [j * a * b for j, a, b in transcript]
    r = sum(products) / n
    if abs(r) > 0.5:
        return DeductionResult(basis="x", error_probability=0.0)
    # P(|r| > 1/2) for a fair coin: both tails of Bin(n, 1/2) beyond 3n/4
    error = 2.0 * float(binom.sf(math.floor(3.0 * n / 4.0), n, 0.5))
    return DeductionResult(basis="z", error_probability=error)


# ---------------------------------------------------------------------------
# transcript serialization; the basis label lives in a separate answer key
# ---------------------------------------------------------------------------


def write_transcript(
    transcript: Iterable[tuple[int, int, int]], destination: str | os.PathLike | IO[str]
) -> None:
    """Write "round jim alice bob" rows.  No basis label appears here."""
    lines = ["# transcript: round jim_outcome alice_outcome bob_outcome"]
    for i, (j, a, b) in enumerate(transcript, start=1):
        lines.append(f"{i} {j} {a} {b}")
    text = "\n".join(lines) + "\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_transcript(source: str | os.PathLike | IO[str]) -> list[tuple[int, int, int]]:
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()
    transcript: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 4:
            raise TranscriptFormatError(
                f"expected 4 fields 'round jim alice bob', got {len(tokens)}", line=lineno
            )
        try:
            index, j, a, b = (int(t) for t in tokens)
        except ValueError as exc:
            raise TranscriptFormatError(f"non-integer field: {exc}", line=lineno)
        if index != len(transcript) + 1:
            raise TranscriptFormatError(
                f"round number {index} out of sequence (expected {len(transcript) + 1})",
                line=lineno,
            )
        for outcome in (j, a, b):
            if outcome not in OUTCOMES:
                raise TranscriptFormatError(
                    f"outcomes must be +1 or -1, got {outcome}", line=lineno
                )
        transcript.append((j, a, b))
    if not transcript:
        raise TranscriptFormatError("transcript contains no rounds")
    return transcript


def write_answer_key(jim_basis: str, destination: str | os.PathLike | IO[str]) -> None:
    _basis_angle(jim_basis)  # validate
    text = f"jim_basis = {jim_basis}\n"
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w") as fh:
            fh.write(text)
    else:
        destination.write(text)


def read_answer_key(source: str | os.PathLike | IO[str]) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            lines = fh.readlines()
    else:
        lines = source.readlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("=")]
        if len(parts) != 2 or parts[0] != "jim_basis":
            raise TranscriptFormatError(f"expected 'jim_basis = <z|x>', got {line!r}", line=lineno)
        if parts[1] not in BASIS_ANGLES:
            raise TranscriptFormatError(f"unknown basis {parts[1]!r}", line=lineno)
        return parts[1]
    raise TranscriptFormatError("answer key contains no jim_basis line")
