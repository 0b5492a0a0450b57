"""Local-polytope membership by brute-force linear feasibility.

This is the second, independent route to the locality question answered by
the facet test in boxes.is_local.  A box is local iff its table is a convex
mixture of the 16 deterministic boxes.  We pose that as a small linear
program: minimize the infinity-norm slack s subject to

    |sum_i  w_i * D_i  -  P| <= s   (entrywise over the 16 table entries)
    w_i >= 0,  sum_i w_i = 1

and declare membership when the optimal s is below a cut.  The two routes
share no code beyond the deterministic vertex list, so they can check each
other over random boxes.

Also provides samplers over the no-signaling set: mixtures of the 24 known
extreme boxes, and rejection sampling in the affine marginal/correlation
parameterization.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .boxes import (
    BipartiteBox,
    deterministic_boxes,
    outcome_index,
    pr_box_variant,
    validate_box,
)

# A box at CHSH margin m beyond the local bound is at entrywise distance
# >= m/16 from the polytope, so this cut separates cleanly from the facet
# test's 1e-6 classification band (6e-8 vs ~1e-12 for interior points).
MEMBERSHIP_SLACK_CUT = 1e-8

_VERTEX_MATRIX: np.ndarray | None = None


def _vertex_matrix() -> np.ndarray:
    """Columns are the 16 deterministic box tables, flattened."""
    global _VERTEX_MATRIX
    if _VERTEX_MATRIX is None:
        _VERTEX_MATRIX = np.column_stack(
            [b.table.reshape(16) for b in deterministic_boxes()]
        )
    return _VERTEX_MATRIX


def local_mixture_slack(box: BipartiteBox) -> float:
    """Smallest s with the table within entrywise s of a deterministic mixture.

    Exactly 0 for points of the local polytope (up to LP solver accuracy),
    strictly positive outside it.
    """
    d = _vertex_matrix()
    p = box.table.reshape(16)
    # variables: 16 mixture weights followed by the slack s
    c = np.zeros(17)
    c[16] = 1.0
    ones = np.ones((16, 1))
    a_ub = np.vstack(
        [
            np.hstack([d, -ones]),
            np.hstack([-d, -ones]),
        ]
    )
    b_ub = np.concatenate([p, -p])
    a_eq = np.zeros((1, 17))
    a_eq[0, :16] = 1.0
    b_eq = np.array([1.0])
    bounds = [(0.0, None)] * 16 + [(0.0, None)]
    result = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )
    if not result.success:
        raise RuntimeError(f"membership LP failed: {result.message}")
    return float(result.fun)


def in_local_polytope(box: BipartiteBox, slack_cut: float = MEMBERSHIP_SLACK_CUT) -> bool:
    """Linear-feasibility verdict on local-polytope membership."""
    return local_mixture_slack(box) <= slack_cut


def no_signaling_extreme_boxes() -> list[BipartiteBox]:
    """The 24 extreme points of the no-signaling set: 16 local, 8 nonlocal."""
    return deterministic_boxes() + [
        pr_box_variant(a, b, g) for a in (0, 1) for b in (0, 1) for g in (0, 1)
    ]


def random_vertex_mixture(rng: np.random.Generator, jitter: float = 0.0) -> BipartiteBox:
    """Random convex mixture of the 24 extreme boxes, optionally jittered.

    jitter > 0 pulls the Dirichlet weights toward a random vertex, producing
    points near the boundary as well as deep interior ones.
    """
    vertices = no_signaling_extreme_boxes()
    w = rng.dirichlet(np.full(len(vertices), 0.5))
    if jitter > 0.0:
        spike = np.zeros(len(vertices))
        spike[rng.integers(len(vertices))] = 1.0
        t = rng.uniform(0.0, jitter)
        w = (1.0 - t) * w + t * spike
    table = np.tensordot(w, np.stack([v.table for v in vertices]), axes=1)
    return validate_box(table)


def random_no_signaling_box(rng: np.random.Generator, max_tries: int = 1000) -> BipartiteBox:
    """Rejection-sample a random table that is no-signaling by construction.

    Draws the two marginal biases and four correlations uniformly from
    [-1, 1] and rebuilds the table as

        P(a, b | x, y) = (1 + a*mA(x) + b*mB(y) + a*b*c(x, y)) / 4,

    rejecting draws with any negative entry.  Every accepted table is exactly
    no-signaling because the marginals depend on one setting only.
    """
    for _ in range(max_tries):
        m_alice = rng.uniform(-1.0, 1.0, size=2)
        m_bob = rng.uniform(-1.0, 1.0, size=2)
        corr = rng.uniform(-1.0, 1.0, size=(2, 2))
        table = np.empty((2, 2, 2, 2))
        ok = True
        for x in (0, 1):
            for y in (0, 1):
                for a in (1, -1):
                    for b in (1, -1):
                        p = (1.0 + a * m_alice[x] + b * m_bob[y] + a * b * corr[x, y]) / 4.0
                        if p < 0.0:
                            ok = False
                        table[x, y, outcome_index(a), outcome_index(b)] = p
        if ok:
            return validate_box(table)
    raise RuntimeError("rejection sampling failed to find a valid table")
