"""Shared random-geometry generators for the spacetime test suites."""

import numpy as np

from causalab.spacetime import CausalConfig, Event, min_jamming_slack


def random_jamming_scenario(rng, dimension=1, margin=0.5, c=1.0):
    """Random (j, a, b, cfg) with the containment verdict clear of the margin.

    Coordinates are drawn in a box of side ~10.  Scenarios whose minimum
    j-cone slack over the overlap is within `margin` of zero are regenerated:
    a hairline verdict cannot be confirmed or refuted by a fixed Monte Carlo
    budget, while a margin-clear violation region is found with probability
    indistinguishable from 1.
    """
    cfg = CausalConfig(c=c)
    while True:
        times = rng.uniform(0.0, 4.0, size=3)
        positions = rng.uniform(-5.0, 5.0, size=(3, dimension))
        j = Event(float(times[0]), tuple(positions[0]))
        a = Event(float(times[1]), tuple(positions[1]))
        b = Event(float(times[2]), tuple(positions[2]))
        slack = min_jamming_slack(j, a, b, cfg)
        if abs(slack) >= margin:
            return j, a, b, cfg
