import numpy as np

from causalab.boxes import (
    chsh_all_variants,
    deterministic_boxes,
    is_local,
    is_no_signaling,
    mix,
    pr_box,
    uniform_box,
)
from causalab.polytope import (
    in_local_polytope,
    local_mixture_slack,
    no_signaling_extreme_boxes,
    random_no_signaling_box,
    random_vertex_mixture,
)


def test_deterministic_vertices_have_zero_slack():
    for box in deterministic_boxes():
        assert local_mixture_slack(box) <= 1e-9
        assert in_local_polytope(box)


def test_uniform_box_inside():
    assert local_mixture_slack(uniform_box()) <= 1e-9


def test_pr_box_slack_is_one_eighth():
    # nearest local point entrywise is the half-noise mixture, 0.125 away
    slack = local_mixture_slack(pr_box())
    assert abs(slack - 0.125) <= 1e-6
    assert not in_local_polytope(pr_box())


def test_noise_threshold_agrees_with_facets():
    for w in (0.3, 0.5, 0.55, 0.7):
        box = mix([pr_box(), uniform_box()], [w, 1.0 - w])
        facet = is_local(box)
        # skip the exact boundary where the two cuts may legitimately differ
        if abs(chsh_value_margin(box)) > 1e-6:
            assert in_local_polytope(box) is facet


def chsh_value_margin(box):
    return float(np.max(np.abs(chsh_all_variants(box)))) - 2.0


def test_extreme_box_list():
    boxes = no_signaling_extreme_boxes()
    assert len(boxes) == 24
    assert all(is_no_signaling(b, tol=0.0) for b in boxes)


def test_random_generators_produce_no_signaling_boxes():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        assert is_no_signaling(random_vertex_mixture(rng, jitter=0.5), tol=1e-12)
        assert is_no_signaling(random_no_signaling_box(rng), tol=1e-12)


def test_facet_and_lp_routes_agree_on_random_boxes():
    # smaller version of the acceptance run: two generation routes, both
    # classifiers, disagreement counted only outside the 1e-6 facet band
    rng = np.random.default_rng(99)
    checked = 0
    for i in range(800):
        if i % 2 == 0:
            box = random_vertex_mixture(rng, jitter=0.6)
        else:
            box = random_no_signaling_box(rng)
        margin = chsh_value_margin(box)
        if abs(margin) <= 1e-6:
            continue
        checked += 1
        assert in_local_polytope(box) is (margin < 0.0), (
            f"facet margin {margin} vs slack {local_mixture_slack(box)}"
        )
    assert checked > 700


def test_slack_grows_with_chsh_margin():
    slacks = [
        local_mixture_slack(mix([pr_box(), uniform_box()], [w, 1.0 - w]))
        for w in (0.6, 0.8, 1.0)
    ]
    assert slacks[0] < slacks[1] < slacks[2]
    # margin m puts the box at least m/16 outside, entrywise
    for w, slack in zip((0.6, 0.8, 1.0), slacks):
        assert slack >= (4.0 * w - 2.0) / 16.0 - 1e-9


def test_vertex_mixture_shape_and_validity():
    rng = np.random.default_rng(1)
    box = random_vertex_mixture(rng)
    assert box.table.shape == (2, 2, 2, 2)
    assert abs(float(box.table[0, 0].sum()) - 1.0) <= 1e-12
