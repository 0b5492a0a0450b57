import io

import numpy as np
import pytest

from causalab.boxes import (
    ALGEBRAIC_BOUND,
    LOCAL_BOUND,
    BipartiteBox,
    BoxFormatError,
    BoxValidationError,
    SignalingBoxError,
    box_from_text,
    box_to_text,
    chsh_all_variants,
    chsh_value,
    correlation,
    deterministic_boxes,
    is_local,
    is_no_signaling,
    marginal,
    mix,
    outcome_index,
    pr_box,
    pr_box_variant,
    product_determination,
    read_box,
    sample,
    uniform_box,
    validate_box,
    write_box,
)


def signaling_box():
    # Bob's outcome deterministically equals +1 iff Alice pressed x=0,
    # regardless of y: Bob's marginal depends on the remote setting.
    table = np.zeros((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            ib = 0 if x == 0 else 1
            table[x, y, 0, ib] = 0.5
            table[x, y, 1, ib] = 0.5
    return BipartiteBox(table)


# ---------------------------------------------------------------- validation


def test_validate_accepts_pr_table():
    box = validate_box(pr_box().table.copy())
    assert box.prob(1, 1, 0, 0) == 0.5
    assert box.prob(1, -1, 0, 0) == 0.0


def test_validate_rejects_negative_entry():
    table = pr_box().table.copy()
    table[0, 0, 0, 0] = -0.1
    table[0, 0, 1, 1] = 0.6
    with pytest.raises(BoxValidationError, match="negative"):
        validate_box(table)


def test_validate_rejects_bad_normalization():
    table = pr_box().table.copy()
    table[1, 1, 0, 1] = 0.6
    with pytest.raises(BoxValidationError, match="sums to"):
        validate_box(table)


def test_validate_renormalizes_near_one_blocks():
    table = uniform_box().table.copy()
    table[0, 0] = np.full((2, 2), 0.25 + 1e-12)
    box = validate_box(table, tol=1e-9)
    assert abs(float(box.table[0, 0].sum()) - 1.0) == 0.0


def test_validate_rejects_wrong_shape():
    with pytest.raises(BoxValidationError, match="shape"):
        validate_box(np.zeros((2, 2, 2)))


# ------------------------------------------------------- marginals and no-signaling


def test_pr_marginals_exactly_uniform():
    box = pr_box()
    for party in ("alice", "bob"):
        for setting in (0, 1):
            for other in (0, 1, None):
                m = marginal(box, party, setting, other_setting=other)
                assert m[0] == 0.5 and m[1] == 0.5


def test_pr_box_no_signaling_at_zero_tolerance():
    assert is_no_signaling(pr_box(), tol=0.0)


def test_signaling_box_detected():
    box = signaling_box()
    assert not is_no_signaling(box, tol=1e-9)
    m0 = marginal(box, "bob", 0, other_setting=0)
    m1 = marginal(box, "bob", 0, other_setting=1)
    assert abs(float(m0[0] - m1[0])) == 1.0


def test_random_deterministic_boxes_no_signaling_exact():
    for box in deterministic_boxes():
        assert is_no_signaling(box, tol=0.0)


# ---------------------------------------------------------------- CHSH values


def test_pr_correlations_exact():
    box = pr_box()
    assert correlation(box, 0, 0) == 1.0
    assert correlation(box, 0, 1) == 1.0
    assert correlation(box, 1, 0) == 1.0
    assert correlation(box, 1, 1) == -1.0


def test_pr_chsh_is_exactly_four():
    assert chsh_value(pr_box()) == 4.0
    assert float(np.max(np.abs(chsh_all_variants(pr_box())))) == ALGEBRAIC_BOUND


def test_uniform_chsh_zero():
    assert chsh_value(uniform_box()) == 0.0


def test_half_noise_mixture_sits_on_local_bound():
    box = mix([pr_box(), uniform_box()], [0.5, 0.5])
    assert chsh_value(box) == 2.0


def test_deterministic_boxes_all_variants_on_local_bound():
    boxes = deterministic_boxes()
    assert len(boxes) == 16
    tables = {b.table.tobytes() for b in boxes}
    assert len(tables) == 16
    for box in boxes:
        variants = chsh_all_variants(box)
        assert np.all(np.abs(np.abs(variants) - LOCAL_BOUND) == 0.0)


def test_chsh_value_is_variant_three():
    rng = np.random.default_rng(7)
    for _ in range(20):
        w = rng.dirichlet(np.ones(16))
        box = mix(deterministic_boxes(), w)
        variants = chsh_all_variants(box)
        assert variants[3] == chsh_value(box)
        # negation half mirrors the first half
        assert np.allclose(variants[4:], -variants[:4], atol=0.0)


def test_pr_variants_each_reach_algebraic_bound():
    for alpha in (0, 1):
        for beta in (0, 1):
            for gamma in (0, 1):
                box = pr_box_variant(alpha, beta, gamma)
                assert is_no_signaling(box, tol=0.0)
                assert float(np.max(np.abs(chsh_all_variants(box)))) == 4.0


def test_chsh_linear_under_mixing():
    rng = np.random.default_rng(11)
    dets = deterministic_boxes()
    for _ in range(50):
        b1 = mix(dets, rng.dirichlet(np.ones(16)))
        b2 = pr_box_variant(
            int(rng.integers(2)), int(rng.integers(2)), int(rng.integers(2))
        )
        p = float(rng.uniform())
        mixed = mix([b1, b2], [p, 1.0 - p])
        expected = p * chsh_value(b1) + (1.0 - p) * chsh_value(b2)
        assert abs(chsh_value(mixed) - expected) <= 1e-12


# ---------------------------------------------------------------- locality facets


def test_uniform_box_is_local():
    assert is_local(uniform_box())


def test_pr_box_is_not_local():
    assert not is_local(pr_box())


def test_noise_threshold_for_locality():
    # w * PR + (1 - w) * uniform has CHSH 4w: local exactly when w <= 1/2
    for w, expected in [(0.4, True), (0.5, True), (0.6, False)]:
        box = mix([pr_box(), uniform_box()], [w, 1.0 - w])
        assert is_local(box) is expected


def test_is_local_refuses_signaling_box():
    with pytest.raises(SignalingBoxError):
        is_local(signaling_box())


# ---------------------------------------------------------------- determination


def test_pr_product_determination():
    box = pr_box()
    assert product_determination(box, 0) == 1.0
    assert product_determination(box, 1) == -1.0


# ---------------------------------------------------------------- mixing errors


def test_mix_rejects_bad_weights():
    with pytest.raises(ValueError, match="sum"):
        mix([pr_box(), uniform_box()], [0.6, 0.6])
    with pytest.raises(ValueError, match="negative"):
        mix([pr_box(), uniform_box()], [1.5, -0.5])
    with pytest.raises(ValueError, match="length"):
        mix([pr_box()], [0.5, 0.5])


# ---------------------------------------------------------------- sampling


def test_sample_is_deterministic_given_seed():
    box = uniform_box()
    draws1 = [sample(box, 0, 1, np.random.default_rng(123)) for _ in range(5)]
    draws2 = [sample(box, 0, 1, np.random.default_rng(123)) for _ in range(5)]
    assert draws1 == draws2


def test_pr_samples_satisfy_game_condition():
    rng = np.random.default_rng(5)
    box = pr_box()
    for x in (0, 1):
        for y in (0, 1):
            target = -1 if x == 1 and y == 1 else 1
            for _ in range(200):
                a, b = sample(box, x, y, rng)
                assert a * b == target


def test_sample_empirical_correlation_matches_box():
    rng = np.random.default_rng(17)
    box = mix([pr_box(), uniform_box()], [0.7, 0.3])
    n = 20000
    draws = np.array([sample(box, 0, 0, rng) for _ in range(n)])
    emp = float(np.mean(draws[:, 0] * draws[:, 1]))
    assert abs(emp - correlation(box, 0, 0)) < 0.02


# ---------------------------------------------------------------- serialization


def test_box_round_trip_exact():
    rng = np.random.default_rng(3)
    w = rng.dirichlet(np.ones(16))
    original = mix(deterministic_boxes(), w)
    text = box_to_text(original)
    recovered = box_from_text(text)
    assert np.array_equal(original.table, recovered.table)


def test_box_file_round_trip(tmp_path):
    path = tmp_path / "pr.box"
    write_box(pr_box(), path)
    assert np.array_equal(read_box(path).table, pr_box().table)


def test_read_box_accepts_rational_probabilities():
    lines = ["# comment"]
    for x in (0, 1):
        for y in (0, 1):
            target = -1 if x == 1 and y == 1 else 1
            for a in (1, -1):
                for b in (1, -1):
                    p = "1/2" if a * b == target else "0/2"
                    lines.append(f"{x} {y} {a} {b} {p}")
    box = box_from_text("\n".join(lines))
    assert np.array_equal(box.table, pr_box().table)


def test_read_box_reports_line_number_for_malformed_line():
    text = box_to_text(pr_box())
    broken = text.replace("0 0 1 -1 0.0", "0 0 1 -1 zero")
    with pytest.raises(BoxFormatError, match="line 3") as excinfo:
        box_from_text(broken)
    assert excinfo.value.line == 3


def test_read_box_rejects_wrong_field_count():
    text = box_to_text(pr_box()).replace("0 0 1 1 0.5", "0 0 1 1")
    with pytest.raises(BoxFormatError, match="5 fields"):
        box_from_text(text)


def test_read_box_rejects_duplicates_and_missing():
    text = box_to_text(pr_box())
    dup = text.replace("0 0 1 -1 0.0", "0 0 1 1 0.0")
    with pytest.raises(BoxFormatError, match="duplicate"):
        box_from_text(dup)
    truncated = "\n".join(text.splitlines()[:-2]) + "\n"
    with pytest.raises(BoxFormatError, match="missing"):
        box_from_text(truncated)


def test_read_box_rejects_invalid_probabilities():
    text = box_to_text(pr_box()).replace("0 0 1 1 0.5", "0 0 1 1 -0.5")
    with pytest.raises(BoxFormatError):
        box_from_text(text)


def test_write_box_accepts_file_object():
    buf = io.StringIO()
    write_box(uniform_box(), buf)
    assert "0 0 1 1 0.25" in buf.getvalue()


def test_outcome_index_rejects_bad_outcome():
    with pytest.raises(ValueError):
        outcome_index(0)
