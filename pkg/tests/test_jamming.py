import numpy as np
import pytest

from causalab.boxes import (
    BipartiteBox,
    SignalingBoxError,
    chsh_value,
    is_local,
    marginal,
    pr_box,
    sample,
    uniform_box,
)
from causalab.jamming import (
    JammingFormatError,
    JammingScenario,
    admissible,
    deduce_jammed,
    jam,
    pr_scenario,
    read_jamming_scenario,
    signal_to_individual,
    signal_to_pair,
    total_variation,
    write_jamming_scenario,
)
from causalab.polytope import in_local_polytope, random_no_signaling_box
from causalab.quantum import ghz_conditional_joint
from causalab.spacetime import CausalConfig, Event

C1 = CausalConfig(c=1.0)
ALLOWED_GEOMETRY = dict(
    j=Event(0.0, (0.0,)), a=Event(1.0, (-5.0,)), b=Event(1.0, (5.0,)), cfg=C1
)
FORBIDDEN_GEOMETRY = dict(
    j=Event(10.0, (0.0,)), a=Event(1.0, (-5.0,)), b=Event(1.0, (5.0,)), cfg=C1
)


def signaling_box():
    # Bob's outcome copies Alice's setting
    table = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for y in range(2):
            table[x, y, 0, x] = 0.5
            table[x, y, 1, x] = 0.5
    return BipartiteBox(table)


# ----------------------------------------------------------------------- jam


def test_jam_pr_box_is_uniform():
    jammed = jam(pr_box())
    assert np.array_equal(jammed.table, uniform_box().table)
    assert chsh_value(jammed) == 0.0


def test_jam_is_idempotent():
    rng = np.random.default_rng(5)
    for _ in range(20):
        box = random_no_signaling_box(rng)
        once = jam(box)
        twice = jam(once)
        assert np.allclose(once.table, twice.table, atol=1e-14)


def test_jam_preserves_every_marginal():
    rng = np.random.default_rng(6)
    for _ in range(50):
        box = random_no_signaling_box(rng)
        jammed = jam(box)
        for party in ("alice", "bob"):
            for setting in range(2):
                before = marginal(box, party, setting)
                after = marginal(jammed, party, setting)
                assert np.max(np.abs(before - after)) <= 1e-12


def test_jam_output_is_local_by_both_routes():
    rng = np.random.default_rng(7)
    for _ in range(20):
        jammed = jam(random_no_signaling_box(rng))
        assert is_local(jammed)
        assert in_local_polytope(jammed)


def test_jam_rejects_signaling_box():
    with pytest.raises(SignalingBoxError):
        jam(signaling_box())


# ------------------------------------------------------------ signal measures


def test_total_variation_basics():
    assert total_variation(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0
    assert total_variation(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
    with pytest.raises(ValueError, match="shape"):
        total_variation(np.zeros(2), np.zeros(3))


def test_pr_scenario_signal_structure():
    s = pr_scenario(**ALLOWED_GEOMETRY)
    assert signal_to_individual(s) == 0.0
    assert signal_to_pair(s) == 0.5
    assert s.validation_errors() == []
    assert s.is_valid


def test_biased_jammed_marginal_is_flagged():
    box = pr_box()
    biased = np.full((2, 2, 2, 2), 0.25)
    biased[:, :, 0, :] = 0.3
    biased[:, :, 1, :] = 0.2
    s = JammingScenario(
        unjammed=box, jammed=BipartiteBox(biased), **ALLOWED_GEOMETRY
    )
    assert signal_to_individual(s) > 0.0
    assert any("marginal" in e for e in s.validation_errors())


def test_identity_jamming_has_no_signal():
    s = JammingScenario(unjammed=pr_box(), jammed=pr_box(), **FORBIDDEN_GEOMETRY)
    assert signal_to_pair(s) == 0.0
    assert admissible(s)  # no signal, so any geometry passes
    assert "jammed box is not local" in s.validation_errors()


def test_signaling_unjammed_box_is_flagged_not_crashed():
    s = JammingScenario(
        unjammed=signaling_box(), jammed=uniform_box(), **ALLOWED_GEOMETRY
    )
    errors = s.validation_errors()
    assert any("signaling" in e for e in errors)
    assert signal_to_pair(s) >= 0.0  # measures still compute


def test_mixed_dimension_events_flagged():
    s = JammingScenario(
        unjammed=pr_box(),
        jammed=jam(pr_box()),
        j=Event(0.0, (0.0, 0.0)),
        a=Event(1.0, (-5.0,)),
        b=Event(1.0, (5.0,)),
        cfg=C1,
    )
    assert any("dimension" in e for e in s.validation_errors())


# --------------------------------------------------------------- admissible


def test_admissible_archetype_geometries():
    assert admissible(pr_scenario(**ALLOWED_GEOMETRY))
    assert not admissible(pr_scenario(**FORBIDDEN_GEOMETRY))


def test_admissible_monotone_in_jammer_time():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(60):
        j = Event(float(rng.uniform(-3, 3)), (float(rng.uniform(-5, 5)),))
        a = Event(float(rng.uniform(0, 4)), (float(rng.uniform(-5, 5)),))
        b = Event(float(rng.uniform(0, 4)), (float(rng.uniform(-5, 5)),))
        s = pr_scenario(j, a, b, C1)
        if admissible(s):
            earlier = pr_scenario(Event(j.t - 2.0, j.pos), a, b, C1)
            assert admissible(earlier)
            checked += 1
    assert checked > 5


# ---------------------------------------------------------------- deduction


def test_deduction_from_pr_rounds_is_always_right():
    # every PR outcome is possible under uniform, but the likelihood ratio
    # is 2^N, so the unjammed hypothesis always wins
    rng = np.random.default_rng(12)
    s = pr_scenario(**ALLOWED_GEOMETRY)
    for _ in range(50):
        outcomes = [sample(s.unjammed, 0, 1, rng) for _ in range(8)]
        assert deduce_jammed(s, 0, 1, outcomes) is False


def test_deduction_from_jammed_rounds_improves_with_n():
    # sampling the uniform box: deduction fails only if every round happens
    # to land in the PR-supported half, probability 2^-N
    s = pr_scenario(**ALLOWED_GEOMETRY)

    def error_rate(n_rounds, trials, seed):
        rng = np.random.default_rng(seed)
        wrong = 0
        for _ in range(trials):
            outcomes = [sample(s.jammed, 0, 0, rng) for _ in range(n_rounds)]
            if not deduce_jammed(s, 0, 0, outcomes):
                wrong += 1
        return wrong / trials

    small = error_rate(2, 400, seed=13)
    large = error_rate(12, 400, seed=13)
    assert small > 0.1  # 2^-2 = 0.25 expected
    assert large < 0.02
    assert large < small


def test_deduction_certain_after_impossible_outcome():
    s = pr_scenario(**ALLOWED_GEOMETRY)
    # (+1, -1) at settings (0, 0) cannot come from the PR box
    assert deduce_jammed(s, 0, 0, [(1, -1)]) is True


# ------------------------------------------------------------ GHZ cross-check


def test_ghz_statistics_form_a_jamming_pair():
    # tile the single-setting conditional joints into constant boxes; the
    # jam structure survives: marginals untouched, joints distinguishable
    correlated = ghz_conditional_joint("x", +1)
    uncorrelated = ghz_conditional_joint("z", +1)
    tiled_x = BipartiteBox(np.tile(correlated, (2, 2, 1, 1)))
    tiled_z = BipartiteBox(np.tile(uncorrelated, (2, 2, 1, 1)))
    s = JammingScenario(unjammed=tiled_x, jammed=tiled_z, **ALLOWED_GEOMETRY)

    assert signal_to_individual(s) <= 1e-12
    assert abs(signal_to_pair(s) - 0.5) <= 1e-12
    for party in ("alice", "bob"):
        for setting in range(2):
            assert np.max(np.abs(marginal(s.unjammed, party, setting) - 0.5)) <= 1e-12

    # perfect single-setting correlations tile into a local box, so this
    # scenario is reported invalid while the signal measures still work
    assert "unjammed box is local" in s.validation_errors()


# ------------------------------------------------------------ scenario files


def test_scenario_file_product_round_trip(tmp_path):
    s = pr_scenario(**ALLOWED_GEOMETRY)
    path = tmp_path / "fig3a.jam"
    write_jamming_scenario(s, path)
    assert "jammed = product" in path.read_text()
    loaded = read_jamming_scenario(path)
    assert np.array_equal(loaded.unjammed.table, s.unjammed.table)
    assert np.array_equal(loaded.jammed.table, s.jammed.table)
    assert loaded.j == s.j and loaded.a == s.a and loaded.b == s.b
    assert loaded.cfg == s.cfg


def test_scenario_file_explicit_jammed_round_trip(tmp_path):
    s = JammingScenario(unjammed=pr_box(), jammed=pr_box(), **ALLOWED_GEOMETRY)
    path = tmp_path / "identity.jam"
    write_jamming_scenario(s, path)
    assert "jammed = identity.jammed.box" in path.read_text()
    loaded = read_jamming_scenario(path)
    assert np.array_equal(loaded.jammed.table, pr_box().table)


def test_scenario_file_missing_keys(tmp_path):
    path = tmp_path / "bad.jam"
    path.write_text("c = 1.0\nj 0 0\na 1 -5\nb 1 5\n")
    with pytest.raises(JammingFormatError, match="unjammed"):
        read_jamming_scenario(path)
    path.write_text("unjammed = x.box\n")
    with pytest.raises(JammingFormatError, match="jammed"):
        read_jamming_scenario(path)


def test_scenario_file_missing_spacetime_block(tmp_path):
    path = tmp_path / "bad.jam"
    path.write_text("unjammed = x.box\njammed = product\n")
    with pytest.raises(JammingFormatError, match="spacetime block"):
        read_jamming_scenario(path)


def test_scenario_file_wrong_labels(tmp_path):
    write_jamming_scenario(pr_scenario(**ALLOWED_GEOMETRY), tmp_path / "ok.jam")
    text = (tmp_path / "ok.jam").read_text().replace("\nb ", "\nq ")
    bad = tmp_path / "bad.jam"
    bad.write_text(text)
    with pytest.raises(JammingFormatError, match="labeled j, a, b"):
        read_jamming_scenario(bad)


def test_scenario_file_block_errors_carry_file_line_numbers(tmp_path):
    path = tmp_path / "bad.jam"
    path.write_text("unjammed = x.box\njammed = product\nc = 1.0\nj 0 zero\n")
    with pytest.raises(JammingFormatError, match="line 4"):
        read_jamming_scenario(path)


def test_scenario_file_missing_box(tmp_path):
    path = tmp_path / "bad.jam"
    path.write_text("unjammed = nope.box\njammed = product\nc = 1.0\nj 0 0\na 1 -5\nb 1 5\n")
    with pytest.raises(JammingFormatError, match="cannot read"):
        read_jamming_scenario(path)


def test_scenario_file_malformed_box(tmp_path):
    (tmp_path / "broken.box").write_text("not a box\n")
    path = tmp_path / "bad.jam"
    path.write_text("unjammed = broken.box\njammed = product\nc = 1.0\nj 0 0\na 1 -5\nb 1 5\n")
    with pytest.raises(JammingFormatError, match="broken.box"):
        read_jamming_scenario(path)
