import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellscope.models import (
    CELL_KEYS,
    STRATEGIES,
    GeneralizedPrModel,
    LhvModel,
    ModelError,
    PrBox,
    QuantumModel,
    TableModel,
    conservation_deviation,
    conservation_profile,
    generalized_pr_chsh,
    generic_chsh,
    model_distribution,
    model_from_descriptor,
    no_signaling_check,
    nprf_marginal_check,
    pr_eigenbasis_contradiction,
)
from bellscope.quantum import MERMIN_PHOTON, SINGLET, BellLabel, BellState, JointDistribution
from bellscope.settings import ChshSettings, SettingLabel, Slot, alice, bob, pr_assignment

TOL = 1e-12
D = ChshSettings.discrete()


def signaling_fixture() -> TableModel:
    u = JointDistribution.uniform()
    return TableModel(
        {"a,b": JointDistribution(1, 0, 0, 0), "a,b'": JointDistribution(0, 0, 0, 1), "a',b": u, "a',b'": u}
    )


class TestStrategies:
    def test_sixteen_in_lexicographic_order(self):
        assert len(STRATEGIES) == 16
        assert STRATEGIES[0].alice == (1, 1) and STRATEGIES[0].bob == (1, 1)
        assert STRATEGIES[1].bob == (1, -1)
        assert STRATEGIES[15].alice == (-1, -1) and STRATEGIES[15].bob == (-1, -1)
        flat = [(*s.alice, *s.bob) for s in STRATEGIES]
        assert flat == list(itertools.product((1, -1), repeat=4))

    def test_all_plus_strategy(self):
        model = LhvModel.deterministic(0)
        for a, b in D.pairs():
            assert model_distribution(model, a, b).pPP == 1.0


class TestModelDistribution:
    def test_pr_first_and_last_cells(self):
        pr = PrBox()
        assert model_distribution(pr, D.a, D.b).as_tuple() == (0.5, 0, 0, 0.5)
        assert model_distribution(pr, D.a_prime, D.b_prime).as_tuple() == (0, 0.5, 0.5, 0)

    def test_generalized_pr_replaces_designated_cell(self):
        m = GeneralizedPrModel(0.1, 0.4)
        assert model_distribution(m, D.a, D.b).as_tuple() == (0.1, 0.4, 0.4, 0.1)
        assert model_distribution(m, D.a_prime, D.b_prime).as_tuple() == (0, 0.5, 0.5, 0)
        m4 = GeneralizedPrModel(0.1, 0.4, "fourth")
        assert model_distribution(m4, D.a_prime, D.b_prime).as_tuple() == (0.1, 0.4, 0.4, 0.1)
        assert model_distribution(m4, D.a, D.b).as_tuple() == (0.5, 0, 0, 0.5)

    def test_generalized_pr_invariants(self):
        with pytest.raises(ValueError):
            GeneralizedPrModel(0.3, 0.3)
        with pytest.raises(ValueError):
            GeneralizedPrModel(-0.1)
        with pytest.raises(ValueError):
            GeneralizedPrModel(0.2, replaced_cell="second")

    def test_quantum_needs_angles(self):
        with pytest.raises(ModelError):
            model_distribution(QuantumModel(SINGLET), D.a, D.b)

    def test_party_order_enforced(self):
        with pytest.raises(ModelError):
            model_distribution(PrBox(), D.b, D.a)

    def test_lhv_weights_validated(self):
        with pytest.raises(ValueError):
            LhvModel((0.5,) * 16)
        with pytest.raises(ValueError):
            LhvModel((1.0,) * 3)

    @pytest.mark.parametrize(
        "model",
        [QuantumModel(SINGLET), QuantumModel(BellState.of("PhiMinus", "spin-half")), PrBox(), GeneralizedPrModel(0.3), LhvModel.deterministic(6)],
        ids=repr,
    )
    def test_descriptor_round_trip(self, model):
        again = model_from_descriptor(model.descriptor())
        s = ChshSettings.from_angles(0.3, 1.2, -0.4, 2.0)
        for a, b in s.pairs():
            assert model_distribution(again, a, b) == model_distribution(model, a, b)

    def test_unknown_descriptor(self):
        with pytest.raises(ValueError):
            model_from_descriptor({"kind": "martian"})

    def test_table_needs_every_cell(self):
        with pytest.raises(ValueError):
            TableModel({"a,b": JointDistribution.uniform()})


class TestNoSignaling:
    def test_quantum_any_settings(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = ChshSettings.from_angles(*rng.uniform(0, 2 * math.pi, 4))
            assert no_signaling_check(QuantumModel(SINGLET), s).max_violation < TOL

    def test_pr(self):
        assert no_signaling_check(PrBox(), D).max_violation < TOL

    def test_signaling_fixture_violation_is_one(self):
        rep = no_signaling_check(signaling_fixture(), D)
        # p(A=+ | a,b) = 1 while p(A=+ | a,b') = 0
        assert rep.max_violation == pytest.approx(1.0)
        assert not rep.passed

    def test_random_lhv_mixtures(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            assert no_signaling_check(LhvModel.random(rng), D).passed

    def test_tol_must_be_positive(self):
        with pytest.raises(ValueError):
            no_signaling_check(PrBox(), D, tol=0.0)


class TestNprf:
    def test_quantum(self):
        s = ChshSettings.from_angles(0.1, 0.7, 2.2, -1.0)
        for label in BellLabel:
            assert nprf_marginal_check(QuantumModel(BellState.of(label)), s).passed

    def test_pr(self):
        assert nprf_marginal_check(PrBox(), D).passed

    def test_biased_lhv_fails(self):
        rep = nprf_marginal_check(LhvModel.deterministic(0), D)
        assert not rep.passed
        assert max(d["marginal_plus"] for d in rep.details) == 1.0

    def test_flip_symmetric_lhv_passes(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            assert nprf_marginal_check(LhvModel.random(rng, flip_symmetric=True), D).passed

    def test_generic_lhv_usually_fails(self):
        rng = np.random.default_rng(8)
        assert not nprf_marginal_check(LhvModel.random(rng), D).passed


class TestConservationDeviation:
    def test_quantum_self_comparison(self):
        s = ChshSettings.from_angles(0.2, 1.0, -0.5, 0.4)
        assert conservation_deviation(QuantumModel(SINGLET), SINGLET, s) <= TOL

    def test_pr_at_flip_assignment(self):
        s = pr_assignment(SINGLET)
        assert (s.a.angle, s.a_prime.angle, s.b.angle, s.b_prime.angle) == (math.pi, 0.0, math.pi, 0.0)
        profile = conservation_profile(PrBox(), SINGLET, s)
        assert profile[0]["pair"] == ["a", "b"]
        assert profile[0]["deviation"] == 2.0
        assert [row["deviation"] for row in profile[1:]] == [0.0, 0.0, 0.0]
        assert conservation_deviation(PrBox(), SINGLET, s) == 2.0

    def test_pr_photon_contradiction_at_last_cell(self):
        s = pr_assignment(MERMIN_PHOTON)
        profile = conservation_profile(PrBox(), MERMIN_PHOTON, s)
        assert [row["deviation"] for row in profile] == [0.0, 0.0, 0.0, 2.0]

    def test_quantum_conserving_generalized_pr(self):
        m = GeneralizedPrModel(0.0, 0.5)
        assert conservation_profile(m, SINGLET, pr_assignment(SINGLET))[0]["deviation"] == 0.0

    def test_strictly_increasing_in_c(self):
        s = pr_assignment(SINGLET)
        devs = [conservation_deviation(GeneralizedPrModel(float(c)), SINGLET, s) for c in np.linspace(0, 0.5, 101)]
        assert all(y > x for x, y in zip(devs, devs[1:]))
        # analytic: Bob's average given + is 4c - 1 against a target of -1
        assert devs == pytest.approx([4 * c for c in np.linspace(0, 0.5, 101)], abs=TOL)

    def test_fourth_cell_variant_increases_in_e(self):
        s = pr_assignment(MERMIN_PHOTON)
        devs = [
            conservation_deviation(GeneralizedPrModel(0.5 - float(e), float(e), "fourth"), MERMIN_PHOTON, s)
            for e in np.linspace(0, 0.5, 51)
        ]
        assert all(y > x for x, y in zip(devs, devs[1:]))

    def test_needs_angles(self):
        with pytest.raises(ModelError):
            conservation_deviation(PrBox(), SINGLET, D)


class TestGeneralizedPrChsh:
    def test_pr_endpoint(self):
        assert generalized_pr_chsh(GeneralizedPrModel(0.5, 0.0)) == 4.0

    def test_quantum_endpoint(self):
        assert generalized_pr_chsh(GeneralizedPrModel(0.0, 0.5)) == 2.0

    def test_midpoint_cross_checked(self):
        m = GeneralizedPrModel(0.25, 0.25)
        assert generalized_pr_chsh(m) == 3.0
        assert generic_chsh(m, D) == pytest.approx(3.0, abs=TOL)

    def test_fourth_cell_formula(self):
        assert generalized_pr_chsh(GeneralizedPrModel(0.5, 0.0, "fourth")) == 2.0
        assert generalized_pr_chsh(GeneralizedPrModel(0.0, 0.5, "fourth")) == 4.0

    @pytest.mark.parametrize("cell", ["first", "fourth"])
    def test_agrees_with_generic_on_grid(self, cell):
        for c in np.linspace(0, 0.5, 101):
            m = GeneralizedPrModel(float(c), replaced_cell=cell)
            assert abs(generalized_pr_chsh(m) - generic_chsh(m, D)) <= TOL

    def test_monotone_from_two_to_four(self):
        values = [generalized_pr_chsh(GeneralizedPrModel(float(c))) for c in np.linspace(0, 0.5, 101)]
        assert values[0] == 2.0 and values[-1] == 4.0
        assert all(y > x for x, y in zip(values, values[1:]))


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=16, max_size=16).filter(lambda w: sum(w) > 1e-3))
def test_lhv_distributions_are_valid(raw):
    w = np.array(raw) / sum(raw)
    model = LhvModel(tuple(w / w.sum()))
    for a, b in D.pairs():
        cells = model_distribution(model, a, b).as_tuple()
        assert min(cells) >= 0.0 and abs(sum(cells) - 1) <= TOL


@pytest.mark.parametrize("state", [SINGLET, MERMIN_PHOTON], ids=str)
def test_pr_eigenbasis_contradiction(state):
    rep = pr_eigenbasis_contradiction(state)
    assert rep["solutions"] >= 1
    assert rep["contradiction"]
    assert rep["max_quantum_probability_first_cell"] <= TOL


def test_setting_label_parse_round_trip():
    for label in (alice(), alice(Slot.PRIMED, 0.1), bob(Slot.PRIMED, -math.pi), bob(angle=1e-300)):
        assert SettingLabel.parse(str(label)) == label
    with pytest.raises(ValueError):
        SettingLabel.parse("c")
    assert CELL_KEYS == ("a,b", "a,b'", "a',b", "a',b'")
