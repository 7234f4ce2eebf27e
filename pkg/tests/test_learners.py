import math
import random

import pytest
from hypothesis import given, strategies as st

from reasonlab.engine import is_abstain, run_cot
from reasonlab.learners import (FULL, ConflictingExamples, DecomposedTrainer, DomainError, EquationFamily,
                                OccamBoundInput, bits_for, blocksworld_table_bits, description_length, occam_bound,
                                predict, render_curve_table, sample_complexity_experiment, samples_to_threshold,
                                simulate_occam, summarize_curves, train_decomposed, train_tabular)


@pytest.mark.parametrize("k,bits", [(1, 1), (2, 1), (3, 2), (4, 2), (10, 4), (16, 4), (17, 5), (101, 7)])
def test_bits_for(k, bits):
    assert bits_for(k) == bits


@given(st.integers(2, 10 ** 6))
def test_bits_for_is_ceil_log2(k):
    assert bits_for(k) == math.ceil(math.log2(k))


def test_tabular_memorises_and_abstains():
    model = train_tabular([((1, 2), 3), ((2, 2), 4)], key_arity=2, value_bits=3)
    assert model.predict((1, 2)) == 3
    assert is_abstain(model.predict((9, 9)))
    assert model.entries == 2 and model.dl().total_bits == 6


def test_tabular_conflicts():
    with pytest.raises(ConflictingExamples):
        train_tabular([("k", 1), ("k", 2)])
    assert train_tabular([("k", 1), ("k", 2)], on_conflict="first").predict("k") == 1


def test_tabular_digest_is_order_independent():
    a = train_tabular([("x", 1), ("y", 2)])
    b = train_tabular([("y", 2), ("x", 1)])
    assert a.digest() == b.digest()


def test_description_length_values():
    # [TRIVIAL] K^N direct, sum K^a decomposed, 2^M policy
    assert description_length("direct", 10, n=4).entries == 10_000
    dec = description_length("decomposed", 10, arities=[2, 2, 2], m=7)
    assert dec.part("transitions").entries == 300
    assert dec.part("policy").entries == 128
    assert description_length("direct", 10, n=40).entries == 10 ** 40  # no overflow
    with pytest.raises(ValueError):
        description_length("direct", 10)
    with pytest.raises(ValueError):
        description_length("bogus", 10, n=2)


def test_blocksworld_table_bits():
    # [DERIVED] K=3: 3! * 2^2 = 24 states; bits_for(3) = 2
    tables = blocksworld_table_bits(3)
    assert tables["direct_plans"].entries == 24 * 27
    assert tables["policy"].entries == 24 * 9
    assert tables["direct_plans"].total_bits == 24 * 27 * 2


def test_occam_spot_value():
    # [DERIVED] sqrt((10 + ln 40) / 2000)
    value = occam_bound(OccamBoundInput(10, 1000, 0.05, 0.0))
    assert value == pytest.approx(math.sqrt((10 + math.log(40)) / 2000))
    assert abs(value - 0.08273) < 1e-4


@pytest.mark.parametrize("kwargs", [dict(delta=0.0), dict(delta=1.0), dict(m=0), dict(empirical_loss=1.5),
                                    dict(h_bits=-1)])
def test_occam_domain_errors(kwargs):
    base = dict(h_bits=10, m=100, delta=0.05, empirical_loss=0.0)
    with pytest.raises(DomainError):
        OccamBoundInput(**{**base, **kwargs})


@given(st.floats(0, 100), st.integers(1, 10 ** 6), st.floats(0.001, 0.999))
def test_occam_monotone_in_description_length(h, m, delta):
    lo = occam_bound(OccamBoundInput(h, m, delta))
    hi = occam_bound(OccamBoundInput(h + 1, m, delta))
    assert hi > lo


def test_simulated_coverage():
    assert simulate_occam(trials=2000, seed=1) >= 0.95


def test_decomposed_trainer_on_equation_family():
    fam = EquationFamily()
    envs = list(fam.domain())[:300]
    model = train_decomposed((env, fam.demonstrate(env)) for env in envs)
    assert model.entries < 300
    for env in envs[:50]:
        assert predict(model, None, env) == fam.oracle_answer(env)
    with pytest.raises(ValueError):
        predict(model, None)


def test_trainer_abstains_on_unseen_component_inputs():
    fam = EquationFamily()
    trainer = DecomposedTrainer()
    env = fam.make([1, 1, 1, 1])
    trainer.add(env, fam.demonstrate(env))
    res = run_cot(trainer.build(), fam.make([9, 8, 7, 6]))
    assert is_abstain(res.answer)


@pytest.fixture(scope="module")
def small_curves():
    return sample_complexity_experiment(EquationFamily(), ("direct", "cot"), (0, 50, 400, 3200, FULL), (0, 1), 300)


def test_curve_shape(small_curves):
    assert len(small_curves) == 2 * 5 * 2
    zero = [r for r in small_curves if r.samples == 0]
    assert all(r.accuracy == 0 and r.abstain_rate == 1 for r in zero)
    full = [r for r in small_curves if r.full_domain]
    assert all(r.accuracy == 1.0 and r.samples == 10_000 for r in full)


def test_cot_beats_direct_at_small_samples(small_curves):
    for seed in (0, 1):
        cot = samples_to_threshold(small_curves, "cot", seed)
        direct = samples_to_threshold(small_curves, "direct", seed)
        assert cot is not None and cot <= 400
        assert direct is None  # full-domain points never count


def test_curves_are_deterministic():
    a = sample_complexity_experiment(EquationFamily(), ("direct",), (0, 25), (3,), 50)
    b = sample_complexity_experiment(EquationFamily(), ("direct",), (0, 25), (3,), 50)
    assert a == b


def test_summary_and_table(small_curves):
    rows = summarize_curves(small_curves)
    assert {r["seeds"] for r in rows} == {2}
    table = render_curve_table(small_curves)
    assert "direct" in table and "cot" in table


def test_experiment_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sample_complexity_experiment(EquationFamily(), ("magic",), (0,), (0,), 10)
    with pytest.raises(ValueError):
        sample_complexity_experiment(EquationFamily(), ("direct",), (-5,), (0,), 10)


def test_domain_enumeration_size():
    fam = EquationFamily(3, 4)
    assert sum(1 for _ in fam.domain()) == 64
    assert fam.sample(random.Random(0)).system.modulus == 4
