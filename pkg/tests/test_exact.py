import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from capshare.approx import erlang_b_integer
from capshare.errors import StateSpaceTooLarge, ValidationError
from capshare.exact import (
    Degraded,
    MarkovState,
    build_state_space,
    dump_chain,
    is_irreducible,
    loss_probability_exact,
    stationary_distribution,
)
from capshare.model import RequestClass, ServiceLength, SystemConfig
from conftest import two_class
from oracles import brute_force_chain, null_space_loss

KINDS = ["exponential", "erlang2", "hyperexp2_balanced"]


def test_table4_row1_states(t4_row1):
    gen = build_state_space(t4_row1)
    assert gen.states == [
        MarkovState((0,), None),
        MarkovState((1,), None),
        MarkovState((1,), Degraded(0, 0, 1)),
    ]
    assert list(gen.idle) == [3, 1, 0]


def test_degraded_unreachable_when_d_divides_m():
    gen = build_state_space(SystemConfig.single(2, 1.0, 2, ServiceLength.exponential(1.0)))
    assert gen.size == 2
    assert all(s.degraded is None for s in gen.states)


def test_table1_row1_state_count_matches_brute_force(t1_row1):
    gen = build_state_space(t1_row1)
    states, _, _ = brute_force_chain(t1_row1)
    assert gen.size == len(states) == 5


def test_stationary_table4_row1(t4_row1):
    pi = stationary_distribution(build_state_space(t4_row1)).probabilities
    np.testing.assert_allclose(pi, [3 / 8, 3 / 8, 1 / 4], rtol=1e-12)


def test_stationary_single_state():
    from capshare.exact import GeneratorMatrix

    # degenerate one-state chain with generator [[0]]

    gen = GeneratorMatrix(None, [], [MarkovState((), None)], np.zeros((1, 1)), np.array([1]))
    assert stationary_distribution(gen).probabilities.tolist() == [1.0]


def test_mm1_loss():
    config = SystemConfig.single(1, 1.0, 1, ServiceLength.exponential(1.0))
    pi = stationary_distribution(build_state_space(config)).probabilities
    np.testing.assert_allclose(pi, [0.5, 0.5], rtol=1e-12)
    assert loss_probability_exact(config) == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("config, printed", [
    (SystemConfig.single(3, 1.0, 2, ServiceLength.exponential(1.0)), 0.2500),
    (two_class(2, (1, 2), (2, 1), (1 / 3, 1 / 3)), 0.3289),
    (two_class(2, (1, 2), (1, 1), (1 / 2, 1 / 4), ServiceLength.erlang2), 0.2644),
])
def test_loss_probability_printed_values(config, printed):
    assert abs(loss_probability_exact(config) - printed) <= 5e-4


@pytest.mark.parametrize("second", KINDS)
def test_against_brute_force_null_space(second):
    config = two_class(5, (1, 4), (9, 9), (1 / 3, 1 / 6), second=lambda b: ServiceLength(second, b))
    assert loss_probability_exact(config) == pytest.approx(null_space_loss(config), rel=1e-9)


def test_state_space_limit():
    config = SystemConfig(30, [RequestClass(5.0, 1, ServiceLength.erlang2(1.0)),
                               RequestClass(5.0, 7, ServiceLength.hyperexp2(1.0))])
    with pytest.raises(StateSpaceTooLarge):
        build_state_space(config, max_states=100)


def test_invalid_config_rejected():
    with pytest.raises(ValidationError):
        build_state_space(SystemConfig.single(1, 1.0, 2, ServiceLength.exponential(1.0)))


def test_dump_chain_lists_every_state(t4_row1):
    text = dump_chain(build_state_space(t4_row1))
    lines = text.strip().splitlines()
    assert len(lines) == 3
    assert lines[2].startswith("2\tfull[c0p0x1] degraded[c0p0@1]\tidle=0\t->")
    assert "0:1" not in lines[0] and "1:1" in lines[0]


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("m, d, A", [(4, 2, 1.0), (6, 3, 2.0), (6, 2, 3.5), (5, 5, 0.7)])
def test_insensitive_when_d_divides_m(kind, m, d, A):
    config = SystemConfig.single(m, A / 1.3, d, ServiceLength(kind, 1.3))
    assert loss_probability_exact(config) == pytest.approx(erlang_b_integer(A, m // d), rel=1e-9)


def test_phases_change_the_answer():
    exp = loss_probability_exact(two_class(2, (1, 2), (1, 1), (1 / 2, 1 / 4)))
    erl = loss_probability_exact(two_class(2, (1, 2), (1, 1), (1 / 2, 1 / 4), ServiceLength.erlang2))
    assert round(exp, 4) == 0.2632 and round(erl, 4) == 0.2644


services = st.sampled_from(KINDS)


@st.composite
def small_configs(draw):
    m = draw(st.integers(1, 6))
    n = draw(st.integers(1, 3))
    classes = [RequestClass(draw(st.floats(0.1, 10)), draw(st.integers(1, m)),
                            ServiceLength(draw(services), draw(st.floats(0.05, 5)), draw(st.floats(1, 6))))
               for _ in range(n)]
    return SystemConfig(m, classes)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_configs())
def test_chain_properties(config):
    gen = build_state_space(config)
    Q = gen.rates
    off = Q - np.diag(np.diag(Q))
    assert np.all(off >= 0)
    scale = np.abs(Q).max(axis=1)
    assert np.all(np.abs(Q.sum(axis=1)) <= 1e-12 * np.maximum(scale, 1e-300))
    assert is_irreducible(gen)
    for s, idle in zip(gen.states, gen.idle):
        if s.degraded is not None:
            assert idle == 0
            assert 1 <= s.degraded.allocated < config.classes[s.degraded.cls].channels_required
    assert gen.size == len(brute_force_chain(config)[0])
    dist = stationary_distribution(gen)
    assert np.all(dist.probabilities >= 0)
    assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(dist.probabilities @ Q).max() <= 1e-10
