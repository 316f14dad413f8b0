import math
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from primeid import primegen as pg
from primeid.errors import BudgetExceededError, InvalidParameterError, IterationCapExceeded
from primeid.numtheory import is_prime_det, sieve_upto


def derive_oracle(N, l, q):
    """Smallest integers s, k meeting both inequalities, using exact integer arithmetic.

    s >= 3 l log2 N  <=>  2**s >= N**(3l)
    k >= (log2(3l) + log2 log2 N + q) / 2  <=>  2**(2k - q) >= 3 l log2 N  <=>  N**(3l) <= 2**(2**(2k - q))
    """
    target = N ** (3 * l)
    s = target.bit_length() - 1
    if 2**s < target:
        s += 1
    k = 0
    while 2 * k - q < 0 or (target - 1).bit_length() > 2 ** (2 * k - q):
        k += 1
    return s, k


def test_gmr_params_validation():
    with pytest.raises(InvalidParameterError):
        pg.GmrParams(1, 1, 1)
    with pytest.raises(InvalidParameterError):
        pg.GmrParams(10, 0, 1)
    with pytest.raises(InvalidParameterError):
        pg.GmrParams(10, 1, 0)
    with pytest.raises(InvalidParameterError):
        pg.GmrParams(10, 1.5, 1)
    assert pg.GmrParams(10, pg.UNBOUNDED, 1).s == math.inf


def test_uniform_prime_det_n2(rng):
    assert all(pg.uniform_prime_det(2, rng) == 2 for _ in range(50))


def test_uniform_prime_det_n3_balanced(rng):
    counts = Counter(pg.uniform_prime_det(3, rng) for _ in range(20000))
    assert set(counts) == {2, 3}
    # 5 sigma of binomial(20000, 1/2) is about 354
    assert abs(counts[2] - 10000) < 354


def test_uniform_prime_det_membership(rng):
    primes = set(sieve_upto(100).tolist())
    assert len(primes) == 25
    assert all(pg.uniform_prime_det(100, rng) in primes for _ in range(2000))


def test_uniform_prime_det_errors(rng):
    with pytest.raises(InvalidParameterError):
        pg.uniform_prime_det(1, rng)
    with pytest.raises(BudgetExceededError):
        pg.uniform_prime_det(10**13, rng)


def test_uniform_prime_det_iteration_cap():
    class AlwaysFour(random.Random):
        def randint(self, a, b):
            return 4

    with pytest.raises(IterationCapExceeded):
        pg.uniform_prime_det(100, AlwaysFour(), max_iter=5)


def test_gmr_n2_half_bottom(rng):
    params = pg.GmrParams(2, 1, 1)
    outcomes = Counter(pg.gmr(params, rng) for _ in range(20000))
    assert set(outcomes) == {2, None}
    assert abs(outcomes[2] - 10000) < 354


def test_gmr_n100_never_composite(rng):
    params = pg.GmrParams(100, 50, 10)
    primes = set(sieve_upto(100).tolist())
    for _ in range(10**5):
        p = pg.gmr(params, rng)
        assert p is None or p in primes


def test_gmr_unbounded_requires_opt_in(rng):
    params = pg.GmrParams(100, pg.UNBOUNDED, 5)
    with pytest.raises(InvalidParameterError):
        pg.gmr(params, rng)
    assert is_prime_det(pg.gmr(params, rng, allow_unbounded=True))
    assert is_prime_det(pg.uniform_prime_mr(1000, 10, rng))


def test_gmr_deterministic_given_seed():
    params = pg.GmrParams(10**6, *pg.derive_params(10**6, 10, 10))
    a = [pg.gmr(params, random.Random(5)) for _ in range(3)]
    b = [pg.gmr(params, random.Random(5)) for _ in range(3)]
    assert a == b


@pytest.mark.parametrize(
    "N, l, q, expected",
    [(2**11, 10, 10, (330, 10)), (2**2, 1, 0, (6, 2)), (10**6, 10, 10, (598, 10)), (10**4, 10, 10, (399, 10))],
)
def test_derive_params_examples(N, l, q, expected):
    assert pg.derive_params(N, l, q) == expected
    assert derive_oracle(N, l, q) == expected


def test_derive_params_rejects_small_n():
    with pytest.raises(InvalidParameterError):
        pg.derive_params(2, 1, 0)
    with pytest.raises(InvalidParameterError):
        pg.derive_params(10, 0, 0)


@given(
    st.integers(min_value=3, max_value=2**200),
    st.integers(min_value=1, max_value=30),
    st.integers(min_value=0, max_value=30),
)
@settings(max_examples=300, deadline=None)
def test_derive_params_matches_integer_oracle(N, l, q):
    s, k = pg.derive_params(N, l, q)
    assert (s, k) == derive_oracle(N, l, q)


def test_failure_bound_examples():
    assert pg.failure_bound(2**11, 330) == pytest.approx(6.80e-4, rel=5e-3)
    assert pg.failure_bound(2**11, 330) <= 2**-10
    assert pg.failure_bound(12345, 0) == 1.0
    assert pg.failure_bound(10**6, 1) == pytest.approx(1 - 1 / (6 * math.log(10**6)), rel=1e-12)
    assert pg.failure_bound(10**6, 1) == pytest.approx(0.9879, abs=1e-4)


def test_composite_bound_examples():
    assert pg.composite_bound(2**11, 330, 10) == pytest.approx(330 * 4**-10 * (1 - 1 / (6 * math.log(2048))), rel=1e-12)
    assert pg.composite_bound(2**11, 330, 10) == pytest.approx(3.1e-4, rel=0.02)
    assert pg.composite_bound(100, 0, 3) == 0.0
    assert pg.composite_bound(10**6, 1, 0) == pytest.approx(0.988, abs=1e-3)
    assert pg.composite_bound(10**6, 1000, 0) == 1.0


def test_derived_params_meet_their_targets():
    # the parameters chosen for (l, q) keep both analytic bounds under 2**-l and 2**-q
    for N in (2**11, 10**4, 10**6, 2**64 + 13):
        s, k = pg.derive_params(N, 10, 10)
        assert pg.failure_bound(N, s) <= 2**-10
        assert pg.composite_bound(N, s, k) <= 2**-10


def test_gmr_bottom_frequency_n1e4(rng):
    s, k = pg.derive_params(10**4, 4, 4)
    params = pg.GmrParams(10**4, s, k)
    trials = 20000
    bottoms = sum(pg.gmr(params, rng) is None for _ in range(trials))
    assert bottoms / trials <= 3 * pg.failure_bound(10**4, s)


def test_gmr_conditional_uniformity_small(rng):
    scipy_stats = pytest.importorskip("scipy.stats")
    params = pg.GmrParams(200, *pg.derive_params(200, 10, 10))
    primes = sieve_upto(200).tolist()
    counts = Counter()
    while sum(counts.values()) < 60000:
        p = pg.gmr(params, rng)
        if p is not None:
            counts[p] += 1
    assert set(counts) <= set(primes)
    observed = [counts[p] for p in primes]
    assert scipy_stats.chisquare(observed).pvalue > 1e-3


def test_failure_bound_is_exact_power():
    # compare against a rational evaluation of the same expression
    N, s = 2**11, 330
    base = 1 - 1 / (6 * math.log(N))
    assert pg.failure_bound(N, s) == pytest.approx(float(Fraction(base) ** s), rel=1e-12)
