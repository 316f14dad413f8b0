"""Random prime generation by rejection sampling.

Three generators are provided:

* :func:`uniform_prime_det` draws from {2..n} until a deterministic test
  accepts, so the output is exactly uniform over the primes <= n.
* :func:`uniform_prime_mr` is the same loop with Miller-Rabin in place of
  the deterministic test (unbounded, so only reachable explicitly).
* :func:`gmr` is the bounded variant used for key generation: at most
  ``s`` draws from {1..N}, each tested with ``k`` Miller-Rabin rounds,
  returning ``None`` when every draw is rejected.

:func:`derive_params` picks ``s`` and ``k`` so that the failure
probability is at most 2**-l and the probability of returning a composite
is at most 2**-q.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache

import mpmath

from .errors import BudgetExceededError, InvalidParameterError, IterationCapExceeded
from .numtheory import factor_limit, is_prime_det, miller_rabin

# Bits of working precision for the analytic bounds.
_PREC = 128

UNBOUNDED = math.inf


@dataclass(frozen=True)
class GmrParams:
    N: int
    s: int | float
    k: int

    def __post_init__(self):
        if self.N < 2:
            raise InvalidParameterError(f"N must be >= 2, got {self.N}")
        if self.s != UNBOUNDED and (int(self.s) != self.s or self.s < 1):
            raise InvalidParameterError(f"s must be a positive integer, got {self.s}")
        if self.k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {self.k}")


def uniform_prime_det(n: int, rng: random.Random, max_iter: int | None = None) -> int:
    """Exactly uniform prime <= n using trial division as the test."""
    if n < 2:
        raise InvalidParameterError("n must be >= 2")
    limit = factor_limit()
    if n > limit:
        raise BudgetExceededError("deterministic primality input", n, limit)
    it = 0
    while max_iter is None or it < max_iter:
        it += 1
        p = rng.randint(2, n)
        if is_prime_det(p):
            return p
    raise IterationCapExceeded(f"no prime found in {max_iter} draws")


def gmr(params: GmrParams, rng: random.Random, *, allow_unbounded: bool = False) -> int | None:
    """Run GMR(N, s, k). Returns the accepted draw, or None for bottom."""
    N, s, k = params.N, params.s, params.k
    if s == UNBOUNDED:
        if not allow_unbounded:
            raise InvalidParameterError("unbounded sampling requires allow_unbounded=True")
        while True:
            n = rng.randint(1, N)
            if miller_rabin(n, k, rng):
                return n
    for _ in range(s):
        n = rng.randint(1, N)
        if miller_rabin(n, k, rng):
            return n
    return None


def uniform_prime_mr(n: int, k: int, rng: random.Random) -> int:
    """Probable prime <= n, looping until Miller-Rabin accepts."""
    return gmr(GmrParams(n, UNBOUNDED, k), rng, allow_unbounded=True)


def _log2(x: int) -> mpmath.mpf:
    # mpmath.log on a huge int goes through mpf conversion without overflow
    return mpmath.log(mpmath.mpf(x), 2)


@lru_cache(maxsize=4096)
def derive_params(N: int, l: int, q: int) -> tuple[int, int]:
    """Sample count ``s`` and round count ``k`` for GMR over {1..N}.

    s = ceil(3 l log2 N), k = ceil((log2(3l) + log2 log2 N + q) / 2).
    Both 3 l log2 N <= s and s <= 2**(2k - q) hold on return.
    """
    if N < 3:
        raise InvalidParameterError(f"log log N is not usable for N={N}; need N >= 3")
    if l < 1 or q < 0:
        raise InvalidParameterError("need l >= 1 and q >= 0")
    with mpmath.workprec(_PREC):
        if N & (N - 1) == 0:
            log_n = mpmath.mpf(N.bit_length() - 1)
            s = 3 * l * (N.bit_length() - 1)
        else:
            log_n = _log2(N)
            s = int(mpmath.ceil(3 * l * log_n))
        k = int(mpmath.ceil((mpmath.log(3 * l, 2) + mpmath.log(log_n, 2) + q) / 2))
        lower = 3 * l * log_n
    assert lower <= s, (N, l, q, s)
    assert 2 * k - q >= 0 and s <= 2 ** (2 * k - q), (N, l, q, s, k)
    return s, k


def failure_bound(N: int, s: int) -> float:
    """Upper bound (1 - 1/(6 ln N))**s on Pr[GMR returns bottom]."""
    if N < 2:
        raise InvalidParameterError("N must be >= 2")
    if s == 0:
        return 1.0
    with mpmath.workprec(_PREC):
        base = 1 - 1 / (6 * mpmath.log(mpmath.mpf(N)))
        return float(base**s)


def composite_bound(N: int, s: int, k: int) -> float:
    """Upper bound s 4**-k (1 - 1/(6 ln N)) on Pr[composite | not bottom], capped at 1."""
    if N < 2:
        raise InvalidParameterError("N must be >= 2")
    if k < 0:
        raise InvalidParameterError("k must be >= 0")
    if s == 0:
        return 0.0
    with mpmath.workprec(_PREC):
        value = s * mpmath.mpf(4) ** (-k) * (1 - 1 / (6 * mpmath.log(mpmath.mpf(N))))
        return float(min(value, 1))
