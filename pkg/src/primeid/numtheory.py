"""Primality, sieving, prime counting and distinct-factor counting.

Everything here works on plain Python ints, so sizes are unbounded except
where a sieve or trial-division factorization is needed. Those paths are
guarded by budgets read from the environment:

``PRIMEID_SIEVE_LIMIT``
    largest N accepted by :func:`sieve_upto` (default 10**8)
``PRIMEID_FACTOR_LIMIT``
    largest n accepted by :func:`omega` and the deterministic generator
    (default 10**12)
"""
from __future__ import annotations

import enum
import math
import os
import random
import threading
from typing import NamedTuple

import numpy as np

from .errors import BudgetExceededError

DEFAULT_SIEVE_LIMIT = 10**8
DEFAULT_FACTOR_LIMIT = 10**12


def sieve_limit() -> int:
    return int(os.environ.get("PRIMEID_SIEVE_LIMIT", DEFAULT_SIEVE_LIMIT))


def factor_limit() -> int:
    return int(os.environ.get("PRIMEID_FACTOR_LIMIT", DEFAULT_FACTOR_LIMIT))


class Verdict(enum.Enum):
    PROBABLE_PRIME = "probable_prime"
    COMPOSITE = "composite"


class PrimalityVerdict(NamedTuple):
    verdict: Verdict
    rounds_used: int

    def __bool__(self) -> bool:
        return self.verdict is Verdict.PROBABLE_PRIME


def is_prime_det(n: int) -> bool:
    """Trial division up to isqrt(n). Meant as an oracle for small n."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0 or n % 3 == 0:
        return False
    limit = math.isqrt(n)
    f = 5
    while f <= limit:
        if n % f == 0 or n % (f + 2) == 0:
            return False
        f += 6
    return True


def miller_rabin(n: int, k: int, rng: random.Random) -> PrimalityVerdict:
    """Miller-Rabin with ``k`` random witnesses drawn from [2, n-2].

    A prime is never reported composite; a composite survives all rounds
    with probability at most 4**-k. Inputs below 4 and even inputs get a
    fixed verdict without consuming randomness.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 2:
        return PrimalityVerdict(Verdict.COMPOSITE, 0)
    if n < 4:
        return PrimalityVerdict(Verdict.PROBABLE_PRIME, 0)
    if n % 2 == 0:
        return PrimalityVerdict(Verdict.COMPOSITE, 0)

    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1

    for i in range(1, k + 1):
        a = rng.randint(2, n - 2)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return PrimalityVerdict(Verdict.COMPOSITE, i)
    return PrimalityVerdict(Verdict.PROBABLE_PRIME, k)


# The largest sieve computed so far; smaller requests are served by slicing.
_sieve_lock = threading.Lock()
_sieve_cache: np.ndarray = np.zeros(0, dtype=bool)


def _check_sieve_budget(N: int) -> None:
    limit = sieve_limit()
    if N > limit:
        raise BudgetExceededError("sieve bound", N, limit)


def prime_mask(N: int) -> np.ndarray:
    """Boolean array ``m`` of length N+1 with ``m[i]`` true iff i is prime.

    The returned array is read-only and may be shared with other callers.
    """
    global _sieve_cache
    N = int(N)
    if N < 0:
        raise ValueError("N must be non-negative")
    _check_sieve_budget(N)
    with _sieve_lock:
        if len(_sieve_cache) <= N:
            size = max(N + 1, 2 * len(_sieve_cache), 1024)
            size = min(size, sieve_limit() + 1)
            mask = np.ones(size, dtype=bool)
            mask[:2] = False
            for p in range(2, math.isqrt(size - 1) + 1):
                if mask[p]:
                    mask[p * p :: p] = False
            mask.setflags(write=False)
            _sieve_cache = mask
        return _sieve_cache[: N + 1]


def sieve_upto(N: int) -> np.ndarray:
    """All primes <= N in increasing order, as an int64 array."""
    return np.flatnonzero(prime_mask(N)).astype(np.int64)


def prime_count(x: int) -> int:
    """pi(x), the number of primes not exceeding x."""
    x = math.floor(x)
    if x < 2:
        return 0
    return int(np.count_nonzero(prime_mask(x)))


def prime_count_table(N: int) -> np.ndarray:
    """Array ``t`` with ``t[n] == pi(n)`` for 0 <= n <= N."""
    return np.cumsum(prime_mask(N), dtype=np.int64)


def nth_prime_upper_bound(i: int) -> int:
    """Integer ceiling of 12(i ln i + i ln(12/e)), valid for every i >= 1."""
    return math.ceil(12 * (i * math.log(i) + i * math.log(12 / math.e)))


def nth_prime(i: int) -> int:
    """The i-th prime, with nth_prime(1) == 2."""
    if i < 1:
        raise ValueError("index must be >= 1")
    primes = sieve_upto(nth_prime_upper_bound(i))
    return int(primes[i - 1])


def first_primes(count: int) -> np.ndarray:
    """The first ``count`` primes as an int64 array."""
    if count < 1:
        return np.zeros(0, dtype=np.int64)
    return sieve_upto(nth_prime_upper_bound(count))[:count]


def omega(n: int) -> int:
    """Number of distinct prime factors of n (omega(1) == 0)."""
    if n < 1:
        raise ValueError("omega is defined for n >= 1")
    limit = factor_limit()
    if n > limit:
        raise BudgetExceededError("factorization input", n, limit)
    count = 0
    for p in (2, 3):
        if n % p == 0:
            count += 1
            while n % p == 0:
                n //= p
    f = 5
    while f * f <= n:
        for p in (f, f + 2):
            if n % p == 0:
                count += 1
                while n % p == 0:
                    n //= p
        f += 6
    if n > 1:
        count += 1
    return count


def omega_table(N: int) -> np.ndarray:
    """Array ``w`` with ``w[n] == omega(n)`` for 1 <= n <= N (w[0] is 0)."""
    counts = np.zeros(N + 1, dtype=np.int32)
    for p in sieve_upto(N):
        counts[p::p] += 1
    return counts


def primorial(r: int) -> int:
    """Product of the first r primes."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return math.prod(int(p) for p in first_primes(r))
