"""Almost-universal hash families and identification built on them.

A family is a list of functions ``h_a`` for indices ``a in [0, I)``. It is
epsilon-almost universal when any two distinct inputs collide under at most
``epsilon * I`` indices. Sending ``(a, h_a(m))`` for a uniform ``a`` then
identifies with type-II error at most epsilon.

Evaluators accept either Python ints (any size) or numpy integer arrays,
broadcasting ``a`` against ``x``.

Linear codes are read from a small text format::

    # comment lines allowed
    7 4 3 2          <- n k d q
    1000110          <- k generator rows, n digits each
    0100101             (digits may also be whitespace separated)
    0010011
    0001111
"""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import (
    BudgetExceededError,
    CertificateError,
    DomainMismatchError,
    IncompatibleFamilyError,
    InvalidCodeError,
)
from .idscheme import SchemeParams, as_fraction, ceil_log2, ceil_power, floor_power
from .numtheory import is_prime_det, sieve_upto

EXHAUSTIVE_MAX_PAIRS = 2**24
CODE_MAX_MESSAGES = 2**16

Epsilon = float | Fraction


def _within(value: Epsilon, bound: Epsilon) -> bool:
    if isinstance(value, (int, Fraction)) and isinstance(bound, (int, Fraction)):
        return value <= bound
    return float(value) <= float(bound) * (1 + 1e-12) + 1e-15


@dataclass(frozen=True)
class HashFamily:
    index_count: int
    domain: range
    codomain: range
    epsilon_raw: Epsilon
    evaluator: Callable[[Any, Any], Any]
    name: str = ""
    # (q, k) when the domain is F_q^k written as base-q integers in [0, q**k)
    field: tuple[int, int] | None = None

    @property
    def epsilon(self) -> Epsilon:
        return min(self.epsilon_raw, 1)

    @property
    def domain_size(self) -> int:
        return self.domain.stop - self.domain.start

    @property
    def range_size(self) -> int:
        return self.codomain.stop - self.codomain.start

    def __call__(self, a, x):
        return self.evaluator(a, x)

    def check_input(self, x: int) -> None:
        if x not in self.domain:
            raise DomainMismatchError(f"{x} is outside the family domain")


# -- constructions -----------------------------------------------------------


def prime_modulus_family(primes, domain: range, epsilon: Epsilon, name: str = "") -> HashFamily:
    """h_p(x) = (x mod p) + 1 indexed by the given primes."""
    primes = np.asarray(primes, dtype=np.int64)
    if len(primes) == 0:
        raise ValueError("need at least one prime")

    def evaluate(a, x):
        if np.ndim(a) == 0 and np.ndim(x) == 0:
            return int(x) % int(primes[a]) + 1
        return np.asarray(x) % primes[a] + 1

    return HashFamily(
        index_count=len(primes),
        domain=domain,
        codomain=range(1, int(primes.max()) + 1),
        epsilon_raw=epsilon,
        evaluator=evaluate,
        name=name,
    )


def mod_family(n: int, alpha) -> HashFamily:
    """H(n): inputs {1..2**n}, moduli the primes <= n**alpha, epsilon alpha / n**(alpha-1)."""
    a = as_fraction(alpha)
    if n < 2 or a <= 1:
        raise ValueError("mod_family needs n >= 2 and alpha > 1")
    primes = sieve_upto(floor_power(n, a))
    eps = float(a) / n ** (float(a) - 1)
    fam = prime_modulus_family(primes, range(1, 2**n + 1), eps, name=f"H({n})")
    return dataclasses.replace(fam, codomain=range(1, ceil_power(n, a) + 1))


def identity_family(domain: range) -> HashFamily:
    return HashFamily(1, domain, domain, Fraction(0), lambda a, x: x, name="id")


def compose(outer: HashFamily, inner: HashFamily) -> HashFamily:
    """outer o inner: apply ``inner`` first. Epsilon adds.

    Index ``a`` splits as ``divmod(a, outer.index_count)`` into the inner
    and outer indices.
    """
    if inner.codomain.start < outer.domain.start or inner.codomain.stop > outer.domain.stop:
        raise DomainMismatchError(
            f"range of {inner.name or 'inner'} {inner.codomain} is not inside domain of "
            f"{outer.name or 'outer'} {outer.domain}"
        )
    I_out = outer.index_count

    def evaluate(a, x):
        a_in, a_out = np.divmod(a, I_out) if np.ndim(a) else divmod(a, I_out)
        return outer.evaluator(a_out, inner.evaluator(a_in, x))

    return HashFamily(
        index_count=inner.index_count * I_out,
        domain=inner.domain,
        codomain=outer.codomain,
        epsilon_raw=inner.epsilon_raw + outer.epsilon_raw,
        evaluator=evaluate,
        name=f"{outer.name}o{inner.name}",
    )


def double_mod_family(n: int, alpha) -> HashFamily:
    """H(alpha n) o H(2**n), epsilon alpha/(alpha n)^(alpha-1) + alpha/2^(n(alpha-1))."""
    a = as_fraction(alpha)
    if (a * n).denominator != 1:
        raise ValueError("alpha * n must be an integer")
    return compose(mod_family(int(a * n), a), mod_family(2**n, a))


def max_distinct_factors(X: int) -> int:
    """Largest omega(d) over 1 <= d <= X: the number of leading primes whose product stays <= X."""
    count, prod, p = 0, 1, 2
    while prod * p <= X:
        prod *= p
        count += 1
        p += 1
        while not is_prime_det(p):
            p += 1
    return count


def modified_scheme_family(params: SchemeParams) -> HashFamily:
    """The prime-keyed scheme as a composed family over primes <= K and <= K'.

    Epsilons are rigorous: a difference below X has at most
    ``max_distinct_factors(X)`` prime divisors.
    """
    pk, pl = sieve_upto(params.K), sieve_upto(params.K_prime)
    eps1 = Fraction(min(len(pk), max_distinct_factors(params.M - 1)), len(pk))
    eps2 = Fraction(min(len(pl), max_distinct_factors(params.K - 1)), len(pl))
    stage1 = prime_modulus_family(pk, range(1, params.M + 1), eps1, name="mod<=K")
    stage1 = dataclasses.replace(stage1, codomain=range(1, params.K + 1))
    stage2 = prime_modulus_family(pl, range(1, params.K + 1), eps2, name="mod<=K'")
    return compose(stage2, stage1)


def scheme_index(params: SchemeParams, k: int, l: int) -> int:
    """Index in :func:`modified_scheme_family` matching the key pair (k, l)."""
    pk, pl = sieve_upto(params.K), sieve_upto(params.K_prime)
    ik, il = np.searchsorted(pk, k), np.searchsorted(pl, l)
    if ik >= len(pk) or pk[ik] != k or il >= len(pl) or pl[il] != l:
        raise ValueError(f"({k}, {l}) is not a prime key pair for these parameters")
    return int(ik) * len(pl) + int(il)


# -- identification ----------------------------------------------------------


def uniform_index(I: int, rng: random.Random) -> int:
    """Uniform draw from [0, I) by rejection from (I-1).bit_length()-bit words."""
    if I < 1:
        raise ValueError("index set is empty")
    bits = (I - 1).bit_length()
    while True:
        a = rng.getrandbits(bits) if bits else 0
        if a < I:
            return a


def id_encode_hash(m: int, H: HashFamily, rng: random.Random) -> tuple[int, int]:
    H.check_input(m)
    a = uniform_index(H.index_count, rng)
    return a, H(a, m)


def id_verify_hash(code: tuple[int, int], candidate: int, H: HashFamily) -> bool:
    a, t = code
    H.check_input(candidate)
    if not 0 <= a < H.index_count:
        raise DomainMismatchError(f"index {a} outside [0, {H.index_count})")
    return H(a, candidate) == t


def hash_block_length(H: HashFamily) -> int:
    return ceil_log2(H.index_count) + ceil_log2(H.range_size)


# -- certificates ------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    max_collisions: int
    index_count: int
    epsilon: Epsilon
    worst_pair: tuple[int, int] | None
    pairs_checked: int
    exhaustive: bool

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.max_collisions, self.index_count)

    @property
    def holds(self) -> bool:
        return _within(self.ratio, self.epsilon)


@dataclass(frozen=True)
class SampledCertificate:
    collision_rate: float
    samples: int
    epsilon: Epsilon
    max_pair_ratio: Fraction | None = None

    @property
    def holds(self) -> bool:
        ok = _within(self.collision_rate, self.epsilon)
        if self.max_pair_ratio is not None:
            ok = ok and _within(self.max_pair_ratio, self.epsilon)
        return ok


def _table(H: HashFamily) -> np.ndarray:
    xs = np.arange(H.domain.start, H.domain.stop, dtype=np.int64)
    idx = np.arange(H.index_count, dtype=np.int64)
    return np.asarray(H(idx[:, None], xs[None, :]))


def certify_exhaustive(H: HashFamily) -> Certificate:
    """Max over all distinct input pairs of the number of colliding indices."""
    D = H.domain_size
    if D * (D - 1) // 2 > EXHAUSTIVE_MAX_PAIRS:
        raise BudgetExceededError("exhaustive pair count", D * (D - 1) // 2, EXHAUSTIVE_MAX_PAIRS)
    T = _table(H)
    I = H.index_count
    best, worst = -1, None
    chunk = max(1, 2**24 // max(1, I * D))
    for start in range(0, D, chunk):
        rows = T[:, start : start + chunk]
        counts = (rows[:, :, None] == T[:, None, :]).sum(axis=0)
        # keep only pairs (i, j) with j > i
        i_idx = np.arange(start, start + rows.shape[1])[:, None]
        counts[np.arange(D)[None, :] <= i_idx] = -1
        pos = np.unravel_index(np.argmax(counts), counts.shape)
        if counts[pos] > best:
            best = int(counts[pos])
            worst = (H.domain.start + start + int(pos[0]), H.domain.start + int(pos[1]))
    return Certificate(max(best, 0), I, H.epsilon, worst, D * (D - 1) // 2, True)


def certify_sampled(
    H: HashFamily,
    samples: int,
    rng: np.random.Generator,
    pair_ratio_samples: int = 0,
) -> SampledCertificate:
    """Collision rate of random distinct pairs under a random index.

    With ``pair_ratio_samples`` > 0, that many pairs also get the exact
    fraction of colliding indices, and the maximum is reported.
    """
    lo, hi = H.domain.start, H.domain.stop
    x = rng.integers(lo, hi, size=samples)
    y = rng.integers(lo, hi - 1, size=samples)
    y = np.where(y >= x, y + 1, y)
    a = rng.integers(0, H.index_count, size=samples)
    rate = float(np.mean(H(a, x) == H(a, y)))
    max_ratio = None
    if pair_ratio_samples:
        idx = np.arange(H.index_count)[:, None]
        best = 0
        for start in range(0, pair_ratio_samples, 256):
            stop = min(start + 256, pair_ratio_samples, samples)
            hits = (H(idx, x[None, start:stop]) == H(idx, y[None, start:stop])).sum(axis=0)
            best = max(best, int(hits.max(initial=0)))
        max_ratio = Fraction(best, H.index_count)
    return SampledCertificate(rate, samples, H.epsilon, max_ratio)


# -- linear codes ------------------------------------------------------------


def rank_mod(G: np.ndarray, q: int) -> int:
    A = np.array(G, dtype=np.int64) % q
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        pivot = next((i for i in range(r, rows) if A[i, c]), None)
        if pivot is None:
            continue
        A[[r, pivot]] = A[[pivot, r]]
        A[r] = A[r] * pow(int(A[r, c]), -1, q) % q
        for i in range(rows):
            if i != r and A[i, c]:
                A[i] = (A[i] - A[i, c] * A[r]) % q
        r += 1
        if r == rows:
            break
    return r


def message_digits(x, q: int, k: int) -> np.ndarray:
    """Base-q digits of x, least significant first (digit i multiplies generator row i)."""
    x = np.asarray(x, dtype=np.int64)
    return (x[..., None] // q ** np.arange(k, dtype=np.int64)) % q


def codebook(G: np.ndarray, q: int) -> np.ndarray:
    k = G.shape[0]
    if q**k > CODE_MAX_MESSAGES:
        raise BudgetExceededError("code message count", q**k, CODE_MAX_MESSAGES)
    return message_digits(np.arange(q**k), q, k) @ G % q


def min_distance(book: np.ndarray) -> int:
    """Exhaustive minimum Hamming distance between distinct rows."""
    best = book.shape[1]
    for i in range(len(book) - 1):
        d = (book[i + 1 :] != book[i]).sum(axis=1).min()
        best = min(best, int(d))
    return best


@dataclass(frozen=True)
class LinearCodeSpec:
    n: int
    k: int
    d: int
    q: int
    generator: np.ndarray = dataclasses.field(compare=False)

    def __post_init__(self):
        G = np.asarray(self.generator, dtype=np.int64)
        object.__setattr__(self, "generator", G)
        if not is_prime_det(self.q):
            raise InvalidCodeError(f"field size {self.q} is not prime")
        if G.shape != (self.k, self.n):
            raise InvalidCodeError(f"generator shape {G.shape} != ({self.k}, {self.n})")
        if ((G < 0) | (G >= self.q)).any():
            raise InvalidCodeError("generator entries must lie in [0, q)")
        if not 1 <= self.d <= self.n:
            raise InvalidCodeError(f"distance {self.d} outside [1, {self.n}]")
        if rank_mod(G, self.q) != self.k:
            raise InvalidCodeError("generator does not have full row rank")
        weight = int((codebook(G, self.q)[1:] != 0).sum(axis=1).min())
        if weight != self.d:
            raise InvalidCodeError(f"declared distance {self.d} but minimum weight is {weight}")


def parse_code(text: str) -> LinearCodeSpec:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InvalidCodeError("empty code description")
    try:
        n, k, d, q = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise InvalidCodeError("header must be four integers: n k d q") from exc
    rows = []
    for ln in lines[1:]:
        parts = ln.split()
        rows.append([int(v) for v in (parts if len(parts) > 1 else list(ln))])
    if len(rows) != k or any(len(r) != n for r in rows):
        raise InvalidCodeError(f"expected {k} rows of {n} entries")
    return LinearCodeSpec(n, k, d, q, np.array(rows, dtype=np.int64))


def load_code(path: str | Path) -> LinearCodeSpec:
    return parse_code(Path(path).read_text())


def format_code(C: LinearCodeSpec) -> str:
    sep = "" if C.q <= 10 else " "
    body = "\n".join(sep.join(str(int(v)) for v in row) for row in C.generator)
    return f"{C.n} {C.k} {C.d} {C.q}\n{body}\n"


def code_to_hash(C: LinearCodeSpec) -> HashFamily:
    """h_a(x) = coordinate a of the codeword of x; epsilon = 1 - d/n."""
    book = codebook(C.generator, C.q)

    def evaluate(a, x):
        out = book[x, a]
        return int(out) if np.ndim(out) == 0 else out

    return HashFamily(
        index_count=C.n,
        domain=range(0, C.q**C.k),
        codomain=range(0, C.q),
        epsilon_raw=Fraction(C.n - C.d, C.n),
        evaluator=evaluate,
        name=f"[{C.n},{C.k},{C.d}]_{C.q}",
        field=(C.q, C.k),
    )


def hash_to_code(H: HashFamily) -> LinearCodeSpec:
    """The code whose codeword for x is (h_a(x)) over all indices a.

    The family must be linear over F_q; the minimum distance is found by an
    exhaustive pair check and must be at least n(1 - epsilon).
    """
    if H.field is None:
        raise IncompatibleFamilyError("family does not declare a field structure (q, k)")
    q, k = H.field
    n = H.index_count
    if H.domain != range(0, q**k) or H.codomain != range(0, q):
        raise IncompatibleFamilyError("family must map F_q^k to F_q")
    if q**k > CODE_MAX_MESSAGES:
        raise BudgetExceededError("code message count", q**k, CODE_MAX_MESSAGES)
    book = _table(H).T % q
    G = book[q ** np.arange(k)]
    if not np.array_equal(book, message_digits(np.arange(q**k), q, k) @ G % q):
        raise IncompatibleFamilyError("family is not linear over F_q")
    d = min_distance(book)
    eps = H.epsilon_raw
    needed = n * (1 - (eps if isinstance(eps, Fraction) else Fraction(eps)))
    if not _within(needed, d):
        raise CertificateError(f"minimum distance {d} is below n(1 - eps) = {float(needed):.6g}")
    return LinearCodeSpec(n, k, d, q, G)


def hamming_7_4() -> LinearCodeSpec:
    G = np.array(
        [
            [1, 0, 0, 0, 1, 1, 0],
            [0, 1, 0, 0, 1, 0, 1],
            [0, 0, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ]
    )
    return LinearCodeSpec(7, 4, 3, 2, G)
