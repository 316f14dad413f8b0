"""Prime-keyed identification over a noiseless binary channel.

Modified scheme (the main path): the sender draws probable primes
``k <= K`` and ``l <= K'`` with GMR and transmits ``k``, ``l`` and the tag
``phi_l(phi_k(m))`` where ``phi_p(n) = (n mod p) + 1``. A receiver
interested in message ``c`` accepts iff ``phi_l(phi_k(c))`` equals the tag.

Sizes: ``K = ceil(logM**alpha)`` and ``K' = ceil(log2(K)**alpha)``.

Wire format (big-endian, no separators)::

    | k : key_width(K) | l : key_width(K') | tag - 1 : ceil(log2 K') |

``key_width(K)`` is ``ceil(log2 K)``, except that K == 2 uses 2 bits so the
prime 2 itself is representable. The frame is padded on the left with zero
bits to a whole number of hex digits for text transport.

The original index-based scheme is kept for comparison at sizes where the
first K primes can be sieved: indices into the list of primes are sent
instead of the primes themselves.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import (
    BudgetExceededError,
    KeyGenerationError,
    MalformedCodewordError,
    SchemeConstructionError,
    TagOutOfRangeError,
    WidthMismatchError,
)
from .numtheory import first_primes, nth_prime, prime_count, sieve_limit
from .primegen import GmrParams, derive_params, gmr

DEFAULT_RETRY_CAP = 8
EXACT_COLLISION_MAX_LOGM = 13
_PREC = 256


# -- exact size arithmetic ---------------------------------------------------


def as_fraction(alpha) -> Fraction:
    """Exact rational value of ``alpha``; floats are read via their shortest repr (1.1 -> 11/10)."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, float):
        return Fraction(repr(alpha))
    return Fraction(alpha)


def iroot(n: int, e: int) -> int:
    """floor(n ** (1/e)) for integers n >= 0, e >= 1."""
    if n < 0 or e < 1:
        raise ValueError("iroot needs n >= 0 and e >= 1")
    if n < 2 or e == 1:
        return n
    x = 1 << -(-n.bit_length() // e)
    while True:
        y = ((e - 1) * x + n // x ** (e - 1)) // e
        if y >= x:
            break
        x = y
    while x**e > n:
        x -= 1
    while (x + 1) ** e <= n:
        x += 1
    return x


def ceil_power(x: int, alpha) -> int:
    """ceil(x ** alpha) for a positive integer x, computed exactly."""
    a = as_fraction(alpha)
    if x < 1 or a < 0:
        raise ValueError("ceil_power needs x >= 1 and alpha >= 0")
    target = x**a.numerator
    r = iroot(target, a.denominator)
    return r if r**a.denominator == target else r + 1


def floor_power(x: int, alpha) -> int:
    """floor(x ** alpha) for a positive integer x, computed exactly."""
    a = as_fraction(alpha)
    return iroot(x**a.numerator, a.denominator)


def ceil_log2(n: int) -> int:
    """ceil(log2 n) for n >= 1."""
    if n < 1:
        raise ValueError("ceil_log2 needs n >= 1")
    return (n - 1).bit_length()


def ceil_log2_power(n: int, alpha) -> int:
    """ceil(log2(n) ** alpha) for an integer n >= 1.

    When n is a power of two the base is an integer and the exact path is
    used; otherwise log2(n) is transcendental and so is its rational power,
    which makes a high-precision ceiling safe.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n & (n - 1) == 0:
        j = n.bit_length() - 1
        return 0 if j == 0 else ceil_power(j, alpha)
    a = as_fraction(alpha)
    with mpmath.workprec(_PREC):
        v = mpmath.log(mpmath.mpf(n), 2) ** (mpmath.mpf(a.numerator) / a.denominator)
        c = int(mpmath.ceil(v))
        assert abs(v - mpmath.nint(v)) > mpmath.mpf(2) ** (-_PREC // 2)
    return c


def key_width(K: int) -> int:
    return 2 if K == 2 else ceil_log2(K)


def phi(n: int, l: int) -> int:
    """(n mod l) + 1, a value in [1, l]."""
    if l == 0:
        raise ZeroDivisionError("phi modulus must be nonzero")
    return n % l + 1


# -- parameters ----------------------------------------------------------------


@dataclass(frozen=True)
class Layout:
    k_bits: int
    l_bits: int
    tag_bits: int

    @property
    def total(self) -> int:
        return self.k_bits + self.l_bits + self.tag_bits

    @property
    def hex_digits(self) -> int:
        return -(-self.total // 4)


@dataclass(frozen=True)
class SchemeParams:
    """Message space {1..2**logM}, exponent alpha and the GMR error targets.

    ``l_exp`` and ``q_exp`` set the per-key bottom and composite
    probabilities to 2**-l_exp and 2**-q_exp.
    """

    logM: int
    alpha: float | Fraction
    l_exp: int = 10
    q_exp: int = 10
    K: int = field(init=False, repr=False)
    K_prime: int = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.logM) != self.logM or self.logM < 2:
            raise SchemeConstructionError(f"logM must be an integer >= 2, got {self.logM}")
        if as_fraction(self.alpha) <= 1:
            raise SchemeConstructionError(f"alpha must be > 1, got {self.alpha}")
        if self.l_exp < 1 or self.q_exp < 0:
            raise SchemeConstructionError("need l_exp >= 1 and q_exp >= 0")
        K, K_prime = derive_sizes(self.logM, self.alpha)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "K_prime", K_prime)

    @property
    def M(self) -> int:
        return 1 << self.logM

    @property
    def epsilon(self) -> float:
        return 2.0**-self.l_exp

    @property
    def layout(self) -> Layout:
        return Layout(key_width(self.K), key_width(self.K_prime), ceil_log2(self.K_prime))

    def check_message(self, m: int) -> None:
        if not 1 <= m <= self.M:
            raise ValueError(f"message must lie in [1, 2**{self.logM}]")


def derive_sizes(logM: int, alpha) -> tuple[int, int]:
    """(K, K') = (ceil(logM**alpha), ceil(log2(K)**alpha))."""
    K = ceil_power(logM, alpha)
    K_prime = ceil_log2_power(K, alpha)
    if K < 2 or K_prime < 2:
        raise SchemeConstructionError(f"derived sizes K={K}, K'={K_prime} must both be >= 2")
    return K, K_prime


# -- keys and codewords ----------------------------------------------------


class Provenance(enum.Enum):
    DETERMINISTIC = "deterministic"
    PROBABLE = "probable"


@dataclass(frozen=True)
class KeyPair:
    k: int
    l: int
    k_provenance: Provenance = Provenance.PROBABLE
    l_provenance: Provenance = Provenance.PROBABLE


@dataclass(frozen=True)
class Codeword:
    k: int
    l: int
    tag: int
    layout: Layout

    def __post_init__(self):
        if self.k < 2 or self.l < 2:
            raise MalformedCodewordError(f"key fields must be >= 2, got k={self.k}, l={self.l}")
        if not 1 <= self.tag <= self.l:
            raise TagOutOfRangeError(f"tag {self.tag} outside [1, {self.l}]")
        lay = self.layout
        if self.k >> lay.k_bits or self.l >> lay.l_bits or (self.tag - 1) >> lay.tag_bits:
            raise WidthMismatchError("field value does not fit its width")

    def to_int(self) -> int:
        lay = self.layout
        return (((self.k << lay.l_bits) | self.l) << lay.tag_bits) | (self.tag - 1)

    def to_bits(self) -> str:
        return format(self.to_int(), f"0{self.layout.total}b")

    def to_hex(self) -> str:
        return format(self.to_int(), f"0{self.layout.hex_digits}x")

    @classmethod
    def from_int(cls, value: int, layout: Layout) -> Codeword:
        if value < 0 or value >> layout.total:
            raise WidthMismatchError(f"value needs more than {layout.total} bits")
        tag0 = value & ((1 << layout.tag_bits) - 1)
        value >>= layout.tag_bits
        l = value & ((1 << layout.l_bits) - 1)
        k = value >> layout.l_bits
        if tag0 >= l:
            raise TagOutOfRangeError(f"zero-based tag {tag0} >= l={l}")
        return cls(k, l, tag0 + 1, layout)

    @classmethod
    def from_bits(cls, bits: str, layout: Layout) -> Codeword:
        if len(bits) != layout.total or set(bits) - {"0", "1"}:
            raise WidthMismatchError(f"expected {layout.total} binary digits, got {len(bits)}")
        return cls.from_int(int(bits, 2), layout)

    @classmethod
    def from_hex(cls, text: str, layout: Layout) -> Codeword:
        text = text.strip().lower().removeprefix("0x")
        if len(text) != layout.hex_digits:
            raise WidthMismatchError(f"expected {layout.hex_digits} hex digits, got {len(text)}")
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise MalformedCodewordError(f"not a hex string: {text!r}") from exc
        return cls.from_int(value, layout)


def serialize(c: Codeword) -> str:
    return c.to_bits()


def deserialize(bits: str, params: SchemeParams) -> Codeword:
    return Codeword.from_bits(bits, params.layout)


def draw_key(N: int, params: SchemeParams, rng: random.Random, retry_cap: int = DEFAULT_RETRY_CAP) -> int:
    """A probable prime <= N from GMR, retrying on bottom up to ``retry_cap`` times."""
    # derive_params needs log log N > 0; sizing for N=3 only adds samples
    s, k = derive_params(max(N, 3), params.l_exp, params.q_exp)
    gp = GmrParams(N, s, k)
    for _ in range(retry_cap):
        p = gmr(gp, rng)
        if p is not None:
            return p
    raise KeyGenerationError(f"GMR({N}, {s}, {k}) returned bottom {retry_cap} times")


def draw_keys(params: SchemeParams, rng: random.Random, retry_cap: int = DEFAULT_RETRY_CAP) -> KeyPair:
    return KeyPair(draw_key(params.K, params, rng, retry_cap), draw_key(params.K_prime, params, rng, retry_cap))


def encode_with_keys(m: int, keys: KeyPair, params: SchemeParams) -> Codeword:
    params.check_message(m)
    return Codeword(keys.k, keys.l, phi(phi(m, keys.k), keys.l), params.layout)


def encode(m: int, params: SchemeParams, rng: random.Random, retry_cap: int = DEFAULT_RETRY_CAP) -> tuple[Codeword, KeyPair]:
    keys = draw_keys(params, rng, retry_cap)
    return encode_with_keys(m, keys, params), keys


def verify(c: Codeword, candidate: int, params: SchemeParams) -> bool:
    """True iff ``candidate`` produces the tag carried by ``c``.

    Key fields are used as moduli without a primality check; only the frame
    shape is validated.
    """
    if c.layout != params.layout:
        raise WidthMismatchError(f"codeword layout {c.layout} does not match {params.layout}")
    params.check_message(candidate)
    return phi(phi(candidate, c.k), c.l) == c.tag


# -- analytic bounds ---------------------------------------------------------


@dataclass(frozen=True)
class Type2Bound:
    raw: float
    terms: tuple[float, float, float]
    exact: float | None

    @property
    def clamped(self) -> float:
        return min(1.0, self.raw)


def type2_bound_modified(params: SchemeParams, epsilon: float | None = None) -> Type2Bound:
    """6a/(log M)^(a-1) + 6a/(log K)^(a-1) + 2 eps, plus the pi(K)-based form when K can be sieved."""
    eps = params.epsilon if epsilon is None else epsilon
    with mpmath.workprec(_PREC):
        a = mpmath.mpf(as_fraction(params.alpha).numerator) / as_fraction(params.alpha).denominator
        log_m = mpmath.mpf(params.logM)
        log_k = mpmath.log(params.K, 2)
        t1 = 6 * a / log_m ** (a - 1)
        t2 = 6 * a / log_k ** (a - 1)
        exact = None
        if params.K <= sieve_limit():
            loglog_k = mpmath.log(log_k, 2)
            if loglog_k > 0:
                exact = float(
                    log_m / (prime_count(params.K) * mpmath.log(log_m, 2))
                    + log_k / (prime_count(params.K_prime) * loglog_k)
                    + 2 * eps
                )
    t1, t2, t3 = float(t1), float(t2), 2 * eps
    return Type2Bound(t1 + t2 + t3, (t1, t2, t3), exact)


@dataclass(frozen=True)
class BoundReport:
    block_length: int
    layout: Layout
    type2_bound_raw: float
    type2_bound: float
    rate_ratio: float
    leading_ratio: float


def block_length_modified(params: SchemeParams) -> BoundReport:
    """Frame size and rate figures; the tag width is the worst case over l."""
    lay = params.layout
    denom = float(as_fraction(params.alpha)) * math.log2(params.logM)
    bound = type2_bound_modified(params)
    return BoundReport(
        block_length=lay.total,
        layout=lay,
        type2_bound_raw=bound.raw,
        type2_bound=bound.clamped,
        rate_ratio=lay.total / denom,
        leading_ratio=ceil_log2(params.K) / denom,
    )


# -- collision probability -------------------------------------------------


def _tag_counts_by_residue(k: int, l: int, M: int) -> list[int]:
    """Number of m in [1, M] per tag value of phi_l(phi_k(m)), indexed by (phi_k(m) mod l)."""
    Q, R = divmod(M, k)

    def upto(u: int, j: int) -> int:
        # count of v in [1, u] with v = j (mod l), j in [0, l)
        return (u - (j or l)) // l + 1

    return [Q * upto(k, j) + upto(R + 1, j) - upto(1, j) for j in range(l)]


def collision_probability(
    k: int,
    l: int,
    logM: int,
    mode: str = "exact",
    rng: random.Random | None = None,
    samples: int = 10_000,
) -> float:
    """Unordered colliding message pairs over M**2 for the keys (k, l).

    ``exact`` enumerates every message (logM <= 13), ``residue`` gets the
    same number in O(l) from residue-class sizes, and ``sampled`` scales the
    collision frequency of random distinct pairs by (M - 1) / (2M).
    """
    M = 1 << logM
    if mode == "exact":
        if logM > EXACT_COLLISION_MAX_LOGM:
            raise BudgetExceededError("exact collision logM", logM, EXACT_COLLISION_MAX_LOGM)
        m = np.arange(1, M + 1, dtype=np.int64)
        tags = (m % k + 1) % l + 1
        counts = np.bincount(tags).astype(object)
    elif mode == "residue":
        counts = _tag_counts_by_residue(k, l, M)
    elif mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        hits = 0
        for _ in range(samples):
            x = rng.getrandbits(logM) + 1
            y = rng.getrandbits(logM) + 1
            while y == x:
                y = rng.getrandbits(logM) + 1
            hits += phi(phi(x, k), l) == phi(phi(y, k), l)
        return float(Fraction(hits, samples) * Fraction(M - 1, 2 * M))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    pairs = sum(int(c) * (int(c) - 1) // 2 for c in counts)
    return float(Fraction(pairs, M * M))


# -- original index-based scheme -------------------------------------------


@dataclass(frozen=True)
class OriginalParams:
    """Index-based variant over messages {1..M}; needs the first K primes."""

    M: int
    alpha: float | Fraction
    K: int = field(init=False)
    p_K: int = field(init=False)
    K_prime: int = field(init=False)

    def __post_init__(self):
        if as_fraction(self.alpha) <= 1:
            raise SchemeConstructionError("alpha must be > 1")
        if self.M < 3:
            raise SchemeConstructionError("M must be >= 3")
        K = ceil_log2_power(self.M, self.alpha)
        p_K = nth_prime(K)
        # fixed from p_K so every frame has the same width
        K_prime = ceil_log2_power(p_K, self.alpha)
        if K < 2 or K_prime < 2:
            raise SchemeConstructionError(f"K={K}, K'={K_prime} must both be >= 2")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "p_K", p_K)
        object.__setattr__(self, "K_prime", K_prime)

    @property
    def primes(self) -> np.ndarray:
        return first_primes(max(self.K, self.K_prime))

    @property
    def p_K_prime(self) -> int:
        return nth_prime(self.K_prime)

    @property
    def layout(self) -> Layout:
        return Layout(ceil_log2(self.K), ceil_log2(self.K_prime), ceil_log2(self.p_K_prime))


@dataclass(frozen=True)
class OriginalCodeword:
    k_index: int
    l_index: int
    tag: int

    def to_bits(self, params: OriginalParams) -> str:
        lay = params.layout
        return (
            format(self.k_index - 1, f"0{lay.k_bits}b")
            + format(self.l_index - 1, f"0{lay.l_bits}b")
            + format(self.tag - 1, f"0{lay.tag_bits}b")
        )


def original_tag(m: int, k_index: int, l_index: int, params: OriginalParams) -> int:
    primes = params.primes
    return phi(phi(m, int(primes[k_index - 1])), int(primes[l_index - 1]))


def encode_original(m: int, params: OriginalParams, rng: random.Random) -> OriginalCodeword:
    if not 1 <= m <= params.M:
        raise ValueError("message out of range")
    k_index = rng.randint(1, params.K)
    l_index = rng.randint(1, params.K_prime)
    return OriginalCodeword(k_index, l_index, original_tag(m, k_index, l_index, params))


def verify_original(c: OriginalCodeword, candidate: int, params: OriginalParams) -> bool:
    return original_tag(candidate, c.k_index, c.l_index, params) == c.tag


def block_length_original(params: OriginalParams) -> int:
    return params.layout.total


def type2_bound_original(params: OriginalParams) -> float:
    """1/(log M)^(a-1) + 1/(log p_K)^(a-1)."""
    a = float(as_fraction(params.alpha))
    return 1 / math.log2(params.M) ** (a - 1) + 1 / math.log2(params.p_K) ** (a - 1)
