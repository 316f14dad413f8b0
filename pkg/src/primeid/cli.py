"""Command-line entry point.

Exit status: 0 on success (or a verify that matched), 1 when verify does
not match or GMR returns bottom, 2 on usage or precondition errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import secrets
import sys
from fractions import Fraction

import numpy as np

from . import hashid, idscheme, primegen, simharness
from .errors import BudgetExceededError, KeyGenerationError

EXIT_OK, EXIT_FALSE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _hex_int(text: str) -> int:
    try:
        return int(text.strip().lower().removeprefix("0x"), 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _exp_range(text: str) -> list[int]:
    lo, _, hi = text.partition(":")
    return [2**e for e in range(int(lo), int(hi or lo) + 1)]


def _alpha(text: str) -> Fraction:
    try:
        return Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _emit(payload, args) -> None:
    if args.format == "json":
        text = json.dumps(payload, indent=2, default=str) + "\n"
    else:
        rows = payload if isinstance(payload, list) else [payload]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in row.items()})
        text = buf.getvalue()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


def _params(args) -> idscheme.SchemeParams:
    return idscheme.SchemeParams(args.logm, args.alpha, args.l, args.q)


def cmd_prime(args, rng) -> int:
    if args.mode == "det":
        p = primegen.uniform_prime_det(args.max, rng)
    else:
        if args.max < 2:
            raise UsageError("--max must be >= 2")
        p = primegen.uniform_prime_mr(args.max, args.rounds, rng)
    _emit({"prime": p, "max": args.max, "mode": args.mode, "rounds": args.rounds, "seed": args.seed}, args)
    return EXIT_OK


def cmd_gmr(args, rng) -> int:
    s, k = primegen.derive_params(args.max, args.l, args.q)
    s = args.s or s
    k = args.k or k
    p = primegen.gmr(primegen.GmrParams(args.max, s, k), rng)
    _emit(
        {
            "outcome": "bottom" if p is None else p,
            "max": args.max,
            "s": s,
            "k": k,
            "failure_bound": primegen.failure_bound(args.max, s),
            "composite_bound": primegen.composite_bound(args.max, s, k),
            "seed": args.seed,
        },
        args,
    )
    return EXIT_FALSE if p is None else EXIT_OK


def cmd_encode(args, rng) -> int:
    params = _params(args)
    c, keys = idscheme.encode(args.message, params, rng)
    lay = params.layout
    _emit(
        {
            "codeword": c.to_hex(),
            "bits": lay.total,
            "layout": {"k_bits": lay.k_bits, "l_bits": lay.l_bits, "tag_bits": lay.tag_bits},
            "k": keys.k,
            "l": keys.l,
            "tag": c.tag,
            "K": params.K,
            "K_prime": params.K_prime,
            "seed": args.seed,
        },
        args,
    )
    return EXIT_OK


def cmd_verify(args, rng) -> int:
    params = _params(args)
    c = idscheme.Codeword.from_hex(args.codeword, params.layout)
    ok = idscheme.verify(c, args.message, params)
    _emit({"result": ok, "k": c.k, "l": c.l, "tag": c.tag}, args)
    return EXIT_OK if ok else EXIT_FALSE


def cmd_bound(args, rng) -> int:
    params = _params(args)
    rep = idscheme.block_length_modified(params)
    t2 = idscheme.type2_bound_modified(params)
    out = {
        "logM": args.logm,
        "alpha": float(args.alpha),
        "K": params.K,
        "K_prime": params.K_prime,
        "block_length": rep.block_length,
        "type2_bound_raw": t2.raw,
        "type2_bound": t2.clamped,
        "term_M": t2.terms[0],
        "term_K": t2.terms[1],
        "term_eps": t2.terms[2],
        "exact_bound": t2.exact,
        "rate_ratio": rep.rate_ratio,
        "leading_ratio": rep.leading_ratio,
    }
    if args.original:
        orig = idscheme.OriginalParams(1 << args.logm, args.alpha)
        out.update(
            original_K=orig.K,
            original_K_prime=orig.K_prime,
            original_block_length=idscheme.block_length_original(orig),
            original_type2_bound=idscheme.type2_bound_original(orig),
        )
    _emit(out, args)
    return EXIT_OK


def cmd_sweep(args, rng) -> int:
    grid = args.logm or _exp_range(args.logm_exp)
    config = simharness.SweepConfig(
        alpha=float(args.alpha),
        rounds=args.rounds,
        logM_grid=tuple(grid),
        l_exp=args.l,
        q_exp=args.q,
        seed=args.seed,
        pair_samples=args.pair_samples,
        workers=args.workers,
    )
    records = simharness.run_sweep(config)
    simharness.write_records(records, args.format, args.out)
    if args.metadata:
        simharness.write_metadata(config, args.metadata)
    return EXIT_OK


def _certificate_dict(cert) -> dict:
    if isinstance(cert, hashid.Certificate):
        return {
            "kind": "exhaustive",
            "max_collisions": cert.max_collisions,
            "index_count": cert.index_count,
            "ratio": str(cert.ratio),
            "ratio_float": float(cert.ratio),
            "worst_pair": list(cert.worst_pair) if cert.worst_pair else None,
            "pairs_checked": cert.pairs_checked,
            "holds": cert.holds,
        }
    return {
        "kind": "sampled",
        "collision_rate": cert.collision_rate,
        "samples": cert.samples,
        "max_pair_ratio": None if cert.max_pair_ratio is None else str(cert.max_pair_ratio),
        "holds": cert.holds,
    }


def cmd_hash(args, rng) -> int:
    out: dict = {"seed": args.seed}
    if args.code:
        code = hashid.load_code(args.code)
        H = hashid.code_to_hash(code)
        back = hashid.hash_to_code(H)
        out.update(code=f"[{code.n},{code.k},{code.d}]_{code.q}", round_trip_distance=back.d)
    elif args.mod is not None:
        H = hashid.mod_family(args.mod, args.alpha)
    else:
        H = hashid.double_mod_family(args.double, args.alpha)
    eps = H.epsilon_raw
    out.update(
        family=H.name,
        index_count=H.index_count,
        domain_size=H.domain_size,
        range_size=H.range_size,
        block_length=hashid.hash_block_length(H),
        epsilon=str(eps) if isinstance(eps, Fraction) else eps,
        epsilon_float=float(eps),
    )
    try:
        cert = hashid.certify_exhaustive(H)
    except BudgetExceededError:
        cert = hashid.certify_sampled(H, args.samples, np.random.default_rng(args.seed), args.pair_ratio_samples)
    out["certificate"] = _certificate_dict(cert)
    _emit(out, args)
    return EXIT_OK if cert.holds else EXIT_FALSE


def cmd_collision(args, rng) -> int:
    p = idscheme.collision_probability(args.k, args.l, args.logm, args.mode, rng, args.samples)
    _emit({"k": args.k, "l": args.l, "logM": args.logm, "mode": args.mode, "p_coll": p, "inverse_l": 1 / args.l, "seed": args.seed}, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed (default: drawn from OS entropy and echoed)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", default="-", help="output path, '-' for stdout")

    scheme = argparse.ArgumentParser(add_help=False)
    scheme.add_argument("--logm", type=int, required=True, help="message bit-length log2 M")
    scheme.add_argument("--alpha", type=_alpha, required=True)
    scheme.add_argument("--l", type=int, default=10, help="GMR bottom probability 2^-l")
    scheme.add_argument("--q", type=int, default=10, help="GMR composite probability 2^-q")

    parser = argparse.ArgumentParser(prog="primeid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prime", parents=[common], help="uniform random prime <= N")
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--mode", choices=("det", "mr"), default="det")
    p.add_argument("--rounds", type=int, default=20)
    p.set_defaults(func=cmd_prime)

    p = sub.add_parser("gmr", parents=[common], help="bounded probabilistic prime generation")
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--s", type=int, default=None, help="override the derived sample count")
    p.add_argument("--k", type=int, default=None, help="override the derived Miller-Rabin rounds")
    p.set_defaults(func=cmd_gmr)

    p = sub.add_parser("encode", parents=[common, scheme], help="encode a message")
    p.add_argument("--message", type=_hex_int, required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("verify", parents=[common, scheme], help="test a codeword against a candidate")
    p.add_argument("--message", type=_hex_int, required=True)
    p.add_argument("--codeword", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", parents=[common, scheme], help="block length and type-II bounds")
    p.add_argument("--original", action="store_true", help="also report the index-based scheme")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", parents=[common], help="simulation sweep over logM")
    p.add_argument("--alpha", type=_alpha, required=True)
    p.add_argument("--rounds", type=int, default=100)
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--logm", type=_int_list, help="comma-separated logM values")
    grid.add_argument("--logm-exp", default="10:16", help="exponent range lo:hi for logM = 2^e")
    p.add_argument("--l", type=int, default=10)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--pair-samples", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--metadata", default=None, help="write a config/host sidecar JSON here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hash", parents=[common], help="hash family certificates")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--code", help="generator matrix file: 'n k d q' then k rows")
    src.add_argument("--mod", type=int, help="mod-prime family H(n)")
    src.add_argument("--double", type=int, help="composed family H(alpha n) o H(2^n)")
    p.add_argument("--alpha", type=_alpha, default=Fraction(2))
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--pair-ratio-samples", type=int, default=1000)
    p.set_defaults(func=cmd_hash)

    p = sub.add_parser("collision", parents=[common], help="collision probability for a key pair")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--logm", type=int, required=True)
    p.add_argument("--mode", choices=("exact", "residue", "sampled"), default="residue")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_collision)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = secrets.randbits(64)
    rng = random.Random(args.seed)
    try:
        return args.func(args, rng)
    except KeyGenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FALSE
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
