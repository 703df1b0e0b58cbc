"""lpcoreset command line.

Exit codes: 0 success / verification passed, 1 verification failed,
2 bad input, 3 construction or runtime failure.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import _kernels, io
from .bench import QUICK_SUITE, construction_benchmark, kernel_benchmark
from .errors import ConstructionError, ConvergenceError, InputError
from .linalg import DenseMatrix
from .online import online_coreset, stream_coreset
from .pipeline import build_strong_coreset
from .sampling import SamplerConfig
from .scores import leverage_scores, lewis_weights, ridge_lambda, ridge_leverage_scores
from .verify import distortion, query_suite

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("lpcoreset")


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _config(args):
    extra = {}
    if args.target_size is not None:
        extra["target_size"] = args.target_size
    if args.alpha_scale == "practical":
        return SamplerConfig.practical(args.p, args.k, args.eps, delta=args.delta, seed=args.seed, **extra)
    try:
        scale = float(args.alpha_scale)
    except ValueError:
        raise InputError(f"--alpha-scale must be a number or 'practical', got {args.alpha_scale!r}") from None
    return SamplerConfig(p=args.p, k=args.k, eps=args.eps, delta=args.delta, seed=args.seed,
                         alpha_scale=scale, **extra)


def _stream_from_file(args, cfg):
    n, rows = io.iter_rows(args.input, args.header)
    hasher = io.RowHasher()
    c, state = stream_coreset(io.hashed(rows, hasher), cfg, n_hint=n, buffer_size=args.buffer_size,
                              level_eps=args.level_eps, return_state=True)
    sha = hasher.hexdigest()
    c.dataset_id = sha
    return c, state, sha


def cmd_construct(args):
    cfg = _config(args)
    if args.mode == "stream":
        c, _, sha = _stream_from_file(args, cfg)
    else:
        A = io.read_matrix(args.input, args.header)
        sha = io.dataset_sha256(A)
        if args.mode == "offline":
            c = build_strong_coreset(DenseMatrix(A), cfg, dataset_id=sha)
        else:
            c = online_coreset(A, cfg, dataset_id=sha).kept
    _emit(io.coreset_to_json(c, cfg, sha), args.out)
    log.info("coreset of %d rows written", c.size)
    return EXIT_OK


def cmd_stream(args):
    cfg = _config(args)
    c, state, sha = _stream_from_file(args, cfg)
    _emit(io.coreset_to_json(c, cfg, sha), args.out)
    sys.stderr.write(f"kappa_ol={state.kappa():.17g}\n")
    return EXIT_OK


def cmd_verify(args):
    A = io.read_matrix(args.input, args.header)
    with open(args.coreset) as fh:
        c, doc = io.coreset_from_json(fh.read())
    sha = io.dataset_sha256(A)
    if doc["dataset_sha256"] != sha:
        raise InputError("coreset was built from a different dataset (sha256 mismatch)")
    if c.size and (c.indices.min() < 0 or c.indices.max() >= A.shape[0]):
        raise InputError("coreset references rows outside the dataset")
    k = args.k or int(doc["k"])
    eps = args.eps if args.eps is not None else float(doc["eps"])
    queries = query_suite(A, k, args.queries, args.seed, coreset=c, p=c.p)
    rep = distortion(A, c, queries, c.p, eps)
    body = rep.to_dict()
    body.update(dataset_sha256=sha, p=c.p, k=k, seed=args.seed, coreset_size=c.size)
    _emit(io.dumps(body), args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_scores(args):
    M = DenseMatrix(io.read_matrix(args.input, args.header))
    if args.kind == "leverage":
        vals = leverage_scores(M).values
    elif args.kind == "ridge":
        vals = ridge_leverage_scores(M, ridge_lambda(M, args.k)).values
    else:
        vals = lewis_weights(M, args.p).values
    _emit("".join(f"{v:.17g}\n" for v in vals), args.out)
    return EXIT_OK


def cmd_bench(args):
    if args.suite == "kernels":
        body = {"suite": "kernels", "backend": _kernels.BACKEND, "records": kernel_benchmark()}
    else:
        recs = construction_benchmark(QUICK_SUITE if args.suite == "quick" else None)
        body = {"suite": args.suite, "backend": _kernels.BACKEND, "records": recs}
    _emit(io.dumps(body), args.out)
    return EXIT_OK


def cmd_convert(args):
    A = io.read_matrix(args.input, args.header)
    if args.format == "bin":
        io.write_matrix_bin(args.out, A)
    else:
        io.write_csv(args.out, A)
    return EXIT_OK


def _add_build_flags(sp):
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--delta", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha-scale", default="practical",
                    help="oversampling multiplier, or 'practical' for the calibrated preset")
    sp.add_argument("--target-size", type=int, default=None)
    sp.add_argument("--buffer-size", type=int, default=None, help="merge-and-reduce leaf size")
    sp.add_argument("--level-eps", choices=("log", "flat"), default="log",
                    help="per-level accuracy in the merge-and-reduce tree")


def build_parser():
    ap = argparse.ArgumentParser(prog="lpcoreset", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None,
                    help="worker cap (default: $LPCORESET_THREADS); never changes results")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("construct", cmd_construct, "build a coreset and write its JSON")
    sp.add_argument("--input", required=True)
    sp.add_argument("--header", action="store_true", help="skip one CSV header line")
    sp.add_argument("--mode", choices=("offline", "online", "stream"), default="offline")
    sp.add_argument("--out", default=None)
    _add_build_flags(sp)

    sp = add("stream", cmd_stream, "replay a file row by row; prints kappa_ol to stderr")
    sp.add_argument("--input", required=True)
    sp.add_argument("--header", action="store_true")
    sp.add_argument("--out", default=None)
    _add_build_flags(sp)

    sp = add("verify", cmd_verify, "measure distortion of a coreset on a query suite")
    sp.add_argument("--input", required=True)
    sp.add_argument("--header", action="store_true")
    sp.add_argument("--coreset", required=True)
    sp.add_argument("--queries", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--eps", type=float, default=None, help="default: the coreset's eps")
    sp.add_argument("--k", type=int, default=None, help="default: the coreset's k")
    sp.add_argument("--out", default=None)

    sp = add("scores", cmd_scores, "per-row leverage, ridge leverage or Lewis scores as CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--header", action="store_true")
    sp.add_argument("--kind", choices=("leverage", "ridge", "lewis"), required=True)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--out", default=None)

    sp = add("bench", cmd_bench, "timing / distortion benchmarks as JSON")
    sp.add_argument("--suite", choices=("default", "quick", "kernels"), default="default")
    sp.add_argument("--out", default=None)

    sp = add("convert", cmd_convert, "convert between CSV and LPCM binary")
    sp.add_argument("--input", required=True)
    sp.add_argument("--header", action="store_true")
    sp.add_argument("--format", choices=("bin", "csv"), required=True)
    sp.add_argument("--out", required=True)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    threads = args.threads
    if threads is None and os.environ.get("LPCORESET_THREADS"):
        try:
            threads = int(os.environ["LPCORESET_THREADS"])
        except ValueError:
            sys.stderr.write("lpcoreset: LPCORESET_THREADS must be an integer\n")
            return EXIT_INPUT
    _kernels.set_threads(threads)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"lpcoreset: {exc}\n")
        return EXIT_INPUT
    except (ConstructionError, ConvergenceError, RuntimeError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"lpcoreset: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
