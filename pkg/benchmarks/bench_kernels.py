"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--n 20000] [--d 30] [--repeats 5]
"""
import argparse
import json

from lpcoreset.bench import kernel_benchmark


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--d", type=int, default=30)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", action="store_true", help="print raw records")
    args = ap.parse_args()
    recs = kernel_benchmark(args.n, args.d, args.k, args.repeats)
    if args.json:
        print(json.dumps(recs, indent=1))
        return
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for r in recs:
        nb = r.get("numba")
        print(f"{r['kernel']:<20}{1e3 * r['numpy']:>12.3f}"
              f"{(1e3 * nb if nb else float('nan')):>12.3f}{r.get('speedup', float('nan')):>10.2f}")


if __name__ == "__main__":
    main()
