"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 100000] [--repeat 5]
"""

import argparse

from xmrange.kernel_bench import compare


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=100_000, help="records per call")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    for line in compare(args.n, args.repeat, args.seed):
        print(line)


if __name__ == "__main__":
    main()
