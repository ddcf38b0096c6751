"""Time the top-k miner on the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_mining.py [--repeat 5] [--k 50] [--json out.json]

Both backends must return identical patterns; the script exits non-zero if
they do not.
"""

from __future__ import annotations

import argparse
import json
import random
import statistics
import sys
import time
from importlib import resources

from fwscope import kernels
from fwscope.ingest import dedupe, read_records
from fwscope.mining import mine_top_k, tokenize


def fixture_corpus() -> list[list[str]]:
    path = resources.files("fwscope") / "data" / "fixtures" / "scan_1000.jsonl"
    with resources.as_file(path) as p:
        return [tokenize(r.body) for r in dedupe(read_records(p))]


def synthetic_corpus(n: int, length: int, alphabet: int, seed: int) -> list[list[str]]:
    rnd = random.Random(seed)
    vocab = [f"t{i}" for i in range(alphabet)]
    # skewed token frequencies so that long frequent patterns exist
    weights = [1.0 / (i + 1) for i in range(alphabet)]
    return [rnd.choices(vocab, weights, k=rnd.randint(length // 2, length)) for _ in range(n)]


def time_backend(corpus, backend: str, k: int, max_length: int, repeat: int):
    timings, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = mine_top_k(corpus, k, max_length, backend=backend)
        timings.append(time.perf_counter() - start)
    return timings, result


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--k", type=int, default=50)
    parser.add_argument("--max-length", type=int, default=6)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--json", dest="json_out", help="write results as JSON to this path")
    args = parser.parse_args(argv)

    backends = kernels.available()
    if "cython" not in backends:
        print("compiled kernels not built; only the python backend is available", file=sys.stderr)

    corpora = {
        "fixture-918": fixture_corpus(),
        "synthetic-2000x40": synthetic_corpus(2000, 40, 60, args.seed),
    }
    rows, ok = [], True
    for name, corpus in corpora.items():
        results = {}
        for backend in backends:
            timings, patterns = time_backend(corpus, backend, args.k, args.max_length, args.repeat)
            results[backend] = patterns
            rows.append(
                {
                    "corpus": name,
                    "backend": backend,
                    "median_s": statistics.median(timings),
                    "min_s": min(timings),
                    "patterns": len(patterns),
                }
            )
        if len({tuple(p) for p in results.values()}) > 1:
            print(f"{name}: backends disagree", file=sys.stderr)
            ok = False

    print(f"{'corpus':<20} {'backend':<8} {'median s':>10} {'min s':>10} {'speedup':>8}")
    for row in rows:
        ref = next(r for r in rows if r["corpus"] == row["corpus"] and r["backend"] == "python")
        row["speedup_vs_python"] = ref["median_s"] / row["median_s"]
        print(
            f"{row['corpus']:<20} {row['backend']:<8} {row['median_s']:>10.4f} "
            f"{row['min_s']:>10.4f} {row['speedup_vs_python']:>7.2f}x"
        )
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as handle:
            json.dump({"k": args.k, "max_length": args.max_length, "results": rows}, handle, indent=2)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
