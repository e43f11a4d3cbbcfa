"""Smoke test for the renormkit_py extension."""
import csv
import io
import json
import math

import renormkit_py as rk


def main():
    assert rk.continued_fraction(5, 13) == [2, 1, 1, 2]
    assert [rk.irreducible_count(d) for d in range(2, 6)] == [1, 3, 13, 71]
    kappa, orbits = rk.singularity("A B C D", "D C B A")
    assert kappa == 1 and len(orbits) == 1
    assert abs(rk.hilbert_metric([0.5, 0.5], [0.25, 0.75]) - math.log(3)) < 1e-15

    report = json.loads(rk.pipeline(rk.GOLDEN_CIRCLE_PAIR))
    assert report["passed"], report["errors"]
    assert len(report["config_hash"]) == 64

    first = rk.series(rk.GOLDEN_CIRCLE_PAIR)
    assert first == rk.series(rk.GOLDEN_CIRCLE_PAIR)
    rows = list(csv.DictReader(io.StringIO(first[0])))
    dc1 = [float(r["dC1"]) for r in rows]
    assert all(b < a for a, b in zip(dc1[1:], dc1[2:])), dc1

    results = rk.selftest(0)
    for name, passed, seconds, detail in results:
        print(f"{'pass' if passed else 'FAIL'} {name} ({seconds:.2f} s) {detail}")
    assert all(r[1] for r in results)
    print("smoke test passed")


if __name__ == "__main__":
    main()
