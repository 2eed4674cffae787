"""Smoke test for the blockalt extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/blockalt-*.whl
    python3 python/smoke_test.py
"""

import math
from pathlib import Path

import blockalt

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = blockalt.Problem.load(ROOT / "problems" / "bench3.prob")
    assert p.n == 3
    x0 = [2.0, 2.5, 1.0]
    assert p.is_feasible(x0)
    assert not p.is_feasible([0.5, 2.5, 0.0])
    assert math.isclose(p.cost(x0), (2.0 - 2.5) ** 2 + (1 / 2.5 + 2) ** 2 + 0.5, rel_tol=1e-12)

    s = blockalt.solve(p, x0)
    assert s.cost <= p.cost(x0)
    assert all(b <= a + 1e-10 for a, b in zip(s.trace_costs, s.trace_costs[1:]))
    assert len(s.trace_costs) == s.iterations + 1

    starts = blockalt.sample(p, 8, "hybrid", 0)
    assert len(starts) == 8
    assert all(p.is_feasible(x) for x, _ in starts)

    r = blockalt.multistart(p, n=32, seed=0)
    assert abs(r.best_cost - 6.065381948670087) < 1e-3, r
    again = blockalt.multistart(p, n=32, seed=0, workers=4)
    assert again.best_point == r.best_point

    for method in ("ga", "pso"):
        m = blockalt.multistart(p, n=8, seed=0, method=method, max_iterations=20)
        assert m.method == method and math.isfinite(m.best_cost)

    q = blockalt.Problem([(0, 1)], "(x1 - 0.3)^2")
    assert abs(blockalt.solve(q, [0.9]).point[0] - 0.3) < 1e-6

    try:
        blockalt.Problem([(0, 1)], "x1 + * 2")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")

    t = blockalt.run_closed_loop("lqr", duration=5.0)
    assert len(t) == 10
    assert t.csv.splitlines()[0].startswith("t,y,u")

    print("smoke test passed:", r)


if __name__ == "__main__":
    main()
