"""Smoke test for the mixfrac_ns extension module.

Build and install first, e.g. `maturin build --release -m crates/py/Cargo.toml`
and `pip install` the wheel, then run `python python/smoke_test.py`.
"""

import math
import tempfile

import mixfrac_ns

BENCH = {
    "d": 1,
    "s1": 0.4,
    "s2": 0.8,
    "a": 1.0,
    "nonlinearity": [{"mu": 1.0, "p": 6.0}],
    "N": 16384,
    "L": 32.0,
    "radial": True,
}


def check_solve():
    problem = mixfrac_ns.Problem(BENCH)
    assert problem.admissible, problem.warnings
    sol = mixfrac_ns.solve(problem)
    assert sol.converged
    assert sol.multiplier > 0.0
    assert sol.pohozaev_residual < 1e-6
    assert sol.el_residual < 1e-8
    values = sol.values()
    assert len(values) == sol.shape[0] == 16384
    mass = sum(v * v for v in values) * 32.0 / 16384
    assert abs(mass - 1.0) < 1e-10
    passed, checks = sol.verify()
    assert passed, checks
    with tempfile.TemporaryDirectory() as tmp:
        sol.save(tmp)
        back, dims, box = mixfrac_ns.load_field(f"{tmp}/solution.field.json")
        assert dims == [16384] and box == 32.0 and back == values
    print(f"solve: lambda = {sol.multiplier:.8f}, level = {sol.level:.10f}")
    return problem


def check_fiber(problem):
    fib = mixfrac_ns.fiber_map(problem, points=101)
    assert fib["sign_changes"] == 1
    assert fib["t_star"] is not None
    print(f"fiber: t_star of the initial guess = {fib['t_star']:.6f}")


def check_gn():
    rec = mixfrac_ns.gn_ground_state(1, 0.5, 2.0, 1024, 60.0)
    assert abs(rec["saturation_ratio"] - 1.0) < 1e-2
    print(f"gn: B = {rec['b_constant']:.10f}, ratio = {rec['saturation_ratio']:.6f}")


def check_scan():
    problem = mixfrac_ns.Problem(dict(BENCH, N=8192, L=16.0))
    scan = mixfrac_ns.mass_scan(problem, [1.0, 2.0])
    assert all(scan["converged"])
    assert scan["level"][1] < scan["level"][0]
    print(f"scan: levels {scan['level']}")


def check_errors():
    try:
        mixfrac_ns.Problem({"d": 1})
    except ValueError as e:
        print(f"errors: missing keys rejected ({e})")
    else:
        raise AssertionError("incomplete config accepted")
    short = mixfrac_ns.Problem(dict(BENCH, N=1024, max_iter=3))
    try:
        mixfrac_ns.solve(short)
    except mixfrac_ns.SolverError:
        pass
    else:
        raise AssertionError("max_iter = 3 converged")


if __name__ == "__main__":
    p = check_solve()
    check_fiber(p)
    check_gn()
    check_scan()
    check_errors()
    assert math.isfinite(float(mixfrac_ns.__version__.split(".")[0]))
    print("smoke test passed")
