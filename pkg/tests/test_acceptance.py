"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see only the summary lines.
"""
import time

import numpy as np
import pytest

from cellhom import analysis as an
from cellhom import verify
from cellhom.core import Grid, VecField
from cellhom.homogenize import homogenized_tensor, laminate_oracle
from cellhom.material import MaterialMap, Phase, isotropic_tensor, laminate_map, random_two_phase

SEED = 20240917


@pytest.fixture
def report(capsys):
    """Call ``report(k, ok, detail)`` once per criterion."""

    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance] criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

    return emit


def all_passed(checks):
    return all(c["passed"] for c in checks)


def summary(checks):
    return "; ".join(f"{c['name']}={c['value']:.3g}" for c in checks)


@pytest.fixture(scope="module")
def random16():
    g = Grid.cube(16)
    m = random_two_phase(g, Phase.isotropic(1, 1), Phase.isotropic(10, 10), 0.5, np.random.default_rng(SEED))
    return m, homogenized_tensor(m)


def test_criterion_01_green_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    worst = max(verify.green(Grid.cube(n), rng, pairs=100)[0]["value"] for n in (8, 16))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-13 and dt < 5.0
    report(1, ok, f"max relative defect {worst:.2e} (tol 1e-13), {dt:.1f} s (limit 5 s)")
    assert ok


def test_criterion_02_homogeneous_exactness(report):
    t0 = time.perf_counter()
    c = isotropic_tensor(2.0, 0.7)
    rep = homogenized_tensor(MaterialMap.homogeneous(Grid.cube(8), Phase(c)))
    dt = time.perf_counter() - t0
    err = np.linalg.norm(rep.CH - c) / np.linalg.norm(c)
    ok = err <= 1e-12 and max(rep.iterations) <= 1 and dt < 5.0
    report(2, ok, f"relative error {err:.2e} (tol 1e-12), iterations {max(rep.iterations)} (max 1), "
                  f"{dt:.1f} s (limit 5 s)")
    assert ok


def test_criterion_03_laminate_oracle(report):
    t0 = time.perf_counter()
    p1, p2 = Phase.isotropic(10, 10), Phase.isotropic(1, 1)
    rep = homogenized_tensor(laminate_map(Grid.cube(16), p1, p2, 0.5, axis=0))
    dt = time.perf_counter() - t0
    oracle = laminate_oracle(p1.stiffness, p2.stiffness, 0.5, 0)
    err = np.linalg.norm(rep.CH - oracle) / np.linalg.norm(oracle)
    ok = err <= 1e-8 and dt < 60.0
    report(3, ok, f"relative error {err:.2e} (tol 1e-8), {dt:.1f} s (limit 60 s)")
    assert ok


def test_criterion_04_routes_symmetry_bounds(report, random16):
    _, rep = random16
    route, sym = rep.route_error(), rep.symmetry_error()
    lo, hi = rep.bound_slack()
    ok = route <= 1e-10 and sym <= 1e-10 and min(lo, hi) >= -1e-8
    report(4, ok, f"stress vs energy {route:.2e}, symmetry {sym:.2e} (tol 1e-10); "
                  f"bound slack Reuss {lo:.2e}, Voigt {hi:.2e} (min -1e-8)")
    assert ok


def test_criterion_05_hill_mandel(report, random16):
    m, rep = random16
    rng = np.random.default_rng(SEED)
    checks = verify.hillmandel(m.grid, rng, pairs=50)
    # cross-check against criterion 4's report
    from cellhom.donati import hill_mandel
    from cellhom.solver import solve_cell_problem
    A, B = rng.standard_normal(6), rng.standard_normal(6)
    lhs, _ = hill_mandel(solve_cell_problem(m, A, tol=1e-12).u, solve_cell_problem(m, B, tol=1e-12).sigma)
    ref = A @ rep.CH @ B
    cross = abs(lhs - ref) / abs(ref)
    ok = all_passed(checks) and cross <= 1e-8
    report(5, ok, f"{summary(checks)} (tol 1e-10); lhs vs <A, CH B> {cross:.2e} (tol 1e-8)")
    assert ok


def test_criterion_06_donati_round_trips(report):
    checks = verify.donati(Grid.cube(16), np.random.default_rng(SEED), cases=20)
    ok = all_passed(checks)
    report(6, ok, summary(checks) + " (tol 1e-8, 1e-8, 1e-9)")
    assert ok


@pytest.fixture(scope="module")
def lambdas():
    return {n: an.lambda_grad(Grid.cube(n)) for n in (8, 16)}


def test_criterion_07_korn_constants(report, lambdas):
    lam8, lam16 = lambdas[8], lambdas[16]
    c_korn = an.korn_constant(Grid.cube(16))
    # eigen-iteration stops at a relative Rayleigh change of 1e-12; allow that much backwards drift
    monotone = lam16 >= lam8 - 1e-9
    v = VecField.from_function(Grid.cube(16), lambda y: np.stack(
        [np.sin(2 * np.pi * y[..., 1]), 0 * y[..., 0], 0 * y[..., 0]], axis=-1))
    ratio_err = abs(an.gradient_ratio(v) - 2.0)
    ok = 1.8 <= lam16 <= 2.0 + 1e-6 and monotone and np.isfinite(c_korn) and ratio_err <= 1e-8
    report(7, ok, f"lambda_grad 8^3 {lam8:.12f}, 16^3 {lam16:.12f} (in [1.8, 2+1e-6], non-decreasing); "
                  f"C_korn {c_korn:.5f}; explicit field |ratio - 2| = {ratio_err:.1e}")
    assert ok


def test_criterion_07_explicit_field_error_quarters(report):
    errs = []
    for n in (8, 16, 32):
        v = VecField.from_function(Grid.cube(n), lambda y: np.stack(
            [np.sin(2 * np.pi * y[..., 1]), 0 * y[..., 0], 0 * y[..., 0]], axis=-1))
        errs.append(abs(an.gradient_ratio(v) - 2.0))
    factors = [a / b if b > 0 else float("inf") for a, b in zip(errs[:-1], errs[1:])]
    ok = all(3.0 <= f <= 5.0 for f in factors)
    report("7b", ok, "explicit field ratio errors " + ", ".join(f"{e:.1e}" for e in errs)
           + "; refinement factors " + ", ".join(f"{f:.2f}" for f in factors) + " (required in [3, 5])")
    assert ok


def test_criterion_08_trace_audits(report):
    checks = verify.traces(Grid.cube(16), np.random.default_rng(SEED))
    ok = all_passed(checks)
    report(8, ok, summary(checks))
    assert ok


def test_criterion_09_compatibility(report):
    checks = verify.compat(None, np.random.default_rng(SEED), count=10)
    ok = all_passed(checks)
    report(9, ok, summary(checks) + " (order >= 1.8, all 20 agree, R1212 within 5%)")
    assert ok


def test_criterion_10_oscillation_div_curl(report):
    t0 = time.perf_counter()
    checks = verify.divcurl(Grid.cube(8), np.random.default_rng(SEED), schedule=range(1, 65))
    dt = time.perf_counter() - t0
    ok = all_passed(checks) and dt < 30.0
    report(10, ok, summary(checks) + f"; {dt:.1f} s (limit 30 s)")
    assert ok
