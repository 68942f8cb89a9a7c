"""Property suites run by ``cellhom verify``; each returns a list of named checks."""
from __future__ import annotations

import numpy as np

from . import analysis as an
from .core import Grid, LPField, VecField, cell_average, from_mandel, inner, pair
from .discrete import l2_norm, make_divfree, sym_gradient, weak_divergence
from .donati import (
    compatibility_battery,
    donati_project_lp,
    donati_project_periodic,
    hill_mandel,
    random_symfield,
    random_vecfield,
)
from .samples import TrigSymField

SUITES = ("green", "korn", "traces", "donati", "hillmandel", "divcurl", "compat")


def check(name, value, tol, passed=None, **extra) -> dict:
    value = float(value)
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": value, "tol": tol, "passed": ok, **extra}


def _random_lp(grid, rng):
    return LPField(rng.standard_normal(6), random_vecfield(grid, rng))


def green(grid: Grid, rng, pairs: int = 100) -> list:
    worst = 0.0
    for _ in range(pairs):
        mu = random_symfield(grid, rng)
        v = random_vecfield(grid, rng, zero_mean=False)
        d = abs(inner(mu, sym_gradient(v)) + pair(weak_divergence(mu), v))
        worst = max(worst, d / (mu.norm() * l2_norm(v)))
    return [check("green_identity", worst, 1e-13)]


def korn(grid: Grid, rng, samples: int = 100) -> list:
    lam, c_korn = an.korn_ratios(grid)
    out = [
        check("lambda_grad_upper", lam, 2.0 + 1e-6, estimate=lam),
        check("lambda_grad_lower", lam, 1.8, passed=lam >= 1.8),
        check("c_korn_finite", c_korn, float("inf"), passed=bool(np.isfinite(c_korn))),
    ]
    worst = 0.0
    for _ in range(samples):
        v = random_vecfield(grid, rng, zero_mean=False)
        lhs = an.h1_norm(v)
        rhs = c_korn * (l2_norm(v) + sym_gradient(v).norm())
        worst = max(worst, lhs / rhs)
    out.append(check("korn_inequality", worst, 1.0))
    v = VecField.from_function(grid, lambda y: np.stack(
        [np.sin(2 * np.pi * y[..., 1]), 0 * y[..., 0], 0 * y[..., 0]], axis=-1))
    out.append(check("explicit_field_ratio", abs(an.gradient_ratio(v) - 2.0), 1e-8))
    return out


def traces(grid: Grid, rng) -> list:
    phi = random_vecfield(grid, rng)
    A = rng.standard_normal(6)
    periodic = max(r.max_mismatch for r in an.trace_audit_h1(phi))
    jump = 0.0
    g = grid.lattice.matrix
    for r in an.trace_audit_h1(LPField(A, phi)):
        expected = from_mandel(A) @ g[:, r.pair]
        jump = max(jump, float(np.abs(r.mismatch - expected).max()))
    sig = make_divfree(random_symfield(grid, rng) + rng.standard_normal(6))
    flux = max(an.trace_audit_hdiv(sig, k).max_mismatch for k in range(3))
    vals = an.unwrapped_values(phi).copy()
    delta = 1e-3
    vals[-1, 1, 2, 0] += delta
    seen = an.audit_unwrapped(vals)[0].max_mismatch
    return [
        check("h1_periodic_mismatch", periodic, 0.0),
        check("h1_affine_jump", jump, 1e-12 * max(1.0, np.abs(A).max())),
        check("hdiv_flux_mismatch", flux, 1e-9),
        check("tamper_detected", seen, 2 * delta, passed=delta / 2 <= seen <= 2 * delta, injected=delta),
    ]


def donati(grid: Grid, rng, cases: int = 20) -> list:
    recover = residual = pyth = 0.0
    for _ in range(cases):
        v = random_vecfield(grid, rng)
        e = sym_gradient(v)
        w, res = donati_project_periodic(e)
        recover = max(recover, l2_norm(w - v) / l2_norm(v))
        s = make_divfree(random_symfield(grid, rng) + rng.standard_normal(6))
        split = donati_project_lp(s)
        residual = max(residual, (split.grad_part - cell_average(s)).norm() / s.norm())
        t = random_symfield(grid, rng)
        split = donati_project_lp(t)
        total = t.norm() ** 2
        pyth = max(pyth, abs(total - split.grad_part.norm() ** 2 - split.residual.norm() ** 2) / total)
    return [
        check("gradient_recovery", recover, 1e-8),
        check("divfree_residual", residual, 1e-8),
        check("pythagoras", pyth, 1e-9),
    ]


def hillmandel(grid: Grid, rng, pairs: int = 50, material=None) -> list:
    worst = 0.0
    for _ in range(pairs):
        u = _random_lp(grid, rng)
        sig = make_divfree(random_symfield(grid, rng) + rng.standard_normal(6))
        lhs, rhs = hill_mandel(u, sig)
        scale = sym_gradient(u).norm() * sig.norm() / grid.volume
        worst = max(worst, abs(lhs - rhs) / scale)
    out = [check("hill_mandel", worst, 1e-10)]
    if material is not None:
        from .homogenize import homogenized_tensor
        from .solver import solve_cell_problem

        rep = homogenized_tensor(material)
        A, B = rng.standard_normal(6), rng.standard_normal(6)
        sol_b = solve_cell_problem(material, B, tol=1e-12)
        u_a = solve_cell_problem(material, A, tol=1e-12).u
        lhs, _ = hill_mandel(u_a, sol_b.sigma)
        ref = float(A @ rep.CH @ B)
        out.append(check("hill_mandel_vs_CH", abs(lhs - ref) / (np.linalg.norm(rep.CH, 2) * np.linalg.norm(A)
                                                                 * np.linalg.norm(B)), 1e-8))
    return out


def divcurl(grid: Grid, rng, schedule=range(1, 65)) -> list:
    one = np.ones_like
    schedule = list(schedule)
    rec = an.oscillation_demo(lambda a, b, c: np.sin(2 * np.pi * a), schedule, (lambda x: x, one, one))
    const = an.oscillation_demo(lambda a, b, c: np.sin(2 * np.pi * a) * np.cos(2 * np.pi * b) + 0.3,
                                schedule, (one, one, one))
    sig = make_divfree(random_symfield(grid, rng) + rng.standard_normal(6))
    v = _random_lp(grid, rng)
    dc = an.div_curl_demo(sig, v, 0, schedule, (lambda x: x, np.cos, one))
    dc_const = an.div_curl_demo(sig, v, 0, schedule, (one, one, one))
    scale = abs(dc_const[0].integral) + sig.norm() * sym_gradient(v).norm()
    return [
        check("oscillation_decay_exponent", an.decay_exponent(rec), -0.9),
        check("oscillation_constant_phi", max(abs(r.error) for r in const), 1e-14),
        check("divcurl_decay_exponent", an.decay_exponent(dc), -0.9),
        check("divcurl_constant_phi", max(abs(r.error) for r in dc_const) / scale, 1e-10),
    ]


def compat(grid: Grid, rng, count: int = 10) -> list:
    battery = compatibility_battery(rng, count)
    order = min(min(b["order_saint_venant"], b["order_curl_curl"]) for b in battery if b["compatible"])
    agree = all(b["saint_venant_zero"] == b["curl_curl_zero"] == b["compatible"] for b in battery)
    g32 = Grid.cube(32)
    e = TrigSymField.single(0, 0, [0, 1, 0])
    y = g32.node_positions()
    from .donati import saint_venant_residual
    r = saint_venant_residual(e(y), g32)[..., 0, 1, 0, 1]
    exact = -(2 * np.pi) ** 2 * np.cos(2 * np.pi * y[..., 1])
    rel = float(np.abs(r - exact).max() / np.abs(exact).max())
    return [
        check("compatible_order", order, 1.8, passed=order >= 1.8),
        check("criteria_agree", float(agree), 1.0, passed=agree),
        check("R1212_incompatible", rel, 0.05),
    ]


def run(suite: str, grid: Grid, rng, material=None) -> dict:
    names = SUITES if suite == "all" else (suite,)
    out = {}
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
        fn = globals()[name]
        out[name] = fn(grid, rng, material=material) if name == "hillmandel" else fn(grid, rng)
    return out
