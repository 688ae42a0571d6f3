"""Convergence studies for the Moran operator, one per limit theorem.

Each study returns a ConvergenceReport whose rows are produced in
ascending-n order.  Pass/fail slacks are collected at the top of the module.
"""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad

from .functions import TestFunction
from .lattice import (
    KernelVariant,
    LatticeFunction,
    TransitionMatrix,
    bernstein_matrix,
    build_transition_matrix,
    defect,
    evaluate_offlattice,
    lattice_points,
    power_checkpoints,
    step_count,
)
from .poly import Polynomial, apply_generator, poly_derivative, semigroup_exact, sup_norm
from .report import ConvergenceReport, ReportRow
from .sim import RngPlan, absorption_frequency, interpolated_increment_moments

APPROX_GRID = 2001
MONOTONE_SLACK = 0.10
EXPONENT_SLACK = 0.2
RATE_SLACK = 0.15
BOUND_TOL = 1e-12
ZERO_TOL = 1e-12
DYADIC_GAPS = tuple(2.0**-j for j in range(4, 8))


class StudyError(ValueError):
    pass


def fit_rate(rows: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of log(error) against log(n); zero errors are skipped."""
    usable = [(n, e) for n, e in rows if e > 0 and n > 0]
    if len(usable) < 3:
        raise StudyError(f"need at least 3 rows with positive error to fit a rate, got {len(usable)}")
    n, e = np.array(usable, dtype=float).T
    return float(np.polyfit(np.log(n), np.log(e), 1)[0])


def _try_fit(rows) -> float | None:
    rows = list(rows)
    if len({n for n, _ in rows}) < 3:
        return None
    try:
        return fit_rate(rows)
    except StudyError:
        return None


def _check_n_list(n_list: Sequence[int], minimum: int) -> list[int]:
    if not n_list:
        raise StudyError("n_list must not be empty")
    bad = [n for n in n_list if int(n) != n or n < minimum]
    if bad:
        raise StudyError(f"every n must be an integer >= {minimum}, got {bad}")
    return sorted(int(n) for n in n_list)


def _require_poly(f: TestFunction, study: str) -> Polynomial:
    p = f.polynomial
    if p is None:
        raise StudyError(f"{study} needs a polynomial test function for an exact generator, got {f}")
    return p


def run_approximation_study(f: TestFunction, n_list: Sequence[int], variant="paper", grid_size: int = APPROX_GRID) -> ConvergenceReport:
    """sup |M_n f - f| on a uniform grid, clamped operator off the lattice."""
    variant = KernelVariant.parse(variant)
    n_list = _check_n_list(n_list, 2)
    x = np.linspace(0.0, 1.0, grid_size)
    fx = f(x)
    rows: list[ReportRow] = []
    prev = None
    for n in n_list:
        P = build_transition_matrix(n, variant)
        err = float(np.max(np.abs(evaluate_offlattice(n, variant, f, x) - fx)))
        lat = LatticeFunction.from_callable(f, n)
        lattice_err = float(np.max(np.abs(defect(P, lat))))
        ok = prev is None or err <= (1 + MONOTONE_SLACK) * prev
        rows.append(ReportRow(n, 1, err, None, ok, {"lattice_error": lattice_err, "min_entry": P.min_entry}))
        prev = err
    first, last = rows[0].error, rows[-1].error
    verdict = all(r.passed for r in rows)
    if first > ZERO_TOL and n_list[-1] / n_list[0] >= 8:
        verdict = verdict and last < first / 4
    report = ConvergenceReport(
        "approx",
        rows,
        verdict,
        _try_fit((r.n, r.error) for r in rows),
        summary={"final_over_first": last / first if first > 0 else 0.0},
    )
    report.failures = [f"n={r.n}: error grew beyond {MONOTONE_SLACK:.0%} slack" for r in rows if not r.passed]
    return report


def fixation_limit(f: TestFunction, n: int) -> np.ndarray:
    x = lattice_points(n)
    f0, f1 = float(f(0.0)), float(f(1.0))
    return f1 * x + f0 * (1.0 - x)


def run_kelisky_rivlin_study(f: TestFunction, n: int, variant="standard", k_max: int = 10**7, tol: float = 1e-8) -> ConvergenceReport:
    """max_i |P^k f - (f(1) i/n + f(0)(1 - i/n))| at k = 1, 2, 4, ..., k_max."""
    variant = KernelVariant.parse(variant)
    n = _check_n_list([n], 2)[0]
    if k_max < 1:
        raise StudyError(f"k_max must be positive, got {k_max}")
    P = build_transition_matrix(n, variant)
    fv = LatticeFunction.from_callable(f, n).values
    e1 = lattice_points(n)
    target = fixation_limit(f, n)
    notes = []
    if n == 2 and variant is KernelVariant.PAPER:
        msg = "n=2 with the paper kernel: P^2 = I, so iterates oscillate with period 2 and never reach the fixation limit"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)

    bern = dict(power_checkpoints(bernstein_matrix(n), k_max))
    rows = []
    for k, Pk in power_checkpoints(P.entries, k_max):
        err = float(np.max(np.abs(Pk @ fv - target)))
        rows.append(
            ReportRow(
                n, k, err, tol, err < tol,
                {
                    "e1_drift": float(np.max(np.abs(Pk @ e1 - e1))),
                    "bernstein_error": float(np.max(np.abs(bern[k] @ fv - target))),
                },
            )
        )
    first_hit = next((r.k for r in rows if r.passed), None)
    report = ConvergenceReport(
        "kelisky",
        rows,
        rows[-1].passed,
        notes=notes,
        summary={"first_k_below_tol": first_hit, "min_entry": P.min_entry},
    )
    if not report.verdict:
        report.failures.append(f"n={n}: error {rows[-1].error:.3g} still above tol={tol:g} at k={k_max}")
    return report


def voronovskaya_residual(p: Polynomial, n: int, variant) -> float:
    """max over interior lattice points of |scale (P - I) p - L p|."""
    P = build_transition_matrix(n, variant)
    x = lattice_points(n)[1:-1]
    scaled = P.time_scale * polynomial_defect(P, p)[1:-1]
    return float(np.max(np.abs(scaled - apply_generator(p)(x))))


def polynomial_defect(P: TransitionMatrix, p: Polynomial) -> np.ndarray:
    """(P - I) p on the lattice, lattice differences taken as finite Taylor sums.

    p(x +- h) - p(x) = sum_j p^(j)(x) (+-h)^j / j! holds exactly for a
    polynomial, and avoids the cancellation of subtracting nearby values.
    """
    n = P.n
    x = lattice_points(n)
    h = 1.0 / n
    fwd = np.zeros(n + 1)
    bwd = np.zeros(n + 1)
    for j in range(1, p.degree + 1):
        term = poly_derivative(p, j)(x) * h**j / math.factorial(j)
        fwd += term
        bwd += term if j % 2 == 0 else -term
    out = np.zeros(n + 1)
    out[:-1] += np.diag(P.entries, 1) * fwd[:-1]
    out[1:] += np.diag(P.entries, -1) * bwd[1:]
    return out


def run_voronovskaya_study(f: TestFunction, n_list: Sequence[int], variant="paper") -> ConvergenceReport:
    variant = KernelVariant.parse(variant)
    p = _require_poly(f, "voronovskaya study")
    n_list = _check_n_list(n_list, 3)
    third = sup_norm(poly_derivative(p, 3))
    rows = []
    for n in n_list:
        r = voronovskaya_residual(p, n, variant)
        bound = third / (12 * n)
        rows.append(ReportRow(n, 1, r, bound, r <= bound + BOUND_TOL, {"scale": variant.time_scale(n)}))
    nonzero = [(row.n, row.error) for row in rows if row.error > ZERO_TOL]
    rate = _try_fit(nonzero)
    verdict = all(row.passed for row in rows)
    if rate is not None:
        verdict = verdict and rate <= -1.0
    report = ConvergenceReport("voronovskaya", rows, verdict, rate)
    report.failures = [f"n={row.n}: residual {row.error:.3g} exceeds bound {row.bound:.3g}" for row in rows if not row.passed]
    if rate is not None and rate > -1.0:
        report.failures.append(f"fitted rate {rate:.3g} slower than 1/n")
    return report


def third_derivative_integral(p: Polynomial, t: float) -> float:
    """int_0^t ||(e^{sL} p)'''||_inf ds on the exact polynomial semigroup."""
    if p.degree < 3 or t == 0:
        return 0.0
    value, _ = quad(lambda s: sup_norm(poly_derivative(semigroup_exact(p, s), 3)), 0.0, t, epsabs=1e-8, limit=200)
    return float(value)


def semigroup_bound(p: Polynomial, n: int, t: float) -> float:
    """Sum of the three proof-level estimates for |M_n^k f - e^{tL} f|."""
    lf = sup_norm(apply_generator(p))
    third = sup_norm(poly_derivative(p, 3))
    nn = n * (n - 1)
    gen = lf + third / (12 * n)
    return 2 * math.sqrt(t / nn) * gen + 4 / nn * gen + third_derivative_integral(p, t) / (12 * n)


def run_semigroup_study(f: TestFunction, t: float, n_list: Sequence[int], variant="paper") -> ConvergenceReport:
    """Lattice error of M_n^{floor(scale t)} f against the exact semigroup, with a Bernstein cross-check."""
    variant = KernelVariant.parse(variant)
    p = _require_poly(f, "semigroup study")
    if not math.isfinite(t) or t < 0:
        raise StudyError(f"t must be finite and nonnegative, got {t}")
    n_list = _check_n_list(n_list, 3)
    exact = semigroup_exact(p, t)
    rows = []
    failures = []
    for n in n_list:
        P = build_transition_matrix(n, variant)
        k, _ = step_count(n, variant, t)
        x = lattice_points(n)
        fv = p(x)
        diff = np.abs(np.linalg.matrix_power(P.entries, k) @ fv - exact(x))
        err = float(diff.max())
        bound = semigroup_bound(p, n, t)
        kb = math.floor(n * t + 1e-12)
        bern_err = float(np.max(np.abs(np.linalg.matrix_power(bernstein_matrix(n), kb) @ fv - exact(x))))
        ok = err <= bound + BOUND_TOL
        if not ok:
            failures.append(f"n={n}, t={t:g}, i={int(diff.argmax())}: error {err:.3g} > bound {bound:.3g}")
        rows.append(ReportRow(n, k, err, bound, ok, {"t": t, "bernstein_k": kb, "bernstein_error": bern_err, "min_entry": P.min_entry}))
    rate = _try_fit((r.n, r.error) for r in rows)
    bern_rate = _try_fit((r.n, r.extras["bernstein_error"]) for r in rows)
    nonzero = any(r.error > ZERO_TOL for r in rows)
    verdict = all(r.passed for r in rows)
    if nonzero and rate is not None:
        verdict = verdict and rate <= -1.0 + RATE_SLACK
        if rate > -1.0 + RATE_SLACK:
            failures.append(f"fitted rate {rate:.3g} above {-1.0 + RATE_SLACK:g}")
    return ConvergenceReport("semigroup", rows, verdict, rate, failures=failures, summary={"bernstein_rate": bern_rate})


def dyadic_pairs(gap: float, horizon: float = 1.0) -> list[tuple[float, float]]:
    count = int(round(horizon / gap))
    return [(j * gap, (j + 1) * gap) for j in range(count)]


def run_tightness_study(
    n_list: Sequence[int],
    variant="standard",
    m: int = 1,
    plan: RngPlan | None = None,
    replicates: int = 10_000,
    gaps: Sequence[float] = DYADIC_GAPS,
    start_index: int | None = None,
    workers: int = 1,
) -> ConvergenceReport:
    """Fitted exponent of the pooled E|Z_t - Z_s|^(2m) against t - s, per n.

    Non-overlapping dyadic pairs covering [0, 1] are averaged for each gap.
    """
    if m not in (1, 2, 3):
        raise StudyError(f"m must be 1, 2 or 3, got {m}")
    variant = KernelVariant.parse(variant)
    n_list = _check_n_list(n_list, 2)
    plan = plan or RngPlan(0)
    rows = []
    exponents = {}
    for n in n_list:
        start = n // 2 if start_index is None else start_index
        by_gap = {g: dyadic_pairs(g) for g in gaps}
        pairs = [pair for g in gaps for pair in by_gap[g]]
        est = interpolated_increment_moments(n, variant, start, pairs, m, replicates, plan, workers)
        pooled = []
        pos = 0
        for g in gaps:
            chunk = est[pos : pos + len(by_gap[g])]
            pos += len(chunk)
            moment = float(np.mean([e.moment for e in chunk]))
            se = math.sqrt(sum(e.std_error**2 for e in chunk)) / len(chunk)
            pooled.append((g, moment, se, len(chunk)))
        slope = float(np.polyfit(np.log([g for g, *_ in pooled]), np.log([mo for _, mo, *_ in pooled]), 1)[0])
        exponents[n] = slope
        ok = slope >= m - EXPONENT_SLACK
        scale = variant.time_scale(n)
        for g, moment, se, count in pooled:
            rows.append(ReportRow(n, int(round(g * scale)), moment, None, ok, {"gap": g, "m": m, "std_error": se, "pairs": count, "exponent": slope}))
    verdict = all(e >= m - EXPONENT_SLACK for e in exponents.values())
    report = ConvergenceReport("tightness", rows, verdict, min(exponents.values()), summary={"m": m})
    report.failures = [f"n={n}: exponent {e:.3g} < {m - EXPONENT_SLACK:g}" for n, e in exponents.items() if e < m - EXPONENT_SLACK]
    return report


def run_absorption_study(
    n_list: Sequence[int],
    variant="standard",
    replicates: int = 10_000,
    max_steps: int = 10**6,
    plan: RngPlan | None = None,
    workers: int = 1,
) -> ConvergenceReport:
    """Empirical fixation frequency from i = n/2 against the martingale value i/n."""
    variant = KernelVariant.parse(variant)
    n_list = _check_n_list(n_list, 2)
    plan = plan or RngPlan(0)
    rows = []
    for n in n_list:
        start = n // 2
        est = absorption_frequency(n, variant, start, replicates, max_steps, plan, workers)
        err = abs(est.p_hat - start / n)
        bound = 3 * est.std_error
        rows.append(
            ReportRow(
                n, max_steps, err, bound, err <= bound and est.unabsorbed == 0,
                {"p_hat": est.p_hat, "std_error": est.std_error, "unabsorbed": est.unabsorbed, "mean_steps": est.mean_steps},
            )
        )
    report = ConvergenceReport("absorption", rows, all(r.passed for r in rows))
    report.failures = [f"n={r.n}: |p_hat - i/n| = {r.error:.3g} > 3 SE = {r.bound:.3g}" for r in rows if not r.passed]
    return report
