"""Local hidden-variable feasibility problems for the multiport experiment.

A local-realistic description of the four observable pairs is a joint
probability distribution over all four outcomes at once, one per observable:
``P(k1, k2, l1, l2)`` with ``k1, k2`` Alice's outcomes for her two
observables and ``l1, l2`` Bob's.  The quantum predictions are reproducible
classically iff the appropriate two-index marginals of such a distribution
match all four prediction tables.  With the tables linear in the visibility
``v``, "how much noise makes this feasible" becomes a single LP:

    maximize v  subject to
      marginal(P, i, j)[k, l] - v * (Q_ij[k, l] - 1/n^2) = 1/n^2,
      sum P = 1,  P >= 0,  0 <= v <= 1,

with 4 n^2 marginal rows over n^4 hidden probabilities.  The optimum is the
largest visibility still explainable classically; ``1 - v`` is the minimal
noise fraction.  The inefficient-detector variant adds outcome 0 ("no
click") on each side, growing to (n+1)^4 variables and 4 (n+1)^2 rows, and
only the fired block couples to ``v``.

The marginal system is heavily rank-deficient (each pair's rows sum to the
normalization row, and row groups sharing an observable agree on its
single-party marginal); the solver's phase 1 is in charge of that.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearProgram, LpError, LpSolution, simplex_solve
from .multiport import (
    DEFAULT_MAX_DIMENSION,
    EfficiencyPredictionTable,
    PhaseSettings,
    PredictionTable,
    check_dimension,
    efficiency_table,
    prediction_table,
)

Array = np.ndarray

#: an LP optimum of at least 1 - PURE_STATE_TOL means the noise-free state
#: itself admits a local-realistic model
PURE_STATE_TOL = 1e-7

CERTIFICATE_MASS_TOL = 1e-8
CERTIFICATE_NEG_TOL = 1e-9
CERTIFICATE_CELL_TOL = 1e-7

_PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


def hidden_index(k1: int, k2: int, l1: int, l2: int, base: int) -> int:
    """Flatten one outcome assignment to its column index.

    Outcomes are 0-based internally (``0..base-1``); the flattening is the
    row-major bijection onto ``range(base**4)``.
    """
    for name, o in (("k1", k1), ("k2", k2), ("l1", l1), ("l2", l2)):
        if not 0 <= o < base:
            raise IndexError(f"outcome {name}={o} outside 0..{base - 1}")
    return ((k1 * base + k2) * base + l1) * base + l2


def _marginal_cells(base: int):
    """Index grids: for pair (i, j) and cell (k, l), the hidden columns summed.

    ``ids`` has axes ``(k1, k2, l1, l2)``; pair ``(i, j)`` fixes ``k_i = k``
    and ``l_j = l`` and sums the other two axes.
    """
    ids = np.arange(base**4).reshape(base, base, base, base)
    return {
        (1, 1): lambda k, l: ids[k, :, l, :],
        (1, 2): lambda k, l: ids[k, :, :, l],
        (2, 1): lambda k, l: ids[:, k, l, :],
        (2, 2): lambda k, l: ids[:, k, :, l],
    }


def prediction_tables(n: int, settings: PhaseSettings,
                      max_dimension: int = DEFAULT_MAX_DIMENSION) -> Array:
    """The four ideal prediction tables as an array of shape (2, 2, n, n)."""
    tables = np.empty((2, 2, n, n))
    for i, j in _PAIRS:
        tables[i - 1, j - 1] = prediction_table(n, settings, i, j, max_dimension).base
    return tables


def build_threshold_lp_from_tables(tables: Array) -> LinearProgram:
    """Threshold LP for explicitly given base tables (shape (2, 2, n, n)).

    Variable layout: hidden probabilities ``0..n**4-1`` in the
    :func:`hidden_index` order, then the visibility variable.  Rows: the four
    pairs in order (1,1), (1,2), (2,1), (2,2), cells row-major, then one
    explicit normalization row.
    """
    tables = np.asarray(tables, dtype=float)
    n = tables.shape[-1]
    if tables.shape != (2, 2, n, n):
        raise ValueError(f"tables must have shape (2, 2, n, n), got {tables.shape}")
    v_col = n**4
    noise = 1.0 / n**2
    cells = _marginal_cells(n)
    ones = np.ones(n * n)
    rows = []
    for i, j in _PAIRS:
        pick = cells[(i, j)]
        base = tables[i - 1, j - 1]
        for k in range(n):
            for l in range(n):
                idx = np.append(pick(k, l).ravel(), v_col)
                vals = np.append(ones, -(base[k, l] - noise))
                rows.append((idx, vals, noise))
    rows.append((np.arange(n**4), np.ones(n**4), 1.0))
    return LinearProgram(
        num_vars=n**4 + 1,
        objective=[(v_col, 1.0)],
        rows=rows,
        bounds={v_col: (0.0, 1.0)},
    )


def build_threshold_lp(n: int, settings: PhaseSettings,
                       max_dimension: int = DEFAULT_MAX_DIMENSION) -> LinearProgram:
    """Assemble the ideal-detector threshold LP for one settings choice."""
    n = check_dimension(n, max_dimension)
    return build_threshold_lp_from_tables(prediction_tables(n, settings, max_dimension))


def build_efficiency_lp_from_tables(tables: Array, eta: float) -> LinearProgram:
    """Detector-inefficiency threshold LP from explicit base tables.

    Outcome 0 on each side is "no click", so hidden variables are indexed by
    outcomes ``0..n`` (``(n+1)**4`` of them).  Only fired-block rows carry a
    visibility coefficient; dark rows pin the hidden marginals to the
    efficiency model's constants.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"detector efficiency must lie in [0, 1], got {eta}")
    tables = np.asarray(tables, dtype=float)
    n = tables.shape[-1]
    if tables.shape != (2, 2, n, n):
        raise ValueError(f"tables must have shape (2, 2, n, n), got {tables.shape}")
    base = n + 1
    v_col = base**4
    noise = 1.0 / n**2
    cells = _marginal_cells(base)
    ones = np.ones(base * base)
    rows = []
    for i, j in _PAIRS:
        pick = cells[(i, j)]
        q = tables[i - 1, j - 1]
        for k in range(base):
            for l in range(base):
                cols = pick(k, l).ravel()
                if k >= 1 and l >= 1:
                    idx = np.append(cols, v_col)
                    vals = np.append(ones, -(eta**2) * (q[k - 1, l - 1] - noise))
                    rhs = eta**2 * noise
                elif k == 0 and l == 0:
                    idx, vals = cols, ones
                    rhs = (1.0 - eta) ** 2
                else:
                    idx, vals = cols, ones
                    rhs = eta * (1.0 - eta) / n
                rows.append((idx, vals, rhs))
    rows.append((np.arange(base**4), np.ones(base**4), 1.0))
    return LinearProgram(
        num_vars=base**4 + 1,
        objective=[(v_col, 1.0)],
        rows=rows,
        bounds={v_col: (0.0, 1.0)},
    )


def build_efficiency_lp(n: int, settings: PhaseSettings, eta: float,
                        max_dimension: int = DEFAULT_MAX_DIMENSION) -> LinearProgram:
    """Assemble the inefficient-detector threshold LP."""
    n = check_dimension(n, max_dimension)
    return build_efficiency_lp_from_tables(prediction_tables(n, settings, max_dimension), eta)


@dataclass(frozen=True)
class ThresholdResult:
    """Critical visibility for one scenario, with the classical certificate.

    ``v_crit`` is the largest visibility at which a local hidden-variable
    model exists; ``f_threshold = 1 - v_crit`` is the minimal noise fraction
    hiding the nonclassicality.  ``certificate`` is the hidden-variable
    distribution attaining the optimum (length ``n**4``, or ``(n+1)**4``
    when ``eta`` is set).
    """

    n: int
    settings: PhaseSettings
    v_crit: float
    f_threshold: float
    certificate: Array
    eta: float = 1.0
    iterations: int = 0
    wall_ms: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def certificate_marginals(certificate: Array, base: int) -> Array:
    """Two-index marginals of a hidden-variable distribution.

    Returns an array of shape (2, 2, base, base): entry ``[i-1, j-1, k, l]``
    is the probability that observables ``(A_i, B_j)`` yield ``(k, l)``.
    """
    joint = np.asarray(certificate, dtype=float).reshape(base, base, base, base)
    return np.stack([
        np.stack([joint.sum(axis=(1, 3)), joint.sum(axis=(1, 2))]),
        np.stack([joint.sum(axis=(0, 3)), joint.sum(axis=(0, 2))]),
    ])


def _validate_certificate(certificate: Array, expected: Array, base: int) -> float:
    """Check positivity, total mass and marginal reconstruction; returns the
    worst marginal cell error."""
    if certificate.min(initial=0.0) < -CERTIFICATE_NEG_TOL:
        raise LpError(f"certificate has a negative entry: {certificate.min()}")
    if abs(certificate.sum() - 1.0) > CERTIFICATE_MASS_TOL:
        raise LpError(f"certificate mass {certificate.sum()} differs from 1")
    worst = float(np.abs(certificate_marginals(certificate, base) - expected).max())
    if worst > CERTIFICATE_CELL_TOL:
        raise LpError(f"certificate marginals off by {worst:.3e}")
    return worst


def solve_threshold(n: int, settings: PhaseSettings,
                    max_dimension: int = DEFAULT_MAX_DIMENSION) -> ThresholdResult:
    """Critical visibility / noise fraction for ideal detectors.

    The LP is always feasible (zero visibility is classical), so the status
    is ``optimal`` or an iteration-limit error propagates with diagnostics.
    """
    n = check_dimension(n, max_dimension)
    start = time.perf_counter()
    tables = prediction_tables(n, settings, max_dimension)
    lp = build_threshold_lp_from_tables(tables)
    solution = simplex_solve(lp)
    if solution.status != "optimal":
        raise LpError(f"threshold LP unexpectedly {solution.status}")
    v_crit = float(min(max(solution.objective_value, 0.0), 1.0))
    certificate = solution.primal[: n**4].copy()
    expected = np.array([
        [v_crit * tables[0, 0] + (1 - v_crit) / n**2, v_crit * tables[0, 1] + (1 - v_crit) / n**2],
        [v_crit * tables[1, 0] + (1 - v_crit) / n**2, v_crit * tables[1, 1] + (1 - v_crit) / n**2],
    ])
    worst = _validate_certificate(certificate, expected, n)
    wall_ms = (time.perf_counter() - start) * 1e3
    diagnostics = dict(solution.diagnostics)
    diagnostics["certificate_cell_error"] = worst
    return ThresholdResult(n=n, settings=settings, v_crit=v_crit,
                           f_threshold=1.0 - v_crit, certificate=certificate,
                           iterations=solution.iterations, wall_ms=wall_ms,
                           diagnostics=diagnostics)


def solve_efficiency_threshold(n: int, settings: PhaseSettings, eta: float,
                               max_dimension: int = DEFAULT_MAX_DIMENSION) -> ThresholdResult:
    """Critical visibility when every detector fires with probability ``eta``."""
    n = check_dimension(n, max_dimension)
    start = time.perf_counter()
    tables = prediction_tables(n, settings, max_dimension)
    lp = build_efficiency_lp_from_tables(tables, eta)
    solution = simplex_solve(lp)
    if solution.status != "optimal":
        raise LpError(f"efficiency LP unexpectedly {solution.status}")
    base = n + 1
    v_crit = float(min(max(solution.objective_value, 0.0), 1.0))
    certificate = solution.primal[: base**4].copy()
    expected = np.empty((2, 2, base, base))
    for i, j in _PAIRS:
        model = EfficiencyPredictionTable(n=n, eta=eta, base=tables[i - 1, j - 1])
        expected[i - 1, j - 1] = model.at_visibility(v_crit)
    worst = _validate_certificate(certificate, expected, base)
    wall_ms = (time.perf_counter() - start) * 1e3
    diagnostics = dict(solution.diagnostics)
    diagnostics["certificate_cell_error"] = worst
    return ThresholdResult(n=n, settings=settings, v_crit=v_crit,
                           f_threshold=1.0 - v_crit, certificate=certificate,
                           eta=eta, iterations=solution.iterations,
                           wall_ms=wall_ms, diagnostics=diagnostics)


@dataclass(frozen=True)
class EfficiencyScanResult:
    """Located critical efficiency with the per-eta visibility samples.

    ``samples`` holds ``(eta, v_crit(eta))`` pairs sorted by decreasing eta;
    ``eta_critical`` is the largest efficiency at which the noise-free state
    admits a local-realistic model (grid point for ``method="scan"``,
    midpoint of the final bracket for ``method="bisection"``).
    """

    n: int
    settings: PhaseSettings
    samples: tuple
    eta_critical: float
    method: str
    iterations: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta_critical <= 1.0:
            raise ValueError("eta_critical must lie in [0, 1]")
        etas = [e for e, _ in self.samples]
        vs = [v for _, v in self.samples]
        if sorted(etas, reverse=True) != list(etas):
            raise ValueError("samples must be sorted by decreasing eta")
        for (e_hi, v_hi), (e_lo, v_lo) in zip(self.samples, self.samples[1:]):
            if v_hi > v_lo + 1e-9:
                raise ValueError(
                    f"v_crit must be nonincreasing in eta: "
                    f"v({e_hi})={v_hi} > v({e_lo})={v_lo}"
                )


def _admits_local_model(v_crit: float) -> bool:
    return v_crit >= 1.0 - PURE_STATE_TOL


def scan_critical_efficiency(n: int, settings: PhaseSettings, step: float = 0.01,
                             max_dimension: int = DEFAULT_MAX_DIMENSION) -> EfficiencyScanResult:
    """Walk the detector efficiency down from 1 in fixed steps.

    Stops at the first grid point whose critical visibility reaches 1, i.e.
    where even the pure state is classically explainable; that grid point is
    reported as the critical efficiency.  Grid values are rounded to 12
    decimals so the reported eta is exactly the nominal grid point.
    """
    n = check_dimension(n, max_dimension)
    if not 0.0 < step < 1.0:
        raise ValueError(f"step must lie in (0, 1), got {step}")
    samples = []
    iterations = 0
    k = 0
    while True:
        eta = round(1.0 - k * step, 12)
        if eta < 0.0:
            eta = 0.0
        result = solve_efficiency_threshold(n, settings, eta, max_dimension)
        samples.append((eta, result.v_crit))
        iterations += result.iterations
        if _admits_local_model(result.v_crit):
            return EfficiencyScanResult(n=n, settings=settings,
                                        samples=tuple(samples), eta_critical=eta,
                                        method="scan", iterations=iterations)
        if eta == 0.0:  # pragma: no cover - eta=0 always admits a model
            raise LpError("scan reached eta=0 without finding a local model")
        k += 1


def bisect_critical_efficiency(n: int, settings: PhaseSettings, tol: float = 1e-3,
                               max_dimension: int = DEFAULT_MAX_DIMENSION) -> EfficiencyScanResult:
    """Bracket the critical efficiency to ``|error| <= tol`` by bisection.

    The bracket invariant: a local model exists at ``lo`` (v_crit = 1) and
    does not at ``hi``.  Bisection of the interval [0, 1] halts once the
    midpoint is within ``tol`` of both ends.
    """
    n = check_dimension(n, max_dimension)
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    samples = {}
    iterations = 0

    def admits(eta: float) -> bool:
        nonlocal iterations
        result = solve_efficiency_threshold(n, settings, eta, max_dimension)
        samples[eta] = result.v_crit
        iterations += result.iterations
        return _admits_local_model(result.v_crit)

    if admits(1.0):
        eta_critical = 1.0  # no violation at all for these settings
    else:
        lo, hi = 0.0, 1.0  # eta=0 is classical by construction, not solved
        while hi - lo > 2.0 * tol:
            mid = 0.5 * (lo + hi)
            if admits(mid):
                lo = mid
            else:
                hi = mid
        eta_critical = 0.5 * (lo + hi)

    ordered = tuple(sorted(samples.items(), key=lambda item: -item[0]))
    return EfficiencyScanResult(n=n, settings=settings, samples=ordered,
                                eta_critical=eta_critical, method="bisection",
                                iterations=iterations)
