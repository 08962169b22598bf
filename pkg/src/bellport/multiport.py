"""Quantum predictions for two entangled quNits measured behind Bell multiports.

Conventions
-----------
- Each observer routes their particle through a bank of ``n`` phase shifters
  followed by an unbiased ``2n``-port beamsplitter whose transition matrix has
  entries that are powers of the n-th root of unity (a "Bell multiport").
- An observable is fixed by the vector of ``n`` phase-shifter settings, in
  radians.  Phases are kept as raw radians, never reduced mod 2*pi: only phase
  differences enter the probabilities, and reduction just adds rounding noise.
- Detector outcomes are labelled ``1..n``.  The extended tables produced by
  :func:`efficiency_table` add outcome ``0`` for "no detector fired".
- A prediction table is parametrized linearly by the visibility ``v`` of the
  two-particle state: the realized cell is ``v * base + (1 - v) / n**2``,
  i.e. ``1 - v`` is the fraction of white noise mixed into the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

#: Largest dimension accepted by default.  The local-model feasibility
#: problems downstream grow as n**4 variables, so this is a safety rail,
#: not a hard mathematical limit; callers can raise it explicitly.
DEFAULT_MAX_DIMENSION = 16

MASS_TOL = 1e-10
UNITARITY_TOL = 1e-12


def check_dimension(n: int, max_dimension: int = DEFAULT_MAX_DIMENSION) -> int:
    """Validate a quNit dimension and return it as a plain int.

    Raises:
        ValueError: if ``n < 2`` or ``n`` exceeds ``max_dimension``.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    if n > max_dimension:
        raise ValueError(
            f"dimension {n} exceeds the configured ceiling {max_dimension}; "
            "raise max_dimension explicitly if you really want this"
        )
    return n


def bell_multiport(n: int, max_dimension: int = DEFAULT_MAX_DIMENSION) -> Array:
    """Transition matrix of the unbiased 2n-port Bell beamsplitter.

    Entry ``(j, i)`` equals ``gamma**((j-1)*(i-1)) / sqrt(n)`` with
    ``gamma = exp(2j*pi/n)`` and 1-based row/column labels.  The matrix is
    unitary and every entry has modulus ``1/sqrt(n)``: a photon entering any
    single input port leaves through each output port with equal probability.

    Args:
        n: number of input (and output) ports per observer.

    Returns:
        Complex ``(n, n)`` array, read-only.
    """
    n = check_dimension(n, max_dimension)
    j = np.arange(n)
    matrix = np.exp(2j * np.pi / n * np.outer(j, j)) / np.sqrt(n)
    matrix.flags.writeable = False
    return matrix


def _as_phase_vector(phases) -> Array:
    vec = np.asarray(phases, dtype=float)
    if vec.ndim != 1:
        raise ValueError("a phase vector must be one-dimensional")
    if not np.all(np.isfinite(vec)):
        raise ValueError("phase values must be finite")
    vec = vec.copy()
    vec.flags.writeable = False
    return vec


@dataclass(frozen=True)
class PhaseSettings:
    """The four phase vectors defining one experiment.

    ``a1``/``a2`` are the two observables on Alice's side, ``b1``/``b2`` the
    two on Bob's.  All four vectors must share the same length ``n >= 2``.
    """

    a1: Array
    a2: Array
    b1: Array
    b2: Array

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            object.__setattr__(self, name, _as_phase_vector(getattr(self, name)))
        lengths = {len(self.a1), len(self.a2), len(self.b1), len(self.b2)}
        if len(lengths) != 1:
            raise ValueError(f"phase vectors disagree on length: {sorted(lengths)}")
        if self.n < 2:
            raise ValueError("phase vectors must have length >= 2")

    @property
    def n(self) -> int:
        return len(self.a1)

    def alice(self, i: int) -> Array:
        if i not in (1, 2):
            raise ValueError(f"observable index must be 1 or 2, got {i}")
        return self.a1 if i == 1 else self.a2

    def bob(self, j: int) -> Array:
        if j not in (1, 2):
            raise ValueError(f"observable index must be 1 or 2, got {j}")
        return self.b1 if j == 1 else self.b2


def standard_settings(n: int, max_dimension: int = DEFAULT_MAX_DIMENSION) -> PhaseSettings:
    """The fixed per-dimension phase settings used for all threshold runs.

    Component ``m`` (0-based) of each vector:

    - ``a1[m] = 0``
    - ``a2[m] = m * pi / n``
    - ``b1[m] = m * pi / (2 n)``
    - ``b2[m] = -b1[m]``

    For ``n = 2`` these are the textbook phases that maximally violate local
    realism in a two-qubit experiment; for larger ``n`` they are a fixed
    choice known to give strong violations, adopted here as the definition of
    the scan rather than as a claimed optimum.
    """
    n = check_dimension(n, max_dimension)
    m = np.arange(n)
    return PhaseSettings(
        a1=np.zeros(n),
        a2=m * np.pi / n,
        b1=m * np.pi / (2 * n),
        b2=-m * np.pi / (2 * n),
    )


def joint_probability(phases_a, phases_b, k: int, l: int) -> float:
    """Probability that Alice's detector ``k`` and Bob's ``l`` fire (pure state).

    Amplitude form: ``(1/n) * |sum_m exp(i(a_m + b_m)) U[m,k] U[m,l]|**2``
    with ``U`` the Bell multiport matrix.  Visibility/noise mixing is applied
    downstream; this is the ideal two-particle interference term.

    Args:
        phases_a: Alice's phase vector (length n).
        phases_b: Bob's phase vector (length n).
        k: Alice's outcome, 1-based in ``1..n``.
        l: Bob's outcome, 1-based in ``1..n``.
    """
    a = np.asarray(phases_a, dtype=float)
    b = np.asarray(phases_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("phase vectors must be one-dimensional and equally long")
    n = len(a)
    if not (1 <= k <= n and 1 <= l <= n):
        raise IndexError(f"outcomes must lie in 1..{n}, got k={k}, l={l}")
    u = bell_multiport(n, max_dimension=max(n, DEFAULT_MAX_DIMENSION))
    amplitude = np.sum(np.exp(1j * (a + b)) * u[:, k - 1] * u[:, l - 1])
    return float(np.abs(amplitude) ** 2) / n


def joint_probability_cosine(phases_a, phases_b, k: int, l: int) -> float:
    """Same probability as :func:`joint_probability`, via the cosine form.

    Evaluates ``(1/n**3) * (n + 2 * sum_{m>m'} cos(phi_m - phi_m'))`` where
    ``phi_m = a_m + b_m + m*(k+l-2)*2*pi/n`` (0-based ``m``; only differences
    of the ``phi`` enter, so the 0- vs 1-based ``m`` offset cancels).  Kept
    fully independent of the amplitude path as a cross-check.
    """
    a = np.asarray(phases_a, dtype=float)
    b = np.asarray(phases_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("phase vectors must be one-dimensional and equally long")
    n = len(a)
    if not (1 <= k <= n and 1 <= l <= n):
        raise IndexError(f"outcomes must lie in 1..{n}, got k={k}, l={l}")
    phi = a + b + np.arange(n) * (k + l - 2) * (2 * np.pi / n)
    total = 0.0
    for m in range(n):
        for mp in range(m):
            total += np.cos(phi[m] - phi[mp])
    return (n + 2.0 * total) / n**3


@dataclass(frozen=True)
class PredictionTable:
    """Joint outcome probabilities for one settings pair, linear in visibility.

    ``base[k-1, l-1]`` is the ideal (visibility 1) probability of outcomes
    ``(k, l)``; the realized table at visibility ``v`` is
    ``v * base + (1 - v) / n**2`` per cell.
    """

    n: int
    base: Array

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        if base.shape != (self.n, self.n):
            raise ValueError(f"base table must be ({self.n}, {self.n})")
        if np.any(base < -MASS_TOL) or np.any(base > 1 + MASS_TOL):
            raise ValueError("base probabilities must lie in [0, 1]")
        if abs(base.sum() - 1.0) > MASS_TOL:
            raise ValueError("base probabilities must sum to 1")
        marg = 1.0 / self.n
        if np.max(np.abs(base.sum(axis=1) - marg)) > MASS_TOL or np.max(
            np.abs(base.sum(axis=0) - marg)
        ) > MASS_TOL:
            raise ValueError("single-detector marginals must be uniform 1/n")
        base = base.copy()
        base.flags.writeable = False
        object.__setattr__(self, "base", base)

    def at_visibility(self, visibility: float) -> Array:
        if not 0.0 <= visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
        return visibility * self.base + (1.0 - visibility) / self.n**2


def prediction_table(n: int, settings: PhaseSettings, i: int, j: int,
                     max_dimension: int = DEFAULT_MAX_DIMENSION) -> PredictionTable:
    """Ideal joint-probability table for observable pair ``(A_i, B_j)``.

    Args:
        n: quNit dimension; must match ``settings.n``.
        settings: the four phase vectors.
        i: Alice's observable index (1 or 2).
        j: Bob's observable index (1 or 2).
    """
    n = check_dimension(n, max_dimension)
    if settings.n != n:
        raise ValueError(f"settings are for n={settings.n}, expected {n}")
    a = settings.alice(i)
    b = settings.bob(j)
    u = bell_multiport(n, max_dimension)
    # amplitude[k, l] = sum_m exp(i(a_m+b_m)) U[m,k] U[m,l]
    amplitude = u.T @ (np.exp(1j * (a + b))[:, None] * u)
    base = np.abs(amplitude) ** 2 / n
    return PredictionTable(n=n, base=base)


@dataclass(frozen=True)
class EfficiencyPredictionTable:
    """Joint probabilities with imperfect detectors of efficiency ``eta``.

    Outcome ``0`` on either side means that side's detector did not fire.
    At visibility ``v`` the ``(n+1) x (n+1)`` table is:

    - fired block (``k, l >= 1``): ``eta**2 * (v * base + (1 - v)/n**2)``
    - one side dark: ``eta * (1 - eta) / n``
    - both sides dark: ``(1 - eta)**2``

    Only the fired block depends on visibility; total mass is 1 for any
    visibility in [0, 1].
    """

    n: int
    eta: float
    base: Array

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"detector efficiency must lie in [0, 1], got {self.eta}")
        # reuse the PredictionTable validation for the fired block
        PredictionTable(n=self.n, base=self.base)
        base = np.asarray(self.base, dtype=float).copy()
        base.flags.writeable = False
        object.__setattr__(self, "base", base)

    def at_visibility(self, visibility: float) -> Array:
        if not 0.0 <= visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
        eta = self.eta
        table = np.empty((self.n + 1, self.n + 1))
        table[0, 0] = (1.0 - eta) ** 2
        table[0, 1:] = eta * (1.0 - eta) / self.n
        table[1:, 0] = eta * (1.0 - eta) / self.n
        table[1:, 1:] = eta**2 * (visibility * self.base + (1.0 - visibility) / self.n**2)
        return table


def efficiency_table(table: PredictionTable, eta: float) -> EfficiencyPredictionTable:
    """Extend an ideal prediction table with non-detection outcomes.

    Args:
        table: ideal-detector table.
        eta: detector efficiency in [0, 1], identical for all detectors.
    """
    return EfficiencyPredictionTable(n=table.n, eta=float(eta), base=table.base)
