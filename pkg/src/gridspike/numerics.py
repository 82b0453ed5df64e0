"""Dense numeric kernels: symmetric eigendecomposition, chi-square distribution
functions, a deterministic simplex LP solver, SPD solves and seeded Gaussian
streams.

Everything here is pure and reentrant.  GaussianStream instances hold state and
must not be shared between threads; derive one stream per task instead
(see :meth:`GaussianStream.derive`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import chdtr, chdtrc, gammaincinv

__all__ = [
    "EigenDecomposition",
    "GaussianStream",
    "LpProblem",
    "LpResult",
    "NumericsError",
    "chi2_cdf",
    "chi2_quantile",
    "noncentral_chi2_sf",
    "solve_lp",
    "solve_spd",
    "sym_eig",
]

_SYM_RTOL = 1e-12
_PIVOT_TOL = 1e-10


class NumericsError(RuntimeError):
    """Raised when a kernel cannot produce a trustworthy result."""


# ---------------------------------------------------------------------------
# symmetric eigendecomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral decomposition A = V diag(w) V^T with w sorted descending.

    Column ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.  Signs are
    fixed so that each eigenvector's largest-magnitude entry is nonnegative
    (lowest index wins ties), which keeps downstream attack vectors
    reproducible across runs and platforms.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    flip = vectors[idx, np.arange(vectors.shape[1])] < 0.0
    vectors = vectors.copy()
    vectors[:, flip] *= -1.0
    return vectors


def sym_eig(a: np.ndarray) -> EigenDecomposition:
    """Eigendecompose a symmetric real matrix, eigenvalues descending.

    The input must be symmetric to within a 1e-12 relative tolerance; it is
    symmetrized as (a + a^T)/2 before factorization so that tiny asymmetries
    from accumulated rounding cannot leak into the spectrum.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale > 0.0 and np.max(np.abs(a - a.T)) > _SYM_RTOL * scale:
        raise ValueError("matrix is not symmetric within 1e-12 relative tolerance")
    sym = (a + a.T) / 2.0
    try:
        w, v = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh rarely fails
        raise NumericsError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.argsort(w)[::-1]
    return EigenDecomposition(
        eigenvalues=w[order],
        eigenvectors=_fix_signs(v[:, order]),
    )


# ---------------------------------------------------------------------------
# chi-square distribution functions
# ---------------------------------------------------------------------------

def chi2_cdf(x: float, df: int) -> float:
    """P(X <= x) for a central chi-square with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be a positive integer")
    if x <= 0.0:
        return 0.0
    return float(chdtr(df, x))


def chi2_quantile(q: float, df: int) -> float:
    """Inverse chi-square CDF via the regularized lower incomplete gamma.

    Satisfies chi2_cdf(chi2_quantile(q, df), df) == q to ~1e-12.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile probability must lie in (0, 1), got {q}")
    if df <= 0:
        raise ValueError("df must be a positive integer")
    return float(2.0 * gammaincinv(df / 2.0, q))


def noncentral_chi2_sf(x: float, df: int, nu: float) -> float:
    """P(X >= x) for a noncentral chi-square(df, nu).

    Evaluated as the Poisson(nu/2)-weighted mixture of central chi-square
    survival functions, truncated once the unaccounted Poisson mass drops
    below 1e-12.  The summation starts at the Poisson mode so that large
    noncentralities do not force a long crawl through negligible terms.
    """
    if df <= 0:
        raise ValueError("df must be a positive integer")
    if nu < 0.0:
        raise ValueError("noncentrality must be nonnegative")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    if nu == 0.0:
        return float(chdtrc(df, x))

    half = nu / 2.0
    k0 = int(half)
    # log Poisson pmf at the mode, then recurrences in both directions
    log_w0 = -half + k0 * math.log(half) - math.lgamma(k0 + 1)
    total = 0.0
    mass = 0.0

    w = math.exp(log_w0)
    k = k0
    while w > 0.0:
        total += w * chdtrc(df + 2 * k, x)
        mass += w
        k += 1
        w *= half / k
        if mass >= 1.0 - 1e-12:
            break
    w = math.exp(log_w0)
    k = k0
    while k > 0 and mass < 1.0 - 1e-12:
        w *= k / half
        k -= 1
        total += w * chdtrc(df + 2 * k, x)
        mass += w
    # the untallied tail contributes at most its Poisson mass
    return float(min(1.0, total + (1.0 - mass)))


# ---------------------------------------------------------------------------
# linear programming: dense two-phase simplex with Bland's rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LpProblem:
    """min c^T x  subject to  A x = b,  x >= 0."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != (b.size, c.size):
            raise ValueError(
                f"inconsistent LP dimensions: A is {a.shape}, "
                f"b has {b.size} rows, c has {c.size} entries"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class LpResult:
    """Outcome of a simplex solve; ``x``/``objective`` are set when optimal."""

    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


_STALL_LIMIT = 12


def _simplex_pivot(tableau: np.ndarray, basis: np.ndarray, ncols: int) -> str:
    """Run simplex pivots in place until optimal or unbounded.

    Entering variable: most negative reduced cost (lowest index on ties).
    After _STALL_LIMIT consecutive degenerate pivots the entering rule
    switches to Bland's lowest-index rule, which cannot cycle, and switches
    back once the objective moves.  Ratio-test ties always go to the row
    whose basic variable has the lowest index.  Fully deterministic, so
    repeated solves of one problem are bit-identical.
    """
    m = tableau.shape[0] - 1
    stall = 0
    value = tableau[-1, -1]  # negative of the current objective
    while True:
        costs = tableau[-1, :ncols]
        if stall < _STALL_LIMIT:
            entering = int(np.argmin(costs))
            if costs[entering] >= -_PIVOT_TOL:
                return "optimal"
        else:
            negative = np.nonzero(costs < -_PIVOT_TOL)[0]
            if negative.size == 0:
                return "optimal"
            entering = int(negative[0])
        col = tableau[:m, entering]
        ratios = np.full(m, np.inf)
        positive = col > _PIVOT_TOL
        if not positive.any():
            return "unbounded"
        ratios[positive] = tableau[:m, -1][positive] / col[positive]
        best = float(ratios.min())
        ties = np.nonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))[0]
        leave = int(ties[np.argmin(basis[ties])])
        tableau[leave, :] /= tableau[leave, entering]
        factors = tableau[:, entering].copy()
        factors[leave] = 0.0
        tableau -= np.outer(factors, tableau[leave, :])
        basis[leave] = entering
        new_value = tableau[-1, -1]
        if new_value > value + 1e-12 * (1.0 + abs(value)):
            stall = 0
            value = new_value
        else:
            stall += 1


def solve_lp(problem: LpProblem, initial_basis: np.ndarray | None = None) -> LpResult:
    """Solve a standard-form LP with a dense simplex; fully deterministic.

    Without ``initial_basis`` this is the classic two-phase method
    (artificial variables, then the real objective).  Callers that know a
    basic feasible solution can pass its column indices to skip phase 1;
    the tableau is canonicalized on that basis directly.  Infeasibility
    and unboundedness are reported as result values, not exceptions.
    """
    a = problem.a.copy()
    b = problem.b.copy()
    c = problem.c
    m, n = a.shape

    if initial_basis is not None:
        basis = np.asarray(initial_basis, dtype=int).copy()
        if basis.shape != (m,):
            raise ValueError(f"initial basis must list {m} columns")
        tableau = np.zeros((m + 1, n + 1))
        tableau[:m, :n] = a
        tableau[:m, -1] = b
        # canonicalize: unit columns on the given basis
        for i in range(m):
            pivot = tableau[i, basis[i]]
            if abs(pivot) <= _PIVOT_TOL:
                raise ValueError("initial basis is singular")
            tableau[i, :] /= pivot
            factors = tableau[:m, basis[i]].copy()
            factors[i] = 0.0
            tableau[:m, :] -= np.outer(factors, tableau[i, :])
        if np.any(tableau[:m, -1] < -1e-9):
            raise ValueError("initial basis is not feasible")
        tableau[-1, :n] = c
        for i in range(m):
            if abs(tableau[-1, basis[i]]) > 0.0:
                tableau[-1, :] -= tableau[-1, basis[i]] * tableau[i, :]
        status = _simplex_pivot(tableau, basis, n)
        if status == "unbounded":
            return LpResult(status="unbounded")
        x = np.zeros(n)
        for i in range(m):
            x[basis[i]] = tableau[i, -1]
        return LpResult(status="optimal", x=x, objective=float(c @ x))

    neg = b < 0.0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: minimize the sum of artificial variables
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -a.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)

    status = _simplex_pivot(tableau, basis, n + m)
    if status != "optimal" or -tableau[-1, -1] > 1e-8:
        return LpResult(status="infeasible")

    # drive any residual artificial out of the basis (degenerate rows)
    for i in range(m):
        if basis[i] >= n:
            row = tableau[i, :n]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > _PIVOT_TOL:
                pivot = tableau[i, j]
                tableau[i, :] /= pivot
                for k in range(tableau.shape[0]):
                    if k != i and abs(tableau[k, j]) > 0.0:
                        tableau[k, :] -= tableau[k, j] * tableau[i, :]
                basis[i] = j
            # else: the row is redundant (all-zero over real variables)

    # phase 2: original objective over the feasible tableau
    phase2 = np.zeros((m + 1, n + 1))
    phase2[:m, :n] = tableau[:m, :n]
    phase2[:m, -1] = tableau[:m, -1]
    phase2[-1, :n] = c
    for i in range(m):
        if basis[i] < n and abs(phase2[-1, basis[i]]) > 0.0:
            phase2[-1, :] -= phase2[-1, basis[i]] * phase2[i, :]

    status = _simplex_pivot(phase2, basis, n)
    if status == "unbounded":
        return LpResult(status="unbounded")

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = phase2[i, -1]
    return LpResult(status="optimal", x=x, objective=float(c @ x))


# ---------------------------------------------------------------------------
# SPD solve
# ---------------------------------------------------------------------------

def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for symmetric positive-definite a via Cholesky."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    try:
        factor = cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"matrix is not positive definite: {exc}") from exc
    return cho_solve(factor, b, check_finite=False)


# ---------------------------------------------------------------------------
# seeded Gaussian stream
# ---------------------------------------------------------------------------

@dataclass
class GaussianStream:
    """Deterministic stream of standard normal draws.

    The same ``seed`` yields a bit-identical sequence on every platform and
    run (PCG64 under a SeedSequence).  Independent sub-streams for parallel
    trials come from :meth:`derive`, which hashes (seed, key path) so that
    trial outcomes do not depend on scheduling or on the total trial count.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._rng = np.random.Generator(np.random.PCG64(seq))

    def derive(self, *key: int) -> "GaussianStream":
        """Child stream for sub-task ``key``; independent of draws made here."""
        return GaussianStream(seed=self.seed, spawn_key=self.spawn_key + tuple(key))

    def standard_normal(self, shape: int | tuple[int, ...] = ()) -> np.ndarray:
        return self._rng.standard_normal(shape)

    def uniform_symmetric(self, half_width: float, shape: int | tuple[int, ...] = ()) -> np.ndarray:
        """Uniform draws on [-half_width, +half_width]."""
        return self._rng.uniform(-half_width, half_width, shape)
