"""Sparsest attack within the span of the top-m estimated eigenmodes, and
the stealth/sparsity trade-off swept over m.

The support-minimization program min ||U_m c||_0 subject to the impact
constraint is relaxed: the impact constraint only fixes the attack's scale,
not its direction, so we search for the sparsest direction with an
l1 surrogate -- one small LP per anchored measurement index j
(min ||U_m c||_1 s.t. (U_m c)_j = 1) -- pick the candidate with the fewest
nonzeros, and rescale it onto the impact boundary.  Anchoring at +1 loses
nothing because the feasible set is symmetric under negation.  The l1
relaxation is a heuristic: it is not guaranteed to find the true minimum
support, and the tests only hold it to near-optimality on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .attacks import AttackVector, StateVarianceEstimate, predicted_detection_probability
from .estimation import BddConfig
from .numerics import LpProblem, solve_lp
from .spiked import SpikedEstimate, SubspaceError

__all__ = [
    "SparsityResult",
    "TradeoffCurve",
    "TradeoffPoint",
    "sparsest_attack",
    "tradeoff_curve",
    "write_tradeoff_csv",
]

DEFAULT_EPS_ZERO = 1e-6  # relative to the attack's largest entry


@dataclass(frozen=True)
class SparsityResult:
    """Sparsest attack found in span(U_m) meeting the impact target."""

    m: int
    k_star: int
    attack: AttackVector
    anchor_index: int
    l1_norm: float
    eps_zero: float
    predicted_detection_prob: float | None = None


@dataclass(frozen=True)
class TradeoffPoint:
    m: int
    k_star: int
    sparsity: int
    predicted_detection_prob: float | None
    empirical_detection_prob: float | None


@dataclass(frozen=True)
class TradeoffCurve:
    points: tuple[TradeoffPoint, ...]
    results: tuple[SparsityResult, ...]


def _anchored_lp(basis: np.ndarray, j: int) -> tuple[np.ndarray, float] | None:
    """min ||basis c||_1 with (basis c)_j = 1; None when that row is empty.

    Standard-form encoding with split signs: the anchor row eliminates one
    coefficient, leaving variables [c+, c-, g+, g-] with
    g+ - g- = W(c+ - c-) + v, minimize sum(g+ + g-).  Both g parts of a
    row are never simultaneously basic at the optimum, so the objective is
    the l1 norm; the elimination makes (c = 0, g = split(v)) a basic
    feasible start, so no phase-1 artificials are needed.
    """
    rows, cols = basis.shape
    anchor_row = basis[j, :]
    k = int(np.argmax(np.abs(anchor_row)))
    if abs(anchor_row[k]) <= 1e-12:
        return None
    # c_k = (1 - sum_{l != k} U[j,l] c_l) / U[j,k]
    keep = [l for l in range(cols) if l != k]
    v = basis[:, k] / anchor_row[k]
    w = basis[:, keep] - np.outer(v, anchor_row[keep])

    free = len(keep)
    nvar = 2 * free + 2 * rows
    obj = np.concatenate([np.zeros(2 * free), np.ones(2 * rows)])
    a_eq = np.zeros((rows, nvar))
    a_eq[:, :free] = w
    a_eq[:, free : 2 * free] = -w
    a_eq[:, 2 * free : 2 * free + rows] = -np.eye(rows)
    a_eq[:, 2 * free + rows :] = np.eye(rows)
    b_eq = -v
    # start from c = 0: basic g+_i = v_i where v_i >= 0, else g-_i
    start = np.where(v >= 0.0, 2 * free + np.arange(rows), 2 * free + rows + np.arange(rows))
    result = solve_lp(LpProblem(c=obj, a=a_eq, b=b_eq), initial_basis=start)
    if not result.optimal:
        return None
    c_free = result.x[:free] - result.x[free : 2 * free]
    c = np.empty(cols)
    c[keep] = c_free
    c[k] = (1.0 - anchor_row[keep] @ c_free) / anchor_row[k]
    return c, float(result.objective)


def _support_size(vector: np.ndarray, eps_zero: float) -> int:
    peak = float(np.max(np.abs(vector)))
    if peak == 0.0:
        return 0
    return int(np.sum(np.abs(vector) > eps_zero * peak))


def sparsest_attack(
    est: SpikedEstimate,
    m: int,
    tau: float,
    sv: StateVarianceEstimate,
    eps_zero: float = DEFAULT_EPS_ZERO,
    bdd: BddConfig | None = None,
) -> SparsityResult:
    """Sparsest direction in span(U_m) via anchored LPs, scaled to impact tau.

    Candidate selection is fully deterministic: fewest nonzeros first, then
    smallest l1 norm, then lowest anchor index.  ``eps_zero`` is the
    numerical-zero threshold relative to the attack's largest entry.
    """
    if not est.has_subspace:
        raise SubspaceError("no recoverable subspace: cannot construct an attack")
    if not 1 <= m <= est.s:
        raise ValueError(f"subspace dimension m={m} outside the recoverable range 1..{est.s}")
    if tau <= 0.0:
        raise ValueError("impact target tau must be positive")
    if eps_zero <= 0.0:
        raise ValueError("eps_zero must be positive")

    basis = est.u_hat[:, :m]
    best: tuple[int, float, int, np.ndarray] | None = None
    for j in range(est.m):
        solved = _anchored_lp(basis, j)
        if solved is None:
            continue
        c_dir, l1 = solved
        direction = basis @ c_dir
        k = _support_size(direction, eps_zero)
        key = (k, l1, j)
        if best is None or key < (best[0], best[1], best[2]):
            best = (k, l1, j, c_dir)
    if best is None:
        raise SubspaceError(f"all {est.m} anchored programs infeasible (degenerate basis)")

    k_star, l1, anchor, c_dir = best
    impact_per_unit = float(
        sv.sigma_theta**2 * np.sum((est.omega_hat[:m] / est.mu_hat[:m]) * c_dir**2)
    )
    scale = np.sqrt(tau / impact_per_unit)
    c = scale * c_dir
    nu_hat = float(np.sum((1.0 - est.omega_hat[:m]) * c**2))
    vector = est.sigma_n * basis @ c
    prob = None if bdd is None else predicted_detection_probability(nu_hat, bdd)
    attack = AttackVector(
        vector=vector,
        coefficients=c,
        mode_indices=tuple(range(1, m + 1)),
        target_tau=tau,
        predicted_nu=nu_hat,
        construction=f"sparse({m})",
        sigma_n=est.sigma_n,
        predicted_detection_prob=prob,
    )
    return SparsityResult(
        m=m,
        k_star=k_star,
        attack=attack,
        anchor_index=anchor,
        l1_norm=l1,
        eps_zero=eps_zero,
        predicted_detection_prob=prob,
    )


def tradeoff_curve(
    est: SpikedEstimate,
    tau: float,
    sv: StateVarianceEstimate,
    eps_zero: float = DEFAULT_EPS_ZERO,
    bdd: BddConfig | None = None,
    evaluator: Callable[[AttackVector], float] | None = None,
) -> TradeoffCurve:
    """Sweep the subspace dimension m = 1..s and collect the trade-off.

    An attack found in a smaller subspace remains feasible in every larger
    one, so each point reports the best (sparsest) result over dimensions
    up to m; this makes k_star nonincreasing by construction, which the raw
    per-m l1 heuristic does not guarantee.  ``evaluator`` maps an attack to
    its empirical detection rate (the caller owns simulation against the
    true grid); omit it to get predicted probabilities only.
    """
    if not est.has_subspace:
        raise SubspaceError("no recoverable subspace: cannot sweep the trade-off")
    points: list[TradeoffPoint] = []
    results: list[SparsityResult] = []
    best: SparsityResult | None = None
    for m in range(1, est.s + 1):
        candidate = sparsest_attack(est, m, tau, sv, eps_zero=eps_zero, bdd=bdd)
        if best is None or candidate.k_star < best.k_star:
            best = candidate
        current = replace(best, m=m)
        results.append(current)
        empirical = None if evaluator is None else float(evaluator(current.attack))
        points.append(
            TradeoffPoint(
                m=m,
                k_star=current.k_star,
                sparsity=est.m - current.k_star,
                predicted_detection_prob=current.predicted_detection_prob,
                empirical_detection_prob=empirical,
            )
        )
    return TradeoffCurve(points=tuple(points), results=tuple(results))


def write_tradeoff_csv(curve: TradeoffCurve, path: str) -> None:
    """Emit the documented ``m,k_star,sparsity,predicted_p,empirical_p`` schema."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("m,k_star,sparsity,predicted_p,empirical_p\n")
        for pt in curve.points:
            pred = "" if pt.predicted_detection_prob is None else format(pt.predicted_detection_prob, ".10g")
            emp = "" if pt.empirical_detection_prob is None else format(pt.empirical_detection_prob, ".10g")
            fh.write(f"{pt.m},{pt.k_star},{pt.sparsity},{pred},{emp}\n")
