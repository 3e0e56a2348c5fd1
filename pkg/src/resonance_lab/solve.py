"""Newton solves and branch continuation for the discretized stationary
equation -Laplacian u + V u = lambda u + g(u).

The solver is deliberately plain: damped Newton with the exact
linearization A - lambda - diag(g'(u)), seeded from eigenvector
combinations, plus natural-parameter continuation in lambda.  The
verification battery (energy identity, Morse data, uniform sup bound)
lives on SolutionState so every converged state carries its own evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import NonlinearitySpec
from .operator import DiscreteOperator, lowest_eigenpairs, morse_index

COLLAPSE_FACTOR = 1.0e-6
DEGENERACY_FLOOR = 1.0e-12


class SolveError(Exception):
    pass


class NonConvergenceError(SolveError):
    def __init__(self, message, best_state=None):
        super().__init__(message)
        self.best_state = best_state


class DegenerateJacobianError(SolveError):
    pass


@dataclass(frozen=True)
class SolutionState:
    lam: float
    u: np.ndarray
    residual: float
    energy: float
    linf: float
    l2: float
    morse_m: int
    morse_M: int
    margin: float
    converged: bool
    iterations: int

    def is_zero(self, grid) -> bool:
        return self.l2 < collapse_threshold(grid)

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "energy": self.energy,
            "linf": self.linf,
            "l2": self.l2,
            "morse_m": self.morse_m,
            "morse_M": self.morse_M,
            "margin": self.margin,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class ContinuationBranch:
    states: tuple
    schedule: tuple
    outcome: str  # reached_end | lost_convergence | collapsed_to_zero
    sup_linf: float
    max_step_change: float

    def to_json_dict(self) -> dict:
        return {
            "schedule": list(self.schedule),
            "outcome": self.outcome,
            "sup_linf": self.sup_linf,
            "max_step_change": self.max_step_change,
            "states": [s.to_json_dict() for s in self.states],
        }


def collapse_threshold(grid) -> float:
    """States below this discrete L^2 norm count as the zero solution."""
    volume = (2.0 * grid.half_width) ** grid.dim
    return COLLAPSE_FACTOR * volume ** 0.5


def _apply(op: DiscreteOperator, u: np.ndarray) -> np.ndarray:
    # undo any positivity shift baked into the assembled diagonal
    out = op.matvec(u)
    if op.shift:
        out = out - op.shift * u
    return out


def residual(op: DiscreteOperator, nl: NonlinearitySpec, lam: float,
             u: np.ndarray) -> np.ndarray:
    """F(u) = A u - lambda u - g(u), evaluated nodewise."""
    return _apply(op, u) - lam * u - np.asarray(nl.g(u), float)


def energy(op: DiscreteOperator, nl: NonlinearitySpec, lam: float,
           u: np.ndarray) -> float:
    """J(u) = 1/2 <Au, u> - lambda/2 <u, u> - sum G(u), all in the
    spacing-weighted quadrature.

    The quadratic part uses the stencil form directly, which equals the
    forward-difference gradient energy with ghost zeros at the boundary;
    that makes the discrete gradient of J exactly the residual F.
    """
    if nl.G is None:
        raise ValueError("energy needs the primitive G on the nonlinearity")
    g = op.grid
    quad = 0.5 * g.inner(_apply(op, u), u) - 0.5 * lam * g.inner(u, u)
    return quad - g.spacing ** g.dim * float(np.sum(nl.G(u)))


def _jacobian(op: DiscreteOperator, nl: NonlinearitySpec, lam: float,
              u: np.ndarray) -> sp.csr_matrix:
    if nl.gprime is None:
        raise ValueError("Newton needs g' on the nonlinearity")
    diag = op.shift + lam + np.asarray(nl.gprime(u), float)
    return (op.matrix() - sp.diags(diag)).tocsr()


def _make_state(op, nl, lam, u, res_norm, converged, iterations) -> SolutionState:
    g = op.grid
    lin = DiscreteOperator(
        g, op.diagonal - op.shift - lam - np.asarray(nl.gprime(u), float))
    m, M, margin = morse_index(lin)
    return SolutionState(
        lam=float(lam), u=u, residual=float(res_norm),
        energy=energy(op, nl, lam, u), linf=float(np.max(np.abs(u))),
        l2=g.norm(u), morse_m=m, morse_M=M, margin=float(margin),
        converged=converged, iterations=iterations)


def newton_solve(op: DiscreteOperator, nl: NonlinearitySpec, lam: float,
                 seed: np.ndarray, tol: float = 1.0e-10,
                 max_iter: int = 50) -> SolutionState:
    """Damped Newton from the seed; the returned state carries residual,
    energy, and the Morse data of the linearization at the solution."""
    u = np.asarray(seed, float).copy()
    if not np.all(np.isfinite(u)):
        raise ValueError("seed contains non-finite entries")
    g = op.grid
    best_u, best_norm = u, g.norm(residual(op, nl, lam, u))
    norm = best_norm
    for it in range(1, max_iter + 1):
        if norm < tol:
            state = _make_state(op, nl, lam, u, norm, True, it - 1)
            if state.l2 > 0 and state.margin < DEGENERACY_FLOOR:
                raise DegenerateJacobianError(
                    "linearization margin %g below the degeneracy floor"
                    % state.margin)
            return state
        F = residual(op, nl, lam, u)
        step = spla.spsolve(_jacobian(op, nl, lam, u), F)
        if not np.all(np.isfinite(step)):
            raise DegenerateJacobianError("singular Newton linearization")
        t = 1.0
        while t > 2.0 ** -30:
            trial = u - t * step
            trial_norm = g.norm(residual(op, nl, lam, trial))
            if trial_norm < norm:
                u, norm = trial, trial_norm
                break
            t *= 0.5
        else:
            raise NonConvergenceError(
                "line search stalled at residual %g" % norm,
                best_state=_make_state(op, nl, lam, best_u, best_norm, False, it))
        if norm < best_norm:
            best_u, best_norm = u, norm
    if norm < tol:
        return _make_state(op, nl, lam, u, norm, True, max_iter)
    raise NonConvergenceError(
        "no convergence after %d iterations (residual %g)" % (max_iter, norm),
        best_state=_make_state(op, nl, lam, best_u, best_norm, False, max_iter))


def energy_identity_check(state: SolutionState, op: DiscreteOperator,
                          nl: NonlinearitySpec) -> float:
    """|c - sum (1/2 g(u) u - G(u))| in the weighted quadrature.

    At an exact critical point the two sides agree; for a converged state
    the deviation is controlled by residual * norm.
    """
    g = op.grid
    u = state.u
    rhs = g.spacing ** g.dim * float(
        np.sum(0.5 * np.asarray(nl.g(u), float) * u - np.asarray(nl.G(u), float)))
    return abs(state.energy - rhs)


def continue_branch(op: DiscreteOperator, nl: NonlinearitySpec,
                    lambda_start: float, lambda_end: float, steps: int,
                    seed: np.ndarray, tol: float = 1.0e-10,
                    step_change_bound: Optional[float] = None) -> ContinuationBranch:
    """Natural-parameter continuation: each converged state seeds the
    next lambda.  A failed step is retried once through the midpoint
    before the branch is declared lost."""
    schedule = np.linspace(lambda_start, lambda_end, steps)
    states = []
    u = np.asarray(seed, float)
    # a branch that starts at zero is legitimately the trivial branch;
    # "collapsed" is reserved for a nontrivial branch falling to zero
    nontrivial = op.grid.norm(u) >= collapse_threshold(op.grid)
    outcome = "reached_end"
    max_change = 0.0
    prev_lam = lambda_start
    for lam in schedule:
        try:
            state = newton_solve(op, nl, lam, u, tol=tol)
        except NonConvergenceError:
            try:
                mid = newton_solve(op, nl, 0.5 * (prev_lam + lam), u, tol=tol)
                state = newton_solve(op, nl, lam, mid.u, tol=tol)
            except NonConvergenceError:
                outcome = "lost_convergence"
                break
        if nontrivial and state.is_zero(op.grid):
            states.append(state)
            outcome = "collapsed_to_zero"
            break
        if states:
            change = op.grid.norm(state.u - states[-1].u)
            max_change = max(max_change, change)
            if step_change_bound is not None and change > step_change_bound:
                outcome = "lost_convergence"
                break
        states.append(state)
        u = state.u
        prev_lam = lam
    sup_linf = max((s.linf for s in states), default=0.0)
    return ContinuationBranch(tuple(states), tuple(schedule.tolist()),
                              outcome, sup_linf, max_change)


def eigenvector_seed(op: DiscreteOperator, index: int, amplitude: float,
                     k: Optional[int] = None) -> np.ndarray:
    """amplitude times the index-th eigenvector of the linear part,
    normalized in the discrete L^2 norm."""
    k = max(index + 1, k or 0)
    report = lowest_eigenpairs(op.with_diagonal_offset(-op.shift), k)
    return amplitude * report.eigenvectors[:, index]


def nonexistence_probe(op: DiscreteOperator, nl: NonlinearitySpec, lam: float,
                       trials: int, k: int, seed: int = 0,
                       amplitudes=(0.5, 2.0, 8.0)) -> dict:
    """Multi-start search for nontrivial solutions at a fixed lambda.

    Verdict "consistent with nonexistence" means every converged run
    collapsed below the zero threshold.  The premise block reports whether
    the strict chord condition g(t)/t > g0 and the level condition
    lambda + g0 > mu_k actually hold here, since the verdict only means
    something when they do.
    """
    rng = np.random.default_rng(seed)
    report = lowest_eigenpairs(op.with_diagonal_offset(-op.shift), k)
    mus = report.eigenvalues
    ts = np.concatenate([-np.geomspace(1e-3, 1e3, 31), np.geomspace(1e-3, 1e3, 31)])
    chords = np.asarray(nl.g(ts), float) / ts
    premise = {
        "chord_strictly_above_g0": bool(np.all(chords > nl.g0 + 1e-15)),
        "level_above_mu_k": bool(lam + nl.g0 > mus[k - 1]),
        "level": lam + nl.g0,
        "mu_k": float(mus[k - 1]),
    }
    threshold = collapse_threshold(op.grid)
    found = []
    collapsed = 0
    failures = 0
    for _ in range(trials):
        coeffs = rng.standard_normal(k)
        coeffs /= np.linalg.norm(coeffs)
        amp = rng.choice(amplitudes)
        start = amp * (report.eigenvectors[:, :k] @ coeffs)
        try:
            state = newton_solve(op, nl, lam, start)
        except (NonConvergenceError, DegenerateJacobianError):
            failures += 1
            continue
        if state.l2 < threshold:
            collapsed += 1
        else:
            found.append(state)
    return {
        "premise": premise,
        "trials": trials,
        "collapsed": collapsed,
        "nonconverged": failures,
        "counter_witnesses": found,
        "consistent_with_nonexistence": premise["chord_strictly_above_g0"]
        and premise["level_above_mu_k"] and not found,
    }
