"""Discretized Schrodinger operators on a truncated box.

The whole-space operator -Laplacian + V is replaced by the standard
(2*dim+1)-point stencil on a box [-L, L]^dim with homogeneous Dirichlet
boundary.  Discrete eigenvalues above the essential-spectrum threshold are
truncation artifacts and get flagged as untrusted.  The dense solvers here
double as oracles for the iterative path, so both must stay available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import erf
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import PotentialSpec

DENSE_FALLBACK_DOF = 2000
CLUSTER_GAP = 1.0e-7


class AssemblyError(Exception):
    pass


class ConvergenceError(Exception):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of interior nodes on [-L, L]^dim."""

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2, or 3")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis < 3:
            raise ValueError("need at least 3 points per axis")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points_per_axis + 1)

    @property
    def ndof(self) -> int:
        return self.points_per_axis ** self.dim

    def axis_nodes(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + h * np.arange(1, self.points_per_axis + 1)

    def nodes(self) -> np.ndarray:
        """All interior nodes, shape (ndof, dim), C-ordered."""
        axes = [self.axis_nodes()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def refine(self) -> "Grid":
        """Halve the spacing (2n+1 interior points keeps the box exact)."""
        return Grid(self.dim, self.half_width, 2 * self.points_per_axis + 1)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Discrete L^2 inner product (spacing-weighted)."""
        return float(self.spacing ** self.dim * np.dot(u, v))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.spacing ** self.dim) * np.linalg.norm(u))


@dataclass(frozen=True)
class DiscreteOperator:
    """Symmetric stencil operator -Laplacian_h + diagonal on a grid.

    diagonal already contains the potential samples plus any spectral
    shift; shift records how much of it is the positivity shift so reports
    can undo it.
    """

    grid: Grid
    diagonal: np.ndarray
    shift: float = 0.0

    def matrix(self) -> sp.csr_matrix:
        n = self.grid.points_per_axis
        h2 = self.grid.spacing ** 2
        second = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)) / h2
        eye = sp.identity(n)
        if self.grid.dim == 1:
            lap = second
        elif self.grid.dim == 2:
            lap = sp.kron(second, eye) + sp.kron(eye, second)
        else:
            lap = (sp.kron(sp.kron(second, eye), eye)
                   + sp.kron(sp.kron(eye, second), eye)
                   + sp.kron(sp.kron(eye, eye), second))
        return (lap + sp.diags(self.diagonal)).tocsr()

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix() @ v

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()

    def tridiagonal(self):
        """(diagonal, off-diagonal) of the 1D matrix, or None."""
        if self.grid.dim != 1:
            return None
        h2 = self.grid.spacing ** 2
        d = 2.0 / h2 + self.diagonal
        e = np.full(self.grid.ndof - 1, -1.0 / h2)
        return d, e

    def with_diagonal_offset(self, delta: Union[float, np.ndarray]) -> "DiscreteOperator":
        return DiscreteOperator(self.grid, self.diagonal + delta, self.shift)

    def rayleigh(self, v: np.ndarray) -> float:
        return self.grid.inner(self.matvec(v), v) / self.grid.inner(v, v)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, orthonormal in the discrete L^2 product
    residual_norms: np.ndarray
    sigma_ess_marker: Optional[float]
    trusted: np.ndarray  # per eigenvalue: below the threshold margin
    clusters: tuple  # index groups with gaps below CLUSTER_GAP

    def to_json_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "residual_norms": self.residual_norms.tolist(),
            "sigma_ess_marker": self.sigma_ess_marker,
            "trusted": [bool(t) for t in self.trusted],
            "clusters": [list(c) for c in self.clusters],
        }


def _cell_averages_1d(pot: PotentialSpec, nodes: np.ndarray, h: float) -> np.ndarray:
    """Average a 1D potential over each grid cell [x - h/2, x + h/2].

    Pointwise sampling of a discontinuous well loses an order of accuracy
    (the jump lands somewhere inside a cell and the stencil sees the wrong
    mass there); averaging restores clean second-order eigenvalue
    convergence.  Both well profiles integrate in closed form.
    """
    x = nodes[:, 0]
    lo, hi = x - 0.5 * h, x + 0.5 * h
    acc = np.full(x.shape, pot.sigma0)
    for w in pot.wells:
        c = w.center[0]
        if w.shape == "square":
            overlap = np.minimum(hi, c + w.radius) - np.maximum(lo, c - w.radius)
            acc += -w.depth * np.clip(overlap, 0.0, None) / h
        else:
            s = w.radius * math.sqrt(2.0)
            mass = erf((hi - c) / s) - erf((lo - c) / s)
            acc += -w.depth * w.radius * math.sqrt(math.pi / 2.0) * mass / h
    return acc


def assemble(grid: Grid, potential, shift: float = 0.0) -> DiscreteOperator:
    """Sample the potential at the nodes and build the stencil operator.

    potential is a PotentialSpec or a callable on an (ndof, dim) node
    array; a non-finite sample aborts assembly naming the node.  1D
    PotentialSpec input is cell-averaged, everything else is sampled
    pointwise.
    """
    nodes = grid.nodes()
    if isinstance(potential, PotentialSpec):
        if grid.dim == 1:
            samples = _cell_averages_1d(potential, nodes, grid.spacing)
        else:
            samples = np.asarray(potential.evaluate(nodes), float)
    elif np.isscalar(potential):
        samples = np.full(grid.ndof, float(potential))
    else:
        samples = np.asarray(potential(nodes), float)
    if samples.shape != (grid.ndof,):
        raise AssemblyError("potential samples have shape %s, expected (%d,)"
                            % (samples.shape, grid.ndof))
    bad = np.flatnonzero(~np.isfinite(samples))
    if bad.size:
        raise AssemblyError("non-finite potential sample at node %d, x = %s"
                            % (bad[0], nodes[bad[0]]))
    return DiscreteOperator(grid, samples + shift, shift)


def dense_spectrum(op: DiscreteOperator, k: Optional[int] = None):
    """Full-spectrum oracle.  1D uses the tridiagonal solver and is cheap at
    any size used here; other dims go through a dense symmetric solve."""
    tri = op.tridiagonal()
    if tri is not None:
        w, v = sla.eigh_tridiagonal(*tri)
    else:
        w, v = np.linalg.eigh(op.dense())
    if k is not None:
        w, v = w[:k], v[:, :k]
    v = _fix_signs(v) / np.sqrt(op.grid.spacing ** op.grid.dim)
    return w, v


def _fix_signs(v: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive; the
    sign of an eigenvector is otherwise solver-dependent noise."""
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def lowest_eigenpairs(op: DiscreteOperator, k: int, tol: float = 1.0e-9,
                      sigma_ess: Optional[float] = None,
                      maxiter: Optional[int] = None) -> SpectrumReport:
    """k smallest eigenpairs by shift-inverted Lanczos, seeded just below
    the spectrum (the stencil Laplacian is positive semidefinite, so
    min(diagonal) - 1 is a safe lower bound)."""
    n = op.grid.ndof
    if k > n:
        raise ValueError("asked for %d eigenpairs on %d degrees of freedom" % (k, n))
    if k >= n - 1:
        w, v = dense_spectrum(op, k)
    else:
        lb = float(np.min(op.diagonal)) - 1.0
        try:
            # fixed start vector keeps repeated runs byte-identical
            w, v = spla.eigsh(op.matrix(), k=k, sigma=lb, which="LM",
                              tol=0, maxiter=maxiter, v0=np.ones(n))
        except (spla.ArpackNoConvergence, spla.ArpackError) as err:
            raise ConvergenceError("eigensolver failed to converge: %s" % err,
                                   residuals=getattr(err, "eigenvalues", None))
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        v = _fix_signs(v) / np.sqrt(op.grid.spacing ** op.grid.dim)

    A = op.matrix()
    residuals = np.array([op.grid.norm(A @ v[:, i] - w[i] * v[:, i]) for i in range(k)])
    if np.any(residuals > max(tol, 1e-7 * np.max(np.abs(w) + 1))):
        raise ConvergenceError("eigenpair residuals above tolerance: %s" % residuals,
                               residuals=residuals)

    marker = sigma_ess
    if marker is None:
        trusted = np.ones(k, bool)
    else:
        trusted = w < marker - _truncation_margin(op)
    return SpectrumReport(w, v, residuals, marker, trusted, _cluster(w))


def _truncation_margin(op: DiscreteOperator) -> float:
    # eigenvalues within one box-scale gap of the threshold cannot be told
    # apart from truncation artifacts of the continuum
    return (np.pi / (2.0 * op.grid.half_width)) ** 2


def _cluster(w: np.ndarray) -> tuple:
    groups = []
    start = 0
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > CLUSTER_GAP:
            groups.append(tuple(range(start, i)))
            start = i
    groups.append(tuple(range(start, len(w))))
    return tuple(groups)


def stencil_eigenvalues_1d(grid: Grid, c: float = 0.0) -> np.ndarray:
    """Closed-form spectrum of the 1D second-difference stencil plus a
    constant potential: 4/h^2 sin^2(j pi h / (4 L)), j = 1..n."""
    n, h = grid.points_per_axis, grid.spacing
    j = np.arange(1, n + 1)
    return 4.0 / h ** 2 * np.sin(j * np.pi / (2.0 * (n + 1))) ** 2 + c


def minmax_verify(op: DiscreteOperator, report: SpectrumReport, trials: int = 50,
                  tol: float = 1.0e-8, seed: int = 0) -> dict:
    """Check the two directions of the min-max characterization.

    (a) the max Rayleigh quotient over the span of the first j computed
        eigenvectors equals mu_j (the inf-max is attained there);
    (b) for random (j-1)-dimensional subspaces, some unit vector in their
        orthogonal complement has Rayleigh quotient <= mu_j + tol -- the
        candidate set contains the projected eigenvector span, which
        guarantees such a vector exists, plus random directions;
    (c) no sampled quotient dips below mu_1 - tol.
    """
    rng = np.random.default_rng(seed)
    w, V = report.eigenvalues, report.eigenvectors
    k = len(w)
    A = op.matrix()
    weight = op.grid.spacing ** op.grid.dim
    results = []
    all_ok = True
    for j in range(1, k + 1):
        Vj = V[:, :j]
        proj = weight * (Vj.T @ (A @ Vj))
        attained = float(np.max(np.linalg.eigvalsh(0.5 * (proj + proj.T))))
        ok_a = abs(attained - w[j - 1]) <= tol * max(1.0, abs(w[j - 1]))

        ok_b = True
        ok_c = True
        for _ in range(trials):
            B = rng.standard_normal((op.grid.ndof, j - 1))
            # cheapest basis of span(V_j) ∩ B-perp: null space of B^T V_j
            M = B.T @ Vj if j > 1 else np.zeros((0, j))
            _, _, vt = np.linalg.svd(M, full_matrices=True)
            c = vt[-1]
            cand = Vj @ c
            quotients = [op.rayleigh(cand)]
            for _ in range(3):
                r = rng.standard_normal(op.grid.ndof)
                if j > 1:
                    r -= B @ np.linalg.lstsq(B, r, rcond=None)[0]
                quotients.append(op.rayleigh(r))
            if min(quotients) > w[j - 1] + tol * max(1.0, abs(w[j - 1])):
                ok_b = False
            if min(quotients) < w[0] - tol * max(1.0, abs(w[0])):
                ok_c = False
        results.append({"j": j, "attained_ok": bool(ok_a), "upper_ok": bool(ok_b),
                        "lower_ok": bool(ok_c), "mu": float(w[j - 1]),
                        "attained": attained})
        all_ok = all_ok and ok_a and ok_b and ok_c
    return {"passed": all_ok, "checks": results}


def compare_spectra(op1: DiscreteOperator, op2: DiscreteOperator, k: int,
                    tol: float = 1.0e-9) -> dict:
    """Eigenvalue ordering under a pointwise-ordered potential pair.

    Requires diagonal1 <= diagonal2 with strict inequality somewhere; the
    discrete analogue of the comparison theorem expects mu_j(op1) <
    mu_j(op2) whenever the perturbation is visible, and any violation
    beyond tolerance is flagged.
    """
    if op1.grid != op2.grid:
        raise ValueError("operators must share one grid")
    d1 = op1.diagonal - op1.shift
    d2 = op2.diagonal - op2.shift
    above = np.flatnonzero(d1 > d2 + 1e-14)
    if above.size:
        raise ValueError("potential ordering violated at node %d (%g > %g)"
                         % (above[0], d1[above[0]], d2[above[0]]))
    if not np.any(d2 > d1):
        raise ValueError("potentials are identical; the comparison needs q1 != q2")

    if op1.grid.ndof <= DENSE_FALLBACK_DOF:
        w1, _ = dense_spectrum(op1, k)
        w2, _ = dense_spectrum(op2, k)
    else:
        w1 = lowest_eigenpairs(op1, k).eigenvalues
        w2 = lowest_eigenpairs(op2, k).eigenvalues

    rows = []
    ok = True
    for j in range(k):
        gap = float(w2[j] - w1[j])
        strict = gap > tol
        violated = gap < -tol
        ok = ok and not violated
        rows.append({"j": j + 1, "mu1": float(w1[j]), "mu2": float(w2[j]),
                     "gap": gap, "strict": strict, "violated": violated})
    return {"passed": ok, "rows": rows}


def morse_index(op: DiscreteOperator, tolerance: float = 1.0e-10):
    """(m, M, margin): eigenvalue counts below -tolerance and +tolerance,
    and the distance of the spectrum from zero."""
    tri = op.tridiagonal()
    if tri is not None:
        w = sla.eigvalsh_tridiagonal(*tri)
    elif op.grid.ndof <= DENSE_FALLBACK_DOF:
        w = np.linalg.eigvalsh(op.dense())
    else:
        # only the low end can be negative for these potentials
        kk = min(op.grid.ndof - 2, 60)
        w = lowest_eigenpairs(op, kk).eigenvalues
        if w[-1] < tolerance:
            raise ConvergenceError("negative eigenspace larger than %d" % kk)
    m = int(np.sum(w < -tolerance))
    M = int(np.sum(w < tolerance))
    margin = float(np.min(np.abs(w)))
    return m, M, margin
