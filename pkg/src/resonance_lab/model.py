"""Potentials, nonlinearities, and the hypothesis battery.

The potential decomposes into an L^p part plus a bounded part tending to
the essential-spectrum threshold sigma0 at infinity.  The nonlinearity g
is autonomous, vanishes at 0, is globally Lipschitz, and has slope limits
g0 at the origin and 0 at infinity; whether a given spec actually satisfies
the battery of structural hypotheses (sign, strict convexity-type
inequality, Lipschitz bound, sub-quadratic primitive, monotone derivative)
is checked numerically on a declared sampling grid, never assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

# Finite stand-ins for the limit checks: "infinity" is |t| >= BIG,
# "zero" is |t| <= SMALL, ratios must settle within RATIO_TOL.
BIG_T = 1.0e3
SMALL_T = 1.0e-3
RATIO_TOL = 1.0e-2
# strict pointwise inequalities exclude a band around the origin
ZERO_BAND = 1.0e-9


@dataclass(frozen=True)
class Well:
    """One potential well: square or gaussian profile of given depth."""

    shape: str  # "square" or "gaussian"
    depth: float
    radius: float
    center: tuple

    def __post_init__(self):
        if self.shape not in ("square", "gaussian"):
            raise ValueError("unknown well shape %r" % (self.shape,))
        if self.depth <= 0 or self.radius <= 0:
            raise ValueError("well depth and radius must be positive")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Depression below the background; x has shape (..., dim)."""
        d2 = np.sum((np.asarray(x, float) - np.asarray(self.center, float)) ** 2, axis=-1)
        if self.shape == "square":
            return np.where(d2 <= self.radius ** 2, -self.depth, 0.0)
        return -self.depth * np.exp(-d2 / (2.0 * self.radius ** 2))


@dataclass(frozen=True)
class PotentialSpec:
    """V = sigma0 + sum of wells, split as an L^p part plus a bounded part.

    The wells carry the entire deviation from sigma0, so here v1 (the L^p
    component) is the well sum and v2 is the constant background; both are
    exposed separately so operator assembly and the decay checks can treat
    them differently.
    """

    sigma0: float
    wells: tuple = ()
    p: Optional[float] = None  # declared integrability of v1; None when no wells

    def v1(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        if not self.wells:
            return np.zeros(x.shape[:-1])
        return sum(w.evaluate(x) for w in self.wells)

    def v2(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        return np.full(x.shape[:-1], self.sigma0)

    @property
    def v2_sup_bound(self) -> float:
        return abs(self.sigma0)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Total potential at points x of shape (..., dim)."""
        return self.v1(x) + self.v2(x)

    def check_decay(self, dim: int, ray_length: float = 50.0,
                    tolerance: float = 1.0e-6, samples: int = 64) -> bool:
        """V -> sigma0 along the +/- coordinate rays, within tolerance."""
        for axis in range(dim):
            for sign in (+1.0, -1.0):
                x = np.zeros((samples, dim))
                x[:, axis] = sign * np.linspace(0.8 * ray_length, ray_length, samples)
                if np.max(np.abs(self.evaluate(x) - self.sigma0)) > tolerance:
                    return False
        return True

    def check_v2_bound(self, dim: int, box: float = 50.0, samples: int = 1000,
                       seed: int = 0) -> bool:
        rng = np.random.default_rng(seed)
        x = rng.uniform(-box, box, size=(samples, dim))
        return bool(np.max(np.abs(self.v2(x))) <= self.v2_sup_bound + 1e-12)


@dataclass(frozen=True)
class HypothesisCheck:
    passed: Optional[bool]  # None = not checkable with the supplied evaluators
    witness: Optional[float] = None
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: dict  # name -> HypothesisCheck, names "g1".."g8"

    def failed(self) -> list:
        return sorted(n for n, c in self.checks.items() if c.passed is False)

    def passed(self) -> list:
        return sorted(n for n, c in self.checks.items() if c.passed is True)

    def to_json_dict(self) -> dict:
        return {
            name: {"passed": c.passed, "witness": c.witness, "detail": c.detail}
            for name, c in sorted(self.checks.items())
        }


@dataclass(frozen=True)
class NonlinearitySpec:
    """Evaluators for g, its derivative, and its primitive, plus declared
    slope data.  gprime and G may be omitted when the underlying function
    is only continuous; checks needing them are then skipped."""

    g: Callable[[np.ndarray], np.ndarray]
    g0: float
    beta: float
    gprime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    G: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("the Lipschitz bound must be >= 0")


def zero_nonlinearity() -> NonlinearitySpec:
    z = lambda t: np.zeros_like(np.asarray(t, float))
    return NonlinearitySpec(g=z, g0=0.0, beta=0.0, gprime=z, G=z, label="zero")


def build_example51(alpha: float) -> NonlinearitySpec:
    """Odd logarithmic nonlinearity g(t) = -alpha * sign(t) * log(1 + |t|).

    Slope at the origin is -alpha, slope at infinity is 0, the derivative
    -alpha/(1+|t|) is negative and everywhere above the chord slope, and
    alpha itself is a global Lipschitz constant.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive, got %g" % (alpha,))

    def g(t):
        t = np.asarray(t, float)
        return -alpha * np.sign(t) * np.log1p(np.abs(t))

    def gprime(t):
        t = np.asarray(t, float)
        return -alpha / (1.0 + np.abs(t))

    def G(t):
        s = np.abs(np.asarray(t, float))
        return -alpha * ((1.0 + s) * np.log1p(s) - s)

    return NonlinearitySpec(g=g, g0=-alpha, beta=alpha, gprime=gprime, G=G,
                            label="example51(alpha=%g)" % alpha)


def standard_grid(t_max: float = 1.0e4, n: int = 10_000) -> np.ndarray:
    """Symmetric log-spaced sampling grid reaching well past the limit
    thresholds on both sides of the origin."""
    pos = np.logspace(-6, math.log10(t_max), n // 2)
    return np.concatenate([-pos[::-1], pos])


def check_hypotheses(spec: NonlinearitySpec,
                     grid: Optional[np.ndarray] = None) -> HypothesisReport:
    """Run the structural battery on a sampling grid.

    Limit hypotheses (decay of g(t)/t at infinity, slope g0 at the origin,
    sub-quadratic primitive) are probed at |t| >= 1e3 and |t| <= 1e-3 with
    ratio tolerance 1e-2; pointwise hypotheses are checked at every grid
    point outside a 1e-9 band around zero.  Failures are reported with the
    worst witness, never raised.  The spectral-gap condition g6 involves
    eigenvalues and is handled by check_slope_gap, so it is reported as
    unchecked here.
    """
    if grid is None:
        grid = standard_grid()
    grid = np.asarray(grid, float)
    if not (np.any(np.abs(grid) >= BIG_T) and np.any((np.abs(grid) <= SMALL_T) & (grid != 0))):
        raise ValueError("grid must reach |t| >= %g and |t| <= %g" % (BIG_T, SMALL_T))

    t = grid[np.abs(grid) > ZERO_BAND]
    gt = np.asarray(spec.g(t), float)
    ratio = gt / t
    checks = {}

    far = np.abs(t) >= BIG_T
    checks["g1"] = _worst(t[far], np.abs(ratio[far]), RATIO_TOL,
                          "slope at infinity |g(t)/t|")

    near = np.abs(t) <= SMALL_T
    checks["g2"] = _worst(t[near], np.abs(ratio[near] - spec.g0), RATIO_TOL,
                          "slope at origin |g(t)/t - g0|")

    checks["g3"] = _worst(t, ratio, 0.0, "sign condition g(t)/t")

    if spec.gprime is None:
        checks["g4"] = HypothesisCheck(None, detail="no derivative evaluator supplied")
        checks["g8"] = HypothesisCheck(None, detail="no derivative evaluator supplied")
    else:
        gp = np.asarray(spec.gprime(t), float)
        checks["g4"] = _worst(t, ratio - gp, 0.0, "chord gap g(t)/t - g'(t)",
                              strict=True)
        checks["g8"] = _worst(t, gp, 0.0, "derivative sign g'(t)")

    s1, s2 = t[:-1], t[1:]
    lip = np.abs(np.asarray(spec.g(s1), float) - np.asarray(spec.g(s2), float)) \
        - spec.beta * np.abs(s1 - s2)
    checks["g5"] = _worst(s1, lip, 1e-12 * max(1.0, spec.beta),
                          "Lipschitz excess |g(s1)-g(s2)| - beta|s1-s2|")

    checks["g6"] = HypothesisCheck(None, detail="needs spectral data; see check_slope_gap")

    if spec.G is None:
        checks["g7"] = HypothesisCheck(None, detail="no primitive evaluator supplied")
    else:
        Gt = np.asarray(spec.G(t[far]), float)
        checks["g7"] = _worst(t[far], np.abs(Gt / t[far] ** 2), RATIO_TOL,
                              "primitive ratio |G(t)/t^2|")

    return HypothesisReport(checks)


def _worst(t, excess, tol, what, strict=False):
    """Pass iff excess <= tol everywhere (excess < tol on strict checks)."""
    if len(t) == 0:
        return HypothesisCheck(None, detail="no sample points in range")
    i = int(np.argmax(excess))
    bad = excess[i] >= tol if strict else excess[i] > tol
    if bad:
        return HypothesisCheck(False, witness=float(t[i]),
                               detail="%s = %.6g at t = %.6g" % (what, excess[i], t[i]))
    return HypothesisCheck(True, witness=float(t[i]),
                           detail="worst %s = %.6g" % (what, excess[i]))


def check_slope_gap(lam: float, g0: float, mus: Sequence[float], k: int) -> dict:
    """Placement of lam + g0 against the discrete eigenvalues mu_1..mu_k.

    The existence theory wants lam + g0 <= mu_i; whether 'some i <= k' or
    'all i <= k' is intended is ambiguous, so both readings are reported.
    """
    mus = list(mus[:k])
    level = lam + g0
    return {
        "level": level,
        "some_reading": any(level <= mu for mu in mus),
        "all_reading": all(level <= mu for mu in mus),
        "strict_below_all": all(level < mu for mu in mus),
    }


def check_primitive_consistency(spec: NonlinearitySpec, t_values: Sequence[float],
                                tol: float = 1.0e-8) -> bool:
    """|G(t) - integral of g from 0 to t| <= tol at each t, by quadrature."""
    from scipy.integrate import quad

    if spec.G is None:
        raise ValueError("spec has no primitive evaluator")
    for t in t_values:
        val, err = quad(lambda s: float(spec.g(s)), 0.0, t, limit=200)
        if abs(float(spec.G(t)) - val) > tol + 10 * err:
            return False
    return True


@dataclass(frozen=True)
class FucikForm:
    """Piecewise-linear principal part plus a Lipschitz remainder:
    f(s) = a min(s,0) + b max(s,0) + r(s), r(0) = 0."""

    a: float
    b: float
    r: Callable[[np.ndarray], np.ndarray] = field(default=lambda s: np.zeros_like(np.asarray(s, float)))
    beta_r: float = 0.0

    def __call__(self, s):
        return fucik_f(self, s)

    def growth_bound(self, s) -> np.ndarray:
        s = np.asarray(s, float)
        return (max(abs(self.a), abs(self.b)) + self.beta_r) * (1.0 + np.abs(s))


def fucik_f(form: FucikForm, s) -> np.ndarray:
    s = np.asarray(s, float)
    return form.a * np.minimum(s, 0.0) + form.b * np.maximum(s, 0.0) \
        + np.asarray(form.r(s), float)


def brezis_lieb_pointwise_gap(r: Callable[[float], float], beta: float,
                              a: float, b: float) -> float:
    """h(a) - h(a-b) - h(b) for h(s) = r(s) s.

    For any beta-Lipschitz r with r(0) = 0 the gap is bounded by
    2 beta |a-b| |b| in absolute value; callers assert that bound, this
    function just evaluates the telescoped difference.
    """
    def h(s):
        return float(r(s)) * s

    return h(a) - h(a - b) - h(b)
