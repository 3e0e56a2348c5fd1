"""Exact bootstrap-exponent scheduling.

Given the dimension N and the integrability exponent p of the unbounded
potential component, elliptic regularity is gained by repeatedly feeding an
L^q bound on a solution through the equation and a Sobolev embedding.  The
exponent sequence, the number of steps until q crosses N/2, the terminal
regularity class, and the symbolic chain of embedding constants are all
determined by (N, p) alone.  Everything in this module is exact rational
arithmetic: the case splits hinge on equalities like q = N/2, which floats
cannot witness.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

RationalLike = Union[int, Fraction]


class LadderError(Exception):
    """Base class for scheduling errors."""


class LadderOverflowError(LadderError):
    """A recurrence denominator became non-positive: the case precondition
    on (q, p, N) was violated."""


class AdmissibilityError(LadderError):
    """(N, p) falls outside the admissible potential class."""


class UnboundConstantError(LadderError):
    """A symbolic factor has no numeric binding."""


class LadderCase(Enum):
    """Which iteration scheme applies.

    ZERO_V1:           the unbounded component vanishes; p plays no role.
    INTEGRABLE_HIGH_P: p > N >= 4.
    INTEGRABLE_MID_P:  N/2 < p <= N, N >= 4.
    LOW_DIM:           N <= 3 (p = 2); no iteration is needed.
    """

    ZERO_V1 = "ZeroV1"
    INTEGRABLE_HIGH_P = "IntegrableHighP"
    INTEGRABLE_MID_P = "IntegrableMidP"
    LOW_DIM = "LowDim"


class RegularityClass(Enum):
    CB1 = "CB1"      # bounded C^1 function with bounded gradient
    CB0 = "CB0"      # bounded continuous function
    LQ_ALL = "LqAll"  # L^q for every q in [2, oo); no pointwise claim


@dataclass(frozen=True)
class ConstantFactor:
    """One symbolic embedding/estimate constant.

    kind is one of {"gamma", "rho", "rho_tilde", "theta", "theta_star",
    "beta", "C", "C0", "C_tilde", "L", "K"}; args are the exponent and
    dimension arguments; value is an optional user-supplied positive real.
    """

    kind: str
    args: tuple
    value: Optional[float] = None

    def key(self) -> str:
        return "%s(%s)" % (self.kind, ",".join(str(a) for a in self.args))


@dataclass(frozen=True)
class ConstantChain:
    factors: tuple

    def __len__(self) -> int:
        return len(self.factors)

    def kinds(self) -> dict:
        out: dict = {}
        for f in self.factors:
            out[f.kind] = out.get(f.kind, 0) + 1
        return out


@dataclass(frozen=True)
class ExponentLadder:
    """The full bootstrap schedule for one (N, p, case).

    exponents runs q_0 = 2, ..., q_{j0+1}; j0 is None when q_0 >= N/2
    already (the trivial marker).  tail_exponent is the extra exponent
    used when the crossing lands on N/2 exactly.
    """

    N: int
    p: Optional[Fraction]  # None is the V1 = 0 sentinel, not a number
    case: LadderCase
    exponents: tuple
    j0: Optional[int]
    tail_exponent: Optional[Fraction]
    terminal: RegularityClass
    chain: ConstantChain

    def to_json_dict(self) -> dict:
        def frac(q):
            return [q.numerator, q.denominator]

        return {
            "case": self.case.value,
            "exponents": [frac(q) for q in self.exponents],
            "j0": "trivial" if self.j0 is None else self.j0,
            "tail": None if self.tail_exponent is None else frac(self.tail_exponent),
            "terminal": self.terminal.value,
            "chain": [
                {"kind": f.kind, "args": [str(a) for a in f.args], "value": f.value}
                for f in self.chain.factors
            ],
        }


def _as_fraction(x: RationalLike, name: str) -> Fraction:
    if isinstance(x, bool) or not isinstance(x, (int, Fraction)):
        raise TypeError("%s must be an int or Fraction, got %r" % (name, x))
    return Fraction(x)


def classify_case(N: int, p: Optional[RationalLike], v1_vanishes: bool) -> LadderCase:
    """Select the iteration scheme; exactly one case matches any admissible input."""
    check_admissible(N, p, v1_vanishes)
    if v1_vanishes:
        return LadderCase.ZERO_V1
    if N <= 3:
        return LadderCase.LOW_DIM
    p = _as_fraction(p, "p")
    if p > N:
        return LadderCase.INTEGRABLE_HIGH_P
    return LadderCase.INTEGRABLE_MID_P


def check_admissible(N: int, p: Optional[RationalLike], v1_vanishes: bool) -> None:
    """Admissibility of the potential class: p = 2 if N <= 3, p > 2 if N = 4,
    p > N/2 if N >= 5.  With a vanishing unbounded part only N >= 1 is needed."""
    if not isinstance(N, int) or N < 1:
        raise AdmissibilityError("dimension N must be a positive integer, got %r" % (N,))
    if v1_vanishes:
        if p is not None:
            raise AdmissibilityError("p must be the vanishing sentinel (None) when the L^p part is zero")
        return
    if p is None:
        raise AdmissibilityError("p is required when the L^p part does not vanish")
    p = _as_fraction(p, "p")
    if N <= 3:
        if p != 2:
            raise AdmissibilityError("N = %d requires p = 2, got p = %s" % (N, p))
    elif N == 4:
        if not p > 2:
            raise AdmissibilityError("N = 4 requires p > 2, got p = %s" % (p,))
    else:
        if not p > Fraction(N, 2):
            raise AdmissibilityError("N = %d requires p > N/2 = %s, got p = %s" % (N, Fraction(N, 2), p))


def next_exponent(q: RationalLike, p: Optional[RationalLike], N: int,
                  case: LadderCase) -> Fraction:
    """Exact rational successor of q under the case's recurrence.

    ZERO_V1:           q N / (N - 2q),          needs q < N/2
    INTEGRABLE_HIGH_P: q p N / ((N - q)p + qN), needs q < N
    INTEGRABLE_MID_P:  q p N / ((N - 2q)p + qN), needs q <= N/2

    The successor is strictly larger than q whenever the case's condition
    on p holds; a non-positive denominator raises LadderOverflowError.
    """
    q = _as_fraction(q, "q")
    c, d = q.numerator, q.denominator
    if c < 2 * d:
        raise ValueError("exponents start at 2, got q = %s" % (q,))
    # all three recurrences reduce to a single integer fraction; building
    # one Fraction instead of chaining *, / keeps long sweeps cheap
    if case is LadderCase.ZERO_V1:
        den = d * N - 2 * c
        if den <= 0:
            raise LadderOverflowError("q = %s >= N/2: iteration already terminated" % (q,))
        return Fraction(c * N, den)
    if case is LadderCase.LOW_DIM:
        raise ValueError("no recurrence in the low-dimension case")
    p = _as_fraction(p, "p")
    a, b = p.numerator, p.denominator
    if case is LadderCase.INTEGRABLE_HIGH_P:
        if c >= d * N:
            raise LadderOverflowError("q = %s >= N: outside the recurrence domain" % (q,))
        den = (d * N - c) * a + c * N * b
    else:
        if 2 * c > d * N:
            raise LadderOverflowError("q = %s > N/2: iteration already terminated" % (q,))
        den = (d * N - 2 * c) * a + c * N * b
    if den <= 0:
        raise LadderOverflowError("non-positive denominator at q = %s" % (q,))
    return Fraction(c * a * N, den)


def closed_form_exponent(i: int, N: int, p: Optional[RationalLike],
                         case: LadderCase) -> Fraction:
    """q_i without iterating.

    ZERO_V1:           q_i = 2N / (N - 4i)
    INTEGRABLE_HIGH_P: q_i = 2pN / ((N - 2i)p + 2iN)
    INTEGRABLE_MID_P:  q_i = 2pN / ((N - 4i)p + 2iN)
    """
    if case is LadderCase.ZERO_V1:
        den = N - 4 * i
        if den <= 0:
            raise LadderOverflowError("closed form undefined at i = %d for N = %d" % (i, N))
        return Fraction(2 * N, den)
    p = _as_fraction(p, "p")
    a, b = p.numerator, p.denominator
    if case is LadderCase.INTEGRABLE_HIGH_P:
        den = (N - 2 * i) * a + 2 * i * N * b
    elif case is LadderCase.INTEGRABLE_MID_P:
        den = (N - 4 * i) * a + 2 * i * N * b
    else:
        raise ValueError("no closed form in the low-dimension case")
    if den <= 0:
        raise LadderOverflowError("closed form undefined at i = %d" % (i,))
    return Fraction(2 * a * N, den)


def crossing_ratio(N: int, p: Optional[RationalLike], case: LadderCase) -> Fraction:
    """The critical ratio R with q_j < N/2 iff j < R.

    ZERO_V1:           R = N/4 - 1
    INTEGRABLE_HIGH_P: R = (N-4)p / (2(p-N))
    INTEGRABLE_MID_P:  R = (N-4)p / (4p-2N)
    """
    if case is LadderCase.ZERO_V1:
        return Fraction(N, 4) - 1
    p = _as_fraction(p, "p")
    if case is LadderCase.INTEGRABLE_HIGH_P:
        return (N - 4) * p / (2 * (p - N))
    if case is LadderCase.INTEGRABLE_MID_P:
        return (N - 4) * p / (4 * p - 2 * N)
    raise ValueError("no crossing ratio in the low-dimension case")


def compute_j0(N: int, p: Optional[RationalLike], case: LadderCase) -> Optional[int]:
    """Unique j0 with q_{j0} < N/2 <= q_{j0+1}, or None when q_0 = 2 >= N/2
    already (N = 4 in the iterated cases).

    Computed twice -- by the floor rule on the crossing ratio (j0 = l for a
    ratio in (l, l+1), j0 = l - 1 on exact integers) and by iterating the
    recurrence -- and the two must agree.
    """
    if case is LadderCase.LOW_DIM:
        raise ValueError("no step count in the low-dimension case")
    if case is not LadderCase.ZERO_V1 and N <= 3:
        raise AdmissibilityError("the iterated L^p cases require N >= 4, got N = %d" % (N,))

    ratio = crossing_ratio(N, p, case)
    if ratio <= 0:
        by_rule = None  # 2 >= N/2 already
    elif ratio.denominator == 1:
        by_rule = int(ratio) - 1
    else:
        by_rule = int(ratio)  # floor, ratio > 0 here

    by_iteration = _j0_by_iteration(N, p, case)
    if by_rule != by_iteration:
        raise LadderError(
            "internal inconsistency: floor rule gives %r, iteration gives %r for N=%d p=%s"
            % (by_rule, by_iteration, N, p))
    return by_rule


def _j0_by_iteration(N: int, p: Optional[RationalLike], case: LadderCase) -> Optional[int]:
    half = Fraction(N, 2)
    q = Fraction(2)
    if q >= half:
        return None
    i = 0
    while True:
        q = next_exponent(q, p, N, case)
        i += 1
        if q >= half:
            return i - 1


def plan_ladder(N: int, p: Optional[RationalLike] = None,
                v1_vanishes: bool = False) -> ExponentLadder:
    """Full schedule: case, exponent sequence through the crossing, optional
    tail exponent when the crossing lands on N/2 exactly, terminal
    regularity class, and the symbolic constant chain.  Deterministic."""
    case = classify_case(N, p, v1_vanishes)
    p_frac = None if p is None else _as_fraction(p, "p")

    if case is LadderCase.LOW_DIM:
        terminal = {1: RegularityClass.CB1, 2: RegularityClass.LQ_ALL,
                    3: RegularityClass.CB0}[N]
        chain = _chain_low_dim(N)
        return ExponentLadder(N, p_frac, case, (Fraction(2),), None, None, terminal, chain)

    if case is LadderCase.ZERO_V1 and N <= 3:
        # W^{2,2} embeds into bounded C^1 directly; no iteration.
        chain = ConstantChain((ConstantFactor("C0", (2, Fraction(2), N)),))
        return ExponentLadder(N, None, case, (Fraction(2),), None, None,
                              RegularityClass.CB1, chain)

    # the floor rule gives j0 in closed form; the iteration below both
    # builds the exponent list and re-derives the crossing index, and the
    # two routes must agree (same cross-check compute_j0 performs, shared
    # with the single pass that produces the sequence)
    if case is not LadderCase.ZERO_V1 and N <= 3:
        raise AdmissibilityError("the iterated L^p cases require N >= 4, got N = %d" % (N,))
    ratio = crossing_ratio(N, p_frac, case)
    if ratio <= 0:
        j0 = None
    elif ratio.denominator == 1:
        j0 = int(ratio) - 1
    else:
        j0 = int(ratio)
    half = Fraction(N, 2)

    exponents = [Fraction(2)]
    if j0 is not None:
        for i in range(j0 + 1):
            q = next_exponent(exponents[-1], p_frac, N, case)
            if (q >= half) != (i == j0):
                raise LadderError(
                    "internal inconsistency: floor rule gives %r but the "
                    "recurrence crosses N/2 at a different index for N=%d p=%s"
                    % (j0, N, p_frac))
            exponents.append(q)
    elif 2 < half:
        raise LadderError(
            "internal inconsistency: floor rule says no steps for N=%d p=%s "
            "but q_0 = 2 < N/2" % (N, p_frac))
    last = exponents[-1]

    tail = None
    if last == half:
        if case is LadderCase.ZERO_V1:
            # admissible interval (q_last, +oo); take the midpoint of
            # (q_last, 2 q_last) as the deterministic choice
            tail = last * 3 / 2
        else:
            tail = (last + p_frac) / 2  # midpoint of (q_last, p)

    if case is LadderCase.ZERO_V1 or case is LadderCase.INTEGRABLE_HIGH_P:
        terminal = RegularityClass.CB1
    else:
        terminal = RegularityClass.CB0

    chain = _build_chain(N, p_frac, case, exponents, j0, tail)
    return ExponentLadder(N, p_frac, case, tuple(exponents), j0, tail, terminal, chain)


def _chain_low_dim(N: int) -> ConstantChain:
    if N == 2:
        # W^{2,2} lands in every L^q, q >= 2; no sup-norm factor exists
        return ConstantChain((ConstantFactor("C_tilde", (2, Fraction(2), N)),))
    return ConstantChain((ConstantFactor("C0", (2, Fraction(2), N)),))


def _build_chain(N, p, case, exponents, j0, tail) -> ConstantChain:
    """One factor per inequality applied along the iteration.

    Vanishing-V1 case: j0+1 critical-embedding C factors, a C_tilde step
    when a tail exponent is needed, j0+2 gamma factors, one terminal C0.
    L^p cases: one rho (or theta) factor per step, a rho_tilde/theta_star
    tail step when needed, one terminal C0; the high-p case appends the
    beta and L factors of its gradient-bound upgrade.
    """
    steps = -1 if j0 is None else j0  # index of the last sub-critical exponent
    last = tail if tail is not None else exponents[-1]
    factors = []

    if case is LadderCase.ZERO_V1:
        for i in range(steps + 1):
            factors.append(ConstantFactor("C", (2, exponents[i], N)))
        if tail is not None:
            factors.append(ConstantFactor("C_tilde", (2, exponents[-1], tail, N)))
        for i in range(steps + 2):
            factors.append(ConstantFactor("gamma", (exponents[i], N)))
        factors.append(ConstantFactor("C0", (2, last, N)))
        return ConstantChain(tuple(factors))

    step_kind = "rho" if case is LadderCase.INTEGRABLE_HIGH_P else "theta"
    tail_kind = "rho_tilde" if case is LadderCase.INTEGRABLE_HIGH_P else "theta_star"
    for i in range(steps + 1):
        factors.append(ConstantFactor(step_kind, (exponents[i], exponents[i + 1], N)))
    if tail is not None:
        factors.append(ConstantFactor(tail_kind, (exponents[-1], tail, N)))
    factors.append(ConstantFactor("C0", (2, last, N)))
    if case is LadderCase.INTEGRABLE_HIGH_P:
        # gradient-bound upgrade to bounded C^1
        factors.append(ConstantFactor("beta", (p, N)))
        factors.append(ConstantFactor("L", (Fraction(2 * N, N - 2), N)))
    return ConstantChain(tuple(factors))


def evaluate_chain(chain: ConstantChain, bindings: Optional[dict] = None) -> float:
    """Product of all bound factors.

    bindings maps factor keys (as from ConstantFactor.key()) to positive
    reals; a factor's stored numeric value is used when no binding is
    given.  Missing values raise UnboundConstantError listing every
    unbound factor.
    """
    bindings = bindings or {}
    missing = []
    product = 1.0
    for f in chain.factors:
        value = bindings.get(f.key(), f.value)
        if value is None:
            missing.append(f.key())
            continue
        if value <= 0:
            raise ValueError("constant %s must be positive, got %g" % (f.key(), value))
        product *= value
    if missing:
        raise UnboundConstantError("unbound constants: " + ", ".join(missing))
    return product
