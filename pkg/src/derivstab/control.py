"""Control bounds: a four-argument function phi and its halved dyadic series.

The series is phi_tilde(a, b, c, d) = 1/2 sum_{n>=0} 2^{-n} phi(2^n a, ...).
Every supported kind scales by at most 2^q with q < 1 when its arguments
double, so the series is dominated by a geometric series with ratio
2^{q-1} < 1. Exponents p >= 1 are rejected at construction because the
series diverges for them.

Closed forms are exact for all three kinds; `phi_tilde_series` recomputes
the value by truncated summation as an independent cross-check and reports
a certified tail bound. Norm powers use the convention 0^p := 0 for every
p < 1, so a zero argument contributes nothing to any slot.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import Element, norm

__all__ = [
    "ControlError",
    "ControlFunction",
    "Constant",
    "Power",
    "SeparablePowerSum",
    "PhiTilde",
    "phi",
    "phi_tilde",
    "phi_tilde_series",
    "hyers_bound",
    "partial_sum_bound",
    "tail_bound",
]

_SERIES_REL_TOL = 1e-12
_SERIES_MAX_TERMS = 500_000


class ControlError(ValueError):
    """A control function failed validation or series evaluation."""


def _check_nonneg(x, label: str) -> float:
    x = float(x)
    if not x >= 0.0 or x != x or x == float("inf"):
        raise ControlError(f"{label} must be finite and >= 0, got {x!r}")
    return x


def _check_exponent(p) -> float:
    p = float(p)
    if not p < 1.0:
        raise ControlError(
            f"exponent p must satisfy p < 1, got {p!r}: the halved dyadic "
            "series diverges otherwise")
    if p != p or p == float("-inf"):
        raise ControlError(f"exponent p must be finite, got {p!r}")
    return p


def _pow(base: float, p: float) -> float:
    # 0^p := 0 for every p < 1, including p <= 0.
    if base == 0.0:
        return 0.0
    return base ** p


@dataclass(frozen=True)
class ControlFunction:
    """Base for the supported control kinds; not useful directly."""

    def value_from_norms(self, norms) -> float:
        raise NotImplementedError

    def halved_term(self, norms, k: int) -> float:
        """The series term 1/2 * 2^{-k} * phi(2^k args), computed in log space."""
        raise NotImplementedError

    def series_limit(self, norms) -> float:
        raise NotImplementedError

    def series_partial(self, norms, n: int) -> float:
        raise NotImplementedError

    def series_tail(self, norms, n: int) -> float:
        raise NotImplementedError

    @property
    def growth_exponent(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(ControlFunction):
    """phi = epsilon regardless of the arguments."""

    epsilon: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", _check_nonneg(self.epsilon, "epsilon"))

    def value_from_norms(self, norms) -> float:
        return self.epsilon

    def halved_term(self, norms, k: int) -> float:
        return 0.5 * self.epsilon * 2.0 ** (-k)

    def series_limit(self, norms) -> float:
        return self.epsilon

    def series_partial(self, norms, n: int) -> float:
        return self.epsilon * (1.0 - 2.0 ** (-n))

    def series_tail(self, norms, n: int) -> float:
        return self.epsilon * 2.0 ** (-n)

    @property
    def growth_exponent(self) -> float:
        return 0.0


def _slot_limit(beta: float, p: float, value: float) -> float:
    return beta * value / (2.0 * (1.0 - 2.0 ** (p - 1.0)))


@dataclass(frozen=True)
class Power(ControlFunction):
    """phi = beta * (|a|^p + |b|^p + |c|^p + |d|^p) with p < 1."""

    beta: float
    p: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", _check_nonneg(self.beta, "beta"))
        object.__setattr__(self, "p", _check_exponent(self.p))

    def value_from_norms(self, norms) -> float:
        return self.beta * sum(_pow(n, self.p) for n in norms)

    def halved_term(self, norms, k: int) -> float:
        return 0.5 * self.value_from_norms(norms) * 2.0 ** (k * (self.p - 1.0))

    def series_limit(self, norms) -> float:
        return _slot_limit(1.0, self.p, self.value_from_norms(norms))

    def series_partial(self, norms, n: int) -> float:
        return self.series_limit(norms) * (1.0 - 2.0 ** (n * (self.p - 1.0)))

    def series_tail(self, norms, n: int) -> float:
        return self.series_limit(norms) * 2.0 ** (n * (self.p - 1.0))

    @property
    def growth_exponent(self) -> float:
        return self.p


@dataclass(frozen=True)
class SeparablePowerSum(ControlFunction):
    """phi = sum_i beta_i * |arg_i|^{p_i}, one (beta, p) pair per slot."""

    slots: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        slots = tuple((float(b), float(p)) for b, p in self.slots)
        if len(slots) != 4:
            raise ControlError(f"need exactly 4 slots, got {len(slots)}")
        slots = tuple((_check_nonneg(b, "beta"), _check_exponent(p)) for b, p in slots)
        object.__setattr__(self, "slots", slots)

    def value_from_norms(self, norms) -> float:
        return sum(b * _pow(n, p) for (b, p), n in zip(self.slots, norms))

    def halved_term(self, norms, k: int) -> float:
        return 0.5 * sum(b * _pow(n, p) * 2.0 ** (k * (p - 1.0))
                         for (b, p), n in zip(self.slots, norms))

    def series_limit(self, norms) -> float:
        return sum(_slot_limit(b, p, _pow(n, p))
                   for (b, p), n in zip(self.slots, norms))

    def series_partial(self, norms, n: int) -> float:
        return sum(_slot_limit(b, p, _pow(m, p)) * (1.0 - 2.0 ** (n * (p - 1.0)))
                   for (b, p), m in zip(self.slots, norms))

    def series_tail(self, norms, n: int) -> float:
        return sum(_slot_limit(b, p, _pow(m, p)) * 2.0 ** (n * (p - 1.0))
                   for (b, p), m in zip(self.slots, norms))

    @property
    def growth_exponent(self) -> float:
        return max(p for _, p in self.slots)


@dataclass(frozen=True)
class PhiTilde:
    """A phi_tilde value with its evaluation certificate.

    `tail_bound` bounds the omitted remainder: zero for closed forms, and
    the geometric majorant of everything past `truncation_index` for the
    truncated series.
    """

    value: float
    method: str
    truncation_index: int | None
    tail_bound: float

    def __post_init__(self) -> None:
        if not self.value >= 0.0 or not self.tail_bound >= 0.0:
            raise ControlError("phi_tilde value and tail bound must be >= 0")


def _element_norms(a: Element, b: Element, c: Element, d: Element) -> tuple[float, ...]:
    ref = a.algebra.digest
    for other in (b, c, d):
        if other.algebra.digest != ref:
            raise ControlError("control arguments belong to different algebras")
    return (norm(a), norm(b), norm(c), norm(d))


def phi(cf: ControlFunction, a: Element, b: Element, c: Element, d: Element) -> float:
    """The control bound at the given four arguments."""
    return cf.value_from_norms(_element_norms(a, b, c, d))


def phi_tilde(cf: ControlFunction, a: Element, b: Element,
              c: Element, d: Element) -> PhiTilde:
    """Exact closed-form value of the halved dyadic series."""
    value = cf.series_limit(_element_norms(a, b, c, d))
    return PhiTilde(value=value, method="closed_form", truncation_index=None,
                    tail_bound=0.0)


def phi_tilde_series(cf: ControlFunction, a: Element, b: Element,
                     c: Element, d: Element,
                     rel_tol: float = _SERIES_REL_TOL) -> PhiTilde:
    """Truncated-series evaluation with a certified tail bound.

    Stops once the geometric tail majorant drops below rel_tol of the
    partial sum. The majorant is sound because the terms past index n are
    dominated by a geometric series with ratio 2^{q-1}, q the growth
    exponent. The emitted bound adds the forward rounding envelope of the
    summation itself, so |closed form - series value| <= tail_bound holds.
    """
    norms = _element_norms(a, b, c, d)
    q = cf.growth_exponent
    tail_factor = 1.0 / (1.0 - 2.0 ** (q - 1.0))
    eps = 2.220446049250313e-16
    partial = 0.0
    for k in range(_SERIES_MAX_TERMS):
        partial += cf.halved_term(norms, k)
        tail = cf.halved_term(norms, k + 1) * tail_factor
        if tail < rel_tol * (partial + 1e-300):
            return PhiTilde(value=partial, method="series",
                            truncation_index=k,
                            tail_bound=tail + (k + 2) * eps * partial)
    raise ControlError(
        f"series did not reach relative tolerance {rel_tol} within "
        f"{_SERIES_MAX_TERMS} terms; the growth exponent is too close to 1")


def _bound_norms(a: Element) -> tuple[float, ...]:
    na = norm(a)
    return (na, na, 0.0, 0.0)


def hyers_bound(cf: ControlFunction, a: Element) -> float:
    """Deviation bound for the extrapolated map: phi_tilde at (a, a, 0, 0)."""
    return cf.series_limit(_bound_norms(a))


def partial_sum_bound(cf: ControlFunction, a: Element, n: int) -> float:
    """The first n halved series terms at (a, a, 0, 0); nondecreasing in n."""
    if not isinstance(n, int) or n < 1:
        raise ControlError(f"n must be a positive integer, got {n!r}")
    return cf.series_partial(_bound_norms(a), n)


def tail_bound(cf: ControlFunction, a: Element, n: int) -> float:
    """Bound on the series remainder past the first n terms at (a, a, 0, 0).

    This also bounds the distance from the n-th extrapolation term to its
    limit for any map pair that satisfies the master inequality for `cf`.
    """
    if not isinstance(n, int) or n < 0:
        raise ControlError(f"n must be a nonnegative integer, got {n!r}")
    return cf.series_tail(_bound_norms(a), n)
