"""Dyadic extrapolation of approximate maps into exact linear maps.

The sequence s_n = f(2^n a) / 2^n is evaluated in mantissa form and its
final term is reported as the limit together with a certified gap:

* the control-function tail bound, valid for any pair satisfying the
  master inequality with that control, and
* twice the perturbation-model envelope at the deepest level, valid for
  any pair produced by this package's perturbation models.

The reported gap is the larger of the two, so it is safe under either
reading. It bounds the remaining drift of the mantissa sequence; the
final float rounding of the exact part (machine epsilon relative to the
limit's norm) is outside the certificate.

Assembly runs traces on every basis element e_j and on i e_j, combines
them C-linearly into matrix columns, and reports how far the i e_j run is
from i times the e_j run; additive maps are only C-linear when that
residual vanishes, so assembly refuses to proceed when it is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import Element, ModuleElement, vector_norm
from .control import ControlFunction, tail_bound
from .maps import (
    MAX_LOG2_SCALE,
    ApproximateMapPair,
    LinearMap,
    _noise_mantissa,
    noise_envelope,
)

__all__ = [
    "HyersError",
    "J_COMMUTATION_TOL",
    "ExtrapolationTrace",
    "AssembledMap",
    "ScalarDecomposition",
    "default_depth",
    "extrapolate_mu",
    "extract_delta_limit",
    "assemble_mu",
    "extract_delta_algebraic",
    "identity_check_thresholds",
    "scalar_decompose",
]

J_COMMUTATION_TOL = 1e-8

# Depth at which a geometric tail with ratio 2^(q-1) drops below 1e-12
# relative scale: N (1-q) >= 12 log2(10).
_TAIL_DIGITS = 12.0 * math.log2(10.0)
_MIN_DEPTH = 48


class HyersError(ValueError):
    """Extrapolation or assembly failed validation."""


def default_depth(control: ControlFunction) -> int:
    """A depth making the control tail negligible at working precision."""
    q = control.growth_exponent
    needed = math.ceil(_TAIL_DIGITS / (1.0 - q))
    return max(_MIN_DEPTH, min(MAX_LOG2_SCALE, needed))


def _check_depth(depth) -> int:
    if not isinstance(depth, int) or not 1 <= depth <= MAX_LOG2_SCALE:
        raise HyersError(f"depth must be an integer in 1..{MAX_LOG2_SCALE}, got {depth!r}")
    return depth


@dataclass(frozen=True, eq=False)
class ExtrapolationTrace:
    """The mantissa sequence s_n for n = 0..depth with a certified gap.

    `terms[n]` holds the coordinates of s_n, `increments[n]` the module
    norm of s_{n+1} - s_n, `limit` the deepest term, and `certified_gap`
    a bound on the distance from `limit` to the extrapolated exact value.
    """

    map_kind: str
    argument: Element
    depth: int
    terms: np.ndarray
    increments: np.ndarray
    limit: ModuleElement
    certified_gap: float


def _run_trace(pair: ApproximateMapPair, arg: Element, depth: int,
               exact_map: LinearMap, spec) -> tuple[np.ndarray, np.ndarray]:
    # Matches evaluate_f/evaluate_g bit for bit: the exact part does not
    # depend on n, so it is computed once.
    target = pair.target
    base = exact_map.matrix @ arg.coords
    terms = np.empty((depth + 1, target.dim), dtype=np.complex128)
    for n in range(depth + 1):
        terms[n] = base + _noise_mantissa(spec, arg, n, target, None)
    increments = np.array([vector_norm(target, terms[n + 1] - terms[n])
                           for n in range(depth)])
    terms.flags.writeable = False
    increments.flags.writeable = False
    return terms, increments


def extrapolate_mu(pair: ApproximateMapPair, a: Element, depth: int,
                   control: ControlFunction) -> ExtrapolationTrace:
    """Trace f(2^n a)/2^n up to `depth` and certify the final term."""
    _check_depth(depth)
    if a.algebra.digest != pair.source.digest:
        raise HyersError("argument belongs to a different algebra")
    terms, increments = _run_trace(pair, a, depth, pair.exact.mu,
                                   pair.f_perturbation)
    gap = max(tail_bound(control, a, depth),
              2.0 * noise_envelope(pair.f_perturbation, a, depth))
    return ExtrapolationTrace(map_kind="mu", argument=a, depth=depth,
                              terms=terms, increments=increments,
                              limit=ModuleElement(pair.target, terms[depth]),
                              certified_gap=gap)


def extract_delta_limit(pair: ApproximateMapPair, c: Element, depth: int,
                        control: ControlFunction) -> ExtrapolationTrace:
    """Trace g(2^n c)/2^n up to `depth`; the gap is model-based only.

    The master inequality alone does not pin g along the dyadic ladder, so
    no control-function tail applies; the certificate is twice the
    g-perturbation envelope at the deepest level.
    """
    _check_depth(depth)
    if c.algebra.digest != pair.source.digest:
        raise HyersError("argument belongs to a different algebra")
    terms, increments = _run_trace(pair, c, depth, pair.exact.delta,
                                   pair.g_perturbation)
    gap = 2.0 * noise_envelope(pair.g_perturbation, c, depth)
    return ExtrapolationTrace(map_kind="delta", argument=c, depth=depth,
                              terms=terms, increments=increments,
                              limit=ModuleElement(pair.target, terms[depth]),
                              certified_gap=gap)


@dataclass(frozen=True, eq=False)
class AssembledMap:
    """A linear map assembled from per-basis traces with per-column gaps.

    `column_gaps[j]` bounds the distance from column j to the exact value
    on e_j; `error_bound(a)` propagates that through coordinates.
    `j_commutation_residual` is the largest deviation between the i e_j
    trace and i times the e_j trace.
    """

    linear_map: LinearMap
    column_gaps: np.ndarray
    j_commutation_residual: float
    depth: int

    def apply(self, a: Element) -> ModuleElement:
        return self.linear_map.apply(a)

    def error_bound(self, a: Element) -> float:
        if a.algebra.digest != self.linear_map.source.digest:
            raise HyersError("element belongs to a different algebra")
        return float(np.abs(a.coords) @ self.column_gaps)


def assemble_mu(pair: ApproximateMapPair, depth: int,
                control: ControlFunction) -> AssembledMap:
    """Assemble the extrapolated mu into a matrix, certifying each column.

    Each basis element is traced twice, on e_j and on i e_j, and the
    column is the C-linear combination (t_j - i t'_j) / 2. Raises when the
    two runs disagree with C-linearity beyond J_COMMUTATION_TOL.
    """
    _check_depth(depth)
    source = pair.source
    target = pair.target
    matrix = np.empty((target.dim, source.dim), dtype=np.complex128)
    gaps = np.empty(source.dim)
    j_res = 0.0
    for j in range(source.dim):
        e_j = source.basis_element(j)
        ie_j = Element(source, 1j * e_j.coords)
        tr = extrapolate_mu(pair, e_j, depth, control)
        tr_i = extrapolate_mu(pair, ie_j, depth, control)
        t = tr.limit.coords
        t_i = tr_i.limit.coords
        matrix[:, j] = (t - 1j * t_i) / 2.0
        gaps[j] = (tr.certified_gap + tr_i.certified_gap) / 2.0
        j_res = max(j_res, vector_norm(target, t_i - 1j * t))
    if j_res > J_COMMUTATION_TOL:
        raise HyersError(f"traces on i e_j deviate from i times traces on e_j "
                         f"by {j_res:.3e} > {J_COMMUTATION_TOL:.1e}; "
                         f"the limit map is not C-linear at this depth")
    gaps.flags.writeable = False
    return AssembledMap(linear_map=LinearMap(source, target, matrix),
                        column_gaps=gaps, j_commutation_residual=j_res,
                        depth=depth)


def _left_action_column_bounds(assembled: AssembledMap) -> np.ndarray:
    """Bounds C_j with ||e_j . v|| <= C_j ||v|| for every module v."""
    source = assembled.linear_map.source
    target = assembled.linear_map.target
    if target.self_linked:
        return np.array([vector_norm(source, source.basis_element(j).coords)
                         for j in range(source.dim)])
    if target.norm_kind == "weighted_l1":
        L = target.left_action
        w = target.weights
        # || x @ L[j] ||_w <= max_m ( sum_l w_l |L[j,m,l]| / w_m ) ||x||_w
        col = np.tensordot(np.abs(L), w, axes=(2, 0))   # [j, m]
        return np.max(col / w[np.newaxis, :], axis=1)
    raise HyersError("column gap propagation needs a self-linked or "
                     "weighted-l1 target bimodule")


def extract_delta_algebraic(assembled: AssembledMap) -> AssembledMap:
    """The derivation delta(a) = mu(a) - a mu(1), from an assembled mu.

    Column gaps combine the mu-column gap with the propagated uncertainty
    of mu(1) through the left action.
    """
    source = assembled.linear_map.source
    target = assembled.linear_map.target
    M = assembled.linear_map.matrix
    mu_one = M @ source.unit_coords
    acted = np.tensordot(target.left_action, mu_one, axes=(1, 0))   # [j, l]
    delta_matrix = M - acted.T
    unit_gap = float(np.abs(source.unit_coords) @ assembled.column_gaps)
    c_bounds = _left_action_column_bounds(assembled)
    gaps = assembled.column_gaps + c_bounds * unit_gap
    gaps.flags.writeable = False
    return AssembledMap(linear_map=LinearMap(source, target, delta_matrix),
                        column_gaps=gaps,
                        j_commutation_residual=assembled.j_commutation_residual,
                        depth=assembled.depth)


def identity_check_thresholds(mu: AssembledMap,
                              delta: AssembledMap) -> tuple[float, float]:
    """Certificate budgets for the basis identity checks on assembled maps.

    Returns (generalized-derivation budget, Leibniz budget): the largest
    basis-pair residual the column certificates allow, so the checks pass
    whenever both maps come from one assemble/extract run.
    """
    source = mu.linear_map.source
    abs_c = np.abs(source.structure)
    basis_norms = np.array([vector_norm(source, source.basis_element(j).coords)
                            for j in range(source.dim)])
    act_bounds = _left_action_column_bounds(mu)
    g_mu = mu.column_gaps
    g_d = delta.column_gaps
    prod_mu = np.tensordot(abs_c, g_mu, axes=(2, 0))
    prod_d = np.tensordot(abs_c, g_d, axes=(2, 0))
    gen = prod_mu + np.outer(act_bounds, g_mu) + np.outer(g_d, basis_norms)
    lei = prod_d + np.outer(act_bounds, g_d) + np.outer(g_d, basis_norms)
    return float(np.max(gen)), float(np.max(lei))


@dataclass(frozen=True)
class ScalarDecomposition:
    """theta = integer_part + (lambda1 + lambda2) / 2 with unimodular lambdas."""

    theta: float
    integer_part: int
    gamma: float
    lambda1: complex
    lambda2: complex

    def reconstruct(self) -> float:
        return self.integer_part + (self.lambda1.real + self.lambda2.real) / 2.0


def scalar_decompose(theta: float) -> ScalarDecomposition:
    """Split a real scalar into an integer and two unit-circle scalars.

    gamma = theta - floor(theta) lies in [0, 1), and the lambdas are
    gamma +/- i sqrt(1 - gamma^2); their imaginary parts cancel exactly,
    so the mean of the pair is gamma with no imaginary residue.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise HyersError(f"theta must be finite, got {theta!r}")
    m = math.floor(theta)
    gamma = theta - m
    if gamma >= 1.0:
        # theta - floor(theta) can round up to 1.0 for tiny negatives.
        m += 1
        gamma = 0.0
    s = math.sqrt(max(0.0, 1.0 - gamma * gamma))
    lam1 = complex(gamma, s)
    lam2 = complex(gamma, -s)
    return ScalarDecomposition(theta=theta, integer_part=m, gamma=gamma,
                               lambda1=lam1, lambda2=lam2)
