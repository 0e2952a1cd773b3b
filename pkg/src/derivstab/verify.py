"""Residual checks over sampled data, reported in a machine-checkable form.

Every check returns a ResidualReport whose `passed` flag is forced equal to
`max_residual <= threshold`, with a serialized witness of the worst sample.
Reports are bit-reproducible from (seed, config).

Conventions:

* Inequality checks report the signed excess LHS - RHS, so a comfortable
  pass shows a negative max_residual.
* Identity checks report the norm of the defect, so the residual is
  nonnegative and the threshold is the allowed tolerance.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import jacobi_eigh
from .algebra import (
    AlgebraDescriptor,
    Element,
    ModuleElement,
    SPECTRAL,
    coords_to_pairs,
    vector_norm,
)
from .control import ControlFunction, hyers_bound, phi
from .hyers import AssembledMap
from .maps import (
    ApproximateMapPair,
    LinearMap,
    evaluate_f,
    evaluate_g,
    generalized_derivation_residuals,
    leibniz_residuals,
)

__all__ = [
    "VerifyError",
    "CHECK_NAMES",
    "MASTER_SLACK",
    "BASIS_IDENTITY_TOL",
    "STAR_CONCLUSION_TOL",
    "GROWTH_SLOPE_MIN",
    "ResidualReport",
    "SampleConfig",
    "UnitaryDecomposition",
    "GrowthProfile",
    "full_t",
    "ONE_AND_I",
    "sample_elements",
    "sample_unitaries",
    "master_inequality_lhs",
    "residual_master_inequality",
    "certify_stability_bound",
    "check_generalized_derivation",
    "check_leibniz",
    "check_star_preservation",
    "unitary_decompose",
    "superstability_probe",
]

# The six check names a scenario may request.
CHECK_NAMES = (
    "master_inequality",
    "stability_bound",
    "generalized_derivation",
    "leibniz",
    "star_preservation",
    "superstability",
)

MASTER_SLACK = 1e-12
BASIS_IDENTITY_TOL = 1e-10
STAR_CONCLUSION_TOL = 1e-9
GROWTH_SLOPE_MIN = 0.9

_LADDER_EXPONENTS = tuple(range(-4, 9))


class VerifyError(ValueError):
    """A check was invoked with inconsistent inputs."""


@dataclass(frozen=True)
class ResidualReport:
    """One check outcome; `passed` always equals max_residual <= threshold."""

    check: str
    samples: int
    max_residual: float
    witness: dict | None
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed",
                           bool(self.max_residual <= self.threshold))

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "samples": self.samples,
            "max_residual": self.max_residual,
            "witness": self.witness,
            "threshold": self.threshold,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class SampleConfig:
    """Sampling policy shared by the checks."""

    count: int = 200
    ladder: bool = True
    zero_cd: bool = False
    unitaries: int = 200
    scale_max: int = 48

    def __post_init__(self) -> None:
        if not isinstance(self.count, int) or self.count < 1:
            raise VerifyError(f"count must be a positive integer, got {self.count!r}")
        if not isinstance(self.unitaries, int) or self.unitaries < 1:
            raise VerifyError(f"unitaries must be a positive integer, got {self.unitaries!r}")
        if not isinstance(self.scale_max, int) or not 0 <= self.scale_max <= 512:
            raise VerifyError(f"scale_max must be in 0..512, got {self.scale_max!r}")


def full_t(k: int) -> tuple[complex, ...]:
    """k evenly spaced points on the unit circle, starting at 1."""
    if not isinstance(k, int) or k < 1:
        raise VerifyError(f"k must be a positive integer, got {k!r}")
    return tuple(cmath.exp(2j * cmath.pi * j / k) for j in range(k))


ONE_AND_I = (1.0 + 0.0j, 1.0j)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def sample_elements(algebra: AlgebraDescriptor, count: int, seed: int,
                    ladder: bool = True, stream: int = 0) -> list[Element]:
    """Seeded complex-Gaussian elements, cycled through a dyadic norm ladder."""
    rng = _rng(seed, stream)
    out = []
    for k in range(count):
        coords = rng.standard_normal(algebra.dim) + 1j * rng.standard_normal(algebra.dim)
        if ladder:
            coords = coords * 2.0 ** _LADDER_EXPONENTS[k % len(_LADDER_EXPONENTS)]
        out.append(Element(algebra, coords))
    return out


def sample_unitaries(algebra: AlgebraDescriptor, count: int, seed: int,
                     stream: int = 7) -> list[Element]:
    """Seeded unitaries: eigenvector matrices of random Hermitian matrices."""
    if algebra.norm_kind != SPECTRAL or algebra.involution is None:
        raise VerifyError("unitary sampling needs a matrix algebra with involution")
    n = algebra.matrix_size
    rng = _rng(seed, stream)
    out = []
    for _ in range(count):
        raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        herm = (raw + raw.conj().T) / 2.0
        _, vecs = jacobi_eigh(herm)
        out.append(Element(algebra, vecs.reshape(-1)))
    return out


def _element_witness(**named) -> dict:
    out = {}
    for name, value in named.items():
        if isinstance(value, (Element, ModuleElement)):
            out[name] = coords_to_pairs(value.coords)
        elif isinstance(value, complex):
            out[name] = [value.real, value.imag]
        else:
            out[name] = value
    return out


def master_inequality_lhs(pair: ApproximateMapPair, lam: complex, a: Element,
                          b: Element, c: Element, d: Element) -> float:
    """Norm of f(la+lb+cd) - l f(a) - l f(b) - c f(d) - g(c) d.

    Evaluations carry their argument-position tags so slot-targeted
    perturbations strike exactly where the inequality reads them.
    """
    source = pair.source
    target = pair.target
    arg = Element(source, lam * a.coords + lam * b.coords
                  + _product_coords(source, c, d))
    f_sum = evaluate_f(pair, arg, 0, slot="sum").mantissa.coords
    f_a = evaluate_f(pair, a, 0, slot="a").mantissa.coords
    f_b = evaluate_f(pair, b, 0, slot="b").mantissa.coords
    f_d = evaluate_f(pair, d, 0, slot="d").mantissa
    g_c = evaluate_g(pair, c, 0, slot="c").mantissa
    c_fd = np.tensordot(c.coords, target.left_action, axes=(0, 0))
    gc_d = np.tensordot(g_c.coords, target.right_action, axes=(0, 0))
    lhs = (f_sum - lam * f_a - lam * f_b
           - f_d.coords @ c_fd - d.coords @ gc_d)
    return vector_norm(target, lhs)


def _product_coords(algebra: AlgebraDescriptor, c: Element, d: Element) -> np.ndarray:
    return d.coords @ np.tensordot(c.coords, algebra.structure, axes=(0, 0))


def residual_master_inequality(pair: ApproximateMapPair, cf: ControlFunction,
                               seed: int, config: SampleConfig,
                               lambda_set: tuple[complex, ...]) -> ResidualReport:
    """Max over samples and lambdas of (inequality LHS - phi); slack 1e-12."""
    if not lambda_set:
        raise VerifyError("lambda_set must be nonempty")
    source = pair.source
    quads = _sample_quads(source, seed, config)
    worst = -math.inf
    witness = None
    count = 0
    for idx, (a, b, c, d) in enumerate(quads):
        bound = phi(cf, a, b, c, d)
        for lam in lambda_set:
            lhs = master_inequality_lhs(pair, lam, a, b, c, d)
            count += 1
            excess = lhs - bound
            if excess > worst:
                worst = excess
                witness = _element_witness(sample_index=idx, lam=complex(lam),
                                           a=a, b=b, c=c, d=d,
                                           lhs=lhs, bound=bound)
    return ResidualReport(check="master_inequality", samples=count,
                          max_residual=worst, witness=witness,
                          threshold=MASTER_SLACK)


def _sample_quads(source: AlgebraDescriptor, seed: int,
                  config: SampleConfig) -> list[tuple[Element, Element, Element, Element]]:
    parts = [sample_elements(source, config.count, seed, config.ladder, stream=s)
             for s in (1, 2, 3, 4)]
    quads = []
    zero = source.zero()
    for a, b, c, d in zip(*parts):
        if config.zero_cd:
            c, d = zero, zero
        quads.append((a, b, c, d))
    return quads


def certify_stability_bound(pair: ApproximateMapPair, cf: ControlFunction,
                            mu: AssembledMap, seed: int,
                            config: SampleConfig) -> ResidualReport:
    """Max over samples of ||f(a) - mu(a)|| - bound - certificate slack.

    The bound is the extrapolated control limit at (a, a, 0, 0); the slack
    is the assembled map's per-column certificate propagated through a's
    coordinates, covering the distance from the assembled mu to the exact
    limit map.
    """
    target = pair.target
    samples = sample_elements(pair.source, config.count, seed,
                              config.ladder, stream=5)
    worst = -math.inf
    witness = None
    for idx, a in enumerate(samples):
        f_a = evaluate_f(pair, a, 0).mantissa.coords
        mu_a = mu.linear_map.matrix @ a.coords
        dev = vector_norm(target, f_a - mu_a)
        bound = hyers_bound(cf, a)
        slack = mu.error_bound(a)
        excess = dev - bound - slack
        if excess > worst:
            worst = excess
            witness = _element_witness(sample_index=idx, a=a, deviation=dev,
                                       bound=bound, certificate_slack=slack)
    return ResidualReport(check="stability_bound", samples=len(samples),
                          max_residual=worst, witness=witness,
                          threshold=MASTER_SLACK)


def _basis_pair_report(check: str, residuals: np.ndarray,
                       threshold: float) -> ResidualReport:
    flat = int(np.argmax(residuals))
    i, j = np.unravel_index(flat, residuals.shape)
    witness = {"basis_pair": [int(i), int(j)]}
    return ResidualReport(check=check, samples=int(residuals.size),
                          max_residual=float(residuals[i, j]),
                          witness=witness, threshold=threshold)


def check_generalized_derivation(mu: LinearMap, delta: LinearMap,
                                 threshold: float = BASIS_IDENTITY_TOL) -> ResidualReport:
    """Exhaustive basis-pair residual of mu(cd) - c.mu(d) - delta(c).d."""
    return _basis_pair_report("generalized_derivation",
                              generalized_derivation_residuals(mu, delta),
                              threshold)


def check_leibniz(delta: LinearMap,
                  threshold: float = BASIS_IDENTITY_TOL) -> ResidualReport:
    """Exhaustive basis-pair residual of delta(cd) - c.delta(d) - delta(c).d."""
    return _basis_pair_report("leibniz", leibniz_residuals(delta), threshold)


def check_star_preservation(pair: ApproximateMapPair, cf: ControlFunction,
                            mu: AssembledMap, seed: int,
                            config: SampleConfig) -> tuple[ResidualReport, ResidualReport]:
    """Star behavior: the sampled hypothesis and the basis conclusion.

    Hypothesis row: ||f(2^n u*) - f(2^n u)*|| <= phi(2^n u, 2^n u, 0, 0) on
    seeded unitaries u and dyadic scales n, evaluated in mantissa form.
    Conclusion row: ||mu(a*) - mu(a)*|| over the full basis, threshold 1e-9.
    The implication runs hypothesis to conclusion only, so the two are
    reported separately.
    """
    source = pair.source
    target = pair.target
    if source.involution is None:
        raise VerifyError("star check needs an algebra with involution")
    if not target.self_linked:
        raise VerifyError("star check needs a self-linked bimodule")
    unitaries = sample_unitaries(source, config.unitaries, seed)
    scales = range(0, config.scale_max + 1, 4)
    worst = -math.inf
    witness = None
    count = 0
    star = source.involution
    for idx, u in enumerate(unitaries):
        u_star = Element(source, star @ np.conj(u.coords))
        norm_u = vector_norm(source, u.coords)
        for n in scales:
            s_star = evaluate_f(pair, u_star, n).mantissa.coords
            s_u = evaluate_f(pair, u, n).mantissa.coords
            lhs = vector_norm(target, s_star - star @ np.conj(s_u))
            # phi(2^n u, 2^n u, 0, 0) / 2^n, exact per slot.
            bound = 2.0 * cf.halved_term((norm_u, norm_u, 0.0, 0.0), n)
            count += 1
            excess = lhs - bound
            if excess > worst:
                worst = excess
                witness = _element_witness(unitary_index=idx, scale=n,
                                           u=u, lhs=lhs, bound=bound)
    hypothesis = ResidualReport(check="star_preservation_hypothesis",
                                samples=count, max_residual=worst,
                                witness=witness, threshold=MASTER_SLACK)

    M = mu.linear_map.matrix
    worst_c = -math.inf
    witness_c = None
    for j in range(source.dim):
        e = source.basis_element(j)
        e_star = star @ np.conj(e.coords)
        defect = vector_norm(target, M @ e_star - star @ np.conj(M @ e.coords))
        if defect > worst_c:
            worst_c = defect
            witness_c = {"basis_index": j}
    conclusion = ResidualReport(check="star_preservation_conclusion",
                                samples=source.dim, max_residual=worst_c,
                                witness=witness_c, threshold=STAR_CONCLUSION_TOL)
    return hypothesis, conclusion


@dataclass(frozen=True)
class UnitaryDecomposition:
    """element = sum of coeff * unitary over at most four terms."""

    element: Element
    terms: tuple[tuple[complex, Element], ...]


def unitary_decompose(a: Element) -> UnitaryDecomposition:
    """Write a matrix-algebra element as a combination of <= 4 unitaries.

    Splits a into self-adjoint parts a1 = (a + a*)/2 and a2 = (a - a*)/(2i),
    scales each to a contraction b, and uses b = (u + u*)/2 with
    u = b + i sqrt(1 - b^2), the square root taken by eigendecomposition.
    The zero element decomposes into no terms.
    """
    algebra = a.algebra
    if algebra.norm_kind != SPECTRAL or algebra.involution is None:
        raise VerifyError("unitary decomposition needs a matrix algebra "
                          "with involution")
    n = algebra.matrix_size
    mat = a.coords.reshape(n, n)
    star = mat.conj().T
    parts = ((mat + star) / 2.0, (mat - star) / 2j)
    prefactors = (1.0 + 0.0j, 1.0j)
    terms = []
    for part, pre in zip(parts, prefactors):
        nu = vector_norm(algebra, part.reshape(-1))
        if nu == 0.0:
            continue
        b = part / nu
        w, vecs = jacobi_eigh(b)
        w = np.clip(w, -1.0, 1.0)
        phases = w + 1j * np.sqrt(1.0 - w * w)
        u = (vecs * phases) @ vecs.conj().T
        u_star = u.conj().T
        coeff = pre * (nu / 2.0)
        terms.append((complex(coeff), Element(algebra, u.reshape(-1))))
        terms.append((complex(coeff), Element(algebra, u_star.reshape(-1))))
    return UnitaryDecomposition(element=a, terms=tuple(terms))


@dataclass(frozen=True)
class GrowthProfile:
    """Master-inequality LHS along a c-norm ladder, with a log-log slope fit."""

    radii: tuple[float, ...]
    magnitudes: tuple[float, ...]
    slope: float

    def as_report(self) -> ResidualReport:
        witness = {"slope": self.slope,
                   "radii": list(self.radii),
                   "magnitudes": list(self.magnitudes)}
        return ResidualReport(check="superstability_growth",
                              samples=len(self.radii),
                              max_residual=GROWTH_SLOPE_MIN - self.slope,
                              witness=witness, threshold=0.0)


def superstability_probe(pair: ApproximateMapPair, epsilon: float,
                         m_max: int, n_max: int, seed: int,
                         config: SampleConfig) -> tuple[ResidualReport, GrowthProfile]:
    """Homogeneity bound check plus the c-ladder growth profile.

    Part one checks ||f(2^m a) - 2^m f(a)|| <= (2 + 2^(m+1)) eps / 2^n for
    m <= m_max, n <= n_max on samples; since the right side shrinks with n
    while the left side is fixed, only the tightest n matters. Part two
    sweeps c = R 1 over a dyadic ladder and fits the log-log slope of the
    inequality's LHS; a slope near one shows the c f(d) term defeats any
    constant bound. A profile with vanishing magnitudes reports slope 0 and
    fails the growth row: exact pairs show no growth to certify.
    """
    if not (isinstance(m_max, int) and isinstance(n_max, int)
            and 0 <= m_max and 0 <= n_max):
        raise VerifyError("m_max and n_max must be nonnegative integers")
    epsilon = float(epsilon)
    if not epsilon >= 0.0:
        raise VerifyError(f"epsilon must be >= 0, got {epsilon!r}")
    source = pair.source
    target = pair.target
    samples = sample_elements(source, config.count, seed, config.ladder, stream=6)
    worst = -math.inf
    witness = None
    count = 0
    tight = (2.0 + 2.0 ** (m_max + 1)) / 2.0 ** n_max
    for idx, a in enumerate(samples):
        s_0 = evaluate_f(pair, a, 0).mantissa.coords
        for m in range(1, m_max + 1):
            s_m = evaluate_f(pair, a, m).mantissa.coords
            # f(2^m a) - 2^m f(a) = 2^m (s_m - s_0)
            lhs = 2.0 ** m * vector_norm(target, s_m - s_0)
            bound = (2.0 + 2.0 ** (m + 1)) * epsilon / 2.0 ** n_max
            count += 1
            excess = lhs - bound
            if excess > worst:
                worst = excess
                witness = _element_witness(sample_index=idx, m=m, n=n_max,
                                           a=a, lhs=lhs, bound=bound)
    homogeneity = ResidualReport(check="superstability_homogeneity",
                                 samples=count, max_residual=worst,
                                 witness=witness, threshold=MASTER_SLACK)

    ladder_rng = _rng(seed, 8)
    dim = source.dim
    a0, b0, d0 = (Element(source, ladder_rng.standard_normal(dim)
                          + 1j * ladder_rng.standard_normal(dim))
                  for _ in range(3))
    radii = tuple(float(2 ** k) for k in range(9))   # 1 .. 256
    magnitudes = []
    for r in radii:
        c = Element(source, r * source.unit_coords)
        magnitudes.append(master_inequality_lhs(pair, 1.0 + 0.0j, a0, b0, c, d0))
    # Magnitudes at the float-cancellation level of the dominant c f(d)
    # term are noise, not growth; such profiles report slope 0.
    mu_d0 = vector_norm(target, pair.exact.mu.matrix @ d0.coords)
    floor = 256.0 * np.finfo(np.float64).eps * radii[-1] * mu_d0
    if min(magnitudes) <= 0.0 or max(magnitudes) < floor:
        slope = 0.0
    else:
        slope = float(np.polyfit(np.log2(radii), np.log2(magnitudes), 1)[0])
    profile = GrowthProfile(radii=radii, magnitudes=tuple(magnitudes),
                            slope=slope)
    return homogeneity, profile
