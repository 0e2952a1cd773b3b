"""Exact generalized derivations and perturbed approximate map pairs.

A LinearMap is a complex matrix acting on coordinates, so additivity and
C-homogeneity hold by representation. A GeneralizedDerivationPair (mu,
delta) is validated on all basis pairs at construction: delta must satisfy
the Leibniz rule, mu the generalized-derivation identity
mu(ab) = a.mu(b) + delta(a).b, and the two must be linked by
delta(a) = mu(a) - a.mu(1).

An ApproximateMapPair is an exact pair plus perturbation models for f and
g. Evaluation at dyadically scaled arguments returns the pair
(mantissa, exp2) with f(2^n a) = 2^exp2 * mantissa, the analytic scale
factors applied in log space so no stored float overflows for n <= 512.

Perturbations are deterministic: the noise direction is drawn from a
counter-based generator keyed on the perturbation seed and the argument (quantized
on a 1e-6 grid), normalized in the module norm with a one-sided margin so
the advertised envelope ||P(v)|| <= eps (or beta ||v||^p) holds strictly
despite iterative norm evaluation. ScaleInvariantDirection keys on
v / ||v||_2, which is bit-stable under dyadic scaling, so scaled noise has
an exact closed form; ScaleSensitiveDirection keys on v itself and has no
closed form, only the envelope.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .algebra import (
    AlgebraDescriptor,
    BimoduleDescriptor,
    Element,
    ModuleElement,
    make_self_bimodule,
    vector_norm,
)

__all__ = [
    "MapError",
    "PAIR_TOL",
    "MAX_LOG2_SCALE",
    "SCALE_INVARIANT",
    "SCALE_SENSITIVE",
    "SLOTS",
    "LinearMap",
    "GeneralizedDerivationPair",
    "PerturbationSpec",
    "Zero",
    "BoundedNoise",
    "PowerNoise",
    "SlotTargeted",
    "ApproximateMapPair",
    "ScaledModuleValue",
    "inner_generalized",
    "right_multiplier",
    "zero_pair",
    "evaluate_f",
    "evaluate_g",
    "noise_envelope",
    "generalized_derivation_residuals",
    "leibniz_residuals",
    "algebraic_consistency_residuals",
]

PAIR_TOL = 1e-10
MAX_LOG2_SCALE = 512

SCALE_INVARIANT = "scale_invariant"
SCALE_SENSITIVE = "scale_sensitive"
_SCALE_MODES = (SCALE_INVARIANT, SCALE_SENSITIVE)

# Slot tags name the argument positions of the master inequality
# f(la+lb+cd) - l f(a) - l f(b) - c f(d) - g(c) d.
SLOTS = ("sum", "a", "b", "c", "d")

_QUANTUM = 1e-6
# One-sided margin keeping ||direction|| strictly below 1 even though the
# module norm itself is evaluated iteratively to ~1e-12.
_DIRECTION_MARGIN = 1.0 - 1e-11


class MapError(ValueError):
    """A map, pair, or evaluation request failed validation."""


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear map from an algebra to a bimodule, as a coordinate matrix."""

    source: AlgebraDescriptor
    target: BimoduleDescriptor
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.target.algebra.digest != self.source.digest:
            raise MapError("target bimodule is not over the source algebra")
        mat = np.array(self.matrix, dtype=np.complex128, order="C")
        if mat.shape != (self.target.dim, self.source.dim):
            raise MapError(f"matrix must have shape "
                           f"({self.target.dim}, {self.source.dim}), got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise MapError("matrix entries must be finite")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    def apply(self, a: Element) -> ModuleElement:
        if a.algebra.digest != self.source.digest:
            raise MapError("element belongs to a different algebra")
        return ModuleElement(self.target, self.matrix @ a.coords)


def _pair_norms(bimod: BimoduleDescriptor, rows: np.ndarray) -> np.ndarray:
    """Exact module norms over the last axis of `rows`."""
    lead = rows.shape[:-1]
    flat = rows.reshape(-1, rows.shape[-1])
    out = np.array([vector_norm(bimod, flat[i]) for i in range(flat.shape[0])])
    return out.reshape(lead)


def generalized_derivation_residuals(mu: LinearMap, delta: LinearMap) -> np.ndarray:
    """Norms of mu(e_i e_j) - e_i.mu(e_j) - delta(e_i).e_j for all basis pairs."""
    _check_same_spaces(mu, delta)
    c = mu.source.structure
    L = mu.target.left_action
    R = mu.target.right_action
    prod = np.tensordot(c, mu.matrix, axes=(2, 1))                 # mu(e_i e_j)
    left = np.tensordot(L, mu.matrix, axes=(1, 0)).transpose(0, 2, 1)
    right = np.tensordot(delta.matrix, R, axes=(0, 0))
    return _pair_norms(mu.target, prod - left - right)


def leibniz_residuals(delta: LinearMap) -> np.ndarray:
    """Norms of delta(e_i e_j) - e_i.delta(e_j) - delta(e_i).e_j per basis pair."""
    c = delta.source.structure
    L = delta.target.left_action
    R = delta.target.right_action
    prod = np.tensordot(c, delta.matrix, axes=(2, 1))
    left = np.tensordot(L, delta.matrix, axes=(1, 0)).transpose(0, 2, 1)
    right = np.tensordot(delta.matrix, R, axes=(0, 0))
    return _pair_norms(delta.target, prod - left - right)


def algebraic_consistency_residuals(mu: LinearMap, delta: LinearMap) -> np.ndarray:
    """Norms of delta(e_j) - (mu(e_j) - e_j.mu(1)) per basis element."""
    _check_same_spaces(mu, delta)
    L = mu.target.left_action
    mu_one = mu.matrix @ mu.source.unit_coords
    acted = np.tensordot(L, mu_one, axes=(1, 0))       # [j, l] = e_j . mu(1)
    expected = mu.matrix.T - acted
    return _pair_norms(mu.target, delta.matrix.T - expected)


def _check_same_spaces(mu: LinearMap, delta: LinearMap) -> None:
    if (mu.source.digest != delta.source.digest
            or mu.target.digest != delta.target.digest):
        raise MapError("mu and delta must share source algebra and target bimodule")


@dataclass(frozen=True, eq=False)
class GeneralizedDerivationPair:
    """A validated pair (mu, delta): delta a derivation, mu generalized by it."""

    mu: LinearMap
    delta: LinearMap

    def __post_init__(self) -> None:
        worst = float(np.max(generalized_derivation_residuals(self.mu, self.delta)))
        if worst > PAIR_TOL:
            raise MapError(f"generalized-derivation identity fails: "
                           f"max basis residual {worst:.3e} > {PAIR_TOL:.1e}")
        worst = float(np.max(leibniz_residuals(self.delta)))
        if worst > PAIR_TOL:
            raise MapError(f"Leibniz rule fails for delta: "
                           f"max basis residual {worst:.3e} > {PAIR_TOL:.1e}")
        worst = float(np.max(algebraic_consistency_residuals(self.mu, self.delta)))
        if worst > PAIR_TOL:
            raise MapError(f"delta(a) = mu(a) - a.mu(1) fails: "
                           f"max basis residual {worst:.3e} > {PAIR_TOL:.1e}")


def inner_generalized(x: ModuleElement, y: ModuleElement) -> GeneralizedDerivationPair:
    """The pair mu(a) = x.a - a.y, delta(a) = x.a - a.x for fixed x, y."""
    if x.bimodule.digest != y.bimodule.digest:
        raise MapError("x and y belong to different bimodules")
    bimod = x.bimodule
    alg = bimod.algebra
    L = bimod.left_action
    R = bimod.right_action
    x_right = np.tensordot(x.coords, R, axes=(0, 0))   # [j, :] = x . e_j
    y_left = np.tensordot(L, y.coords, axes=(1, 0))    # [j, :] = e_j . y
    x_left = np.tensordot(L, x.coords, axes=(1, 0))
    mu = LinearMap(alg, bimod, (x_right - y_left).T)
    delta = LinearMap(alg, bimod, (x_right - x_left).T)
    return GeneralizedDerivationPair(mu=mu, delta=delta)


def right_multiplier(z: Element,
                     bimod: BimoduleDescriptor | None = None) -> GeneralizedDerivationPair:
    """The pair mu(a) = z a, delta(a) = z a - a z over the self-linked bimodule."""
    if bimod is None:
        bimod = make_self_bimodule(z.algebra)
    if not bimod.self_linked:
        raise MapError("right_multiplier needs a self-linked bimodule")
    if bimod.algebra.digest != z.algebra.digest:
        raise MapError("z belongs to a different algebra")
    return inner_generalized(ModuleElement(bimod, z.coords), bimod.zero())


def zero_pair(bimod: BimoduleDescriptor) -> GeneralizedDerivationPair:
    """The zero maps; trivially a generalized derivation pair."""
    alg = bimod.algebra
    zeros = np.zeros((bimod.dim, alg.dim), dtype=np.complex128)
    return GeneralizedDerivationPair(mu=LinearMap(alg, bimod, zeros),
                                     delta=LinearMap(alg, bimod, zeros))


def _check_seed(seed) -> int:
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise MapError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


@dataclass(frozen=True, kw_only=True)
class PerturbationSpec:
    """Base for perturbation models; use Zero/BoundedNoise/PowerNoise/SlotTargeted."""

    seed: int = 0
    scale_mode: str = SCALE_INVARIANT

    def __post_init__(self) -> None:
        _check_seed(self.seed)
        if self.scale_mode not in _SCALE_MODES:
            raise MapError(f"scale_mode must be one of {_SCALE_MODES}, "
                           f"got {self.scale_mode!r}")


@dataclass(frozen=True, kw_only=True)
class Zero(PerturbationSpec):
    """No perturbation."""


@dataclass(frozen=True, kw_only=True)
class BoundedNoise(PerturbationSpec):
    """||P(v)|| <= epsilon for every v, with P(0) = 0."""

    epsilon: float

    def __post_init__(self) -> None:
        super().__post_init__()
        eps = float(self.epsilon)
        if not 0.0 <= eps < float("inf"):
            raise MapError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)


@dataclass(frozen=True, kw_only=True)
class PowerNoise(PerturbationSpec):
    """||P(v)|| <= beta ||v||^p with p < 1, and P(0) = 0."""

    beta: float
    p: float

    def __post_init__(self) -> None:
        super().__post_init__()
        beta = float(self.beta)
        p = float(self.p)
        if not 0.0 <= beta < float("inf"):
            raise MapError(f"beta must be finite and >= 0, got {self.beta!r}")
        if not p < 1.0 or p != p or p == float("-inf"):
            raise MapError(f"p must be finite and < 1, got {self.p!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True, kw_only=True)
class SlotTargeted(PerturbationSpec):
    """Applies `inner` only to evaluations tagged with the named slot.

    Untagged evaluations (extrapolation, plain f(a) queries) see the exact
    map; only the evaluator of the master inequality tags its calls. This
    models a map that is exact along the dyadic ladder yet violates the
    inequality at one argument position.
    """

    slot: str
    inner: PerturbationSpec

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.slot not in SLOTS:
            raise MapError(f"slot must be one of {SLOTS}, got {self.slot!r}")
        if not isinstance(self.inner, PerturbationSpec) or isinstance(self.inner, SlotTargeted):
            raise MapError("inner must be a non-slot perturbation spec")


@dataclass(frozen=True, eq=False)
class ApproximateMapPair:
    """f = mu + P_f and g = delta + P_g; f(0) = 0 holds by construction."""

    exact: GeneralizedDerivationPair
    f_perturbation: PerturbationSpec
    g_perturbation: PerturbationSpec

    @property
    def source(self) -> AlgebraDescriptor:
        return self.exact.mu.source

    @property
    def target(self) -> BimoduleDescriptor:
        return self.exact.mu.target


@dataclass(frozen=True, eq=False)
class ScaledModuleValue:
    """A module value 2^exp2 * mantissa, kept factored to avoid overflow."""

    mantissa: ModuleElement
    exp2: int

    def materialize(self) -> ModuleElement:
        coords = self.mantissa.coords * 2.0 ** self.exp2
        if not np.all(np.isfinite(coords)):
            raise MapError(f"materializing 2^{self.exp2} * mantissa overflows")
        return ModuleElement(self.mantissa.bimodule, coords)


@lru_cache(maxsize=16384)
def _norm_cached(alg: AlgebraDescriptor, coords_bytes: bytes) -> float:
    return vector_norm(alg, np.frombuffer(coords_bytes, dtype=np.complex128))


def _algebra_norm(a: Element) -> float:
    return _norm_cached(a.algebra, a.coords.tobytes())


@lru_cache(maxsize=8192)
def _direction_cached(payload: bytes, bimod: BimoduleDescriptor) -> np.ndarray:
    digest = hashlib.sha256(payload).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    raw = gen.standard_normal(bimod.dim) + 1j * gen.standard_normal(bimod.dim)
    mag = vector_norm(bimod, raw)
    if mag == 0.0:
        raw = np.zeros(bimod.dim, dtype=np.complex128)
        raw[0] = 1.0
        mag = vector_norm(bimod, raw)
    out = raw * (_DIRECTION_MARGIN / mag)
    out.flags.writeable = False
    return out


def _direction(spec: PerturbationSpec, key_vec: np.ndarray,
               bimod: BimoduleDescriptor) -> np.ndarray:
    # Quantize to a 1e-6 grid; adding 0.0 folds -0.0 into +0.0 so the key
    # bytes depend only on the quantized value.
    q_re = np.round(key_vec.real / _QUANTUM) + 0.0
    q_im = np.round(key_vec.imag / _QUANTUM) + 0.0
    payload = (b"derivstab-noise-v1"
               + spec.seed.to_bytes(8, "little")
               + q_re.tobytes() + q_im.tobytes())
    return _direction_cached(payload, bimod)


def _key_vector(spec: PerturbationSpec, a: Element, n: int) -> np.ndarray:
    if spec.scale_mode == SCALE_INVARIANT:
        # v / ||v||_2 is invariant under scaling by powers of two bit for bit.
        return a.coords / np.linalg.norm(a.coords)
    return a.coords * 2.0 ** n


def noise_envelope(spec: PerturbationSpec, a: Element, n: int,
                   slot: str | None = None) -> float:
    """Guaranteed bound on ||P(2^n a)|| / 2^n, the mantissa-scale deviation."""
    if isinstance(spec, Zero):
        return 0.0
    if isinstance(spec, SlotTargeted):
        if slot == spec.slot:
            return noise_envelope(spec.inner, a, n)
        return 0.0
    if not np.any(a.coords):
        return 0.0
    if isinstance(spec, BoundedNoise):
        return spec.epsilon * 2.0 ** (-n)
    if isinstance(spec, PowerNoise):
        na = _algebra_norm(a)
        if na == 0.0:
            return 0.0
        return spec.beta * na ** spec.p * 2.0 ** (n * (spec.p - 1.0))
    raise MapError(f"unknown perturbation spec {type(spec).__name__}")


def _noise_mantissa(spec: PerturbationSpec, a: Element, n: int,
                    bimod: BimoduleDescriptor, slot: str | None) -> np.ndarray:
    zeros = np.zeros(bimod.dim, dtype=np.complex128)
    if isinstance(spec, Zero):
        return zeros
    if isinstance(spec, SlotTargeted):
        if slot == spec.slot:
            return _noise_mantissa(spec.inner, a, n, bimod, None)
        return zeros
    if not np.any(a.coords):
        return zeros
    mag = noise_envelope(spec, a, n)
    if mag == 0.0:
        return zeros
    return mag * _direction(spec, _key_vector(spec, a, n), bimod)


def _check_scale(n: int) -> None:
    if not isinstance(n, int) or not 0 <= n <= MAX_LOG2_SCALE:
        raise MapError(f"log2 scale must be an integer in 0..{MAX_LOG2_SCALE}, got {n!r}")


def evaluate_f(pair: ApproximateMapPair, a: Element, log2_scale: int,
               slot: str | None = None) -> ScaledModuleValue:
    """f(2^n a) as (mantissa, n); mantissa = mu(a) + P(2^n a)/2^n.

    `slot` tags the call with its master-inequality argument position; only
    SlotTargeted perturbations distinguish tags.
    """
    _check_scale(log2_scale)
    if slot is not None and slot not in SLOTS:
        raise MapError(f"slot must be None or one of {SLOTS}, got {slot!r}")
    base = pair.exact.mu.apply(a)
    noise = _noise_mantissa(pair.f_perturbation, a, log2_scale, pair.target, slot)
    return ScaledModuleValue(ModuleElement(pair.target, base.coords + noise),
                             log2_scale)


def evaluate_g(pair: ApproximateMapPair, c: Element, log2_scale: int,
               slot: str | None = None) -> ScaledModuleValue:
    """g(2^n c) as (mantissa, n); mantissa = delta(c) + Q(2^n c)/2^n."""
    _check_scale(log2_scale)
    if slot is not None and slot not in SLOTS:
        raise MapError(f"slot must be None or one of {SLOTS}, got {slot!r}")
    base = pair.exact.delta.apply(c)
    noise = _noise_mantissa(pair.g_perturbation, c, log2_scale, pair.target, slot)
    return ScaledModuleValue(ModuleElement(pair.target, base.coords + noise),
                             log2_scale)
