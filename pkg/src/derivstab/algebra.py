"""Finite-dimensional complex normed algebras given by structure constants.

An algebra is a basis e_0..e_{d-1} with products encoded by the rank-3
tensor c[i, j, k], meaning e_i e_j = sum_k c[i, j, k] e_k, together with
the coordinates of the unit and a norm. Bimodules are encoded the same way
by left/right action tensors. Descriptors are validated eagerly at
construction: associativity, the unit axioms, and the involution axioms
must hold within 1e-12 or AlgebraError is raised, so later computations
never run over a malformed algebra.

Two norm kinds are supported.

* "spectral": the basis must be the matrix units of M_n(C) in row-major
  order (index p*n + q for the unit with a 1 in row p, column q); the norm
  is the largest singular value of the coordinate matrix. An involution
  (conjugate transpose) is only accepted in this mode, since the C*-identity
  is part of its contract.
* "weighted_l1": sum_i w_i |a_i| with positive weights. The weights must
  satisfy sum_k w_k |c[i,j,k]| <= w_i w_j for every basis pair, which makes
  the norm submultiplicative on the whole algebra rather than only on
  sampled elements.

Descriptors and elements are immutable; coordinate arrays are read-only
copies. Two descriptors are interchangeable exactly when their content
digests match, so a JSON round-trip yields a descriptor whose elements mix
freely with the original's.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._linalg import spectral_norm

__all__ = [
    "AXIOM_TOL",
    "SPECTRAL",
    "WEIGHTED_L1",
    "AlgebraError",
    "AlgebraDescriptor",
    "Element",
    "BimoduleDescriptor",
    "ModuleElement",
    "make_matrix_algebra",
    "make_self_bimodule",
    "mul",
    "add",
    "sub",
    "scale",
    "norm",
    "vector_norm",
    "act_left",
    "act_right",
    "adjoint",
    "embed",
    "coords_to_pairs",
    "coords_from_pairs",
    "algebra_to_json",
    "algebra_from_json",
]

AXIOM_TOL = 1e-12
MAX_DIM = 64

SPECTRAL = "spectral"
WEIGHTED_L1 = "weighted_l1"
_NORM_KINDS = (SPECTRAL, WEIGHTED_L1)


class AlgebraError(ValueError):
    """A descriptor or element failed construction-time validation."""


def _checked_complex(arr, shape: tuple[int, ...], what: str) -> np.ndarray:
    out = np.array(arr, dtype=np.complex128, order="C")
    if out.shape != shape:
        raise AlgebraError(f"{what} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise AlgebraError(f"{what} must be finite")
    out.flags.writeable = False
    return out


def _checked_weights(arr, dim: int) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, order="C")
    if out.shape != (dim,):
        raise AlgebraError(f"weights must have shape ({dim},), got {out.shape}")
    if not np.all(np.isfinite(out)) or not np.all(out > 0.0):
        raise AlgebraError("weights must be finite and strictly positive")
    out.flags.writeable = False
    return out


def _coords_norm(norm_kind: str, matrix_size: int | None,
                 weights: np.ndarray | None, coords: np.ndarray) -> float:
    if norm_kind == SPECTRAL:
        n = matrix_size
        return spectral_norm(coords.reshape(n, n))
    return float(np.sum(weights * np.abs(coords)))


def _digest(*parts: bytes) -> str:
    h = hashlib.sha256()
    for part in parts:
        # Length prefix so adjacent fields cannot be confused.
        h.update(len(part).to_bytes(8, "little"))
        h.update(part)
    return h.hexdigest()


def _norm_bounded_rows(diff: np.ndarray, basis_norms: np.ndarray,
                       norm_kind: str, matrix_size: int | None,
                       weights: np.ndarray | None,
                       tol: float, what: str) -> None:
    """Assert that every row of `diff` (last axis = coordinates) has norm <= tol.

    Uses the triangle-inequality bound sum_l |row_l| * ||e_l|| first, which is
    sound for any norm, and falls back to the exact norm only on rows the
    cheap bound flags.
    """
    lead = diff.shape[:-1]
    flat = diff.reshape(-1, diff.shape[-1])
    cheap = np.abs(flat) @ basis_norms
    for idx in np.nonzero(cheap > tol)[0]:
        exact = _coords_norm(norm_kind, matrix_size, weights, flat[idx])
        if exact > tol:
            where = np.unravel_index(idx, lead) if lead else ()
            raise AlgebraError(f"{what} violated at basis index {tuple(int(v) for v in where)}: "
                               f"residual norm {exact:.3e} > {tol:.1e}")


@dataclass(frozen=True, eq=False)
class AlgebraDescriptor:
    """A validated finite-dimensional complex normed algebra.

    Attributes:
        dim: Basis size d, at most 64.
        structure: Read-only (d, d, d) complex tensor, e_i e_j = sum_k c[i,j,k] e_k.
        unit_coords: Coordinates of the two-sided unit.
        norm_kind: "spectral" or "weighted_l1".
        weights: Positive weights; required for "weighted_l1", forbidden otherwise.
        involution: Optional (d, d) matrix S acting as a* = S @ conj(coords);
            only accepted with the spectral norm.
        matrix_size: n with dim == n*n when norm_kind is "spectral", else None.
        digest: Content hash; equal digests mean interchangeable descriptors.
    """

    dim: int
    structure: np.ndarray
    unit_coords: np.ndarray
    norm_kind: str
    weights: np.ndarray | None = None
    involution: np.ndarray | None = None
    matrix_size: int | None = field(init=False, default=None)
    digest: str = field(init=False, default="")

    def __post_init__(self) -> None:
        d = self.dim
        if not isinstance(d, int) or d < 1:
            raise AlgebraError(f"dim must be a positive integer, got {d!r}")
        if d > MAX_DIM:
            raise AlgebraError(f"dim {d} exceeds the supported maximum {MAX_DIM}")
        object.__setattr__(self, "structure",
                           _checked_complex(self.structure, (d, d, d), "structure"))
        object.__setattr__(self, "unit_coords",
                           _checked_complex(self.unit_coords, (d,), "unit"))
        if self.norm_kind not in _NORM_KINDS:
            raise AlgebraError(f"norm_kind must be one of {_NORM_KINDS}, got {self.norm_kind!r}")

        if self.norm_kind == SPECTRAL:
            if self.weights is not None:
                raise AlgebraError("weights are only meaningful for weighted_l1")
            n = math.isqrt(d)
            if n * n != d:
                raise AlgebraError(f"spectral norm needs dim = n*n, got {d}")
            object.__setattr__(self, "matrix_size", n)
            expected = _matrix_unit_structure(n)
            if np.max(np.abs(self.structure - expected)) > AXIOM_TOL:
                raise AlgebraError("spectral norm requires the matrix-unit basis "
                                   "of M_n(C) in row-major order")
        else:
            if self.weights is None:
                raise AlgebraError("weighted_l1 requires weights")
            object.__setattr__(self, "weights", _checked_weights(self.weights, d))
            if self.involution is not None:
                raise AlgebraError("involution is only supported with the spectral norm")

        if self.involution is not None:
            object.__setattr__(self, "involution",
                               _checked_complex(self.involution, (d, d), "involution"))

        self._validate_axioms()
        object.__setattr__(self, "digest", _digest(
            b"derivstab-algebra-v1",
            str(d).encode(),
            self.norm_kind.encode(),
            self.structure.tobytes(),
            self.unit_coords.tobytes(),
            self.weights.tobytes() if self.weights is not None else b"",
            self.involution.tobytes() if self.involution is not None else b"",
        ))

    def _basis_norms(self) -> np.ndarray:
        if self.norm_kind == SPECTRAL:
            return np.ones(self.dim)
        return np.asarray(self.weights)

    def _validate_axioms(self) -> None:
        d = self.dim
        c = self.structure
        bn = self._basis_norms()
        args = (self.norm_kind, self.matrix_size, self.weights)

        # Associativity, one left factor at a time to keep temporaries small.
        flat_right = c.reshape(d * d, d)
        flat_left = c.reshape(d, d * d)
        for i in range(d):
            left = (c[i] @ flat_left).reshape(d, d, d)     # (e_i e_j) e_k
            right = (flat_right @ c[i]).reshape(d, d, d)   # e_i (e_j e_k), contracted
            _norm_bounded_rows(left - right, bn, *args, AXIOM_TOL,
                               f"associativity (left factor {i})")

        u = self.unit_coords
        eye = np.eye(d, dtype=np.complex128)
        _norm_bounded_rows(np.tensordot(u, c, axes=(0, 0)) - eye, bn, *args,
                           AXIOM_TOL, "left unit axiom")
        _norm_bounded_rows(np.einsum("j,ijk->ik", u, c) - eye, bn, *args,
                           AXIOM_TOL, "right unit axiom")

        if self.norm_kind == WEIGHTED_L1:
            w = self.weights
            lhs = np.tensordot(np.abs(c), w, axes=(2, 0))
            rhs = np.outer(w, w)
            if np.any(lhs > rhs + 1e-12 * np.maximum(1.0, rhs)):
                i, j = np.unravel_index(int(np.argmax(lhs - rhs)), lhs.shape)
                raise AlgebraError(
                    "weights do not make the l1 norm submultiplicative: "
                    f"sum_k w_k|c[{i},{j},k]| = {lhs[i, j]:.6g} > w_{i} w_{j} = {rhs[i, j]:.6g}")

        if self.involution is not None:
            s = self.involution
            if np.max(np.abs(s @ np.conj(s) - eye)) > AXIOM_TOL:
                raise AlgebraError("involution is not involutive: S conj(S) != I")
            _norm_bounded_rows((s @ np.conj(u) - u)[np.newaxis, :], bn, *args,
                               AXIOM_TOL, "involution must fix the unit")
            # (e_i e_j)* versus e_j* e_i* on all basis pairs.
            star_of_product = np.matmul(np.conj(c), s.T)
            tmp = np.tensordot(s, c, axes=(0, 0))          # [j, s, l]
            product_of_stars = np.tensordot(s, tmp, axes=(0, 1))  # [i, j, l]
            _norm_bounded_rows(star_of_product - product_of_stars, bn, *args,
                               AXIOM_TOL, "involution anti-multiplicativity")

    def element(self, coords) -> Element:
        return Element(self, coords)

    def basis_element(self, j: int) -> Element:
        coords = np.zeros(self.dim, dtype=np.complex128)
        coords[j] = 1.0
        return Element(self, coords)

    def zero(self) -> Element:
        return Element(self, np.zeros(self.dim, dtype=np.complex128))

    def one(self) -> Element:
        return Element(self, self.unit_coords)


@dataclass(frozen=True, eq=False)
class Element:
    """An algebra element: a coordinate vector tied to its descriptor."""

    algebra: AlgebraDescriptor
    coords: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords",
                           _checked_complex(self.coords, (self.algebra.dim,), "coords"))


@dataclass(frozen=True, eq=False)
class BimoduleDescriptor:
    """A validated bimodule over an algebra, given by action tensors.

    left_action[i, j, k] encodes e_i . x_j = sum_k L[i,j,k] x_k and
    right_action[j, i, k] encodes x_j . e_i = sum_k R[j,i,k] x_k. The unit
    must act as the identity on both sides and the actions must satisfy all
    three mixed associativity laws within 1e-12.
    """

    algebra: AlgebraDescriptor
    dim: int
    left_action: np.ndarray
    right_action: np.ndarray
    norm_kind: str
    weights: np.ndarray | None = None
    matrix_size: int | None = field(init=False, default=None)
    self_linked: bool = field(init=False, default=False)
    digest: str = field(init=False, default="")

    def __post_init__(self) -> None:
        d = self.algebra.dim
        m = self.dim
        if not isinstance(m, int) or m < 1 or m > MAX_DIM:
            raise AlgebraError(f"bimodule dim must be in 1..{MAX_DIM}, got {m!r}")
        object.__setattr__(self, "left_action",
                           _checked_complex(self.left_action, (d, m, m), "left_action"))
        object.__setattr__(self, "right_action",
                           _checked_complex(self.right_action, (m, d, m), "right_action"))
        if self.norm_kind not in _NORM_KINDS:
            raise AlgebraError(f"norm_kind must be one of {_NORM_KINDS}, got {self.norm_kind!r}")
        if self.norm_kind == SPECTRAL:
            if self.weights is not None:
                raise AlgebraError("weights are only meaningful for weighted_l1")
            n = math.isqrt(m)
            if n * n != m:
                raise AlgebraError(f"spectral norm needs dim = n*n, got {m}")
            object.__setattr__(self, "matrix_size", n)
        else:
            if self.weights is None:
                raise AlgebraError("weighted_l1 requires weights")
            object.__setattr__(self, "weights", _checked_weights(self.weights, m))

        linked = (m == d
                  and np.array_equal(self.left_action, self.algebra.structure)
                  and np.array_equal(self.right_action, self.algebra.structure))
        object.__setattr__(self, "self_linked", bool(linked))
        self._validate_axioms()
        object.__setattr__(self, "digest", _digest(
            b"derivstab-bimodule-v1",
            self.algebra.digest.encode(),
            str(m).encode(),
            self.norm_kind.encode(),
            self.left_action.tobytes(),
            self.right_action.tobytes(),
            self.weights.tobytes() if self.weights is not None else b"",
        ))

    def _basis_norms(self) -> np.ndarray:
        if self.norm_kind == SPECTRAL:
            return np.ones(self.dim)
        return np.asarray(self.weights)

    def _validate_axioms(self) -> None:
        d = self.algebra.dim
        m = self.dim
        c = self.algebra.structure
        L = self.left_action
        R = self.right_action
        bn = self._basis_norms()
        args = (self.norm_kind, self.matrix_size, self.weights)

        u = self.algebra.unit_coords
        eye = np.eye(m, dtype=np.complex128)
        _norm_bounded_rows(np.tensordot(u, L, axes=(0, 0)) - eye, bn, *args,
                           AXIOM_TOL, "unit-linked left action")
        _norm_bounded_rows(np.einsum("i,jik->jk", u, R) - eye, bn, *args,
                           AXIOM_TOL, "unit-linked right action")

        if self.self_linked:
            # The action tensors equal the validated structure tensor, so the
            # three mixed associativity laws reduce to algebra associativity.
            return

        L_flat = L.reshape(d, m * m)
        Rt_flat = R.transpose(1, 0, 2).reshape(d, m * m)
        R_flat = R.reshape(m, d * m)
        for i in range(d):
            # (e_i e_j) . x_k = e_i . (e_j . x_k)
            lhs = (c[i] @ L_flat).reshape(d, m, m)
            rhs = (L.reshape(d * m, m) @ L[i]).reshape(d, m, m)
            _norm_bounded_rows(lhs - rhs, bn, *args, AXIOM_TOL,
                               f"left-action associativity (factor {i})")
            # x_k . (e_i e_j) = (x_k . e_i) . e_j
            lhs = (c[i] @ Rt_flat).reshape(d, m, m)
            rhs = (R[:, i, :] @ R_flat).reshape(m, d, m).transpose(1, 0, 2)
            _norm_bounded_rows(lhs - rhs, bn, *args, AXIOM_TOL,
                               f"right-action associativity (factor {i})")
            # (e_i . x_k) . e_j = e_i . (x_k . e_j)
            lhs = (L[i] @ R_flat).reshape(m, d, m).transpose(1, 0, 2)
            rhs = (R.reshape(m * d, m) @ L[i]).reshape(m, d, m).transpose(1, 0, 2)
            _norm_bounded_rows(lhs - rhs, bn, *args, AXIOM_TOL,
                               f"mixed-action associativity (factor {i})")

    def element(self, coords) -> ModuleElement:
        return ModuleElement(self, coords)

    def basis_element(self, j: int) -> ModuleElement:
        coords = np.zeros(self.dim, dtype=np.complex128)
        coords[j] = 1.0
        return ModuleElement(self, coords)

    def zero(self) -> ModuleElement:
        return ModuleElement(self, np.zeros(self.dim, dtype=np.complex128))


@dataclass(frozen=True, eq=False)
class ModuleElement:
    """A bimodule element: a coordinate vector tied to its descriptor."""

    bimodule: BimoduleDescriptor
    coords: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords",
                           _checked_complex(self.coords, (self.bimodule.dim,), "coords"))


def _matrix_unit_structure(n: int) -> np.ndarray:
    d = n * n
    c = np.zeros((d, d, d), dtype=np.complex128)
    for p in range(n):
        for q in range(n):
            for s in range(n):
                # E_pq E_qs = E_ps; all other products vanish.
                c[p * n + q, q * n + s, p * n + s] = 1.0
    return c


def make_matrix_algebra(n: int) -> AlgebraDescriptor:
    """The full matrix algebra M_n(C) with spectral norm and conjugate transpose.

    Basis is the matrix units in row-major order, so an element's coordinate
    vector reshaped to (n, n) is its matrix. Requires 1 <= n <= 8.
    """
    if not isinstance(n, int) or not 1 <= n <= 8:
        raise AlgebraError(f"matrix algebra size must be an integer in 1..8, got {n!r}")
    d = n * n
    unit = np.zeros(d, dtype=np.complex128)
    for p in range(n):
        unit[p * n + p] = 1.0
    invol = np.zeros((d, d), dtype=np.complex128)
    for p in range(n):
        for q in range(n):
            invol[q * n + p, p * n + q] = 1.0
    return AlgebraDescriptor(dim=d, structure=_matrix_unit_structure(n),
                             unit_coords=unit, norm_kind=SPECTRAL,
                             involution=invol)


def make_self_bimodule(alg: AlgebraDescriptor) -> BimoduleDescriptor:
    """The algebra acting on itself; actions are the algebra product."""
    return BimoduleDescriptor(algebra=alg, dim=alg.dim,
                              left_action=alg.structure,
                              right_action=alg.structure,
                              norm_kind=alg.norm_kind, weights=alg.weights)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise AlgebraError(message)


def _same_kind(u, v) -> None:
    if isinstance(u, Element) and isinstance(v, Element):
        _require(u.algebra.digest == v.algebra.digest,
                 "elements belong to different algebras")
    elif isinstance(u, ModuleElement) and isinstance(v, ModuleElement):
        _require(u.bimodule.digest == v.bimodule.digest,
                 "elements belong to different bimodules")
    else:
        raise AlgebraError("cannot mix algebra and bimodule elements")


def _like(u, coords: np.ndarray):
    if isinstance(u, Element):
        return Element(u.algebra, coords)
    return ModuleElement(u.bimodule, coords)


def mul(a: Element, b: Element) -> Element:
    _same_kind(a, b)
    _require(isinstance(a, Element), "mul needs algebra elements; use act_left/act_right")
    tmp = np.tensordot(a.coords, a.algebra.structure, axes=(0, 0))
    return Element(a.algebra, b.coords @ tmp)


def add(u, v):
    _same_kind(u, v)
    return _like(u, u.coords + v.coords)


def sub(u, v):
    _same_kind(u, v)
    return _like(u, u.coords - v.coords)


def scale(lam: complex, u):
    lam = complex(lam)
    if not (math.isfinite(lam.real) and math.isfinite(lam.imag)):
        raise AlgebraError("scalar must be finite")
    return _like(u, lam * u.coords)


def norm(u) -> float:
    if isinstance(u, Element):
        owner = u.algebra
    else:
        owner = u.bimodule
    return _coords_norm(owner.norm_kind, owner.matrix_size, owner.weights, u.coords)


def vector_norm(space: AlgebraDescriptor | BimoduleDescriptor, coords) -> float:
    """The space's norm applied to a bare coordinate vector."""
    coords = np.asarray(coords, dtype=np.complex128)
    if coords.shape != (space.dim,):
        raise AlgebraError(f"coords must have shape ({space.dim},), got {coords.shape}")
    return _coords_norm(space.norm_kind, space.matrix_size, space.weights, coords)


def act_left(a: Element, x: ModuleElement) -> ModuleElement:
    _require(a.algebra.digest == x.bimodule.algebra.digest,
             "algebra element does not act on this bimodule")
    tmp = np.tensordot(a.coords, x.bimodule.left_action, axes=(0, 0))
    return ModuleElement(x.bimodule, x.coords @ tmp)


def act_right(x: ModuleElement, a: Element) -> ModuleElement:
    _require(a.algebra.digest == x.bimodule.algebra.digest,
             "algebra element does not act on this bimodule")
    tmp = np.tensordot(x.coords, x.bimodule.right_action, axes=(0, 0))
    return ModuleElement(x.bimodule, a.coords @ tmp)


def adjoint(u):
    """Star of an element; for module elements only over self-linked bimodules."""
    if isinstance(u, Element):
        alg = u.algebra
        _require(alg.involution is not None, "algebra has no involution")
        return Element(alg, alg.involution @ np.conj(u.coords))
    alg = u.bimodule.algebra
    _require(u.bimodule.self_linked, "adjoint on module elements needs a self-linked bimodule")
    _require(alg.involution is not None, "algebra has no involution")
    return ModuleElement(u.bimodule, alg.involution @ np.conj(u.coords))


def embed(bimod: BimoduleDescriptor, a: Element) -> ModuleElement:
    """View an algebra element as an element of the self-linked bimodule."""
    _require(bimod.self_linked, "embed needs a self-linked bimodule")
    _require(bimod.algebra.digest == a.algebra.digest,
             "element belongs to a different algebra")
    return ModuleElement(bimod, a.coords)


def coords_to_pairs(arr: np.ndarray):
    """Complex array to nested [re, im] lists (exact, JSON-friendly)."""
    arr = np.asarray(arr)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def coords_from_pairs(obj, what: str = "coords") -> np.ndarray:
    """Inverse of coords_to_pairs."""
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise AlgebraError(f"{what} must be nested [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def algebra_to_json(alg: AlgebraDescriptor) -> str:
    """Serialize a descriptor to JSON with bit-exact float round-trip.

    Floats are written as shortest round-trip decimals, so parsing the output
    reproduces every 64-bit value exactly and the digest is preserved.
    """
    doc = {
        "dim": alg.dim,
        "norm_kind": alg.norm_kind,
        "structure": coords_to_pairs(alg.structure),
        "unit": coords_to_pairs(alg.unit_coords),
        "involution": coords_to_pairs(alg.involution) if alg.involution is not None else None,
    }
    if alg.weights is not None:
        doc["weights"] = alg.weights.tolist()
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def algebra_from_json(text: str) -> AlgebraDescriptor:
    """Parse and fully re-validate a descriptor serialized by algebra_to_json."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AlgebraError(f"invalid algebra JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise AlgebraError("algebra JSON must be an object")
    allowed = {"dim", "norm_kind", "structure", "unit", "involution", "weights"}
    unknown = set(doc) - allowed
    if unknown:
        raise AlgebraError(f"unknown algebra keys: {sorted(unknown)}")
    for key in ("dim", "norm_kind", "structure", "unit"):
        if key not in doc:
            raise AlgebraError(f"algebra JSON missing key {key!r}")
    dim = doc["dim"]
    if not isinstance(dim, int):
        raise AlgebraError("dim must be an integer")
    involution = doc.get("involution")
    return AlgebraDescriptor(
        dim=dim,
        structure=coords_from_pairs(doc["structure"], "structure"),
        unit_coords=coords_from_pairs(doc["unit"], "unit"),
        norm_kind=doc["norm_kind"] if isinstance(doc["norm_kind"], str) else "",
        weights=doc.get("weights"),
        involution=coords_from_pairs(involution, "involution") if involution is not None else None,
    )
