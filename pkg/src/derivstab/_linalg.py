"""Dense complex linear-algebra kernels: power-iteration spectral norm,
cyclic Jacobi diagonalization for Hermitian matrices, PSD square root.

Everything here is sized for desk-scale matrices (n <= 64); robustness and
determinism are preferred over speed.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ConvergenceError",
    "spectral_norm",
    "jacobi_eigh",
    "hermitian_sqrt_psd",
]

# Fixed seed for the power-iteration start vector: the result must be
# bit-stable across runs, and a generic start avoids accidental
# orthogonality to the dominant eigenspace.
_START_SEED = 0x5EED0_1

_POWER_TOL = 1e-12
_POWER_MAX_ITER = 10_000

_JACOBI_TOL = 1e-13
_JACOBI_MAX_SWEEPS = 100


class ConvergenceError(RuntimeError):
    """An iterative kernel hit its iteration cap before reaching tolerance."""


def spectral_norm(mat: np.ndarray, tol: float = _POWER_TOL,
                  max_iter: int = _POWER_MAX_ITER) -> float:
    """Largest singular value of a complex matrix by power iteration on A*A.

    Stops when the geometric-decay error estimate falls below `tol` relative
    to the current Rayleigh quotient. A tight leading cluster may be resolved
    only to its width: inside a cluster the step ratio is not yet the true
    decay rate, so the estimate can fire while the iterate still sits up to
    the cluster width below the top. A wider near-tie instead drives the
    iteration count past any fixed cap, so once `max_iter` is exhausted the
    cyclic Jacobi solver, whose convergence does not depend on spectral
    gaps, finishes the job.
    """
    a = np.asarray(mat, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError("spectral_norm expects a 2-d matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("spectral_norm requires finite entries")
    # Scale out the magnitude so B = A*A cannot overflow and the tolerance
    # is genuinely relative.
    amax = np.max(np.abs(a))
    if amax == 0.0:
        return 0.0
    a = a / amax
    b = a.conj().T @ a
    n = b.shape[1]
    eps = float(np.finfo(float).eps)
    rng = np.random.default_rng(_START_SEED)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(np.real(v.conj() @ (b @ v)))
    prev_step = np.inf
    for _ in range(max_iter):
        w = b @ v
        wn = np.linalg.norm(w)
        if wn == 0.0:
            # v landed in the kernel of a*a; restart deterministically.
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        v = w / wn
        lam_new = float(np.real(v.conj() @ (b @ v)))
        step = abs(lam_new - lam)
        lam = lam_new
        # Steps shrink geometrically; step * r / (1 - r) bounds the remaining
        # error once the ratio r stabilizes. The eps floor stops iterations
        # that can no longer make progress against rounding noise.
        if step <= 32.0 * eps * lam:
            return float(np.sqrt(max(lam, 0.0))) * float(amax)
        if np.isfinite(prev_step):
            r = min(step / prev_step, 0.999999)
            if step * r / (1.0 - r) <= tol * lam:
                return float(np.sqrt(lam)) * float(amax)
        prev_step = step
    w, _ = jacobi_eigh((b + b.conj().T) / 2.0)
    return float(np.sqrt(max(float(np.max(w)), 0.0))) * float(amax)


def jacobi_eigh(h: np.ndarray, tol: float = _JACOBI_TOL,
                max_sweeps: int = _JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns (w, v) with h = v @ diag(w) @ v*. Stops when the off-diagonal
    Frobenius mass drops below `tol` relative to the matrix scale; raises
    ConvergenceError after `max_sweeps` full sweeps.
    """
    a = np.array(h, dtype=np.complex128)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("jacobi_eigh expects a square matrix")
    if np.max(np.abs(a - a.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise ValueError("jacobi_eigh expects a Hermitian matrix")
    v = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= tol * scale / (n * n):
                    continue
                phase = apq / r
                tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if tau != 0.0:
                    t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # Unitary rotation in the (p, q) plane with the phase of
                # a[p, q] absorbed so the real Jacobi angle applies.
                cols = a[:, [p, q]].copy()
                a[:, p] = cols[:, 0] * c - cols[:, 1] * s * np.conj(phase)
                a[:, q] = cols[:, 0] * s * phase + cols[:, 1] * c
                rows = a[[p, q], :].copy()
                a[p, :] = rows[0, :] * c - rows[1, :] * s * phase
                a[q, :] = rows[0, :] * s * np.conj(phase) + rows[1, :] * c
                a[p, q] = 0.0
                a[q, p] = 0.0
                vcols = v[:, [p, q]].copy()
                v[:, p] = vcols[:, 0] * c - vcols[:, 1] * s * np.conj(phase)
                v[:, q] = vcols[:, 0] * s * phase + vcols[:, 1] * c
    else:
        raise ConvergenceError(
            f"Jacobi sweep cap {max_sweeps} reached before off-diagonal tolerance")
    return np.diag(a).real.copy(), v


def hermitian_sqrt_psd(h: np.ndarray, clamp: float = 1e-12) -> np.ndarray:
    """Hermitian square root of a positive-semidefinite matrix.

    Eigenvalues in [-clamp, 0) are treated as roundoff and clamped to 0;
    anything more negative is a genuine violation and raises ValueError.
    """
    w, v = jacobi_eigh(h)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if np.any(w < -clamp * scale):
        raise ValueError("matrix is not positive semidefinite")
    w = np.where(w < 0.0, 0.0, w)
    root = (v * np.sqrt(w)) @ v.conj().T
    # Re-hermitize to kill the last-ulp asymmetry from the rotations.
    return (root + root.conj().T) / 2.0
