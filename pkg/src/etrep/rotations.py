"""Rotation and unit-quaternion algebra for chained cross-section frames.

Conventions used throughout the package:

- A rotation is a 3x3 orthonormal matrix with determinant +1.  Columns
  are the frame axes: tangent, ellipse major axis, ellipse minor axis.
- A quaternion is a length-4 float array ``[w, x, y, z]`` (scalar
  first), kept at unit norm.  ``q`` and ``-q`` encode the same rotation,
  so quaternions are stored in canonical sign: ``w >= 0``, and when
  ``w == 0`` the first nonzero component is positive.  Binary operations
  (distance, interpolation, averaging) additionally align signs
  explicitly so results never depend on the representative chosen.
"""

from __future__ import annotations

import math

import numpy as np

# Validation tolerances.
ORTHONORMAL_TOL = 1e-10  # orthonormality / determinant of rotation matrices
UNIT_NORM_TOL = 1e-12    # quaternion unit norm
ANTIPODAL_TOL = 1e-8     # opposite-vector / half-turn cutoffs
EIGENGAP_TOL = 1e-10     # ambiguous-mean detection (normalized eigengap)

_IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])
_EYE3 = np.eye(3)
_EYE3.flags.writeable = False


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors.

    Equivalent to ``np.cross`` but written out, because ``np.cross``
    spends most of its time on axis bookkeeping at this size and these
    products sit inside per-section loops.
    """
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def check_rotation(matrix, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Validate a rotation matrix, returning it as a float64 array.

    Raises ValueError unless ``matrix`` is 3x3, orthonormal within
    ``tol`` and has determinant +1 within ``tol``.
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"rotation must be a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("rotation matrix contains non-finite entries")
    err = np.abs(m.T @ m - _EYE3).max()
    if err > tol:
        raise ValueError(f"matrix is not orthonormal (max deviation {err:.3e} > {tol:.1e})")
    det = float(m[0] @ cross3(m[1], m[2]))  # triple product; cheaper than LAPACK
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix determinant {det:.12f} is not +1; not a proper rotation")
    return m


def canonical_sign(quat) -> np.ndarray:
    """Return the sign-canonical representative of a unit quaternion.

    Ensures w >= 0; if w == 0, the first nonzero component is positive.
    """
    q = np.asarray(quat, dtype=float)
    for component in q:
        if component > 0.0:
            return q.copy()
        if component < 0.0:
            return -q
    raise ValueError("zero quaternion has no canonical sign")


def check_quaternion(quat, tol: float = UNIT_NORM_TOL) -> np.ndarray:
    """Validate a unit quaternion, returning it as a float64 array."""
    q = np.asarray(quat, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"quaternion must be a length-4 array, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("quaternion contains non-finite entries")
    err = abs(float(q @ q) - 1.0)
    if err > 2.0 * tol:
        raise ValueError(f"quaternion norm deviates from 1 by {err:.3e} (tolerance {tol:.1e})")
    return q


def quat_from_rotation(matrix) -> np.ndarray:
    """Convert a rotation matrix to its canonical unit quaternion.

    Uses the numerically stable branch selection on the largest of
    trace/diagonal terms, then renormalizes and canonicalizes the sign.
    """
    m = check_rotation(matrix)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0.0:
        s = np.sqrt(trace + 1.0) * 2.0
        q = np.array([
            0.25 * s,
            (m[2, 1] - m[1, 2]) / s,
            (m[0, 2] - m[2, 0]) / s,
            (m[1, 0] - m[0, 1]) / s,
        ])
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array([
            (m[2, 1] - m[1, 2]) / s,
            0.25 * s,
            (m[0, 1] + m[1, 0]) / s,
            (m[0, 2] + m[2, 0]) / s,
        ])
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 - m[0, 0] + m[1, 1] - m[2, 2]) * 2.0
        q = np.array([
            (m[0, 2] - m[2, 0]) / s,
            (m[0, 1] + m[1, 0]) / s,
            0.25 * s,
            (m[1, 2] + m[2, 1]) / s,
        ])
    else:
        s = np.sqrt(1.0 - m[0, 0] - m[1, 1] + m[2, 2]) * 2.0
        q = np.array([
            (m[1, 0] - m[0, 1]) / s,
            (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s,
            0.25 * s,
        ])
    q /= np.linalg.norm(q)
    return canonical_sign(q)


def rotation_from_quat(quat) -> np.ndarray:
    """Convert a unit quaternion to a rotation matrix."""
    w, x, y, z = check_quaternion(quat)
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ])


def geodesic_distance(quat_p, quat_q) -> float:
    """Geodesic distance between two unit quaternions, sign-aligned.

    Returns ``arccos(|p . q|)``, which lies in [0, pi/2] and treats q
    and -q as the same rotation.
    """
    p = check_quaternion(quat_p)
    q = check_quaternion(quat_q)
    dot = abs(float(p @ q))
    return float(np.arccos(min(dot, 1.0)))


def slerp(quat_p, quat_q, gamma: float) -> np.ndarray:
    """Spherical linear interpolation between unit quaternions.

    The second argument is sign-aligned to the first, so interpolation
    always follows the shorter arc.  Endpoints reproduce the inputs up
    to quaternion sign.  ``gamma`` must lie in [0, 1].
    """
    p = check_quaternion(quat_p)
    q = check_quaternion(quat_q)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {gamma}")
    dot = float(p @ q)
    if dot < 0.0:
        q = -q
        dot = -dot
    if gamma == 0.0:
        return p.copy()
    if gamma == 1.0:
        return q.copy()
    dot = min(dot, 1.0)
    angle = np.arccos(dot)
    if angle < 1e-12:
        return p.copy()
    sin_angle = np.sin(angle)
    out = (np.sin((1.0 - gamma) * angle) * p + np.sin(gamma * angle) * q) / sin_angle
    return out / np.linalg.norm(out)


def rotate_about_axis(axis, angle: float) -> np.ndarray:
    """Rotation matrix for a turn of ``angle`` radians about a unit axis."""
    t = np.asarray(axis, dtype=float)
    if t.shape != (3,):
        raise ValueError(f"axis must be a 3-vector, got shape {t.shape}")
    norm = math.sqrt(float(t @ t))
    if abs(norm - 1.0) > ANTIPODAL_TOL:
        raise ValueError(f"axis must be unit length, got norm {norm:.12f}")
    c, s = np.cos(angle), np.sin(angle)
    skew = np.array([
        [0.0, -t[2], t[1]],
        [t[2], 0.0, -t[0]],
        [-t[1], t[0], 0.0],
    ])
    return _EYE3 + s * skew + (1.0 - c) * (np.outer(t, t) - _EYE3)


def minimal_rotation(start, target) -> np.ndarray:
    """Smallest rotation carrying unit vector ``start`` onto ``target``.

    Rotates in the plane spanned by the two vectors and fixes their
    common normal; opposite vectors have no unique such rotation and
    raise ValueError.
    """
    a = np.asarray(start, dtype=float)
    b = np.asarray(target, dtype=float)
    for name, vec in (("start", a), ("target", b)):
        if vec.shape != (3,):
            raise ValueError(f"{name} must be a 3-vector, got shape {vec.shape}")
        norm = math.sqrt(float(vec @ vec))
        if abs(norm - 1.0) > ANTIPODAL_TOL:
            raise ValueError(f"{name} must be unit length, got norm {norm:.12f}")
    c = float(a @ b)
    if c <= -1.0 + ANTIPODAL_TOL:
        raise ValueError("vectors are (near-)opposite; minimal rotation is ambiguous")
    k = cross3(a, b)
    skew = np.array([
        [0.0, -k[2], k[1]],
        [k[2], 0.0, -k[0]],
        [-k[1], k[0], 0.0],
    ])
    return _EYE3 + skew + (skew @ skew) / (1.0 + c)


def _quat_log(base: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Tangent vector at ``base`` pointing toward ``q`` along the sphere."""
    dot = min(max(float(base @ q), -1.0), 1.0)
    residual = q - dot * base
    rnorm = np.linalg.norm(residual)
    if rnorm < 1e-15:
        return np.zeros(4)
    return np.arccos(dot) * residual / rnorm


def _quat_exp(base: np.ndarray, tangent: np.ndarray) -> np.ndarray:
    """Point reached from ``base`` along tangent vector ``tangent``."""
    angle = np.linalg.norm(tangent)
    if angle < 1e-15:
        return base.copy()
    return np.cos(angle) * base + np.sin(angle) * (tangent / angle)


def frechet_mean_rotations(quats, max_iterations: int = 200, tol: float = 1e-14) -> np.ndarray:
    """Fréchet mean of unit quaternions under the geodesic metric.

    The iteration is seeded with the principal eigenvector of the
    sign-invariant outer-product average (exact for two elements and for
    symmetric configurations) and refined by intrinsic gradient steps on
    the quaternion sphere until the mean tangent update drops below
    ``tol``.  The procedure is deterministic: input order only affects
    floating-point summation order.

    Raises ValueError on an empty sample and when the mean is ambiguous
    (leading eigenvalue of the outer-product average repeated within
    1e-10, e.g. two rotations a half turn apart).
    """
    qs = [check_quaternion(q) for q in quats]
    if not qs:
        raise ValueError("cannot average an empty collection of quaternions")
    if len(qs) == 1:
        return canonical_sign(qs[0])

    accum = np.zeros((4, 4))
    for q in qs:
        accum += np.outer(q, q)
    accum /= len(qs)
    eigvals, eigvecs = np.linalg.eigh(accum)
    if eigvals[-1] - eigvals[-2] < EIGENGAP_TOL:
        raise ValueError(
            "rotation mean is ambiguous: leading eigenvalue of the "
            f"outer-product average is repeated (gap {eigvals[-1] - eigvals[-2]:.3e})"
        )
    mean = canonical_sign(eigvecs[:, -1])
    mean /= np.linalg.norm(mean)

    for _ in range(max_iterations):
        step = np.zeros(4)
        for q in qs:
            aligned = q if float(mean @ q) >= 0.0 else -q
            step += _quat_log(mean, aligned)
        step /= len(qs)
        if np.linalg.norm(step) < tol:
            break
        mean = _quat_exp(mean, step)
        mean /= np.linalg.norm(mean)
    return canonical_sign(mean)
