"""Small geometric helpers shared by the environments and the controllers."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def is_close(a, b, tol: float = 0.02) -> bool:
    """True iff the Euclidean distance between two 3-vectors is <= tol.

    The boundary is closed: a distance exactly equal to ``tol`` counts as
    close.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return bool(np.linalg.norm(a - b) <= tol)


def normalize_euler_angle(angles, symmetric_z: bool = False) -> np.ndarray:
    """Wrap Euler angles into (-pi, pi] per component.

    With ``symmetric_z`` the z component is additionally wrapped modulo pi
    into (-pi/2, pi/2], which treats yaw rotations that differ by 180 degrees
    as equivalent (a two-finger gripper grasps the same way either way round).
    """
    angles = np.asarray(angles, dtype=np.float64)
    if not np.all(np.isfinite(angles)):
        raise ValueError(f"angles must be finite, got {angles}")
    wrapped = np.mod(angles, TWO_PI)
    wrapped = np.where(wrapped > np.pi, wrapped - TWO_PI, wrapped)
    if symmetric_z:
        z = np.mod(wrapped[..., 2], np.pi)
        z = np.where(z > np.pi / 2, z - np.pi, z)
        wrapped[..., 2] = z
    return wrapped


def euler_to_quaternion(angles) -> np.ndarray:
    """Quaternion (x, y, z, w) for extrinsic x-y-z Euler angles.

    Rotations are composed about the fixed frame axes in x, y, z order, i.e.
    R = Rz(c) @ Ry(b) @ Rx(a) for angles (a, b, c).
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (3,):
        raise ValueError(f"expected 3 Euler angles, got shape {angles.shape}")
    if not np.all(np.isfinite(angles)):
        raise ValueError(f"angles must be finite, got {angles}")
    half = 0.5 * angles
    cr, cp, cy = np.cos(half)
    sr, sp, sy = np.sin(half)
    return np.array([
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
        cr * cp * cy + sr * sp * sy,
    ])


def angular_error(achieved, desired):
    """Norm of the wrapped Euler-angle difference, yaw symmetric across pi.

    Accepts single triples or batches of rows; returns a scalar or a vector
    of norms accordingly.
    """
    diff = normalize_euler_angle(
        np.asarray(achieved, dtype=np.float64) - np.asarray(desired, dtype=np.float64),
        symmetric_z=True,
    )
    norm = np.linalg.norm(diff, axis=-1)
    return float(norm) if norm.ndim == 0 else norm
