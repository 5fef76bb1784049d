"""Shared builders and independent oracles for the test suite."""

import numpy as np

from etrep.model import CrossSection, ETRep
from etrep.rotations import canonical_sign
from etrep.shapespace import ConvexPoint, map_from_convex


def random_quaternion(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    return canonical_sign(q / np.linalg.norm(q))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    from etrep.rotations import rotation_from_quat

    return rotation_from_quat(random_quaternion(rng))


def random_valid_etrep(
    rng: np.random.Generator,
    n: int,
    max_usage: float = 0.95,
    roll_limit: float = np.pi - 1e-6,
) -> ETRep:
    """Draw a valid tube by sampling inside the convex coordinate set.

    ``roll_limit`` bounds |psi|; keep it below pi/2 in tests that
    average rolls, to stay clear of the wraparound warning.
    """
    blocks = np.zeros((n + 1, 6))
    blocks[:, 4] = rng.uniform(0.2, 2.0, n + 1)
    blocks[:, 5] = blocks[:, 4] * rng.uniform(0.25, 1.0, n + 1)
    usage = rng.uniform(0.0, max_usage, n)
    azimuth = rng.uniform(-np.pi, np.pi, n)
    blocks[1:, 0] = usage * np.cos(azimuth)
    blocks[1:, 1] = usage * np.sin(azimuth)
    blocks[1:, 2] = rng.uniform(-roll_limit, roll_limit, n)
    blocks[1:, 3] = rng.uniform(0.05, 2.0, n)
    return map_from_convex(ConvexPoint(blocks.reshape(-1)))


def break_curvature_bound(tube: ETRep, rng: np.random.Generator) -> ETRep:
    """Inflate one bending section's |v| past its curvature bound."""
    from etrep.model import rcc_check

    index = int(rng.integers(1, tube.n + 1))
    sections = list(tube.sections)
    target = sections[index]
    direction = target.v / np.linalg.norm(target.v) if np.linalg.norm(target.v) > 0 else np.array([1.0, 0.0])
    _, _, derived = rcc_check(target, None)
    overshoot = min(0.999, derived.bound * rng.uniform(1.05, 1.5))
    if overshoot <= derived.bound:  # bound close to 1: push right up to the cap
        overshoot = 0.5 * (derived.bound + 1.0)
    sections[index] = CrossSection(overshoot * direction, target.psi, target.x, target.a, target.b)
    return ETRep(tuple(sections))


def karcher_mean_oracle(quats, tol: float = 5e-14, max_iterations: int = 2000) -> np.ndarray:
    """Karcher mean of rotations computed with scipy, seeded at the first element.

    Iterates mean <- mean * exp(average log(mean^-1 * R_i)) on SO(3);
    independent of the package's eigen-seeded sphere iteration.
    """
    from scipy.spatial.transform import Rotation

    qs = np.asarray(quats, dtype=float)
    rots = Rotation.from_quat(qs[:, [1, 2, 3, 0]])  # package order is wxyz
    mean = rots[0]
    for _ in range(max_iterations):
        step = (mean.inv() * rots).as_rotvec().mean(axis=0)
        if np.linalg.norm(step) < tol:
            break
        mean = mean * Rotation.from_rotvec(step)
    x, y, z, w = mean.as_quat()
    return canonical_sign(np.array([w, x, y, z]))


def bh_oracle(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up, written as an explicit min-scan."""
    p = np.asarray(p_values, dtype=float)
    count = p.size
    order = sorted(range(count), key=lambda i: p[i])
    adjusted = np.empty(count)
    best = 1.0
    for rank in range(count, 0, -1):
        i = order[rank - 1]
        best = min(best, p[i] * count / rank)
        adjusted[i] = best
    return adjusted


def measured_twist(tube_section: CrossSection) -> float:
    """Angle from the major axis to the spine normal, measured on geometry.

    Builds a two-section tube, reconstructs it, computes the spine
    normal from the tangents, and reads off the signed angle about the
    tangent.  Independent of the closed-form twist arithmetic.
    """
    from etrep.model import ETRep, compute_normals, reconstruct_global

    anchor = CrossSection(np.zeros(2), 0.0, 0.0, tube_section.a, tube_section.b)
    tube = ETRep((anchor, tube_section))
    world = reconstruct_global(tube, allow_invalid=True)
    normal = compute_normals(world)[1]
    tangent = world.frames[1][:, 0]
    major = world.frames[1][:, 1]
    return float(np.arctan2(np.cross(major, normal) @ tangent, major @ normal))
