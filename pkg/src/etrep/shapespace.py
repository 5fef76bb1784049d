"""Tube shape spaces: a convexifying coordinate map and two families of ops.

The *intrinsic* operations run through an invertible map onto a convex
subset of Euclidean space.  Each section contributes the 6 coordinates

    (c_u1, c_u2, psi, x, a, b)

where ``(c_u1, c_u2)`` is the bending direction scaled by the *bound
usage* ``|v| / min(1, x / r)`` — the fraction of the curvature bound the
section consumes.  All constraints on these coordinates (usage in
[0, 1), psi in [-pi, pi], positive lengths, a >= b) are convex, so
segments and averages taken in these coordinates map back to valid
tubes.  Paths, distances, and means defined this way stay inside the
valid set by construction.

The *non-intrinsic* operations work directly on per-section frames
(as quaternions) with linear lengths: geodesic interpolation and Fréchet
averaging of rotations.  They are natural but closure is not guaranteed:
results can violate the curvature bound, so they are returned as
:class:`FrameTube` values together with a validity report.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    CrossSection,
    ETRep,
    GlobalTube,
    InvalidETRepError,
    SectionReport,
    ValidityReport,
    _section_report,
    frame_from_local,
    local_from_frame,
    projection_magnitude,
    require_valid,
    twist_from_roll,
    validate,
    wrap_angle,
)
from .rotations import (
    ANTIPODAL_TOL,
    frechet_mean_rotations,
    geodesic_distance,
    quat_from_rotation,
    rotation_from_quat,
    slerp,
)

# Per-section coordinate layout of the convex embedding.
FEATURE_FIELDS = ("cu1", "cu2", "psi", "x", "a", "b")
SECTION_WIDTH = len(FEATURE_FIELDS)


def feature_names(n: int) -> list[str]:
    """Column names of the convex coordinates for a tube with ``n`` connections."""
    return [f"s{i}_{field}" for i in range(n + 1) for field in FEATURE_FIELDS]


@dataclass(eq=False)
class ConvexPoint:
    """A tube expressed in the convex coordinates, as one flat vector.

    ``coords`` has length ``6 * (n + 1)``; section ``i`` occupies the
    slice ``[6i : 6i + 6]`` in :data:`FEATURE_FIELDS` order.  Section 0
    is anchored: its first four coordinates are zero.
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size % SECTION_WIDTH != 0 or coords.size == 0:
            raise ValueError(
                f"coords must be a flat vector of width-{SECTION_WIDTH} section blocks, "
                f"got shape {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords contain non-finite entries")
        blocks = coords.reshape(-1, SECTION_WIDTH)
        usage = np.linalg.norm(blocks[:, 0:2], axis=1)
        if np.any(usage >= 1.0):
            bad = int(np.argmax(usage >= 1.0))
            raise ValueError(f"section {bad}: bound usage must be < 1, got {usage[bad]:.12f}")
        if np.any(np.abs(blocks[:, 2]) > math.pi):
            bad = int(np.argmax(np.abs(blocks[:, 2]) > math.pi))
            raise ValueError(f"section {bad}: roll must lie in [-pi, pi]")
        if np.any(blocks[0, 0:4] != 0.0):
            raise ValueError("section 0 must be anchored: first four coordinates zero")
        if blocks.shape[0] > 1 and np.any(blocks[1:, 3] <= 0.0):
            bad = 1 + int(np.argmax(blocks[1:, 3] <= 0.0))
            raise ValueError(f"section {bad}: connection length must be positive")
        if np.any(blocks[:, 4] < blocks[:, 5]) or np.any(blocks[:, 5] <= 0.0):
            raise ValueError("radii must satisfy a >= b > 0 in every section")
        self.coords = coords

    @property
    def n(self) -> int:
        return self.coords.size // SECTION_WIDTH - 1

    def blocks(self) -> np.ndarray:
        """View of the coordinates as an (n + 1, 6) array."""
        return self.coords.reshape(-1, SECTION_WIDTH)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """An ordered collection of tubes with a common number of sections.

    ``n`` may be given explicitly for empty collections (some consumers,
    like the feature-table writer, still need the section count).
    ``normalized`` asserts that every member has unit total size.
    """

    members: tuple[ETRep, ...]
    normalized: bool = False
    n: int | None = None

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if members:
            n = members[0].n
            if any(member.n != n for member in members):
                raise ValueError("all members must have the same number of sections")
            if self.n is not None and self.n != n:
                raise ValueError(f"declared n={self.n} does not match members (n={n})")
            object.__setattr__(self, "n", n)
        elif self.n is None:
            raise ValueError("an empty sample must declare n explicitly")
        if self.normalized:
            for k, member in enumerate(members):
                if abs(member.size() - 1.0) > 1e-9:
                    raise ValueError(f"member {k} is not size-normalized (size {member.size()!r})")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


def map_to_convex(tube: ETRep) -> ConvexPoint:
    """Embed a valid tube into the convex coordinates.

    Each bending section contributes its bound usage times its unit
    bending direction; non-bending sections contribute a zero pair.
    Raises :class:`InvalidETRepError` (listing sections) on invalid input.
    """
    report = require_valid(tube, "map_to_convex")
    blocks = np.zeros((tube.n + 1, SECTION_WIDTH))
    for i, (section, sec_report) in enumerate(zip(tube.sections, report.per_section)):
        derived = sec_report.derived
        norm = float(np.linalg.norm(section.v))
        if i > 0 and norm > 0.0:
            usage = norm / derived.bound
            blocks[i, 0:2] = usage * derived.bend_dir
        if i > 0:
            blocks[i, 2] = section.psi
            blocks[i, 3] = section.x
        blocks[i, 4] = section.a
        blocks[i, 5] = section.b
    return ConvexPoint(blocks.reshape(-1))


def map_from_convex(point: ConvexPoint) -> ETRep:
    """Invert :func:`map_to_convex`; the result is valid by construction.

    The curvature bound ``min(1, x / r)`` depends only on coordinates
    that are carried through unchanged (roll, lengths, radii), so the
    bending magnitude is recovered in closed form as usage * bound.
    """
    sections = []
    for i, block in enumerate(point.blocks()):
        pair, psi, x, a, b = block[0:2], block[2], block[3], block[4], block[5]
        usage = float(np.linalg.norm(pair))
        if i == 0 or usage == 0.0:
            v = np.zeros(2)
        else:
            bend_dir = pair / usage
            twist = twist_from_roll(bend_dir, psi)
            bound = min(1.0, x / projection_magnitude(a, b, twist))
            v = usage * bound * bend_dir
        sections.append(CrossSection(v, float(psi), float(x), float(a), float(b)))
    return ETRep(tuple(sections))


def _convex_matrix(sample: SampleSet) -> np.ndarray:
    """Stack the convex coordinates of all members into an (m, d) matrix."""
    if len(sample) == 0:
        return np.zeros((0, SECTION_WIDTH * (sample.n + 1)))
    return np.stack([map_to_convex(member).coords for member in sample.members])


def feature_matrix(sample: SampleSet) -> np.ndarray:
    """Convex coordinates of a sample as rows, aligned with :func:`feature_names`."""
    return _convex_matrix(sample)


def _check_compatible(first: ETRep, second: ETRep, context: str) -> None:
    if first.n != second.n:
        raise ValueError(
            f"{context}: tubes have different section counts ({first.n + 1} vs {second.n + 1})"
        )


def _warn_on_roll_wraparound(rolls: np.ndarray, context: str) -> None:
    """Warn when per-section rolls straddle the +/-pi seam.

    Linear averaging of rolls is used throughout; when one member sits
    near +pi and another near -pi the arithmetic mean lands near 0,
    on the far side of the circle.  Flag sections whose roll spread
    exceeds pi with values in both outer quadrants.
    """
    high = rolls.max(axis=0)
    low = rolls.min(axis=0)
    risky = (high - low > math.pi) & (high > math.pi / 2.0) & (low < -math.pi / 2.0)
    if np.any(risky):
        indices = [int(i) for i in np.nonzero(risky)[0]]
        warnings.warn(
            f"{context}: roll angles straddle +/-pi in sections {indices}; "
            "linear roll averaging may wrap around",
            RuntimeWarning,
            stacklevel=3,
        )


def intrinsic_path(start: ETRep, end: ETRep, gamma: float) -> ETRep:
    """Point ``gamma`` along the intrinsic segment between two valid tubes.

    The segment is linear in the convex coordinates, so every
    intermediate tube is valid.  ``gamma`` must lie in [0, 1].
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"path parameter must lie in [0, 1], got {gamma}")
    _check_compatible(start, end, "intrinsic_path")
    first = map_to_convex(start)
    second = map_to_convex(end)
    coords = (1.0 - gamma) * first.coords + gamma * second.coords
    return map_from_convex(ConvexPoint(coords))


def intrinsic_distance(first: ETRep, second: ETRep) -> float:
    """Euclidean distance between two valid tubes in the convex coordinates."""
    _check_compatible(first, second, "intrinsic_distance")
    delta = map_to_convex(first).coords - map_to_convex(second).coords
    return float(np.linalg.norm(delta))


def intrinsic_mean(sample: SampleSet) -> ETRep:
    """Coordinate-wise mean in the convex coordinates, mapped back.

    Valid by construction (the coordinate set is convex).  Raises on an
    empty sample.
    """
    if len(sample) == 0:
        raise ValueError("cannot average an empty sample")
    matrix = _convex_matrix(sample)
    _warn_on_roll_wraparound(matrix.reshape(len(sample), -1, SECTION_WIDTH)[:, :, 2], "intrinsic_mean")
    return map_from_convex(ConvexPoint(matrix.mean(axis=0)))


@dataclass(eq=False)
class FrameTube:
    """A tube as per-section frame quaternions plus lengths and radii.

    This is the natural habitat of the non-intrinsic operations: results
    of frame interpolation or averaging live here even when they violate
    the curvature bound, and can still be reconstructed in world
    coordinates for inspection.  Quaternions are parent-relative, one
    per section; section 0 carries the identity.
    """

    quats: np.ndarray   # (n + 1, 4)
    x: np.ndarray       # (n + 1,)
    a: np.ndarray       # (n + 1,)
    b: np.ndarray       # (n + 1,)

    def __post_init__(self):
        self.quats = np.asarray(self.quats, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        count = self.quats.shape[0]
        if self.quats.shape != (count, 4) or count < 1:
            raise ValueError(f"quats must be (n + 1, 4), got {self.quats.shape}")
        for arr, name in ((self.x, "x"), (self.a, "a"), (self.b, "b")):
            if arr.shape != (count,):
                raise ValueError(f"{name} must have shape ({count},), got {arr.shape}")
        norms = np.linalg.norm(self.quats, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("frame quaternions must be unit length")

    @property
    def n(self) -> int:
        return self.quats.shape[0] - 1

    @classmethod
    def from_etrep(cls, tube: ETRep) -> "FrameTube":
        quats = np.empty((tube.n + 1, 4))
        quats[0] = (1.0, 0.0, 0.0, 0.0)
        for i, section in enumerate(tube.sections[1:], start=1):
            quats[i] = quat_from_rotation(frame_from_local(section.v, section.psi))
        return cls(
            quats=quats,
            x=np.array([cs.x for cs in tube.sections]),
            a=np.array([cs.a for cs in tube.sections]),
            b=np.array([cs.b for cs in tube.sections]),
        )

    def _local_coordinates(self, index: int) -> tuple[np.ndarray, float]:
        """(v, psi) of one section; ValueError on hemisphere violation."""
        if index == 0:
            return np.zeros(2), 0.0
        return local_from_frame(rotation_from_quat(self.quats[index]))

    def to_etrep(self, metadata: dict | None = None) -> ETRep:
        """Convert back to parent-frame coordinates.

        Possible only while every tangent stays in its parent's forward
        hemisphere; otherwise ValueError names the offending section.
        """
        sections = []
        for i in range(self.n + 1):
            try:
                v, psi = self._local_coordinates(i)
            except ValueError as exc:
                raise ValueError(f"section {i}: {exc}") from exc
            sections.append(CrossSection(v, psi, float(self.x[i]), float(self.a[i]), float(self.b[i])))
        return ETRep(tuple(sections), metadata or {})

    def validity_report(self) -> ValidityReport:
        """Per-section validity, including hemisphere failures.

        Sections whose tangents leave the forward hemisphere cannot even
        be expressed in parent-frame coordinates; they are reported
        invalid with an explanatory message rather than raising.
        """
        carried = np.array([1.0, 0.0])
        reports = []
        for i in range(self.n + 1):
            try:
                v, psi = self._local_coordinates(i)
            except ValueError as exc:
                reports.append(
                    SectionReport(
                        index=i, ok=False, rcc_ok=False, margin=math.nan,
                        derived=None, messages=[str(exc)],
                    )
                )
                continue
            section = CrossSection(v, psi, float(self.x[i]), float(self.a[i]), float(self.b[i]))
            report, carried = _section_report(section, i, carried)
            reports.append(report)
        return ValidityReport(valid=all(r.ok for r in reports), per_section=reports)

    def reconstruct(self) -> GlobalTube:
        """World coordinates by direct frame chaining (no validity needed)."""
        count = self.n + 1
        points = np.zeros((count, 3))
        frames = np.zeros((count, 3, 3))
        frames[0] = rotation_from_quat(self.quats[0])
        for i in range(1, count):
            frames[i] = frames[i - 1] @ rotation_from_quat(self.quats[i])
            points[i] = points[i - 1] + self.x[i] * frames[i][:, 0]
        return GlobalTube(points=points, frames=frames, radii=np.column_stack([self.a, self.b]))


def nonintrinsic_path(
    start: ETRep, end: ETRep, gamma: float
) -> tuple[FrameTube, ValidityReport]:
    """Frame-wise geodesic between two valid tubes, with linear lengths.

    Each section's frame follows the rotation geodesic (quaternion
    slerp); lengths and radii interpolate linearly.  The result is not
    guaranteed to satisfy the curvature bound, so it is returned as a
    :class:`FrameTube` with its validity report.  Raises ValueError when
    some section's frames are a half turn apart (no unique geodesic).
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"path parameter must lie in [0, 1], got {gamma}")
    _check_compatible(start, end, "nonintrinsic_path")
    require_valid(start, "nonintrinsic_path")
    require_valid(end, "nonintrinsic_path")
    first = FrameTube.from_etrep(start)
    second = FrameTube.from_etrep(end)
    quats = np.empty_like(first.quats)
    for i in range(first.n + 1):
        if abs(float(first.quats[i] @ second.quats[i])) < ANTIPODAL_TOL:
            raise ValueError(
                f"section {i}: frames are a half turn apart; the rotation geodesic is ambiguous"
            )
        quats[i] = slerp(first.quats[i], second.quats[i], gamma)
    state = FrameTube(
        quats=quats,
        x=(1.0 - gamma) * first.x + gamma * second.x,
        a=(1.0 - gamma) * first.a + gamma * second.a,
        b=(1.0 - gamma) * first.b + gamma * second.b,
    )
    return state, state.validity_report()


def nonintrinsic_distance(first: ETRep, second: ETRep) -> float:
    """Product-metric distance: frame geodesics plus length differences.

    The square is the sum over sections of the squared rotation geodesic
    distance and the squared differences of x, a, and b.
    """
    _check_compatible(first, second, "nonintrinsic_distance")
    require_valid(first, "nonintrinsic_distance")
    require_valid(second, "nonintrinsic_distance")
    one = FrameTube.from_etrep(first)
    two = FrameTube.from_etrep(second)
    total = 0.0
    for i in range(one.n + 1):
        total += geodesic_distance(one.quats[i], two.quats[i]) ** 2
    total += float(np.sum((one.x - two.x) ** 2))
    total += float(np.sum((one.a - two.a) ** 2))
    total += float(np.sum((one.b - two.b) ** 2))
    return math.sqrt(total)


def nonintrinsic_mean(sample: SampleSet) -> tuple[FrameTube, ValidityReport]:
    """Per-section Fréchet frame mean with arithmetic lengths.

    Closure is not guaranteed: the mean can violate the curvature bound
    even when every member is valid, so the result is returned as a
    :class:`FrameTube` with its validity report.
    """
    if len(sample) == 0:
        raise ValueError("cannot average an empty sample")
    states = []
    for member in sample.members:
        require_valid(member, "nonintrinsic_mean")
        states.append(FrameTube.from_etrep(member))
    rolls = np.array([[cs.psi for cs in member.sections] for member in sample.members])
    _warn_on_roll_wraparound(rolls, "nonintrinsic_mean")
    count = states[0].n + 1
    quats = np.empty((count, 4))
    for i in range(count):
        quats[i] = frechet_mean_rotations([state.quats[i] for state in states])
    state = FrameTube(
        quats=quats,
        x=np.mean([state.x for state in states], axis=0),
        a=np.mean([state.a for state in states], axis=0),
        b=np.mean([state.b for state in states], axis=0),
    )
    return state, state.validity_report()


def normalize_sample(sample: SampleSet) -> SampleSet:
    """Scale every member to unit total size."""
    return SampleSet(
        tuple(member.normalize() for member in sample.members),
        normalized=True,
        n=sample.n,
    )


def intrinsic_shape_mean(sample: SampleSet) -> ETRep:
    """Intrinsic mean of the size-normalized sample (shape, not scale)."""
    return intrinsic_mean(normalize_sample(sample))


def nonintrinsic_shape_mean(sample: SampleSet) -> tuple[FrameTube, ValidityReport]:
    """Non-intrinsic mean of the size-normalized sample."""
    return nonintrinsic_mean(normalize_sample(sample))
