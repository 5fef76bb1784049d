"""Discrete elliptical tube model.

A tube is a chain of elliptical cross-sections along a spine.  The
representation is alignment-free: each cross-section is written in the
coordinate system of its parent (the previous cross-section), so the
whole tube is invariant under rigid motions.  Section ``i`` stores:

- ``v``: the projection of the section's tangent onto the parent
  slicing plane (a 2-vector with norm < 1; the norm is the sine of the
  bending angle between consecutive tangents),
- ``psi``: the roll about the tangent relative to the canonical
  minimal-rotation alignment with the parent frame, in radians,
- ``x``: the length of the spinal connection from the parent center,
- ``a``, ``b``: the semi-major and semi-minor ellipse radii (a >= b).

Section 0 anchors the chain and is held at the reference pose:
``v = 0``, ``psi = 0``, ``x = 0``.

A tube is *valid* when every section satisfies the relative curvature
condition ``|v| <= min(1, x / r)``, where ``r`` is the extent of the
parent ellipse along the bending direction (see
:func:`projection_magnitude`).  Valid tubes have locally
non-self-intersecting boundary surfaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rotations import check_rotation, cross3, minimal_rotation, rotate_about_axis

# Strictness margin for the curvature-bound inequality.
RCC_EPS = 1e-9
# Below this, consecutive tangents are treated as parallel when
# computing spine normals (the previous normal is carried forward).
PARALLEL_TOL = 1e-9

_E1 = np.array([1.0, 0.0, 0.0])


class InvalidETRepError(ValueError):
    """Raised when an operation requires a valid tube but got an invalid one.

    Carries the full :class:`ValidityReport` on the ``report`` attribute
    when one is available.
    """

    def __init__(self, message: str, report: "ValidityReport | None" = None):
        super().__init__(message)
        self.report = report


def wrap_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi) (pi maps to -pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True, eq=False)
class CrossSection:
    """One elliptical cross-section in parent-frame coordinates."""

    v: np.ndarray
    psi: float
    x: float
    a: float
    b: float

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (2,):
            raise ValueError(f"v must be a 2-vector, got shape {v.shape}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "v", v)
        for name in ("psi", "x", "a", "b"):
            object.__setattr__(self, name, float(getattr(self, name)))
        values = [*v, self.psi, self.x, self.a, self.b]
        if not all(math.isfinite(val) for val in values):
            raise ValueError("cross-section fields must be finite")

    def allclose(self, other: "CrossSection", atol: float = 1e-12) -> bool:
        return (
            np.allclose(self.v, other.v, rtol=0.0, atol=atol)
            and abs(self.psi - other.psi) <= atol
            and abs(self.x - other.x) <= atol
            and abs(self.a - other.a) <= atol
            and abs(self.b - other.b) <= atol
        )


@dataclass(frozen=True, eq=False)
class ETRep:
    """A discrete elliptical tube: sections 0..n in parent-frame coordinates."""

    sections: tuple[CrossSection, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        sections = tuple(self.sections)
        if not sections:
            raise ValueError("a tube needs at least one cross-section")
        if not all(isinstance(cs, CrossSection) for cs in sections):
            raise TypeError("sections must be CrossSection instances")
        object.__setattr__(self, "sections", sections)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n(self) -> int:
        """Number of connections (sections minus one)."""
        return len(self.sections) - 1

    def size(self) -> float:
        """Total of all lengths: sum over sections of x + a + b."""
        return float(sum(cs.x + cs.a + cs.b for cs in self.sections))

    def scale(self, factor: float) -> "ETRep":
        """Uniformly scale all lengths (x, a, b) by ``factor`` > 0.

        Bending directions and rolls are dimensionless and unchanged;
        scaling therefore preserves validity exactly.
        """
        factor = float(factor)
        if not (factor > 0.0 and math.isfinite(factor)):
            raise ValueError(f"scale factor must be positive and finite, got {factor}")
        return ETRep(
            tuple(
                CrossSection(cs.v, cs.psi, cs.x * factor, cs.a * factor, cs.b * factor)
                for cs in self.sections
            ),
            dict(self.metadata),
        )

    def normalize(self) -> "ETRep":
        """Scale the tube to unit total size."""
        return self.scale(1.0 / self.size())

    def allclose(self, other: "ETRep", atol: float = 1e-12) -> bool:
        return self.n == other.n and all(
            mine.allclose(theirs, atol)
            for mine, theirs in zip(self.sections, other.sections)
        )


def straight_tube(n: int, x: float = 1.0, a: float = 1.0, b: float = 1.0) -> ETRep:
    """A straight, untwisted tube with ``n`` identical connections."""
    head = CrossSection(np.zeros(2), 0.0, 0.0, a, b)
    body = tuple(CrossSection(np.zeros(2), 0.0, x, a, b) for _ in range(n))
    return ETRep((head,) + body)


@dataclass(eq=False)
class DerivedCrossSection:
    """Quantities derived from a cross-section during validity checking.

    ``bend_dir`` is the unit bending direction in the parent plane; when
    the section does not bend (``|v| = 0``) it is carried forward from
    the most recent bending section (``bend_dir_defined`` is False).
    """

    bend_dir: np.ndarray
    bend_dir_defined: bool
    bend_angle: float   # arcsin(|v|): angle between consecutive tangents
    twist: float        # angle from the parent major axis to the bending direction
    projection: float   # parent-ellipse extent along the bending direction
    curvature: float    # discrete curvature sin(bend_angle) / x (0 when x == 0)
    bound: float        # min(1, x / projection)
    margin: float       # bound - |v|; negative means the bound is violated


@dataclass(eq=False)
class SectionReport:
    index: int
    ok: bool
    rcc_ok: bool
    margin: float
    derived: DerivedCrossSection | None
    messages: list[str] = field(default_factory=list)


@dataclass(eq=False)
class ValidityReport:
    valid: bool
    per_section: list[SectionReport]

    def failing_indices(self) -> list[int]:
        return [report.index for report in self.per_section if not report.ok]

    def lines(self) -> list[str]:
        out = []
        for report in self.per_section:
            status = "ok" if report.ok else "FAIL"
            margin = f"{report.margin:+.6f}" if math.isfinite(report.margin) else "n/a"
            line = f"section {report.index}: {status} margin={margin}"
            if report.messages:
                line += "  (" + "; ".join(report.messages) + ")"
            out.append(line)
        out.append("overall: " + ("VALID" if self.valid else "INVALID"))
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def projection_magnitude(a, b, twist):
    """Extent of an ellipse with radii (a, b) along a direction in its plane.

    ``twist`` is the angle from the major axis to the direction.  The
    extent is the amplitude of the ellipse boundary's signed projection
    onto that direction: sqrt(a^2 cos^2(twist) + b^2 sin^2(twist)).
    Broadcasts over array inputs; radii must be positive.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    twist = np.asarray(twist, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise ValueError("ellipse radii must be positive")
    result = np.sqrt((a * np.cos(twist)) ** 2 + (b * np.sin(twist)) ** 2)
    if result.ndim == 0:
        return float(result)
    return result


def twist_from_roll(bend_dir, psi: float) -> float:
    """Angle from the parent major axis to the bending direction.

    Under the canonical frame construction, rolling the section by
    ``psi`` rotates the parent's major axis away from the bending
    azimuth, so the twist is ``azimuth(bend_dir) - psi`` wrapped to
    [-pi, pi).
    """
    u = np.asarray(bend_dir, dtype=float)
    if u.shape != (2,):
        raise ValueError(f"bending direction must be a 2-vector, got shape {u.shape}")
    norm = np.linalg.norm(u)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"bending direction must be unit length, got norm {norm:.12f}")
    return wrap_angle(math.atan2(u[1], u[0]) - psi)


def roll_from_twist(bend_dir, twist: float) -> float:
    """Inverse of :func:`twist_from_roll` (up to angle wrapping)."""
    u = np.asarray(bend_dir, dtype=float)
    if u.shape != (2,):
        raise ValueError(f"bending direction must be a 2-vector, got shape {u.shape}")
    norm = np.linalg.norm(u)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"bending direction must be unit length, got norm {norm:.12f}")
    return wrap_angle(math.atan2(u[1], u[0]) - twist)


def frame_from_local(v, psi: float) -> np.ndarray:
    """Rotation from a parent frame to its child frame.

    The child tangent (first column) is ``(sqrt(1 - |v|^2), v1, v2)`` in
    parent coordinates; the remaining axes are obtained by the minimal
    rotation carrying the parent tangent onto the child tangent,
    followed by a roll of ``psi`` about the child tangent.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (2,):
        raise ValueError(f"v must be a 2-vector, got shape {v.shape}")
    norm_sq = float(v @ v)
    if norm_sq >= 1.0:
        raise ValueError(f"|v| must be < 1, got {math.sqrt(norm_sq):.12f}")
    tangent = np.array([math.sqrt(1.0 - norm_sq), v[0], v[1]])
    base = minimal_rotation(_E1, tangent)
    if psi == 0.0:
        return base
    return rotate_about_axis(tangent, psi) @ base


def local_from_frame(frame) -> tuple[np.ndarray, float]:
    """Recover ``(v, psi)`` from a parent-to-child frame rotation.

    Requires the child tangent to stay in the parent's forward
    hemisphere (positive first component); otherwise the bending angle
    exceeds a quarter turn and the representation breaks down.
    """
    f = check_rotation(frame)
    tangent = f[:, 0]
    if tangent[0] <= 0.0:
        raise ValueError(
            "tangent leaves the forward hemisphere "
            f"(first component {tangent[0]:.6f} <= 0); cannot recover local coordinates"
        )
    v = tangent[1:3].copy()
    reference = minimal_rotation(_E1, tangent)
    ref_major = reference[:, 1]
    major = f[:, 1]
    psi = math.atan2(float(cross3(ref_major, major) @ tangent), float(ref_major @ major))
    return v, wrap_angle(psi)


def rcc_check(
    section: CrossSection, carried_dir: np.ndarray | None = None
) -> tuple[bool, float, DerivedCrossSection]:
    """Check the relative curvature condition for one cross-section.

    The bound is ``min(1, x / r)`` with ``r`` the parent-ellipse extent
    along the bending direction; the section passes when ``|v|`` is
    strictly below the bound by :data:`RCC_EPS`, or exactly zero
    (non-bending sections, including section 0, always pass).

    ``carried_dir`` supplies the bending direction for non-bending
    sections (defaults to the major axis).  Returns
    ``(ok, margin, derived)`` where ``margin = bound - |v|``.
    """
    if section.x < 0.0:
        raise ValueError(f"connection length must be non-negative, got {section.x}")
    norm = float(np.linalg.norm(section.v))
    if norm > 0.0:
        bend_dir = section.v / norm
        defined = True
    else:
        bend_dir = np.array([1.0, 0.0]) if carried_dir is None else np.asarray(carried_dir, dtype=float)
        defined = False
    twist = twist_from_roll(bend_dir, section.psi)
    extent = projection_magnitude(section.a, section.b, twist)
    bound = min(1.0, section.x / extent)
    margin = bound - norm
    ok = norm == 0.0 or norm < bound - RCC_EPS
    bend_angle = math.asin(min(norm, 1.0))
    curvature = math.sin(bend_angle) / section.x if section.x > 0.0 else 0.0
    derived = DerivedCrossSection(
        bend_dir=bend_dir,
        bend_dir_defined=defined,
        bend_angle=bend_angle,
        twist=twist,
        projection=extent,
        curvature=curvature,
        bound=bound,
        margin=margin,
    )
    return ok, margin, derived


def _section_report(
    section: CrossSection, index: int, carried_dir: np.ndarray
) -> tuple[SectionReport, np.ndarray]:
    """Validity report for one section plus the updated carried direction."""
    messages: list[str] = []
    structural_ok = True
    norm = float(np.linalg.norm(section.v))

    if index == 0:
        if norm != 0.0 or section.psi != 0.0 or section.x != 0.0:
            structural_ok = False
            messages.append("section 0 must be anchored at v = 0, psi = 0, x = 0")
    else:
        if not section.x > 0.0:
            structural_ok = False
            messages.append(f"connection length must be positive, got {section.x}")
    if not norm < 1.0:
        structural_ok = False
        messages.append(f"|v| must be < 1, got {norm:.12f}")
    if section.a <= 0.0 or section.b <= 0.0:
        structural_ok = False
        messages.append(f"radii must be positive, got a={section.a}, b={section.b}")
    elif section.a < section.b:
        structural_ok = False
        messages.append(f"major radius must dominate: a={section.a} < b={section.b}")
    elif section.a == section.b:
        messages.append("circular section (a == b): roll is geometrically redundant")

    if structural_ok:
        rcc_ok, margin, derived = rcc_check(section, carried_dir)
        if not rcc_ok:
            messages.append(
                f"curvature bound violated: |v|={norm:.6f} vs bound {derived.bound:.6f}"
            )
    else:
        rcc_ok, margin, derived = False, math.nan, None

    report = SectionReport(
        index=index,
        ok=structural_ok and rcc_ok,
        rcc_ok=rcc_ok,
        margin=margin,
        derived=derived,
        messages=messages,
    )
    new_dir = section.v / norm if norm > 0.0 else carried_dir
    return report, new_dir


def validate(tube: ETRep) -> ValidityReport:
    """Full validity report: anchoring, ranges, and the curvature bound.

    A tube is valid when every section is structurally sound (section 0
    anchored; ``|v| < 1``; ``a >= b > 0``; ``x > 0`` off the anchor) and
    satisfies the relative curvature condition.  Equal radii are legal
    but flagged, since the roll of a circular section is redundant.
    """
    carried = np.array([1.0, 0.0])
    reports = []
    for index, section in enumerate(tube.sections):
        report, carried = _section_report(section, index, carried)
        reports.append(report)
    return ValidityReport(valid=all(r.ok for r in reports), per_section=reports)


def require_valid(tube: ETRep, context: str) -> ValidityReport:
    """Validate and raise :class:`InvalidETRepError` naming failing sections."""
    report = validate(tube)
    if not report.valid:
        failing = ", ".join(str(i) for i in report.failing_indices())
        raise InvalidETRepError(f"{context}: tube is invalid at sections [{failing}]", report)
    return report


@dataclass(eq=False)
class GlobalTube:
    """World-coordinate form of a tube.

    ``points`` are the section centers, ``frames`` the section frames
    (columns: tangent, major axis, minor axis; frame ``i`` carries the
    incoming tangent, parallel to ``points[i] - points[i-1]``), and
    ``radii`` the per-section (a, b) pairs.
    """

    points: np.ndarray
    frames: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.frames = np.asarray(self.frames, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        count = self.points.shape[0]
        if self.points.shape != (count, 3):
            raise ValueError(f"points must be (m, 3), got {self.points.shape}")
        if self.frames.shape != (count, 3, 3):
            raise ValueError(f"frames must be (m, 3, 3), got {self.frames.shape}")
        if self.radii.shape != (count, 2):
            raise ValueError(f"radii must be (m, 2), got {self.radii.shape}")
        if count < 1:
            raise ValueError("a tube needs at least one cross-section")
        for arr, name in ((self.points, "points"), (self.frames, "frames"), (self.radii, "radii")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contain non-finite entries")

    @property
    def n(self) -> int:
        return self.points.shape[0] - 1


def reconstruct_global(tube: ETRep, allow_invalid: bool = False) -> GlobalTube:
    """Chain local frames into world coordinates.

    Section 0 sits at the origin with the identity frame.  Each later
    frame is the parent frame composed with the local rotation, and each
    center advances by ``x`` along the new tangent.  Invalid tubes are
    rejected unless ``allow_invalid`` is set (useful for visualizing
    exactly where a tube breaks).
    """
    if not allow_invalid:
        require_valid(tube, "reconstruct_global")
    count = tube.n + 1
    points = np.zeros((count, 3))
    frames = np.zeros((count, 3, 3))
    frames[0] = np.eye(3)
    for i in range(1, count):
        cs = tube.sections[i]
        frames[i] = frames[i - 1] @ frame_from_local(cs.v, cs.psi)
        points[i] = points[i - 1] + cs.x * frames[i][:, 0]
    radii = np.array([[cs.a, cs.b] for cs in tube.sections])
    return GlobalTube(points=points, frames=frames, radii=radii)


def etrep_from_global(tube: GlobalTube) -> ETRep:
    """Extract parent-frame coordinates from a world-coordinate tube.

    Inverts :func:`reconstruct_global`: local rotations come from
    consecutive frame pairs and connection lengths from consecutive
    centers.  Section 0 is reported in the anchored reference pose.
    Raises ValueError (naming the section) if a tangent leaves its
    parent's forward hemisphere or a connection has zero length.
    """
    relatives = np.einsum("nji,njk->nik", tube.frames[:-1], tube.frames[1:])
    lengths = np.linalg.norm(np.diff(tube.points, axis=0), axis=1)
    sections = [CrossSection(np.zeros(2), 0.0, 0.0, tube.radii[0, 0], tube.radii[0, 1])]
    for i in range(1, tube.n + 1):
        try:
            v, psi = local_from_frame(relatives[i - 1])
        except ValueError as exc:
            raise ValueError(f"section {i}: {exc}") from exc
        x = float(lengths[i - 1])
        if x <= 0.0:
            raise ValueError(f"section {i}: consecutive centers coincide")
        sections.append(CrossSection(v, psi, x, tube.radii[i, 0], tube.radii[i, 1]))
    return ETRep(tuple(sections))


def compute_normals(tube: GlobalTube) -> np.ndarray:
    """Unit spine normals, one per section.

    The normal at section ``i`` lies in the bending plane of tangents
    ``i-1`` and ``i`` and is orthogonal to tangent ``i``:
    ``normalize(t_{i-1} x t_i) x t_i``.  Where consecutive tangents are
    parallel (cross product below :data:`PARALLEL_TOL`) the previous
    normal is carried forward; section 0 uses its frame's major axis.
    """
    count = tube.n + 1
    tangents = np.empty((count, 3))
    tangents[0] = tube.frames[0][:, 0]
    for i in range(1, count):
        segment = tube.points[i] - tube.points[i - 1]
        length = np.linalg.norm(segment)
        if length <= 0.0:
            raise ValueError(f"section {i}: consecutive centers coincide")
        tangents[i] = segment / length
    normals = np.empty((count, 3))
    normals[0] = tube.frames[0][:, 1]
    for i in range(1, count):
        axis = cross3(tangents[i - 1], tangents[i])
        axis_norm = np.linalg.norm(axis)
        if axis_norm < PARALLEL_TOL:
            normals[i] = normals[i - 1]
        else:
            normals[i] = cross3(axis / axis_norm, tangents[i])
            normals[i] /= np.linalg.norm(normals[i])
    return normals
