"""File formats: tube JSON documents, feature CSV tables, OBJ meshes.

All writers are deterministic: JSON is emitted with sorted keys and
fixed separators, floats use Python's shortest round-trip repr, and
lines end with LF.  Readers validate documents before constructing
package types and report problems with JSON-pointer-style paths
(``/sections/3/psi``).
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .model import CrossSection, ETRep, GlobalTube, reconstruct_global, validate
from .shapespace import (
    FEATURE_FIELDS,
    SampleSet,
    feature_matrix,
    feature_names,
    intrinsic_path,
    nonintrinsic_path,
)
from .simulate import SimulationConfig
from .stats import FeatureMatrix

SCHEMA_VERSION = "1"


class SchemaError(ValueError):
    """A document failed validation; ``pointer`` locates the offending field."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _require(condition: bool, pointer: str, message: str) -> None:
    if not condition:
        raise SchemaError(pointer, message)


def _finite_number(value, pointer: str) -> float:
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        pointer, "expected a number",
    )
    number = float(value)
    _require(math.isfinite(number), pointer, "number must be finite")
    return number


def etrep_to_document(tube: ETRep) -> dict:
    """JSON-ready document for a tube."""
    return {
        "schema_version": SCHEMA_VERSION,
        "n": tube.n,
        "sections": [
            {
                "v": [float(cs.v[0]), float(cs.v[1])],
                "psi": cs.psi,
                "x": cs.x,
                "a": cs.a,
                "b": cs.b,
            }
            for cs in tube.sections
        ],
        "metadata": {str(k): str(val) for k, val in tube.metadata.items()},
    }


def etrep_from_document(document) -> ETRep:
    """Parse and validate a tube document.

    Raises :class:`SchemaError` naming the failing field; the result is
    structurally well-formed but not necessarily geometrically valid
    (run :func:`etrep.model.validate` for that).
    """
    _require(isinstance(document, dict), "", "document must be a JSON object")
    _require("schema_version" in document, "/schema_version", "missing field")
    _require(
        document["schema_version"] == SCHEMA_VERSION,
        "/schema_version",
        f"unsupported version {document['schema_version']!r} (expected {SCHEMA_VERSION!r})",
    )
    _require("n" in document, "/n", "missing field")
    n = document["n"]
    _require(
        isinstance(n, int) and not isinstance(n, bool) and n >= 0,
        "/n", "expected a non-negative integer",
    )
    _require("sections" in document, "/sections", "missing field")
    raw_sections = document["sections"]
    _require(isinstance(raw_sections, list), "/sections", "expected an array")
    _require(
        len(raw_sections) == n + 1,
        "/sections", f"expected {n + 1} sections for n={n}, got {len(raw_sections)}",
    )
    sections = []
    for i, raw in enumerate(raw_sections):
        pointer = f"/sections/{i}"
        _require(isinstance(raw, dict), pointer, "expected an object")
        for key in ("v", "psi", "x", "a", "b"):
            _require(key in raw, f"{pointer}/{key}", "missing field")
        unknown = set(raw) - {"v", "psi", "x", "a", "b"}
        _require(not unknown, pointer, f"unknown fields {sorted(unknown)}")
        v_raw = raw["v"]
        _require(
            isinstance(v_raw, list) and len(v_raw) == 2,
            f"{pointer}/v", "expected an array of two numbers",
        )
        v = [_finite_number(v_raw[k], f"{pointer}/v/{k}") for k in range(2)]
        scalars = {key: _finite_number(raw[key], f"{pointer}/{key}") for key in ("psi", "x", "a", "b")}
        sections.append(CrossSection(np.array(v), scalars["psi"], scalars["x"], scalars["a"], scalars["b"]))
    metadata = document.get("metadata", {})
    _require(isinstance(metadata, dict), "/metadata", "expected an object")
    for key, value in metadata.items():
        _require(isinstance(value, str), f"/metadata/{key}", "expected a string")
    return ETRep(tuple(sections), dict(metadata))


def dump_json(obj, path) -> None:
    """Write JSON deterministically (sorted keys, fixed separators, LF)."""
    text = json.dumps(obj, indent=2, sort_keys=True, separators=(",", ": "))
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_etrep(tube: ETRep, path) -> None:
    dump_json(etrep_to_document(tube), path)


def read_etrep(path) -> ETRep:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"not valid JSON ({exc})") from exc
    return etrep_from_document(document)


def read_sample(paths, normalized: bool = False) -> SampleSet:
    """Read tubes from explicit paths or a directory (``*.json``, sorted).

    Directory members are taken in lexicographic filename order so
    sample order — and everything seeded downstream — is reproducible.
    """
    if isinstance(paths, (str, Path)) and Path(paths).is_dir():
        files = sorted(Path(paths).glob("*.json"), key=lambda p: p.name)
        if not files:
            raise FileNotFoundError(f"no .json files in directory {paths}")
    else:
        if isinstance(paths, (str, Path)):
            files = [Path(paths)]
        else:
            files = [Path(p) for p in paths]
    return SampleSet(tuple(read_etrep(p) for p in files), normalized=normalized)


def write_sample_dir(sample: SampleSet, directory, prefix: str = "member") -> list[Path]:
    """Write one JSON file per member; names sort in member order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(max(len(sample) - 1, 0))))
    paths = []
    for j, member in enumerate(sample.members):
        path = directory / f"{prefix}_{j:0{width}d}.json"
        write_etrep(member, path)
        paths.append(path)
    return paths


def write_feature_csv(sample: SampleSet, path) -> None:
    """Feature table of the sample's convex coordinates.

    One row per member, columns named ``s{i}_{field}`` with fields
    :data:`etrep.shapespace.FEATURE_FIELDS`.  Floats use the shortest
    round-trip repr, rows end with LF; an empty sample writes only the
    header.
    """
    names = feature_names(sample.n)
    matrix = feature_matrix(sample)
    lines = [",".join(names)]
    for row in matrix:
        lines.append(",".join(str(value) for value in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_FEATURE_NAME_RE = re.compile(r"^s(\d+)_(cu1|cu2|psi|x|a|b)$")


def read_feature_csv(path) -> FeatureMatrix:
    """Read a feature table back into a matrix with validated header."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("", "feature table is empty (missing header)") from None
        rows = list(reader)
    _require(len(header) % len(FEATURE_FIELDS) == 0 and header, "",
             f"header width must be a multiple of {len(FEATURE_FIELDS)}")
    expected = feature_names(len(header) // len(FEATURE_FIELDS) - 1)
    _require(header == expected, "", "header does not match the feature layout")
    values = np.empty((len(rows), len(header)))
    for r, row in enumerate(rows):
        _require(len(row) == len(header), f"/row/{r}",
                 f"expected {len(header)} fields, got {len(row)}")
        try:
            values[r] = [float(cell) for cell in row]
        except ValueError as exc:
            raise SchemaError(f"/row/{r}", f"non-numeric cell ({exc})") from exc
    return FeatureMatrix(values=values, feature_names=tuple(header))


def _float_str(value: float) -> str:
    return str(float(value))


def _obj_lines(tube: GlobalTube, ring_samples: int, caps: bool) -> list[str]:
    """Wavefront OBJ lines for a tube surface.

    Ring ``i`` places ``ring_samples`` vertices on the ellipse of
    section ``i`` (angle 2*pi*j/M from the major axis); consecutive
    rings are joined by two triangles per quad.  Caps add the two end
    centers and triangle fans.  Output is deterministic.
    """
    if ring_samples < 3:
        raise ValueError(f"need at least 3 ring samples, got {ring_samples}")
    count = tube.n + 1
    angles = 2.0 * math.pi * np.arange(ring_samples) / ring_samples
    cosines, sines = np.cos(angles), np.sin(angles)
    lines = [f"# elliptical tube: {count} rings x {ring_samples} samples"]
    for i in range(count):
        center = tube.points[i]
        major = tube.radii[i, 0] * tube.frames[i][:, 1]
        minor = tube.radii[i, 1] * tube.frames[i][:, 2]
        ring = center[None, :] + cosines[:, None] * major[None, :] + sines[:, None] * minor[None, :]
        for vertex in ring:
            lines.append(f"v {_float_str(vertex[0])} {_float_str(vertex[1])} {_float_str(vertex[2])}")
    if caps:
        for i in (0, count - 1):
            center = tube.points[i]
            lines.append(f"v {_float_str(center[0])} {_float_str(center[1])} {_float_str(center[2])}")

    def ring_vertex(i: int, j: int) -> int:
        return i * ring_samples + (j % ring_samples) + 1  # OBJ indices are 1-based

    for i in range(count - 1):
        for j in range(ring_samples):
            lines.append(f"f {ring_vertex(i, j)} {ring_vertex(i + 1, j)} {ring_vertex(i + 1, j + 1)}")
            lines.append(f"f {ring_vertex(i, j)} {ring_vertex(i + 1, j + 1)} {ring_vertex(i, j + 1)}")
    if caps:
        start_center = count * ring_samples + 1
        end_center = count * ring_samples + 2
        for j in range(ring_samples):
            lines.append(f"f {start_center} {ring_vertex(0, j + 1)} {ring_vertex(0, j)}")
            lines.append(f"f {end_center} {ring_vertex(count - 1, j)} {ring_vertex(count - 1, j + 1)}")
    return lines


def write_obj(tube: GlobalTube, path, ring_samples: int = 32, caps: bool = False) -> None:
    Path(path).write_text("\n".join(_obj_lines(tube, ring_samples, caps)) + "\n", encoding="utf-8")


def export_obj(tube: ETRep, path, ring_samples: int = 32, caps: bool = False,
               allow_invalid: bool = False) -> None:
    """Reconstruct a tube and write its surface mesh."""
    write_obj(reconstruct_global(tube, allow_invalid=allow_invalid), path,
              ring_samples=ring_samples, caps=caps)


def export_morph(start: ETRep, end: ETRep, steps: int, method: str, directory,
                 ring_samples: int = 32, caps: bool = False) -> list[Path]:
    """Write an OBJ sequence morphing one tube into another.

    Produces ``steps + 1`` meshes ``morph_000.obj`` .. and a
    ``validity.csv`` with one row per step: step index, path parameter,
    validity flag, and any failing sections.  The intrinsic method stays
    valid throughout; the non-intrinsic method may not, in which case
    the offending meshes are still written for inspection.
    """
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    if method not in ("intrinsic", "nonintrinsic"):
        raise ValueError(f"method must be 'intrinsic' or 'nonintrinsic', got {method!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    rows = []
    for step in range(steps + 1):
        gamma = step / steps
        if method == "intrinsic":
            tube = intrinsic_path(start, end, gamma)
            report = validate(tube)
            world = reconstruct_global(tube, allow_invalid=True)
        else:
            state, report = nonintrinsic_path(start, end, gamma)
            world = state.reconstruct()
        path = directory / f"morph_{step:03d}.obj"
        write_obj(world, path, ring_samples=ring_samples, caps=caps)
        paths.append(path)
        failing = " ".join(str(i) for i in report.failing_indices())
        rows.append(f"{step},{_float_str(gamma)},{str(report.valid).lower()},{failing}")
    header = "step,gamma,valid,failing_sections"
    (directory / "validity.csv").write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return paths


def load_simulation_config(path) -> SimulationConfig:
    """Read a simulation config document.

    Fields: ``reference`` (a tube document, or a path to one relative to
    the config file), ``m``, and optional ``sigma_v``, ``sigma_psi``,
    ``sigma_scale`` (default 0) and ``seed`` (default 0).
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"not valid JSON ({exc})") from exc
    _require(isinstance(document, dict), "", "config must be a JSON object")
    unknown = set(document) - {"reference", "m", "sigma_v", "sigma_psi", "sigma_scale", "seed"}
    _require(not unknown, "", f"unknown fields {sorted(unknown)}")
    _require("reference" in document, "/reference", "missing field")
    reference_raw = document["reference"]
    if isinstance(reference_raw, str):
        reference = read_etrep(path.parent / reference_raw)
    elif isinstance(reference_raw, dict):
        reference = etrep_from_document(reference_raw)
    else:
        raise SchemaError("/reference", "expected a tube document or a path string")
    _require("m" in document, "/m", "missing field")
    m = document["m"]
    _require(isinstance(m, int) and not isinstance(m, bool) and m >= 1,
             "/m", "expected a positive integer")
    sigmas = {}
    for name in ("sigma_v", "sigma_psi", "sigma_scale"):
        value = document.get(name, 0.0)
        sigmas[name] = _finite_number(value, f"/{name}")
        _require(sigmas[name] >= 0.0, f"/{name}", "must be non-negative")
    seed = document.get("seed", 0)
    _require(isinstance(seed, int) and not isinstance(seed, bool), "/seed", "expected an integer")
    return SimulationConfig(reference=reference, m=m, seed=seed, **sigmas)
