#!/usr/bin/env python3
"""Search for a pair of valid tubes whose non-intrinsic mean is invalid.

The frame-averaging mean fails on elongated sections whose members bend
the same way but roll in opposite directions: each member's bending
direction stays close to the parent ellipse's minor axis (large
curvature bound), while the averaged roll swings the bending direction
onto the major axis (small bound).  This script samples such pairs at
random until it finds one where every member is valid, the
non-intrinsic mean violates the curvature bound, and the intrinsic mean
stays valid, then freezes the pair as JSON fixtures.

Usage: search_nonintrinsic_failure.py [--seed S] [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from etrep.io import write_etrep
from etrep.model import CrossSection, ETRep, validate
from etrep.shapespace import SampleSet, intrinsic_mean, nonintrinsic_mean


def build_candidate(rng: np.random.Generator) -> tuple[ETRep, ETRep]:
    """A pair bending identically but rolled in opposite directions."""
    a0, b0 = 1.5, 1.0
    a1, b1 = rng.uniform(1.2, 2.5), rng.uniform(0.1, 0.4)
    x1 = rng.uniform(0.4, 0.8)
    a2, b2 = rng.uniform(1.5, 2.5), rng.uniform(0.1, 0.3)
    x2 = rng.uniform(0.4, 0.7)
    bend = rng.uniform(0.7, 0.95)
    roll = rng.uniform(1.1, 1.45)  # close to a quarter turn

    def member(sign: float) -> ETRep:
        return ETRep((
            CrossSection(np.zeros(2), 0.0, 0.0, a0, b0),
            CrossSection(np.array([0.1, 0.0]), 0.0, x1, a1, b1),
            CrossSection(np.array([bend, 0.0]), sign * roll, x2, a2, b2),
        ))

    return member(+1.0), member(-1.0)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20240801)
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "tests" / "fixtures")
    parser.add_argument("--max-tries", type=int, default=1000)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    for attempt in range(args.max_tries):
        first, second = build_candidate(rng)
        if not (validate(first).valid and validate(second).valid):
            continue
        sample = SampleSet((first, second))
        state, report = nonintrinsic_mean(sample)
        if report.valid:
            continue
        intrinsic = intrinsic_mean(sample)
        if not validate(intrinsic).valid:
            continue

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        first.metadata["role"] = "opposed-roll pair, member a"
        second.metadata["role"] = "opposed-roll pair, member b"
        write_etrep(first, out / "opposed_roll_a.json")
        write_etrep(second, out / "opposed_roll_b.json")

        failing = report.failing_indices()
        margins = [report.per_section[i].margin for i in failing]
        print(f"found on attempt {attempt + 1}")
        print(f"  non-intrinsic mean fails sections {failing} with margins "
              + ", ".join(f"{m:+.4f}" for m in margins))
        print(f"  intrinsic mean margin at those sections: "
              + ", ".join(f"{validate(intrinsic).per_section[i].margin:+.4f}" for i in failing))
        print(f"  fixtures written to {out}")
        return 0

    print(f"no counterexample found in {args.max_tries} tries")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
