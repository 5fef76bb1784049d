"""Population simulation around a reference tube.

Members are produced by perturbing the reference in the convex
coordinates (where every perturbed point can be clamped back into the
valid set) and then applying one global log-normal size factor.  All
randomness flows from a single integer seed; member ``j`` draws from an
independent stream derived with spawn key ``(j,)``, so populations are
reproducible and independent of generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ETRep, require_valid
from .shapespace import SECTION_WIDTH, ConvexPoint, SampleSet, map_from_convex, map_to_convex

# Perturbed bound usage is clamped strictly inside the valid set.
_MAX_USAGE = 1.0 - 1e-6


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters for :func:`simulate_population`.

    ``sigma_v`` is the per-axis Gaussian spread added to each section's
    scaled bending pair, ``sigma_psi`` the spread added to each roll
    (clipped to [-pi, pi]), and ``sigma_scale`` the spread of the global
    log-size factor.
    """

    reference: ETRep
    m: int
    sigma_v: float = 0.0
    sigma_psi: float = 0.0
    sigma_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.reference, ETRep):
            raise TypeError("reference must be an ETRep")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"population size must be a positive integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        for name in ("sigma_v", "sigma_psi", "sigma_scale"):
            value = float(getattr(self, name))
            if not (value >= 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be non-negative and finite, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "seed", int(self.seed))


def _perturb_member(base: ConvexPoint, config: SimulationConfig, member_index: int) -> ETRep:
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(member_index,))
    )
    blocks = base.blocks().copy()
    n = base.n
    if n > 0:
        blocks[1:, 0:2] += rng.normal(0.0, config.sigma_v, size=(n, 2))
        usage = np.linalg.norm(blocks[1:, 0:2], axis=1)
        over = usage > _MAX_USAGE
        if np.any(over):
            blocks[1:, 0:2][over] *= (_MAX_USAGE / usage[over])[:, None]
        blocks[1:, 2] += rng.normal(0.0, config.sigma_psi, size=n)
        np.clip(blocks[1:, 2], -math.pi, math.pi, out=blocks[1:, 2])
    log_scale = rng.normal(0.0, config.sigma_scale)
    member = map_from_convex(ConvexPoint(blocks.reshape(-1)))
    return member.scale(math.exp(log_scale))


def simulate_population(config: SimulationConfig) -> SampleSet:
    """Draw ``m`` valid tubes around the reference.

    Every member is valid by construction: perturbations happen in the
    convex coordinates with the bound usage clamped below 1.  With all
    spreads zero the reference is replicated exactly.
    """
    require_valid(config.reference, "simulate_population")
    if config.sigma_v == 0.0 and config.sigma_psi == 0.0 and config.sigma_scale == 0.0:
        return SampleSet((config.reference,) * config.m)
    base = map_to_convex(config.reference)
    members = tuple(_perturb_member(base, config, j) for j in range(config.m))
    return SampleSet(members)
