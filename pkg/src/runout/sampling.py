"""Latin Hypercube and Sobol sampling of (volume, density, cohesion) triplets.

Unit points in [0,1)^3 are mapped through the range transforms: volume is
log-uniform (V = 10**(lo + (hi-lo)*u) with lo/hi in log10 m^3), density and
cohesion are uniform. Custom priors can be plugged in as inverse-CDF
callables per dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError

# Dimension order everywhere: (volume, density, cohesion).
N_DIMS = 3


@dataclass(frozen=True)
class ParamRanges:
    """Sampling ranges; volume bounds are log10 of m^3."""

    volume_log10: tuple[float, float] = (4.0, 7.0)
    density: tuple[float, float] = (917.0, 2650.0)
    cohesion: tuple[float, float] = (5000.0, 50000.0)

    def __post_init__(self):
        for name, (lo, hi) in (
            ("volume_log10", self.volume_log10),
            ("density", self.density),
            ("cohesion", self.cohesion),
        ):
            if not lo < hi:
                raise ParameterError(f"{name}: low {lo} must be < high {hi}")


@dataclass(frozen=True)
class ParameterSample:
    volume: float
    density: float
    cohesion: float
    unit_point: tuple[float, float, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "volume_m3": self.volume,
                "density_kg_m3": self.density,
                "cohesion_pa": self.cohesion,
                "unit_point": list(self.unit_point),
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "ParameterSample":
        d = json.loads(line)
        return cls(
            volume=d["volume_m3"],
            density=d["density_kg_m3"],
            cohesion=d["cohesion_pa"],
            unit_point=tuple(d["unit_point"]),
        )


InvCdf = Callable[[np.ndarray], np.ndarray]


def transform_unit_points(
    unit: np.ndarray,
    ranges: ParamRanges,
    inv_cdfs: Sequence[InvCdf | None] | None = None,
) -> list[ParameterSample]:
    """Map unit-cube points to physical samples.

    ``inv_cdfs`` optionally overrides the built-in transform per dimension
    with an inverse CDF over that dimension's value space.
    """
    unit = np.asarray(unit, dtype=np.float64)
    if unit.ndim != 2 or unit.shape[1] != N_DIMS:
        raise ParameterError(f"unit points must be (n, {N_DIMS}), got {unit.shape}")
    lo_v, hi_v = ranges.volume_log10
    lo_r, hi_r = ranges.density
    lo_c, hi_c = ranges.cohesion
    cols = []
    builtins = (
        lambda u: 10.0 ** (lo_v + (hi_v - lo_v) * u),
        lambda u: lo_r + (hi_r - lo_r) * u,
        lambda u: lo_c + (hi_c - lo_c) * u,
    )
    for d in range(N_DIMS):
        f = None if inv_cdfs is None else inv_cdfs[d]
        cols.append((builtins[d] if f is None else f)(unit[:, d]))
    return [
        ParameterSample(
            volume=float(cols[0][i]),
            density=float(cols[1][i]),
            cohesion=float(cols[2][i]),
            unit_point=(float(unit[i, 0]), float(unit[i, 1]), float(unit[i, 2])),
        )
        for i in range(unit.shape[0])
    ]


def lhs_unit(n: int, seed: int, dims: int = N_DIMS) -> np.ndarray:
    """Latin Hypercube unit points: one per stratum [i/n, (i+1)/n) per axis.

    Stratum permutations and within-stratum jitter both derive from ``seed``.
    """
    if n < 1:
        raise ParameterError(f"need n >= 1 samples, got {n}")
    rng = np.random.default_rng(seed)
    unit = np.empty((n, dims))
    for d in range(dims):
        perm = rng.permutation(n)
        jitter = rng.random(n)
        unit[:, d] = (perm + jitter) / n
    return unit


def lhs_sample(
    n: int,
    ranges: ParamRanges = ParamRanges(),
    seed: int = 0,
    inv_cdfs: Sequence[InvCdf | None] | None = None,
) -> list[ParameterSample]:
    return transform_unit_points(lhs_unit(n, seed), ranges, inv_cdfs)


# ---------------------------------------------------------------------------
# Sobol sequence (Joe-Kuo direction numbers, Gray-code order, zero skipped)
# ---------------------------------------------------------------------------

_BITS = 32
# (s, a, initial m values) for dimensions 2 and 3; dimension 1 is the
# van der Corput sequence in base 2.
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
)


def _direction_numbers(dim: int) -> np.ndarray:
    v = np.zeros(_BITS, dtype=np.uint64)
    if dim == 0:
        for k in range(_BITS):
            v[k] = np.uint64(1) << np.uint64(_BITS - 1 - k)
        return v
    s, a, m_init = _JOE_KUO[dim - 1]
    m = list(m_init)
    for k in range(s, _BITS):
        new = m[k - s] ^ (m[k - s] << s)
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    for k in range(_BITS):
        v[k] = np.uint64(m[k]) << np.uint64(_BITS - 1 - k)
    return v


def sobol_unit(n: int, dims: int = N_DIMS) -> np.ndarray:
    """First ``n`` points of the Sobol sequence with the zero point skipped."""
    if n < 1:
        raise ParameterError(f"need n >= 1 samples, got {n}")
    if dims > len(_JOE_KUO) + 1:
        raise ParameterError(f"Sobol generator supports up to {len(_JOE_KUO) + 1} dims")
    v = np.stack([_direction_numbers(d) for d in range(dims)])  # (dims, BITS)
    x = np.zeros(dims, dtype=np.uint64)
    out = np.empty((n, dims))
    for i in range(n):
        c = 0
        ii = i
        while ii & 1:
            ii >>= 1
            c += 1
        x ^= v[:, c]
        out[i] = x / 2.0**_BITS
    return out


def sobol_sample(
    n: int,
    ranges: ParamRanges = ParamRanges(),
    inv_cdfs: Sequence[InvCdf | None] | None = None,
) -> list[ParameterSample]:
    return transform_unit_points(sobol_unit(n), ranges, inv_cdfs)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_samples(samples: Sequence[ParameterSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")


def load_samples(path) -> list[ParameterSample]:
    with open(path, "r", encoding="utf-8") as fh:
        return [ParameterSample.from_json(line) for line in fh if line.strip()]
