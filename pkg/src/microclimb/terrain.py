"""Seeded fractal terrain with elevation, normal and collision-depth queries.

Heightfields are generated by diamond-square synthesis on a power-of-two grid,
cropped to the requested extents and rescaled so the elevation sample standard
deviation matches the configured value exactly. Maps are immutable after
generation and safe for concurrent queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, OutOfBounds
from .geometry import quat_to_rot


@dataclass(frozen=True)
class TerrainMap:
    heights: np.ndarray             # (ny, nx), z values
    resolution: float               # cell size (m)
    origin: tuple[float, float]     # world (x, y) of grid node [0, 0]
    seed: int
    sigma: float

    @property
    def nx(self) -> int:
        return self.heights.shape[1]

    @property
    def ny(self) -> int:
        return self.heights.shape[0]

    @property
    def extents(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) of the queryable area."""
        x0, y0 = self.origin
        return (x0, x0 + (self.nx - 1) * self.resolution, y0, y0 + (self.ny - 1) * self.resolution)


def _diamond_square(n: int, rng: np.random.Generator, roughness: float = 0.55) -> np.ndarray:
    """Classic midpoint-displacement field on a (2^n + 1) square grid."""
    size = 2**n + 1
    grid = np.zeros((size, size))
    corners = rng.normal(0.0, 1.0, 4)
    grid[0, 0], grid[0, -1], grid[-1, 0], grid[-1, -1] = corners
    step = size - 1
    amp = 1.0
    while step > 1:
        half = step // 2
        # diamond step: centers from cell corners
        for y in range(half, size, step):
            for x in range(half, size, step):
                avg = 0.25 * (
                    grid[y - half, x - half]
                    + grid[y - half, x + half]
                    + grid[y + half, x - half]
                    + grid[y + half, x + half]
                )
                grid[y, x] = avg + amp * rng.normal()
        # square step: edge midpoints from their diamond neighbours
        for y in range(0, size, half):
            x_start = half if (y // half) % 2 == 0 else 0
            for x in range(x_start, size, step):
                total = 0.0
                count = 0
                for dy, dx in ((-half, 0), (half, 0), (0, -half), (0, half)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < size and 0 <= xx < size:
                        total += grid[yy, xx]
                        count += 1
                grid[y, x] = total / count + amp * rng.normal()
        step = half
        amp *= roughness
    return grid


def generate_fractal(
    seed: int,
    extents: tuple[float, float],
    resolution: float,
    sigma: float,
    origin: tuple[float, float] = (0.0, 0.0),
) -> TerrainMap:
    """Deterministic fractal heightfield with exact elevation std after rescaling."""
    if resolution <= 0.0:
        raise BadConfig("terrain resolution must be > 0")
    if sigma < 0.0:
        raise BadConfig("terrain sigma must be >= 0")
    if extents[0] <= 0.0 or extents[1] <= 0.0:
        raise BadConfig("terrain extents must be > 0")
    nx = int(round(extents[0] / resolution)) + 1
    ny = int(round(extents[1] / resolution)) + 1
    if nx < 2 or ny < 2:
        raise BadConfig("terrain grid must be at least 2x2")

    n = 1
    while 2**n + 1 < max(nx, ny):
        n += 1
    rng = np.random.default_rng(seed)
    raw = _diamond_square(n, rng)[:ny, :nx]
    raw = raw - raw.mean()
    std = raw.std()
    heights = raw * (sigma / std) if (sigma > 0.0 and std > 0.0) else np.zeros_like(raw)
    return TerrainMap(
        heights=heights, resolution=resolution, origin=origin, seed=int(seed), sigma=float(sigma)
    )


def flat_map(extents=(2.0, 2.0), resolution=0.05, origin=(0.0, 0.0)) -> TerrainMap:
    return generate_fractal(0, extents, resolution, 0.0, origin)


def _cell(tm: TerrainMap, x: float, y: float):
    x0, x1, y0, y1 = tm.extents
    if not (x0 - 1e-12 <= x <= x1 + 1e-12 and y0 - 1e-12 <= y <= y1 + 1e-12):
        raise OutOfBounds(f"query ({x:.3f}, {y:.3f}) outside terrain {tm.extents}")
    fx = np.clip((x - x0) / tm.resolution, 0.0, tm.nx - 1 - 1e-12)
    fy = np.clip((y - y0) / tm.resolution, 0.0, tm.ny - 1 - 1e-12)
    ix, iy = int(fx), int(fy)
    return ix, iy, fx - ix, fy - iy


def elevation(tm: TerrainMap, x: float, y: float) -> float:
    """Bilinear interpolation of the height grid."""
    ix, iy, u, v = _cell(tm, x, y)
    h = tm.heights
    return float(
        h[iy, ix] * (1 - u) * (1 - v)
        + h[iy, ix + 1] * u * (1 - v)
        + h[iy + 1, ix] * (1 - u) * v
        + h[iy + 1, ix + 1] * u * v
    )


def surface_normal(tm: TerrainMap, x: float, y: float) -> np.ndarray:
    """Upward unit normal from the interpolated surface gradient."""
    ix, iy, u, v = _cell(tm, x, y)
    h = tm.heights
    dzdx = ((h[iy, ix + 1] - h[iy, ix]) * (1 - v) + (h[iy + 1, ix + 1] - h[iy + 1, ix]) * v) / tm.resolution
    dzdy = ((h[iy + 1, ix] - h[iy, ix]) * (1 - u) + (h[iy + 1, ix + 1] - h[iy, ix + 1]) * u) / tm.resolution
    n = np.array([-dzdx, -dzdy, 1.0])
    return n / np.linalg.norm(n)


def footprint_points(half_extents: tuple[float, float], samples: int = 5) -> np.ndarray:
    """Rectangular sample grid on the inferior base plane, base frame, z = 0."""
    hx, hy = half_extents
    xs = np.linspace(-hx, hx, samples)
    ys = np.linspace(-hy, hy, samples)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)])


def base_collision_depth(
    tm: TerrainMap,
    base_pos,
    base_quat,
    footprint: np.ndarray,
    b_low: float,
) -> tuple[np.ndarray, float]:
    """Per-sample clearance of the inferior base plane and the max penetration.

    Sample depths are (plane point z) - (terrain z): negative means collision.
    Returns (depths, max penetration) with max penetration 0 when clear.
    """
    R = quat_to_rot(np.asarray(base_quat, dtype=float))
    pts = np.asarray(base_pos, dtype=float) + (footprint - np.array([0.0, 0.0, b_low])) @ R.T
    depths = np.array([p[2] - elevation(tm, p[0], p[1]) for p in pts])
    colliding = depths < 0.0
    max_pen = float(np.max(-depths[colliding])) if np.any(colliding) else 0.0
    return depths, max_pen


def export_csv(tm: TerrainMap, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(
            "# microclimb terrain v1"
            f" seed={tm.seed} resolution={tm.resolution!r} sigma={tm.sigma!r}"
            f" origin_x={tm.origin[0]!r} origin_y={tm.origin[1]!r}"
            f" nx={tm.nx} ny={tm.ny}\n"
        )
        for row in tm.heights:
            f.write(",".join(repr(float(z)) for z in row) + "\n")


def import_csv(path) -> TerrainMap:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        if not header.startswith("# microclimb terrain v1"):
            raise BadConfig(f"{path}: not a terrain CSV")
        meta = dict(tok.split("=") for tok in header.split()[4:])
        rows = [list(map(float, line.split(","))) for line in f if line.strip()]
    heights = np.array(rows)
    if heights.shape != (int(meta["ny"]), int(meta["nx"])):
        raise BadConfig(f"{path}: grid shape mismatch with header")
    return TerrainMap(
        heights=heights,
        resolution=float(meta["resolution"]),
        origin=(float(meta["origin_x"]), float(meta["origin_y"])),
        seed=int(meta["seed"]),
        sigma=float(meta["sigma"]),
    )
