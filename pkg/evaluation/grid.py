"""쌍별 코퓰라 밀도 격자 내보내기"""
from pathlib import Path

import numpy as np

from models.policy import CopulaPolicy
from utils.errors import DomainError


def grid_centers(resolution: int) -> np.ndarray:
    return (np.arange(resolution) + 0.5) / resolution


def export_copula_grid(p: CopulaPolicy, dim_a: int, dim_b: int, resolution: int = 50,
                       s: np.ndarray | None = None) -> np.ndarray:
    """grid[i, j] = c(u_a = centers[i], u_b = centers[j]) (정규화 단위 상태 s)"""
    if dim_a == dim_b:
        raise DomainError("copula grid needs two distinct coordinates")
    for d in (dim_a, dim_b):
        if not 0 <= d < p.dim:
            raise DomainError(f"coordinate {d} out of range [0, {p.dim})")
    if resolution < 1:
        raise DomainError(f"grid resolution must be positive, got {resolution}")

    centers = grid_centers(resolution)
    ua, ub = np.meshgrid(centers, centers, indexing="ij")
    u2 = np.column_stack([ua.ravel(), ub.ravel()])
    state = None if s is None else np.asarray(s, dtype=float)
    return np.exp(p.copula.pair_log_density(dim_a, dim_b, u2, state)).reshape(resolution, resolution)


def write_grid(path: Path, grid: np.ndarray, dim_a: int, dim_b: int, kind: str, state=None) -> Path:
    resolution = grid.shape[0]
    header = "\n".join([
        f"copula density grid kind={kind}",
        f"rows: u{dim_a} at cell centers (i+0.5)/{resolution}",
        f"cols: u{dim_b} at cell centers (j+0.5)/{resolution}",
        "state: " + ("none" if state is None else " ".join(f"{v:.17g}" for v in np.ravel(state))),
    ])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, grid, fmt="%.10g", header=header, comments="# ")
    return path
