"""Deduplication of converged endpoints and inclusion-disk certification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree


class Registered(NamedTuple):
    new: bool
    index: int


@dataclass
class Root:
    z: complex
    displacement: float
    inclusion_radius: float
    hit_count: int = 1


def inclusion_radius(d: int, displacement: complex) -> float:
    """Radius of a disk around z that contains at least one root of a degree-d p."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    return d * abs(displacement)


@dataclass
class RootSet:
    eps_root: float
    roots: list[Root] = field(default_factory=list)
    _grid: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.eps_root > 0:
            raise ValueError("eps_root must be positive")

    def __len__(self):
        return len(self.roots)

    def _cell(self, z: complex) -> tuple[int, int]:
        return math.floor(z.real / self.eps_root), math.floor(z.imag / self.eps_root)

    def nearest_within(self, z: complex) -> int | None:
        cx, cy = self._cell(z)
        best, best_dist = None, self.eps_root
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for j in self._grid.get((cx + dx, cy + dy), ()):
                    dist = abs(self.roots[j].z - z)
                    if dist <= best_dist:
                        # ties go to the lower index so the result is scan-order free
                        if best is None or dist < best_dist or j < best:
                            best, best_dist = j, dist
        return best

    def register(self, z: complex, displacement: complex, d: int) -> Registered:
        z = complex(z)
        a = abs(displacement)
        j = self.nearest_within(z)
        if j is None:
            self.roots.append(Root(z, a, inclusion_radius(d, displacement)))
            idx = len(self.roots) - 1
            self._grid.setdefault(self._cell(z), []).append(idx)
            return Registered(True, idx)
        r = self.roots[j]
        r.hit_count += 1
        if a < r.displacement:
            old_cell = self._cell(r.z)
            r.z, r.displacement = z, a
            r.inclusion_radius = inclusion_radius(d, displacement)
            new_cell = self._cell(z)
            if new_cell != old_cell:
                self._grid[old_cell].remove(j)
                self._grid.setdefault(new_cell, []).append(j)
        return Registered(False, j)

    def values(self) -> np.ndarray:
        return np.array([r.z for r in self.roots], dtype=np.complex128)

    def radii(self) -> np.ndarray:
        return np.array([r.inclusion_radius for r in self.roots], dtype=np.float64)


@dataclass
class Certificate:
    certified: bool
    deficit: int
    overlaps: list[tuple[int, int]]

    @property
    def reasons(self) -> list[str]:
        out = []
        if self.deficit:
            out.append(f"count deficit {self.deficit}")
        out += [f"overlap {i} {j}" for i, j in self.overlaps]
        return out


def certify_disjoint(rs: RootSet, d: int) -> Certificate:
    """All roots accounted for iff there are d pairwise disjoint inclusion disks."""
    z = rs.values()
    r = rs.radii()
    overlaps: list[tuple[int, int]] = []
    if len(z) > 1:
        pts = np.column_stack([z.real, z.imag])
        tree = cKDTree(pts)
        reach = 2.0 * float(r.max())
        for i, j in sorted(tree.query_pairs(reach)):
            if abs(z[i] - z[j]) <= r[i] + r[j]:
                overlaps.append((i, j))
    deficit = d - len(z)
    return Certificate(deficit == 0 and not overlaps, deficit, overlaps)


def write_root_array(path, z, radii, hits) -> None:
    """One root per line: re im inclusion-radius hit-count, 17 digits."""
    with open(path, "w") as fh:
        for zi, ri, hi in zip(z, radii, hits):
            zi = complex(zi)
            fh.write(f"{zi.real:.16e} {zi.imag:.16e} {float(ri):.16e} {int(hi)}\n")


def write_roots(path, rs: RootSet) -> None:
    write_root_array(path, rs.values(), rs.radii(), [r.hit_count for r in rs.roots])


class RootFileError(ValueError):
    pass


def read_roots(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse a root file; returns (z, inclusion radii, hit counts)."""
    zs, radii, hits = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            try:
                if len(parts) not in (2, 4):
                    raise ValueError(f"expected 4 fields, got {len(parts)}")
                re_, im_ = float(parts[0]), float(parts[1])
                rad = float(parts[2]) if len(parts) == 4 else 0.0
                hit = int(parts[3]) if len(parts) == 4 else 1
            except ValueError as exc:
                raise RootFileError(f"{path}:{lineno}: {exc}") from None
            zs.append(complex(re_, im_))
            radii.append(rad)
            hits.append(hit)
    return (np.array(zs, dtype=np.complex128), np.array(radii), np.array(hits, dtype=np.int64))
