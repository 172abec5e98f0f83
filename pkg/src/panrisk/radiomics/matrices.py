"""Texture matrix builders over a discretized ROI.

All builders are vectorized with shifted-array arithmetic; the 13 unique
distance-1 offsets cover the 26-neighborhood when both directions are counted.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .discretize import DiscretizedRoi

__all__ = [
    "UNIQUE_OFFSETS",
    "ALL_OFFSETS",
    "cooccurrence_matrices",
    "run_length_matrices",
    "size_zone_matrix",
    "dependence_matrix",
    "gray_tone_difference_table",
]

# 13 distance-1 offsets whose first nonzero component is positive
UNIQUE_OFFSETS: tuple[tuple[int, int, int], ...] = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) > (0, 0, 0)
)

# all 26 neighbor offsets
ALL_OFFSETS: tuple[tuple[int, int, int], ...] = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
)


def _pair_slices(shape, off):
    """Slices (src, dst) selecting voxel pairs (p, p + off) inside the grid."""
    src = tuple(slice(max(0, -d), n - max(0, d)) for n, d in zip(shape, off))
    dst = tuple(slice(s.start + d, s.stop + d) for s, d in zip(src, off))
    return src, dst


def cooccurrence_matrices(d: DiscretizedRoi) -> list[np.ndarray]:
    """Normalized symmetric co-occurrence matrices, one per offset with pairs.

    Offsets yielding no in-mask pairs are dropped (features average over the
    remaining matrices).
    """
    ng = d.ng
    out = []
    for off in UNIQUE_OFFSETS:
        src, dst = _pair_slices(d.levels.shape, off)
        both = d.mask[src] & d.mask[dst]
        if not both.any():
            continue
        a = d.levels[src][both].astype(np.int64) - 1
        b = d.levels[dst][both].astype(np.int64) - 1
        counts = np.bincount(a * ng + b, minlength=ng * ng).reshape(ng, ng).astype(np.float64)
        counts = counts + counts.T  # symmetric: count both directions
        out.append(counts / counts.sum())
    return out


def run_length_matrices(d: DiscretizedRoi) -> list[np.ndarray]:
    """Run-length count matrices R[level-1, length-1], one per direction.

    A run is a maximal streak of in-mask voxels of equal level along the
    offset direction. Per direction, sum(R[i, j] * (j+1)) equals the
    foreground voxel count.
    """
    shape = d.levels.shape
    ng = d.ng
    max_len = int(max(shape))
    coords = np.argwhere(d.mask)
    levels_at = d.levels[tuple(coords.T)]
    out = []
    for off in UNIQUE_OFFSETS:
        offv = np.array(off)
        prev = coords - offv
        inb = np.all((prev >= 0) & (prev < shape), axis=1)
        prev_ok = np.zeros(len(coords), dtype=bool)
        if inb.any():
            p = prev[inb]
            pi = tuple(p.T)
            prev_ok[inb] = d.mask[pi] & (d.levels[pi] == levels_at[inb])
        starts = ~prev_ok  # run starts: no same-level in-mask predecessor
        pos = coords[starts].copy()
        lvl = levels_at[starts]
        lengths = np.ones(starts.sum(), dtype=np.int64)
        active = np.arange(len(pos))
        cur = pos
        while active.size:
            nxt = cur + offv
            inb2 = np.all((nxt >= 0) & (nxt < shape), axis=1)
            ext = np.zeros(len(cur), dtype=bool)
            if inb2.any():
                q = nxt[inb2]
                qi = tuple(q.T)
                ext[inb2] = d.mask[qi] & (d.levels[qi] == lvl[active][inb2])
            lengths[active[ext]] += 1
            active = active[ext]
            cur = nxt[ext]
        mat = np.zeros((ng, max_len), dtype=np.float64)
        np.add.at(mat, (lvl - 1, lengths - 1), 1.0)
        out.append(mat)
    return out


def size_zone_matrix(d: DiscretizedRoi) -> np.ndarray:
    """Size-zone counts S[level-1, size-1] over 26-connected equal-level zones."""
    ng = d.ng
    structure = np.ones((3, 3, 3), dtype=bool)
    sizes_per_level: list[np.ndarray] = []
    max_size = 1
    for g in range(1, ng + 1):
        blob = d.levels == g
        if not blob.any():
            sizes_per_level.append(np.zeros(0, dtype=np.int64))
            continue
        lab, n = ndimage.label(blob, structure=structure)
        sizes = np.bincount(lab.ravel())[1:]
        sizes_per_level.append(sizes.astype(np.int64))
        max_size = max(max_size, int(sizes.max()))
    mat = np.zeros((ng, max_size), dtype=np.float64)
    for g, sizes in enumerate(sizes_per_level):
        for s in sizes:
            mat[g, s - 1] += 1.0
    return mat


def dependence_matrix(d: DiscretizedRoi) -> np.ndarray:
    """Dependence counts D[level-1, d] where d = number of equal-level 26-neighbors."""
    ng = d.ng
    shape = d.levels.shape
    dep = np.zeros(shape, dtype=np.int64)
    for off in ALL_OFFSETS:
        src, dst = _pair_slices(shape, off)
        same = d.mask[src] & d.mask[dst] & (d.levels[src] == d.levels[dst])
        dep[src] += same
    mat = np.zeros((ng, 27), dtype=np.float64)
    lv = d.levels[d.mask] - 1
    dp = dep[d.mask]
    np.add.at(mat, (lv, dp), 1.0)
    return mat


def gray_tone_difference_table(d: DiscretizedRoi):
    """Per-level voxel counts and absolute neighborhood-difference sums.

    Returns (n_i, s_i, nvp): for each level i, n_i counts in-mask voxels of
    that level with at least one in-mask 26-neighbor, s_i sums
    |i - mean(neighbor levels)| over those voxels, and nvp = sum(n_i).
    """
    ng = d.ng
    shape = d.levels.shape
    nb_sum = np.zeros(shape, dtype=np.float64)
    nb_cnt = np.zeros(shape, dtype=np.int64)
    lv = d.levels.astype(np.float64)
    for off in ALL_OFFSETS:
        src, dst = _pair_slices(shape, off)
        valid = d.mask[dst]
        nb_sum[src] += np.where(valid & d.mask[src], lv[dst], 0.0)
        nb_cnt[src] += (valid & d.mask[src]).astype(np.int64)
    eligible = d.mask & (nb_cnt > 0)
    n_i = np.zeros(ng, dtype=np.float64)
    s_i = np.zeros(ng, dtype=np.float64)
    if eligible.any():
        lv_e = d.levels[eligible]
        diff = np.abs(lv[eligible] - nb_sum[eligible] / nb_cnt[eligible])
        np.add.at(n_i, lv_e - 1, 1.0)
        np.add.at(s_i, lv_e - 1, diff)
    return n_i, s_i, float(n_i.sum())
