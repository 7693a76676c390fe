"""Minimal-path coherence classification and percolation region growing.

Both methods walk the voxel grid directly.  The inner loops are compiled
with numba; the test suite checks them against naive pure-Python references
on small volumes.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ParameterError, ShapeError

__all__ = [
    "MinimalPathParams",
    "PercolationParams",
    "path_neighborhoods",
    "minimal_paths",
    "minimal_paths_coherence",
    "hessian_percolation",
    "percolation_counter",
]

COHERENCE_EPS = 1e-6  # variance floor in the coherence statistic


@dataclass
class MinimalPathParams:
    ell: int = 12
    t3: float = 1e-4

    def __post_init__(self):
        if self.ell < 2:
            raise ParameterError(f"path length must be >= 2, got {self.ell}")
        if not 0.0 <= self.t3 <= 1.0:
            raise ParameterError(f"t3 must be in [0, 1], got {self.t3}")


@dataclass
class PercolationParams:
    epsilon: float = -0.5
    window: int = 3            # W: window half-size
    f: float = 0.6
    tau: int = 4

    def __post_init__(self):
        if self.window < 1:
            raise ParameterError(f"window half-size must be >= 1, got {self.window}")
        if not 0.0 <= self.f <= 1.0:
            raise ParameterError(f"f must be in [0, 1], got {self.f}")
        if self.tau < 0:
            raise ParameterError(f"tau must be >= 0, got {self.tau}")


def path_neighborhoods():
    """The 18 directed neighborhoods of the minimal-path graph.

    Returns (directions (18, 3), offsets (18, 9, 3)), both as (dz, dy, dx).
    Directions are the 6 axis and 12 plane-diagonal directions; each carries
    the 9 offsets of the 26-neighborhood "plane ahead" of it.  Opposite
    directions sit at indices 2i and 2i+1.
    """
    axis_dirs = []
    for axis in range(3):
        for sign in (1, -1):
            d = [0, 0, 0]
            d[axis] = sign
            axis_dirs.append(tuple(d))
    diag_dirs = []
    for a, b in ((0, 1), (0, 2), (1, 2)):
        for sa in (1, -1):
            for sb in (1, -1):
                d = [0, 0, 0]
                d[a], d[b] = sa, sb
                diag_dirs.append(tuple(d))
    # pair each direction with its opposite: axis pairs are already adjacent;
    # reorder diagonals so (d, -d) are adjacent
    dirs = list(axis_dirs)
    used = set()
    for d in diag_dirs:
        if d in used:
            continue
        neg = tuple(-c for c in d)
        dirs.extend([d, neg])
        used.update([d, neg])

    offsets = np.zeros((18, 9, 3), dtype=np.int64)
    for i, d in enumerate(dirs):
        nonzero = [ax for ax in range(3) if d[ax] != 0]
        cell = 0
        if len(nonzero) == 1:
            axis = nonzero[0]
            others = [ax for ax in range(3) if ax != axis]
            for p in (-1, 0, 1):
                for q in (-1, 0, 1):
                    off = [0, 0, 0]
                    off[axis] = d[axis]
                    off[others[0]], off[others[1]] = p, q
                    offsets[i, cell] = off
                    cell += 1
        else:
            a, b = nonzero
            k = [ax for ax in range(3) if ax not in nonzero][0]
            for pa, pb in ((d[a], d[b]), (d[a], 0), (0, d[b])):
                for c in (-1, 0, 1):
                    off = [0, 0, 0]
                    off[a], off[b], off[k] = pa, pb, c
                    offsets[i, cell] = off
                    cell += 1
    return np.array(dirs, dtype=np.int64), offsets


@numba.njit(cache=True)
def _grow_arm(vol, z, y, x, offs, ell):
    """Greedy minimum-grayvalue arm; returns (sum, sum of squares, count)."""
    nz, ny, nx = vol.shape
    total = 0.0
    total2 = 0.0
    count = 0
    for _ in range(ell):
        best = 1e30
        bz = -1
        by = -1
        bx = -1
        for o in range(offs.shape[0]):
            qz = z + offs[o, 0]
            qy = y + offs[o, 1]
            qx = x + offs[o, 2]
            if qz < 0 or qz >= nz or qy < 0 or qy >= ny or qx < 0 or qx >= nx:
                continue
            value = vol[qz, qy, qx]
            if value < best:
                best = value
                bz, by, bx = qz, qy, qx
        if bz < 0:
            break
        z, y, x = bz, by, bx
        total += best
        total2 += best * best
        count += 1
    return total, total2, count


@numba.njit(parallel=True, cache=True)
def _coherence_kernel(vol, offsets, ell, eps0):
    nz, ny, nx = vol.shape
    out = np.empty((nz, ny, nx), dtype=np.float32)
    for zi in numba.prange(nz):
        z = np.int64(zi)  # parfor chunking can promote the prange index
        for y in range(ny):
            for x in range(nx):
                center = vol[z, y, x]
                lo_mean = 1e30
                lo_var = 0.0
                hi_mean = -1e30
                hi_var = 0.0
                for pair in range(9):
                    s1, q1, c1 = _grow_arm(vol, z, y, x, offsets[2 * pair], ell)
                    s2, q2, c2 = _grow_arm(vol, z, y, x, offsets[2 * pair + 1], ell)
                    count = c1 + c2 + 1
                    total = s1 + s2 + center
                    total2 = q1 + q2 + center * center
                    mean = total / count
                    var = total2 / count - mean * mean
                    if var < 0.0:
                        var = 0.0
                    if mean < lo_mean:
                        lo_mean = mean
                        lo_var = var
                    if mean > hi_mean:
                        hi_mean = mean
                        hi_var = var
                sep = hi_mean - lo_mean
                out[z, y, x] = np.exp(
                    -(sep * sep) / (2.0 * (hi_var + lo_var + eps0))
                )
    return out


def minimal_paths_coherence(vol, ell):
    """Coherence h per voxel; low h separates crack from background paths.

    For each of the 9 opposite-direction pairs a local minimal path is grown
    greedily (two arms of ``ell`` steps each, merged through the voxel); h
    contrasts the darkest and brightest paths' grayvalue statistics:
    h = exp(-(mu+ - mu-)^2 / (2 (s+^2 + s-^2 + eps0))).
    """
    vol = np.ascontiguousarray(vol, dtype=np.float32)
    _, offsets = path_neighborhoods()
    return _coherence_kernel(vol, offsets, ell, COHERENCE_EPS)


def minimal_paths(vol, params):
    """Minimal-path segmentation: voxels with coherence h <= t3."""
    return minimal_paths_coherence(vol, params.ell) <= params.t3


# ---------------------------------------------------------------------------
# Hessian-based percolation
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _percolation_kernel(vol, preselect, window, eps, f):
    """Percolate from every preselected voxel, accumulating a counter.

    P grows in rounds: every current candidate (window-bounded neighbor of
    P) at or below the dynamic threshold t joins P at once, then t is raised
    to max(max over P, t) + eps.  Growth stops when P touches a window face
    or when a round adds nothing (possible for eps < 0).
    """
    nz, ny, nx = vol.shape
    counter = np.zeros((nz, ny, nx), dtype=np.int32)
    side = 2 * window + 1
    cap = side * side * side
    status = np.zeros((side, side, side), dtype=np.uint8)  # 0 new, 1 in P, 2 cand
    p_cells = np.empty((cap, 3), dtype=np.int32)
    cand = np.empty((cap, 3), dtype=np.int32)
    cand_next = np.empty((cap, 3), dtype=np.int32)
    for sz in range(nz):
        for sy in range(ny):
            for sx in range(nx):
                if not preselect[sz, sy, sx]:
                    continue
                status[:] = 0
                status[window, window, window] = 1
                p_cells[0, 0] = window
                p_cells[0, 1] = window
                p_cells[0, 2] = window
                p_count = 1
                pmax = vol[sz, sy, sx]
                t = pmax + eps
                contact = False
                cand_count = 0
                # seed's neighbors become the initial candidate set
                for dz in range(-1, 2):
                    for dy in range(-1, 2):
                        for dx in range(-1, 2):
                            if dz == 0 and dy == 0 and dx == 0:
                                continue
                            lz, ly, lx = window + dz, window + dy, window + dx
                            gz, gy, gx = sz + dz, sy + dy, sx + dx
                            if gz < 0 or gz >= nz or gy < 0 or gy >= ny:
                                continue
                            if gx < 0 or gx >= nx:
                                continue
                            status[lz, ly, lx] = 2
                            cand[cand_count, 0] = lz
                            cand[cand_count, 1] = ly
                            cand[cand_count, 2] = lx
                            cand_count += 1
                while not contact and cand_count > 0:
                    first_new = p_count
                    next_count = 0
                    for i in range(cand_count):
                        lz = cand[i, 0]
                        ly = cand[i, 1]
                        lx = cand[i, 2]
                        value = vol[sz + lz - window, sy + ly - window,
                                    sx + lx - window]
                        if value <= t:
                            status[lz, ly, lx] = 1
                            p_cells[p_count, 0] = lz
                            p_cells[p_count, 1] = ly
                            p_cells[p_count, 2] = lx
                            p_count += 1
                            if value > pmax:
                                pmax = value
                            if (
                                lz == 0 or lz == side - 1
                                or ly == 0 or ly == side - 1
                                or lx == 0 or lx == side - 1
                            ):
                                contact = True
                        else:
                            cand_next[next_count, 0] = lz
                            cand_next[next_count, 1] = ly
                            cand_next[next_count, 2] = lx
                            next_count += 1
                    if p_count == first_new:
                        break
                    # unseen neighbors of the voxels added this round
                    for j in range(first_new, p_count):
                        for dz in range(-1, 2):
                            for dy in range(-1, 2):
                                for dx in range(-1, 2):
                                    if dz == 0 and dy == 0 and dx == 0:
                                        continue
                                    lz = p_cells[j, 0] + dz
                                    ly = p_cells[j, 1] + dy
                                    lx = p_cells[j, 2] + dx
                                    if (
                                        lz < 0 or lz >= side
                                        or ly < 0 or ly >= side
                                        or lx < 0 or lx >= side
                                    ):
                                        continue
                                    if status[lz, ly, lx] != 0:
                                        continue
                                    gz = sz + lz - window
                                    gy = sy + ly - window
                                    gx = sx + lx - window
                                    if (
                                        gz < 0 or gz >= nz
                                        or gy < 0 or gy >= ny
                                        or gx < 0 or gx >= nx
                                    ):
                                        continue
                                    status[lz, ly, lx] = 2
                                    cand_next[next_count, 0] = lz
                                    cand_next[next_count, 1] = ly
                                    cand_next[next_count, 2] = lx
                                    next_count += 1
                    if pmax > t:
                        t = pmax + eps
                    else:
                        t = t + eps
                    tmp = cand
                    cand = cand_next
                    cand_next = tmp
                    cand_count = next_count
                overlap = 0
                for j in range(p_count):
                    gz = sz + p_cells[j, 0] - window
                    gy = sy + p_cells[j, 1] - window
                    gx = sx + p_cells[j, 2] - window
                    if preselect[gz, gy, gx]:
                        overlap += 1
                if overlap / p_count >= f:
                    for j in range(p_count):
                        counter[
                            sz + p_cells[j, 0] - window,
                            sy + p_cells[j, 1] - window,
                            sx + p_cells[j, 2] - window,
                        ] += 1
    return counter


def percolation_counter(vol, preselect, params):
    """Per-voxel detection counter accumulated over all accepted percolations."""
    vol = np.ascontiguousarray(vol, dtype=np.float32)
    preselect = np.ascontiguousarray(preselect, dtype=bool)
    if vol.shape != preselect.shape:
        raise ShapeError(f"dims mismatch: {vol.shape} vs {preselect.shape}")
    return _percolation_kernel(
        vol, preselect, params.window, params.epsilon, params.f
    )


def hessian_percolation(vol, preselect, params):
    """Window-bounded region growing from every preselected voxel.

    A percolation accepts its grown set P when the overlap fraction
    |P ∩ preselect| / |P| reaches ``f``; accepted sets increment a per-voxel
    counter and the final mask keeps voxels counted at least ``tau`` times.
    """
    counter = percolation_counter(vol, preselect, params)
    return counter >= params.tau
