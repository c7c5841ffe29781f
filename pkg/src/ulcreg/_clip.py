"""Compiled half-plane clipping of box-restricted Voronoi cells (k = 2)."""

import numpy as np
from numba import njit

# max vertices of one clipped cell; a convex cell gains at most one vertex per clip
_VMAX = 1024


@njit(cache=True)
def _clip(px, py, nv, ox, oy, ux, uy, cx, cy):
    """Keep the part of polygon (px, py)[:nv] where (v - c) . u <= 0; return new count."""
    m = 0
    sx = px[nv - 1]
    sy = py[nv - 1]
    fs = (sx - cx) * ux + (sy - cy) * uy
    for j in range(nv):
        ex = px[j]
        ey = py[j]
        fe = (ex - cx) * ux + (ey - cy) * uy
        if fe <= 0.0:
            if fs > 0.0:
                a = fs / (fs - fe)
                ox[m] = sx + a * (ex - sx)
                oy[m] = sy + a * (ey - sy)
                m += 1
            ox[m] = ex
            oy[m] = ey
            m += 1
        elif fs <= 0.0:
            a = fs / (fs - fe)
            ox[m] = sx + a * (ex - sx)
            oy[m] = sy + a * (ey - sy)
            m += 1
        sx = ex
        sy = ey
        fs = fe
    return m


@njit(cache=True)
def _reach(px, py, nv, sx, sy):
    r2 = 0.0
    for j in range(nv):
        dx = px[j] - sx
        dy = py[j] - sy
        d2 = dx * dx + dy * dy
        if d2 > r2:
            r2 = d2
    return np.sqrt(r2)


@njit(cache=True)
def voronoi_cells(pts, lo, hi, nbr, nbr_dist):
    """Clip the domain box against perpendicular bisectors for every site.

    ``nbr[i]`` lists candidate neighbours of site ``i`` by increasing
    Euclidean distance.  Clipping of a cell stops once the next neighbour
    is farther than twice the cell's reach, since its bisector can no
    longer cut the cell.  If the candidate list runs out first, the
    remaining sites are scanned in distance order.
    Returns (vertex_x, vertex_y, offsets).
    """
    n = pts.shape[0]
    m = nbr.shape[1]
    out_x = np.empty(n * 8)
    out_y = np.empty(n * 8)
    offsets = np.zeros(n + 1, dtype=np.int64)
    ax = np.empty(_VMAX)
    ay = np.empty(_VMAX)
    bx = np.empty(_VMAX)
    by = np.empty(_VMAX)
    used = 0
    for i in range(n):
        sx = pts[i, 0]
        sy = pts[i, 1]
        ax[0] = lo[0]
        ay[0] = lo[1]
        ax[1] = hi[0]
        ay[1] = lo[1]
        ax[2] = hi[0]
        ay[2] = hi[1]
        ax[3] = lo[0]
        ay[3] = hi[1]
        nv = 4
        reach = _reach(ax, ay, nv, sx, sy)
        done = False
        for q in range(m):
            j = nbr[i, q]
            if nbr_dist[i, q] > 2.0 * reach:
                done = True
                break
            ux = pts[j, 0] - sx
            uy = pts[j, 1] - sy
            nv = _clip(ax, ay, nv, bx, by, ux, uy, 0.5 * (sx + pts[j, 0]), 0.5 * (sy + pts[j, 1]))
            for v in range(nv):
                ax[v] = bx[v]
                ay[v] = by[v]
            reach = _reach(ax, ay, nv, sx, sy)
        if not done and m < n - 1:
            d = np.empty(n)
            for j in range(n):
                d[j] = np.hypot(pts[j, 0] - sx, pts[j, 1] - sy)
            order = np.argsort(d)
            for q in range(n):
                j = order[q]
                if j == i:
                    continue
                if d[j] > 2.0 * reach:
                    break
                ux = pts[j, 0] - sx
                uy = pts[j, 1] - sy
                nv = _clip(ax, ay, nv, bx, by, ux, uy, 0.5 * (sx + pts[j, 0]), 0.5 * (sy + pts[j, 1]))
                for v in range(nv):
                    ax[v] = bx[v]
                    ay[v] = by[v]
                reach = _reach(ax, ay, nv, sx, sy)
        if used + nv > out_x.size:
            grow = max(out_x.size, nv) * 2
            nx = np.empty(grow)
            ny = np.empty(grow)
            nx[:used] = out_x[:used]
            ny[:used] = out_y[:used]
            out_x = nx
            out_y = ny
        for v in range(nv):
            out_x[used + v] = ax[v]
            out_y[used + v] = ay[v]
        used += nv
        offsets[i + 1] = used
    return out_x[:used], out_y[:used], offsets


@njit(cache=True)
def polygon_stats(vx, vy, offsets, pts):
    """Shoelace area and sup-norm diameter of (vertices + site) per cell."""
    n = offsets.size - 1
    area = np.empty(n)
    diam = np.empty(n)
    for i in range(n):
        a = offsets[i]
        b = offsets[i + 1]
        s = 0.0
        for p in range(a, b):
            q = p + 1 if p + 1 < b else a
            s += vx[p] * vy[q] - vx[q] * vy[p]
        area[i] = 0.5 * abs(s)
        dmax = 0.0
        for p in range(a, b):
            for q in range(p + 1, b):
                d = max(abs(vx[p] - vx[q]), abs(vy[p] - vy[q]))
                if d > dmax:
                    dmax = d
            d = max(abs(vx[p] - pts[i, 0]), abs(vy[p] - pts[i, 1]))
            if d > dmax:
                dmax = d
        diam[i] = dmax
    return area, diam
