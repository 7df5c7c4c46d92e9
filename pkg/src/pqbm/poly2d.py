"""Exact planar halfspace geometry.

A symmetric 2D polytope arrives as normals u_i and heights h_i > 0 with
the origin interior.  Under polarity the halfspace <x, u_i> <= h_i maps
to the point u_i / h_i, and a halfspace supports a facet of positive
length exactly when its dual point is an extreme point of the dual
convex hull.  Touching-but-degenerate halfspaces land on hull edges and
are dropped, which is the geometric (not measure-threshold) facet test
used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def shoelace_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull_indices(points: np.ndarray, eps: float) -> np.ndarray:
    """Andrew monotone chain returning indices of strictly extreme points, CCW."""
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]

    def half(idx_range):
        stack = []
        for i in idx_range:
            while len(stack) >= 2 and _cross(pts[stack[-2]], pts[stack[-1]], pts[i]) <= eps:
                stack.pop()
            stack.append(i)
        return stack

    lower = half(range(len(pts)))
    upper = half(range(len(pts) - 1, -1, -1))
    idx = lower[:-1] + upper[:-1]
    return order[np.array(idx, dtype=int)]


@dataclass(frozen=True)
class Polygon2D:
    """Reduced H-representation of a planar polytope with derived geometry.

    normals/heights are the essential constraints sorted by normal angle;
    vertices[i] is the intersection of edges i and i+1 (cyclically), so
    edge i runs from vertices[i-1] to vertices[i].
    """

    normals: np.ndarray       # (N, 2) essential outer normals, CCW by angle
    heights: np.ndarray       # (N,)
    vertices: np.ndarray      # (N, 2)
    edge_lengths: np.ndarray  # (N,)
    keep: np.ndarray          # indices into the input arrays

    @property
    def area(self) -> float:
        return shoelace_area(self.vertices)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    def support(self, dirs: np.ndarray) -> np.ndarray:
        return np.max(np.asarray(dirs, float) @ self.vertices.T, axis=-1)

    def edge_endpoints(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices[i - 1], self.vertices[i]


def essential_polygon(normals: np.ndarray, heights: np.ndarray) -> Polygon2D:
    """Reduce halfspaces {<x,u_i> <= h_i} to essential ones and enumerate vertices.

    Requires h_i > 0 (origin interior) and a bounded intersection.
    """
    normals = np.asarray(normals, dtype=float)
    heights = np.asarray(heights, dtype=float)
    if normals.ndim != 2 or normals.shape[1] != 2:
        raise DomainError("normals must be (N, 2)")
    if np.any(heights <= 0):
        raise DomainError("heights must be positive (origin interior)")

    # Identical directions: only the tightest halfspace can matter.
    ang = np.arctan2(normals[:, 1], normals[:, 0])
    order = np.argsort(ang, kind="stable")
    keep_first = []
    last_ang = None
    for i in order:
        if last_ang is not None and abs(ang[i] - last_ang) < 1e-13:
            j = keep_first[-1]
            if heights[i] < heights[j]:
                keep_first[-1] = i
            continue
        keep_first.append(i)
        last_ang = ang[i]
    cand = np.array(keep_first, dtype=int)

    duals = normals[cand] / heights[cand, None]
    scale = float(np.max(np.linalg.norm(duals, axis=1)))
    eps = 1e-12 * scale * scale
    hull = _hull_indices(duals, eps)
    if len(hull) < 3:
        raise DomainError("halfspace intersection is unbounded or degenerate")
    keep = cand[hull]

    u = normals[keep]
    h = heights[keep]
    a = np.arctan2(u[:, 1], u[:, 0])
    srt = np.argsort(a)
    keep, u, h = keep[srt], u[srt], h[srt]

    nxt = np.roll(np.arange(len(u)), -1)
    det = u[:, 0] * u[nxt, 1] - u[:, 1] * u[nxt, 0]
    if np.any(det <= 0):
        raise DomainError("consecutive essential normals span >= pi: unbounded")
    vx = (h * u[nxt, 1] - h[nxt] * u[:, 1]) / det
    vy = (u[:, 0] * h[nxt] - u[nxt, 0] * h) / det
    vertices = np.column_stack([vx, vy])
    edge_len = np.linalg.norm(vertices - np.roll(vertices, 1, axis=0), axis=1)
    return Polygon2D(u, h, vertices, edge_len, keep)


def facet_lengths_full(normals: np.ndarray, heights: np.ndarray) -> np.ndarray:
    """Edge length per input halfspace; exactly 0 for non-facets."""
    poly = essential_polygon(normals, heights)
    out = np.zeros(len(normals))
    out[poly.keep] = poly.edge_lengths
    return out
