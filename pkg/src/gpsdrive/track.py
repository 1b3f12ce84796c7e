"""Reference-path geometry: scenario center lines and point projection."""

from __future__ import annotations

import math

import numpy as np

LANE_WIDTH = 3.5  # m

_SAMPLE_DS = 0.5  # polyline sampling resolution, m


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


class ReferencePath:
    """Polyline center line with per-point heading and arclength."""

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 4 or pts.shape[0] < 2:
            raise ValueError("path needs at least two (X, Y, heading, s) points")
        if np.any(np.diff(pts[:, 3]) <= 0):
            raise ValueError("path arclength must be strictly increasing")
        self.points = pts
        self._seg_d = pts[1:, :2] - pts[:-1, :2]
        self._seg_len2 = np.einsum("ij,ij->i", self._seg_d, self._seg_d)

    @property
    def length(self) -> float:
        return float(self.points[-1, 3])

    def point_at(self, s: float) -> tuple[float, float, float]:
        """Interpolated (X, Y, heading) at arclength s (clamped to the ends)."""
        s_arr = self.points[:, 3]
        s = float(np.clip(s, s_arr[0], s_arr[-1]))
        i = int(np.clip(np.searchsorted(s_arr, s) - 1, 0, len(s_arr) - 2))
        t = (s - s_arr[i]) / (s_arr[i + 1] - s_arr[i])
        p = self.points[i, :2] + t * (self.points[i + 1, :2] - self.points[i, :2])
        h = self.points[i, 2] + t * (self.points[i + 1, 2] - self.points[i, 2])
        return float(p[0]), float(p[1]), float(h)

    def project(self, X: float, Y: float) -> tuple[float, float, float]:
        """Project a point onto the path.

        Returns (delta_y, tangent_heading, arclength); delta_y is the signed
        lateral offset, positive to the left of the path. The projection is
        clamped to the path endpoints.
        """
        p = np.array([X, Y])
        rel = p - self.points[:-1, :2]
        t = np.clip(
            np.einsum("ij,ij->i", rel, self._seg_d) / self._seg_len2, 0.0, 1.0
        )
        proj = self.points[:-1, :2] + t[:, None] * self._seg_d
        d2 = np.einsum("ij,ij->i", p - proj, p - proj)
        i = int(np.argmin(d2))
        ti = t[i]
        heading = self.points[i, 2] + ti * (self.points[i + 1, 2] - self.points[i, 2])
        s = self.points[i, 3] + ti * (self.points[i + 1, 3] - self.points[i, 3])
        off = p - proj[i]
        normal = np.array([-math.sin(heading), math.cos(heading)])
        return float(off @ normal), float(heading), float(s)


def project_to_path(
    pose: tuple[float, float, float], path: ReferencePath
) -> tuple[float, float, float]:
    """(delta_y, delta_phi, arclength) of a (X, Y, psi) pose w.r.t. the path."""
    X, Y, psi = pose
    delta_y, heading, s = path.project(X, Y)
    return delta_y, wrap_angle(psi - heading), s


def _sample_arc(
    x0: float, y0: float, h0: float, s0: float, radius: float, sweep: float
) -> np.ndarray:
    """Sample a constant-radius arc; positive sweep turns left."""
    n = max(2, int(abs(sweep) * radius / _SAMPLE_DS) + 1)
    angles = np.linspace(0.0, sweep, n + 1)[1:]
    sign = 1.0 if sweep >= 0 else -1.0
    # center sits at distance `radius` along the left (or right) normal
    cx = x0 - sign * radius * math.sin(h0)
    cy = y0 + sign * radius * math.cos(h0)
    pts = []
    for a in angles:
        h = h0 + a
        x = cx + sign * radius * math.sin(h)
        y = cy - sign * radius * math.cos(h)
        pts.append([x, y, h, s0 + abs(a) * radius])
    return np.array(pts)


def _sample_straight(
    x0: float, y0: float, h0: float, s0: float, length: float
) -> np.ndarray:
    n = max(2, int(length / _SAMPLE_DS) + 1)
    ds = np.linspace(0.0, length, n + 1)[1:]
    return np.stack(
        [
            x0 + ds * math.cos(h0),
            y0 + ds * math.sin(h0),
            np.full_like(ds, h0),
            s0 + ds,
        ],
        axis=1,
    )


def _concat(start: np.ndarray, *segments: np.ndarray) -> ReferencePath:
    return ReferencePath(np.vstack([start] + list(segments)))


def straight_path(length: float = 120.0) -> ReferencePath:
    start = np.array([[0.0, 0.0, 0.0, 0.0]])
    return _concat(start, _sample_straight(0.0, 0.0, 0.0, 0.0, length))


def turn90_path(
    approach: float = 20.0, radius: float = 10.0, exit_len: float = 80.0
) -> ReferencePath:
    """Two straights joined by a quarter-circle left turn."""
    start = np.array([[0.0, 0.0, 0.0, 0.0]])
    leg1 = _sample_straight(0.0, 0.0, 0.0, 0.0, approach)
    x, y, h, s = leg1[-1]
    arc = _sample_arc(x, y, h, s, radius, math.pi / 2.0)
    x, y, h, s = arc[-1]
    leg2 = _sample_straight(x, y, h, s, exit_len)
    return _concat(start, leg1, arc, leg2)


def roundabout_path(
    approach: float = 10.0, radius: float = 20.0, sweep: float = math.pi
) -> ReferencePath:
    """Short entry straight followed by a constant-radius circular arc."""
    start = np.array([[0.0, 0.0, 0.0, 0.0]])
    leg = _sample_straight(0.0, 0.0, 0.0, 0.0, approach)
    x, y, h, s = leg[-1]
    arc = _sample_arc(x, y, h, s, radius, sweep)
    return _concat(start, leg, arc)


PATH_KINDS = ("straight", "turn90", "roundabout")


def build_path(kind: str) -> ReferencePath:
    builders = {
        "straight": straight_path,
        "turn90": turn90_path,
        "roundabout": roundabout_path,
    }
    if kind not in builders:
        raise ValueError(f"unknown scenario kind {kind!r}")
    return builders[kind]()
