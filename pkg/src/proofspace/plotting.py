"""Deterministic SVG scatter plots of 2-d proof-space projections.

Markers encode experimental condition: plain proofs are solid circles,
ablated proofs open circles, and human proofs stars.  Optional mixture
components draw as 2-sigma covariance ellipses.  Output is byte-identical
for identical inputs: fixed viewport, equal-aspect data mapping, fixed
decimal formatting, no timestamps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import DataError
from .corpus import Condition
from .clustering import GmmModel, covariance_ellipse

__all__ = ["PlotSpec", "PlotPoint", "DimensionNotTwo", "render_svg"]

VIEW_WIDTH = 640
VIEW_HEIGHT = 480
MARGIN = 48.0
POINT_RADIUS = 5.0
ELLIPSE_SIGMA = 2.0


class DimensionNotTwo(DataError):
    """Plotting needs a 2-d solution."""


@dataclass(frozen=True)
class PlotPoint:
    x: float
    y: float
    condition: Condition
    proof_id: str


@dataclass(frozen=True)
class PlotSpec:
    points: tuple[PlotPoint, ...]
    ellipses: tuple[tuple[np.ndarray, tuple[float, float], float], ...] = ()

    @classmethod
    def build(
        cls,
        coordinates: np.ndarray,
        conditions: Sequence[Condition],
        proof_ids: Sequence[str],
        gmm: Optional[GmmModel] = None,
    ) -> "PlotSpec":
        coords = np.asarray(coordinates, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DimensionNotTwo(
                f"plot requires 2-d coordinates, got shape {coords.shape}"
            )
        if len(conditions) != coords.shape[0] or len(proof_ids) != coords.shape[0]:
            raise DataError("conditions/proof_ids do not match the coordinate rows")
        points = tuple(
            PlotPoint(float(x), float(y), condition, proof_id)
            for (x, y), condition, proof_id in zip(coords, conditions, proof_ids)
        )
        ellipses = ()
        if gmm is not None:
            if gmm.means.shape[1] != 2:
                raise DimensionNotTwo("GMM means are not 2-d")
            ellipses = tuple(
                covariance_ellipse(gmm.means[j], gmm.covariances[j], ELLIPSE_SIGMA)
                for j in range(gmm.k)
            )
        return cls(points=points, ellipses=ellipses)


def _fmt(value: float) -> str:
    return f"{value:.6f}"


class _Mapper:
    """Equal-aspect affine map from data space onto the SVG viewport."""

    def __init__(self, spec: PlotSpec):
        xs = [p.x for p in spec.points]
        ys = [p.y for p in spec.points]
        for center, (major, minor), angle in spec.ellipses:
            reach = math.hypot(major, minor)
            xs.extend((float(center[0]) - reach, float(center[0]) + reach))
            ys.extend((float(center[1]) - reach, float(center[1]) + reach))
        if not xs:
            raise DataError("nothing to plot")
        min_x, max_x = min(xs), max(xs)
        min_y, max_y = min(ys), max(ys)
        span = max(max_x - min_x, max_y - min_y, 1e-12)
        usable = min(VIEW_WIDTH, VIEW_HEIGHT) - 2 * MARGIN
        self.scale = usable / span
        self.mid_x = 0.5 * (min_x + max_x)
        self.mid_y = 0.5 * (min_y + max_y)

    def to_screen(self, x: float, y: float) -> tuple[float, float]:
        sx = VIEW_WIDTH / 2 + (x - self.mid_x) * self.scale
        sy = VIEW_HEIGHT / 2 - (y - self.mid_y) * self.scale
        return sx, sy


def _star_path(cx: float, cy: float, radius: float) -> str:
    outer, inner = radius * 1.8, radius * 0.7
    vertices = []
    for i in range(10):
        r = outer if i % 2 == 0 else inner
        theta = -math.pi / 2 + i * math.pi / 5
        vertices.append((cx + r * math.cos(theta), cy + r * math.sin(theta)))
    body = " L ".join(f"{_fmt(x)} {_fmt(y)}" for x, y in vertices)
    return f"M {body} Z"


def render_svg(spec: PlotSpec) -> str:
    """Render the plot spec to a standalone SVG document."""
    mapper = _Mapper(spec)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEW_WIDTH}" '
        f'height="{VIEW_HEIGHT}" viewBox="0 0 {VIEW_WIDTH} {VIEW_HEIGHT}">',
        f'<rect x="0" y="0" width="{VIEW_WIDTH}" height="{VIEW_HEIGHT}" '
        'fill="white" stroke="#444444" stroke-width="1"/>',
    ]
    for center, (major, minor), angle in spec.ellipses:
        cx, cy = mapper.to_screen(float(center[0]), float(center[1]))
        rx = major * mapper.scale
        ry = minor * mapper.scale
        # Screen y points down, so data-space rotation flips sign.
        degrees = -math.degrees(angle)
        lines.append(
            f'<ellipse class="component" cx="0" cy="0" rx="{_fmt(rx)}" ry="{_fmt(ry)}" '
            f'fill="none" stroke="#888888" stroke-width="1.2" '
            f'transform="translate({_fmt(cx)} {_fmt(cy)}) rotate({_fmt(degrees)})"/>'
        )
    for point in spec.points:
        cx, cy = mapper.to_screen(point.x, point.y)
        if point.condition is Condition.PLAIN:
            lines.append(
                f'<circle class="plain" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                f'r="{_fmt(POINT_RADIUS)}" fill="#1a1a1a" stroke="none" '
                f'data-proof-id="{escape(point.proof_id)}"/>'
            )
        elif point.condition is Condition.ABLATED:
            lines.append(
                f'<circle class="ablated" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                f'r="{_fmt(POINT_RADIUS)}" fill="none" stroke="#1a1a1a" '
                f'stroke-width="1.5" data-proof-id="{escape(point.proof_id)}"/>'
            )
        else:
            lines.append(
                f'<path class="human" d="{_star_path(cx, cy, POINT_RADIUS)}" '
                f'fill="#b8860b" stroke="#1a1a1a" stroke-width="0.8" '
                f'data-proof-id="{escape(point.proof_id)}"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
