"""Pathfinder / Path-X scenes: dashed random-walk contours with two circle markers.

Each scene draws 1 + ``distractors`` contours. A positive scene puts the two
markers on the two ends of one contour; a negative scene puts them on ends of
two different contours. Contours keep a minimum separation so the
construction-level dash graph (consecutive dashes joined across their gap) is
exactly the union of the individual contours.
"""
from __future__ import annotations

import json
import math
import struct
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, GenerationError, ParameterError
from ..substrate import Rng
from .pixels import PixelSequence, image_to_sequence

SIZES = (32, 128)


@dataclass(frozen=True)
class PathfinderParams:
    size: int = 32
    distractors: int = 2
    dash: int = 3
    gap: int = 2
    marker_radius: int = 1      # at 32 x 32; scaled with size
    path_length: int = 20       # pixels along each contour at 32 x 32; scaled with size
    curvature: float = 0.35     # std of the per-pixel heading change, radians
    separation: float = 4.0     # > gap + 1.5, so distinct contours never share a dash edge
    max_tries: int = 200

    def __post_init__(self):
        if self.size not in SIZES:
            raise ParameterError(f"size must be one of {SIZES}, got {self.size}")
        if self.distractors < 1:
            raise ParameterError(f"distractors must be >= 1, got {self.distractors}")
        if self.dash < 1 or self.gap < 1 or self.marker_radius < 0 or self.path_length < self.dash:
            raise ParameterError("dash, gap >= 1, marker_radius >= 0, path_length >= dash required")

    @property
    def scale(self) -> float:
        return self.size / 32

    @property
    def radius(self) -> int:
        return int(round(self.marker_radius * self.scale))

    @property
    def length(self) -> int:
        return int(round(self.path_length * self.scale))


@dataclass
class Contour:
    points: np.ndarray               # (L, 2) float (row, col), one pixel apart
    dashes: list[tuple[int, int]]    # [start, end) index ranges into points

    @property
    def ends(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[self.dashes[0][0]], self.points[self.dashes[-1][1] - 1]


@dataclass
class PathfinderScene:
    size: int
    contours: list[Contour]
    markers: list[tuple[int, int]]       # (contour index, 0 = start / 1 = end) per marker
    label: int
    grid: np.ndarray = field(repr=False)

    def marker_centers(self) -> list[np.ndarray]:
        return [self.contours[c].ends[e] for c, e in self.markers]

    def dash_graph(self, gap: int) -> tuple[list[tuple[int, int]], dict]:
        """Nodes are (contour, dash); edges join dash ends within gap + 1.5 px."""
        nodes = [(ci, di) for ci, c in enumerate(self.contours) for di in range(len(c.dashes))]
        ends = {}
        for ci, di in nodes:
            s, e = self.contours[ci].dashes[di]
            ends[(ci, di)] = (self.contours[ci].points[s], self.contours[ci].points[e - 1])
        tol = gap + 1.5
        adj: dict = {nd: [] for nd in nodes}
        for i, a in enumerate(nodes):
            for b in nodes[i + 1:]:
                d = min(np.linalg.norm(p - q) for p in ends[a] for q in ends[b])
                if d <= tol:
                    adj[a].append(b)
                    adj[b].append(a)
        return nodes, adj

    def markers_connected(self, gap: int) -> bool:
        """Breadth-first search over the dash graph between the markers' dashes."""
        _, adj = self.dash_graph(gap)
        (c0, e0), (c1, e1) = self.markers
        start = (c0, 0 if e0 == 0 else len(self.contours[c0].dashes) - 1)
        goal = (c1, 0 if e1 == 0 else len(self.contours[c1].dashes) - 1)
        seen, queue = {start}, deque([start])
        while queue:
            nd = queue.popleft()
            if nd == goal:
                return True
            for nb in adj[nd]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return False


def _walk(rng: Rng, p: PathfinderParams, margin: float) -> np.ndarray | None:
    n = p.size
    lo, hi = margin, n - 1 - margin
    pos = rng.uniform(lo, hi, size=2)
    heading = rng.uniform(0, 2 * math.pi)
    pts = [pos.copy()]
    for _ in range(p.length - 1):
        for _ in range(20):
            h = heading + rng.normal(scale=p.curvature)
            nxt = pos + np.array([math.sin(h), math.cos(h)])
            if lo <= nxt[0] <= hi and lo <= nxt[1] <= hi:
                heading, pos = h, nxt
                break
            heading += math.pi / 2  # turn away from the border and retry
        else:
            return None
        pts.append(pos.copy())
    return np.array(pts)


def _dashes(length: int, dash: int, gap: int) -> list[tuple[int, int]]:
    out, s = [], 0
    while s + dash <= length:
        out.append((s, s + dash))
        s += dash + gap
    return out


def _far_enough(pts: np.ndarray, others: list[np.ndarray], sep: float) -> bool:
    for o in others:
        d = np.sqrt(((pts[:, None, :] - o[None, :, :]) ** 2).sum(-1))
        if d.min() < sep:
            return False
    return True


def _render(size: int, contours: list[Contour], centers: list[np.ndarray], radius: int) -> np.ndarray:
    grid = np.zeros((size, size), dtype=np.uint8)
    for c in contours:
        for s, e in c.dashes:
            rc = np.clip(np.rint(c.points[s:e]).astype(int), 0, size - 1)
            grid[rc[:, 0], rc[:, 1]] = 255
    yy, xx = np.mgrid[0:size, 0:size]
    for ctr in centers:
        cy, cx = np.rint(ctr)
        grid[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius] = 255
    return grid


def make_scene(rng: Rng, p: PathfinderParams, label: int) -> PathfinderScene:
    """One scene with the requested label; raises GenerationError after max_tries."""
    margin = p.radius + 1.0
    for _ in range(p.max_tries):
        contours: list[Contour] = []
        for _ in range(1 + p.distractors):
            pts = None
            for _ in range(20):
                cand = _walk(rng, p, margin)
                if cand is not None and _far_enough(cand, [c.points for c in contours], p.separation):
                    pts = cand
                    break
            if pts is None:
                break
            dashes = _dashes(len(pts), p.dash, p.gap)
            contours.append(Contour(pts[:dashes[-1][1]], dashes))
        if len(contours) != 1 + p.distractors:
            continue
        if label == 1:
            markers = [(0, 0), (0, 1)]
        else:
            markers = [(0, int(rng.integers(0, 2))), (1, int(rng.integers(0, 2)))]
        scene = PathfinderScene(p.size, contours, markers, label, np.zeros(0))
        centers = scene.marker_centers()
        if np.linalg.norm(centers[0] - centers[1]) < 2.0:
            continue
        scene.grid = _render(p.size, contours, centers, p.radius)
        return scene
    raise GenerationError(f"could not place {1 + p.distractors} separated contours in {p.size}x{p.size} "
                          f"after {p.max_tries} tries")


def gen_pathfinder(rng: Rng | int, size: int = 32, n: int = 1, distractors: int = 2, return_scenes: bool = False,
                   **overrides):
    """Returns a list of (PixelSequence, label), or scenes when ``return_scenes``.

    Labels are fair coin flips. A sample whose placement fails is redrawn from
    the same stream, so output depends only on the seed.
    """
    p = PathfinderParams(size=size, distractors=distractors, **overrides)
    rng = rng if isinstance(rng, Rng) else Rng(int(rng))
    out = []
    for _ in range(n):
        label = int(rng.random() < 0.5)
        for attempt in range(10):
            try:
                scene = make_scene(rng, p, label)
                break
            except GenerationError:
                if attempt == 9:
                    raise
        out.append(scene if return_scenes else (image_to_sequence(scene.grid), label))
    return out


# ---------------------------------------------------------------- binary records

def write_pixel_records(path, samples, sidecar: dict | None = None) -> Path:
    """Records of u16 height, u16 width, height*width bytes, u8 label (little-endian)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for seq, label in samples:
            if not 0 <= int(label) <= 255:
                raise FormatError(f"label {label} does not fit in a byte")
            fh.write(struct.pack("<HH", seq.height, seq.width))
            fh.write(np.asarray(seq.tokens, dtype=np.uint8).tobytes())
            fh.write(struct.pack("<B", int(label)))
    if sidecar is not None:
        side = dict(sidecar)
        side["records"] = len(samples)
        Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return path


def read_pixel_records(path) -> list[tuple[PixelSequence, int]]:
    data = Path(path).read_bytes()
    out, off = [], 0
    while off < len(data):
        if off + 4 > len(data):
            raise FormatError(f"{path}: {len(data) - off} trailing bytes, too short for a record header")
        h, w = struct.unpack_from("<HH", data, off)
        end = off + 4 + h * w + 1
        if end > len(data):
            raise FormatError(f"{path}: record at byte {off} needs {h * w + 5} bytes, "
                              f"{len(data) - off} remain")
        px = np.frombuffer(data, dtype=np.uint8, count=h * w, offset=off + 4).copy()
        out.append((PixelSequence(px, h, w), data[end - 1]))
        off = end
    return out


def sidecar_for(p: PathfinderParams, seed: int, n: int) -> dict:
    return {"generator": "pathfinder", "seed": seed, "n": n, "params": asdict(p),
            "marker_radius_px": p.radius, "path_length_px": p.length}
