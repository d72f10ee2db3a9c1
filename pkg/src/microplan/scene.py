"""Scene representation: obstacles, safety zones, masks, arenas, persistence.

All geometry is in pixel units.  Scenes are plain dataclasses and are treated
as immutable after construction; every function here is pure.

Reproducibility: all randomness goes through numpy's PCG64 generator seeded
with a caller-supplied integer, so a (seed, parameters) pair yields the same
arena on any platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import GenerationFailed, SceneFormatError

SCENE_SCHEMA_VERSION = 1

KIND_STATIC = "static"
KIND_DYNAMIC = "dynamic"
KIND_BOUNDARY = "boundary"


@dataclass(frozen=True)
class Obstacle:
    id: int
    cx: float
    cy: float
    physical_radius: float
    safety_radius: float
    vx: float = 0.0
    vy: float = 0.0
    kind: str = KIND_STATIC

    @property
    def center(self):
        return np.array([self.cx, self.cy])

    @property
    def velocity(self):
        return np.array([self.vx, self.vy])


@dataclass(frozen=True)
class FlowModel:
    u_flow: float
    direction: tuple[float, float]
    alpha_c: float

    def __post_init__(self):
        if not (0.0 < self.alpha_c <= 1.0):
            raise ValueError(f"alpha_c must be in (0, 1], got {self.alpha_c}")
        if self.u_flow < 0:
            raise ValueError("u_flow must be >= 0")


@dataclass(frozen=True)
class MovingTarget:
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0


@dataclass(frozen=True)
class Scene:
    width: float
    height: float
    obstacles: tuple[Obstacle, ...] = ()
    boundaries: tuple[tuple[tuple[float, float], ...], ...] = ()
    flow: FlowModel | None = None
    seed: int = 0
    targets: tuple[MovingTarget, ...] = ()

    def __post_init__(self):
        ids = [o.id for o in self.obstacles]
        if len(ids) != len(set(ids)):
            raise ValueError("obstacle ids must be unique")

    def circles(self, inflation=None):
        """(N, 3) array of (cx, cy, safety_radius), optionally inflated.

        `inflation` is a sparse {obstacle_id: extra_radius} map.
        """
        out = np.zeros((len(self.obstacles), 3))
        for row, o in enumerate(self.obstacles):
            extra = inflation.get(o.id, 0.0) if inflation else 0.0
            if extra < 0:
                raise ValueError("inflation must be >= 0")
            out[row] = (o.cx, o.cy, o.safety_radius + extra)
        return out


@dataclass(frozen=True)
class BinaryMask:
    """Row-major occupancy grid; bits[y, x] True means foreground."""

    bits: np.ndarray

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.size == 0:
            raise ValueError("mask must be a non-empty 2D array")

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]


def bbox_safety_radius(w, h, R):
    """Safety radius for a bounding box of size w x h: half diagonal plus R."""
    if not (math.isfinite(w) and math.isfinite(h) and math.isfinite(R)):
        raise ValueError("non-finite input")
    if w < 0 or h < 0 or R <= 0:
        raise ValueError("require w, h >= 0 and R > 0")
    return math.hypot(w, h) / 2.0 + R


def circle_safety_radius(r_obs, R):
    """Safety radius for an analytic circle of radius r_obs."""
    if not (math.isfinite(r_obs) and math.isfinite(R)):
        raise ValueError("non-finite input")
    if r_obs < 0 or R <= 0:
        raise ValueError("require r_obs >= 0 and R > 0")
    return r_obs + R


_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def extract_obstacles(mask: BinaryMask, R, start_id=0):
    """One static obstacle per 8-connected foreground component.

    Center is the bounding-box center, safety radius follows the box-diagonal
    rule.  An all-background mask yields an empty list.
    """
    labels, n = ndimage.label(mask.bits, structure=_EIGHT_CONNECTED)
    obstacles = []
    for k, sl in enumerate(ndimage.find_objects(labels, n)):
        ys, xs = sl
        w = float(xs.stop - xs.start)
        h = float(ys.stop - ys.start)
        cx = xs.start + w / 2.0
        cy = ys.start + h / 2.0
        obstacles.append(
            Obstacle(
                id=start_id + k,
                cx=cx,
                cy=cy,
                physical_radius=math.hypot(w, h) / 2.0,
                safety_radius=bbox_safety_radius(w, h, R),
                kind=KIND_STATIC,
            )
        )
    return obstacles


def load_mask(path) -> BinaryMask:
    """Read a PGM (P2/P5) or PBM (P1/P4) file.

    PGM pixels >= 128 are foreground; PBM 1-bits (black) are foreground.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return _parse_netpbm(data)
    except SceneFormatError:
        raise
    except Exception as exc:
        raise SceneFormatError(f"{path}: {exc}") from exc


def _parse_netpbm(data: bytes) -> BinaryMask:
    magic = data[:2]
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise SceneFormatError(f"unsupported magic {magic!r}")
    pos = 2
    tokens = []
    need = 2 if magic in (b"P1", b"P4") else 3
    while len(tokens) < need:
        if pos >= len(data):
            raise SceneFormatError("truncated header")
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    w, h = int(tokens[0]), int(tokens[1])
    if w <= 0 or h <= 0:
        raise SceneFormatError("mask dimensions must be positive")
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
        if raw.size < w * h:
            raise SceneFormatError("truncated pixel data")
        bits = raw.reshape(h, w) >= 128
    elif magic == b"P4":
        pos += 1
        row_bytes = (w + 7) // 8
        raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=pos)
        if raw.size < row_bytes * h:
            raise SceneFormatError("truncated pixel data")
        bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w].astype(bool)
    else:
        vals = data[pos:].split()
        if magic == b"P1":
            if len(vals) < w * h:
                raise SceneFormatError("truncated pixel data")
            bits = np.array(vals[: w * h], dtype=np.uint8).reshape(h, w).astype(bool)
        else:
            if len(vals) < w * h:
                raise SceneFormatError("truncated pixel data")
            bits = np.array(vals[: w * h], dtype=np.int64).reshape(h, w) >= 128
    return BinaryMask(bits=bits)


def discretize_boundary(contour, g, R, start_id=0):
    """Turn contour points into square boundary cells with their own zones.

    Cells of side `g` that contain at least one contour point become
    boundary-cell obstacles centered at the cell center with safety radius
    sqrt(2)*g/2 + R.  Points are taken as-is; densify polylines first (see
    `sample_polyline`).
    """
    if g <= 0:
        raise ValueError("cell size g must be > 0")
    pts = np.asarray(list(contour), dtype=float)
    if pts.size == 0:
        return []
    cells = sorted({(int(math.floor(x / g)), int(math.floor(y / g))) for x, y in pts})
    r_cell = math.sqrt(2.0) * g / 2.0 + R
    return [
        Obstacle(
            id=start_id + k,
            cx=(ix + 0.5) * g,
            cy=(iy + 0.5) * g,
            physical_radius=math.sqrt(2.0) * g / 2.0,
            safety_radius=r_cell,
            kind=KIND_BOUNDARY,
        )
        for k, (ix, iy) in enumerate(cells)
    ]


def sample_polyline(points, step):
    """Points along a polyline at spacing <= step, endpoints included."""
    pts = np.asarray(list(points), dtype=float)
    if len(pts) < 2:
        return pts
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        seg = b - a
        length = float(np.hypot(*seg))
        n = max(1, int(math.ceil(length / step)))
        for k in range(1, n + 1):
            out.append(a + seg * (k / n))
    return np.array(out)


def generate_arena(
    n_obstacles,
    r_obs,
    seed,
    bounds=(2000.0, 2000.0),
    robot_radius=25.0,
    start=None,
    end=None,
    max_attempts=10_000,
    min_zone_gap=0.0,
):
    """Seeded arena of circular obstacles with a clear start and end corner.

    Obstacle safety zones are kept pairwise disjoint and clear of the start
    and end points by safety_radius + robot_radius.  Raises GenerationFailed
    if an obstacle cannot be placed within `max_attempts` draws.
    """
    w, h = float(bounds[0]), float(bounds[1])
    start = np.array([100.0, 100.0]) if start is None else np.asarray(start, float)
    end = np.array([w - 100.0, h - 100.0]) if end is None else np.asarray(end, float)
    safety = circle_safety_radius(r_obs, robot_radius)
    clearance = safety + robot_radius
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = []
    for i in range(n_obstacles):
        for _ in range(max_attempts):
            c = rng.uniform([r_obs, r_obs], [w - r_obs, h - r_obs])
            if np.hypot(*(c - start)) < clearance or np.hypot(*(c - end)) < clearance:
                continue
            if any(
                np.hypot(*(c - other)) < 2 * safety + min_zone_gap
                for other in centers
            ):
                continue
            centers.append(c)
            break
        else:
            raise GenerationFailed(
                f"could not place obstacle {i} of {n_obstacles} "
                f"(r_obs={r_obs}, bounds={bounds}, seed={seed})"
            )
    obstacles = tuple(
        Obstacle(
            id=i,
            cx=float(c[0]),
            cy=float(c[1]),
            physical_radius=float(r_obs),
            safety_radius=safety,
            kind=KIND_STATIC,
        )
        for i, c in enumerate(centers)
    )
    return Scene(width=w, height=h, obstacles=obstacles, seed=seed)


def scene_to_dict(scene: Scene) -> dict:
    doc = {
        "version": SCENE_SCHEMA_VERSION,
        "width": scene.width,
        "height": scene.height,
        "seed": scene.seed,
        "obstacles": [
            {
                "id": o.id,
                "cx": o.cx,
                "cy": o.cy,
                "r": o.physical_radius,
                "safety_r": o.safety_radius,
                "vx": o.vx,
                "vy": o.vy,
                "kind": o.kind,
            }
            for o in scene.obstacles
        ],
        "boundaries": [[[x, y] for x, y in poly] for poly in scene.boundaries],
        "flow": None
        if scene.flow is None
        else {
            "u": scene.flow.u_flow,
            "dir": list(scene.flow.direction),
            "alpha_c": scene.flow.alpha_c,
        },
    }
    if scene.targets:
        doc["targets"] = [
            {"pos": [t.x, t.y], "vel": [t.vx, t.vy]} for t in scene.targets
        ]
    return doc


def scene_from_dict(doc: dict) -> Scene:
    def want(key, ctx="scene"):
        if key not in doc:
            raise SceneFormatError(f"{ctx}: missing required key '{key}'")
        return doc[key]

    obstacles = []
    for k, rec in enumerate(want("obstacles")):
        try:
            obstacles.append(
                Obstacle(
                    id=int(rec["id"]),
                    cx=float(rec["cx"]),
                    cy=float(rec["cy"]),
                    physical_radius=float(rec["r"]),
                    safety_radius=float(rec["safety_r"]),
                    vx=float(rec.get("vx", 0.0)),
                    vy=float(rec.get("vy", 0.0)),
                    kind=str(rec.get("kind", KIND_STATIC)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneFormatError(f"obstacles[{k}]: {exc}") from exc
    flow_doc = doc.get("flow")
    flow = None
    if flow_doc is not None:
        try:
            flow = FlowModel(
                u_flow=float(flow_doc["u"]),
                direction=(float(flow_doc["dir"][0]), float(flow_doc["dir"][1])),
                alpha_c=float(flow_doc["alpha_c"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneFormatError(f"flow: {exc}") from exc
    targets = tuple(
        MovingTarget(
            x=float(t["pos"][0]),
            y=float(t["pos"][1]),
            vx=float(t.get("vel", [0, 0])[0]),
            vy=float(t.get("vel", [0, 0])[1]),
        )
        for t in doc.get("targets", [])
    )
    return Scene(
        width=float(want("width")),
        height=float(want("height")),
        obstacles=tuple(obstacles),
        boundaries=tuple(
            tuple((float(x), float(y)) for x, y in poly)
            for poly in doc.get("boundaries", [])
        ),
        flow=flow,
        seed=int(doc.get("seed", 0)),
        targets=targets,
    )


def scene_save(scene: Scene, path):
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=1)


def scene_load(path) -> Scene:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise SceneFormatError(f"{path}: top-level document must be an object")
    return scene_from_dict(doc)
