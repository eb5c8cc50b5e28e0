"""Procedural face corpus generator with exact ground-truth edit masks.

Faces are flat-shaded ellipse/capsule compositions on a unit canvas, rendered
with fixed 2x supersampling so rasterization is platform-independent. The
expression is carried entirely by mouth curvature/openness and eyebrow
angle/raise, with class parameter gaps larger than the per-sample jitter, so
classes stay separable by construction.

Manipulated samples re-render the target with a donor's expression parameters
inside the mouth region (mouth-only edits) or mouth+eyebrow regions (full
expression transfer), then re-encode the edited region with a block-DCT pass.
The re-encode is the stand-in for the low-level traces real reenactment
pipelines leave behind; mouth-only edits get a lighter touch than full
transfers. The returned mask is exactly the union of the edited regions'
bounding boxes and pixels outside it are copied from the target unchanged.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .datamodel import (
    BinaryMask,
    Dataset,
    ExpressionSample,
    FaceImage,
    ManipulationSample,
)

EXPRESSION_NAMES = (
    "neutral",
    "happy",
    "sad",
    "surprise",
    "angry",
    "grin",
    "worried",
    "shocked",
)

# (mouth_curve, mouth_open, brow_angle, brow_raise) per class; gaps between
# rows exceed 2x the jitter ranges below.
_EXPRESSION_TABLE = np.array(
    [
        (0.00, 0.07, 0.00, 0.000),
        (0.55, 0.12, -0.20, 0.020),
        (-0.55, 0.07, 0.35, -0.020),
        (0.00, 0.55, -0.10, 0.100),
        (-0.28, 0.05, 0.60, -0.060),
        (0.80, 0.32, -0.05, 0.000),
        (-0.30, 0.20, -0.35, 0.060),
        (0.25, 0.75, 0.20, 0.120),
    ]
)

_JITTER = np.array([0.08, 0.025, 0.06, 0.012])

MAX_CLASSES = len(_EXPRESSION_TABLE)

EDIT_STYLES = ("mouth", "mouth_brows")

# Block re-encode strength applied inside edited regions; full expression
# transfers ("mouth_brows") are re-rendered more aggressively than mouth-only
# edits, mirroring how graphics-based reenactment degrades more than neural
# mouth edits.
REGION_REENCODE_QUALITY = {"mouth": 70, "mouth_brows": 45}


@dataclass
class SynthConfig:
    """Knobs for corpus generation; defaults give the desk-scale corpus."""

    image_size: int = 64
    class_count: int = 4
    n_expression_train: int = 600
    n_expression_test: int = 120
    n_manip_train: int = 512
    n_manip_test: int = 128
    manip_fraction: float = 0.5
    quality: int = 100  # global compression severity; 100 = clean
    seed: int = 7

    def validate(self) -> None:
        if self.image_size < 16:
            raise ValueError(f"image_size {self.image_size} too small (min 16)")
        if not 2 <= self.class_count <= MAX_CLASSES:
            raise ValueError(f"class_count must be in [2,{MAX_CLASSES}]")
        for name in ("n_expression_train", "n_expression_test", "n_manip_train", "n_manip_test"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.manip_fraction < 1.0:
            raise ValueError("manip_fraction must be in (0,1)")
        if not 1 <= self.quality <= 100:
            raise ValueError("quality must be in [1,100]")


@dataclass
class FaceSpec:
    """Full geometric description of one face; rendering is a pure function of it.

    All coordinates are fractions of the canvas. Style fields describe the
    actor (placement, colors, noise stream); the four expression fields are a
    deterministic function of (expression_class, per-sample jitter).
    """

    # style
    face_cx: float = 0.5
    face_cy: float = 0.5
    face_rx: float = 0.33  # in [0.28, 0.37]
    face_ry: float = 0.41  # in [0.36, 0.45]
    skin: tuple[float, float, float] = (0.85, 0.68, 0.55)
    bg_shade: float = 0.84
    eye_dx: float = 0.13  # horizontal eye offset from face center
    eye_y_off: float = -0.10  # eye row relative to face center
    eye_r: float = 0.036
    mouth_y_off: float = 0.185  # mouth row relative to face center
    mouth_w: float = 0.16  # mouth half-width
    noise_sigma: float = 0.0
    noise_seed: int = 0
    # expression
    expression_class: int = 0
    mouth_curve: float = 0.0  # >0 corners up (smile), range [-0.9, 0.9]
    mouth_open: float = 0.07  # opening height as fraction of mouth_w, [0.03, 0.8]
    brow_angle: float = 0.0  # inner-end tilt in radians, [-0.5, 0.7]
    brow_raise: float = 0.0  # vertical brow offset, [-0.08, 0.15]

    def expression_params(self) -> tuple[float, float, float, float]:
        return (self.mouth_curve, self.mouth_open, self.brow_angle, self.brow_raise)

    def validate(self) -> None:
        if self.face_cx - self.face_rx < 0.02 or self.face_cx + self.face_rx > 0.98:
            raise ValueError("face ellipse leaves the canvas horizontally")
        if self.face_cy - self.face_ry < 0.02 or self.face_cy + self.face_ry > 0.98:
            raise ValueError("face ellipse leaves the canvas vertically")
        if not 0 <= self.expression_class < MAX_CLASSES:
            raise ValueError(f"expression_class {self.expression_class} out of range")


def expression_parameters(class_index: int, jitter: np.ndarray) -> tuple[float, ...]:
    """Resolve the four expression parameters for a class given jitter in [-1,1]^4."""
    base = _EXPRESSION_TABLE[class_index]
    return tuple(float(v) for v in base + _JITTER * np.asarray(jitter, dtype=np.float64))


def sample_face_spec(
    rng: np.random.Generator,
    expression_class: int,
    *,
    noise_sigma: float = 0.015,
) -> FaceSpec:
    """Draw a random actor with the given expression class."""
    curve, openness, angle, brow_raise = expression_parameters(
        expression_class, rng.uniform(-1.0, 1.0, size=4)
    )
    skin_base = rng.uniform(0.72, 0.90)
    spec = FaceSpec(
        face_cx=rng.uniform(0.46, 0.54),
        face_cy=rng.uniform(0.46, 0.54),
        face_rx=rng.uniform(0.29, 0.36),
        face_ry=rng.uniform(0.37, 0.44),
        skin=(skin_base, skin_base * rng.uniform(0.76, 0.84), skin_base * rng.uniform(0.60, 0.70)),
        bg_shade=rng.uniform(0.78, 0.90),
        eye_dx=rng.uniform(0.115, 0.145),
        eye_y_off=rng.uniform(-0.115, -0.085),
        eye_r=rng.uniform(0.031, 0.041),
        mouth_y_off=rng.uniform(0.165, 0.205),
        mouth_w=rng.uniform(0.14, 0.18),
        noise_sigma=noise_sigma,
        noise_seed=int(rng.integers(0, 2**32)),
        expression_class=expression_class,
        mouth_curve=curve,
        mouth_open=openness,
        brow_angle=angle,
        brow_raise=brow_raise,
    )
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

_EYE_COLOR = (0.10, 0.09, 0.11)
_BROW_COLOR = (0.16, 0.11, 0.08)
_MOUTH_OPEN_COLOR = (0.28, 0.07, 0.09)
_LIP_COLOR = (0.52, 0.16, 0.18)

_LIP_THICKNESS = 0.014
_BROW_THICKNESS = 0.013
_BROW_GAP = 0.075  # brow row above the eye row
_BROW_HALF_LEN = 0.055
_BROW_RAISE_SCALE = 0.6
_CURVE_AMP = 0.45  # lip-line vertical reach as a fraction of mouth_w


def _segment_distance(px: np.ndarray, py: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from grid points to segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(px - a[0], py - a[1])
    t = np.clip(((px - a[0]) * ab[0] + (py - a[1]) * ab[1]) / denom, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * ab[0]), py - (a[1] + t * ab[1]))


def _polyline_mask(
    px: np.ndarray, py: np.ndarray, points: np.ndarray, thickness: float
) -> np.ndarray:
    dist = np.full(px.shape, np.inf)
    for i in range(len(points) - 1):
        dist = np.minimum(dist, _segment_distance(px, py, points[i], points[i + 1]))
    return dist <= thickness


def _lip_polyline(spec: FaceSpec) -> np.ndarray:
    mx = spec.face_cx
    my = spec.face_cy + spec.mouth_y_off
    t = np.linspace(-1.0, 1.0, 17)
    xs = mx + t * spec.mouth_w
    ys = my + spec.mouth_curve * _CURVE_AMP * spec.mouth_w * (1.0 - 2.0 * t * t)
    return np.stack([xs, ys], axis=1)


def _brow_segments(spec: FaceSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    ey = spec.face_cy + spec.eye_y_off
    by = ey - _BROW_GAP - spec.brow_raise * _BROW_RAISE_SCALE
    segments = []
    for side in (-1.0, 1.0):
        bx = spec.face_cx + side * spec.eye_dx
        # positive brow_angle lifts the inner end on both sides
        dx = _BROW_HALF_LEN * np.cos(spec.brow_angle)
        dy = _BROW_HALF_LEN * np.sin(spec.brow_angle)
        inner = np.array([bx - side * dx, by - dy])
        outer = np.array([bx + side * dx, by + dy])
        segments.append((inner, outer))
    return segments


def render_face(spec: FaceSpec, size: int) -> FaceImage:
    """Rasterize the spec at `size`x`size` with fixed 2x supersampling."""
    spec.validate()
    ss = 2 * size
    coords = (np.arange(ss) + 0.5) / ss
    px, py = np.meshgrid(coords, coords)  # px: x (columns), py: y (rows)

    canvas = np.empty((3, ss, ss), dtype=np.float64)
    for c in range(3):
        canvas[c].fill(spec.bg_shade)

    def paint(mask: np.ndarray, color: tuple[float, float, float]) -> None:
        for c in range(3):
            canvas[c][mask] = color[c]

    face = ((px - spec.face_cx) / spec.face_rx) ** 2 + (
        (py - spec.face_cy) / spec.face_ry
    ) ** 2 <= 1.0
    paint(face, spec.skin)

    ey = spec.face_cy + spec.eye_y_off
    for side in (-1.0, 1.0):
        ex = spec.face_cx + side * spec.eye_dx
        eye = (px - ex) ** 2 + (py - ey) ** 2 <= spec.eye_r**2
        paint(eye, _EYE_COLOR)

    for inner, outer in _brow_segments(spec):
        brow = _polyline_mask(px, py, np.stack([inner, outer]), _BROW_THICKNESS)
        paint(brow, _BROW_COLOR)

    mx, my = spec.face_cx, spec.face_cy + spec.mouth_y_off
    opening = ((px - mx) / spec.mouth_w) ** 2 + (
        (py - my) / (spec.mouth_open * spec.mouth_w)
    ) ** 2 <= 1.0
    paint(opening, _MOUTH_OPEN_COLOR)

    lips = _polyline_mask(px, py, _lip_polyline(spec), _LIP_THICKNESS)
    paint(lips, _LIP_COLOR)

    # 2x2 box downsample = fixed-grid anti-aliasing
    down = canvas.reshape(3, size, 2, size, 2).mean(axis=(2, 4))

    if spec.noise_sigma > 0.0:
        noise_rng = np.random.default_rng(np.random.SeedSequence([spec.noise_seed]))
        down = down + noise_rng.normal(0.0, spec.noise_sigma, size=(size, size))

    return FaceImage(pixels=np.clip(down, 0.0, 1.0).astype(np.float32))


# ---------------------------------------------------------------------------
# edit regions
# ---------------------------------------------------------------------------

_REGION_PAD = 0.035


def _mouth_bounds(spec: FaceSpec) -> tuple[float, float, float, float]:
    mx, my = spec.face_cx, spec.face_cy + spec.mouth_y_off
    reach = max(
        spec.mouth_open * spec.mouth_w,
        abs(spec.mouth_curve) * _CURVE_AMP * spec.mouth_w,
    )
    half_h = reach + _LIP_THICKNESS + _REGION_PAD
    half_w = spec.mouth_w + _LIP_THICKNESS + _REGION_PAD
    return (mx - half_w, my - half_h, mx + half_w, my + half_h)


def _brow_bounds(spec: FaceSpec) -> list[tuple[float, float, float, float]]:
    boxes = []
    for inner, outer in _brow_segments(spec):
        x0 = min(inner[0], outer[0]) - _BROW_THICKNESS - _REGION_PAD
        x1 = max(inner[0], outer[0]) + _BROW_THICKNESS + _REGION_PAD
        y0 = min(inner[1], outer[1]) - _BROW_THICKNESS - _REGION_PAD
        y1 = max(inner[1], outer[1]) + _BROW_THICKNESS + _REGION_PAD
        boxes.append((x0, y0, x1, y1))
    return boxes


def _rasterize_boxes(boxes: list[tuple[float, float, float, float]], size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        c0 = max(0, int(np.floor(x0 * size)))
        c1 = min(size, int(np.ceil(x1 * size)))
        r0 = max(0, int(np.floor(y0 * size)))
        r1 = min(size, int(np.ceil(y1 * size)))
        mask[r0:r1, c0:c1] = True
    return mask


def region_mask(specs: list[FaceSpec], regions: tuple[str, ...], size: int) -> np.ndarray:
    """Union of bounding boxes of the named regions over all given geometries."""
    boxes: list[tuple[float, float, float, float]] = []
    for spec in specs:
        if "mouth" in regions:
            boxes.append(_mouth_bounds(spec))
        if "brows" in regions:
            boxes.extend(_brow_bounds(spec))
    return _rasterize_boxes(boxes, size)


def eye_mask(spec: FaceSpec, size: int) -> np.ndarray:
    """Both eye discs; used to check edits keep out of the eye regions."""
    coords = (np.arange(size) + 0.5) / size
    px, py = np.meshgrid(coords, coords)
    ey = spec.face_cy + spec.eye_y_off
    mask = np.zeros((size, size), dtype=bool)
    for side in (-1.0, 1.0):
        ex = spec.face_cx + side * spec.eye_dx
        mask |= (px - ex) ** 2 + (py - ey) ** 2 <= spec.eye_r**2
    return mask


# ---------------------------------------------------------------------------
# block-DCT re-encode
# ---------------------------------------------------------------------------

_QUANT_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _dct_matrix() -> np.ndarray:
    k = np.arange(8)[:, None]
    n = np.arange(8)[None, :]
    mat = np.cos(np.pi * (2 * n + 1) * k / 16.0)
    mat[0] *= np.sqrt(0.5)
    return mat * 0.5  # orthonormal


_DCT = _dct_matrix()


def _quant_steps(quality: int) -> np.ndarray:
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((_QUANT_TABLE * scale + 50.0) / 100.0), 1.0, 255.0)


def degrade_quality(image: FaceImage, quality: int) -> FaceImage:
    """Blockwise 8x8 DCT quantize/dequantize; quality 100 is the identity."""
    if not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise ValueError(f"quality must be an int in [1,100], got {quality!r}")
    if quality == 100:
        return FaceImage(pixels=image.pixels.copy())

    steps = _quant_steps(int(quality))
    h, w = image.height, image.width
    ph, pw = (-h) % 8, (-w) % 8
    data = np.pad(image.pixels.astype(np.float64) * 255.0 - 128.0, ((0, 0), (0, ph), (0, pw)), mode="edge")
    bh, bw = data.shape[1] // 8, data.shape[2] // 8
    blocks = data.reshape(3, bh, 8, bw, 8).transpose(0, 1, 3, 2, 4)
    coeff = np.einsum("ij,cbkjl,ml->cbkim", _DCT, blocks, _DCT)
    coeff = np.round(coeff / steps) * steps
    recon = np.einsum("ji,cbkjl,lm->cbkim", _DCT, coeff, _DCT)
    out = recon.transpose(0, 1, 3, 2, 4).reshape(3, bh * 8, bw * 8)[:, :h, :w]
    out = np.clip((out + 128.0) / 255.0, 0.0, 1.0)
    return FaceImage(pixels=out.astype(np.float32))


# ---------------------------------------------------------------------------
# manipulation
# ---------------------------------------------------------------------------


def apply_expression_manipulation(
    target: FaceImage,
    target_spec: FaceSpec,
    donor_spec: FaceSpec,
    rng: np.random.Generator,
    *,
    quality: int = 100,
) -> tuple[FaceImage, BinaryMask]:
    """Transplant the donor's expression into the target's edit regions.

    `quality` must match whatever global degradation was applied to `target`
    so the re-rendered content blends with its surroundings. Identical
    expression parameters short-circuit to (unchanged image, empty mask);
    otherwise equal expression classes violate the precondition.
    """
    size = target.height
    if target.width != size:
        raise ValueError("target image must be square")

    if donor_spec.expression_params() == target_spec.expression_params():
        empty = BinaryMask(values=np.zeros((size, size), dtype=np.uint8))
        return FaceImage(pixels=target.pixels.copy()), empty
    if donor_spec.expression_class == target_spec.expression_class:
        raise ValueError("donor and target must have different expression classes")

    style = EDIT_STYLES[int(rng.integers(0, len(EDIT_STYLES)))]
    hybrid = replace(
        target_spec,
        expression_class=donor_spec.expression_class,
        mouth_curve=donor_spec.mouth_curve,
        mouth_open=donor_spec.mouth_open,
    )
    regions: tuple[str, ...] = ("mouth",)
    if style == "mouth_brows":
        hybrid = replace(
            hybrid, brow_angle=donor_spec.brow_angle, brow_raise=donor_spec.brow_raise
        )
        regions = ("mouth", "brows")

    rendered = render_face(hybrid, size)
    if quality < 100:
        rendered = degrade_quality(rendered, quality)
    content = degrade_quality(rendered, REGION_REENCODE_QUALITY[style])

    mask = region_mask([target_spec, hybrid], regions, size)
    out = np.where(mask[None, :, :], content.pixels, target.pixels)
    return FaceImage(pixels=out.astype(np.float32)), BinaryMask(values=mask.astype(np.uint8))


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------


def _stable_id_entropy(sample_id: str) -> int:
    digest = hashlib.blake2b(sample_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def sample_rng(seed: int, sample_id: str) -> np.random.Generator:
    """Per-sample stream keyed by (seed, id) so generation order never matters."""
    return np.random.default_rng(np.random.SeedSequence([seed, _stable_id_entropy(sample_id)]))


def _make_expression_split(config: SynthConfig, split: str, count: int) -> Dataset:
    samples = []
    for i in range(count):
        sid = f"expr-{split}-{i:05d}"
        rng = sample_rng(config.seed, sid)
        cls = i % config.class_count
        spec = sample_face_spec(rng, cls)
        image = render_face(spec, config.image_size)
        samples.append(ExpressionSample(id=sid, image=image, expression=cls))
    return Dataset(kind="expression", samples=samples, class_count=config.class_count, split=split)


def _make_manipulation_split(config: SynthConfig, split: str, count: int) -> Dataset:
    n_manip = int(round(config.manip_fraction * count))
    labels = np.concatenate([np.ones(n_manip, dtype=int), np.zeros(count - n_manip, dtype=int)])
    label_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, _stable_id_entropy(f"labels-{split}")])
    )
    label_rng.shuffle(labels)

    samples = []
    for i in range(count):
        sid = f"manip-{split}-{i:05d}"
        rng = sample_rng(config.seed, sid)
        target_cls = int(rng.integers(0, config.class_count))
        target_spec = sample_face_spec(rng, target_cls)
        base = render_face(target_spec, config.image_size)
        if config.quality < 100:
            base = degrade_quality(base, config.quality)
        if labels[i] == 1:
            donor_cls = int(rng.integers(0, config.class_count - 1))
            if donor_cls >= target_cls:
                donor_cls += 1
            donor_spec = sample_face_spec(rng, donor_cls)
            image, mask = apply_expression_manipulation(
                base, target_spec, donor_spec, rng, quality=config.quality
            )
        else:
            image = base
            mask = BinaryMask(values=np.zeros((config.image_size,) * 2, dtype=np.uint8))
        samples.append(ManipulationSample(id=sid, image=image, mask=mask, label=int(labels[i])))
    return Dataset(kind="manipulation", samples=samples, class_count=None, split=split)


def generate_corpora(config: SynthConfig) -> tuple[Dataset, Dataset, Dataset, Dataset]:
    """Build (expression train, expression test, manipulation train, manipulation test)."""
    config.validate()
    return (
        _make_expression_split(config, "train", config.n_expression_train),
        _make_expression_split(config, "test", config.n_expression_test),
        _make_manipulation_split(config, "train", config.n_manip_train),
        _make_manipulation_split(config, "test", config.n_manip_test),
    )
