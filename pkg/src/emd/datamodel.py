"""Sample and dataset types, validation, and directory-based persistence.

Two corpora flow through the system: expression-labelled face images and
manipulation samples (image, binary mask, manipulated/pristine label).
Images live in memory as float arrays in [0, 1], channels-first; the 8-bit
PNG conversion happens only at the I/O boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

KINDS = ("expression", "manipulation")
SPLITS = ("train", "val", "test")

MANIFEST_NAME = "manifest.json"


class DataFormatError(Exception):
    """Manifest missing or structurally malformed."""


class DataIOError(Exception):
    """A referenced file is missing or cannot be decoded; names the sample id."""


class DataValidationError(Exception):
    """One or more samples violate their invariants."""

    def __init__(self, message: str, ids: list[str]):
        super().__init__(message)
        self.ids = ids


@dataclass
class FaceImage:
    """RGB face image, channels-first float array with values in [0, 1]."""

    pixels: np.ndarray  # (3, H, W) float32

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]


@dataclass
class BinaryMask:
    """Per-pixel manipulation mask, values in {0, 1}."""

    values: np.ndarray  # (H, W) uint8

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def is_empty(self) -> bool:
        return not bool(self.values.any())


@dataclass
class ManipulationSample:
    id: str
    image: FaceImage
    mask: BinaryMask
    label: int  # 1 = manipulated, 0 = pristine


@dataclass
class ExpressionSample:
    id: str
    image: FaceImage
    expression: int  # class index in {0..C-1}


@dataclass
class Dataset:
    """Ordered, homogeneous collection of samples for one split."""

    kind: str  # "expression" | "manipulation"
    samples: list = field(default_factory=list)
    class_count: int | None = None  # expression kind only
    split: str = "train"

    def __len__(self) -> int:
        return len(self.samples)


def _check_image(image: FaceImage, violations: list[str], image_size: int | None) -> None:
    px = image.pixels
    if px.ndim != 3 or px.shape[0] != 3:
        violations.append(f"image shape {px.shape} is not (3, H, W)")
        return
    if not np.isfinite(px).all():
        violations.append("image contains non-finite pixel")
    else:
        if px.min() < 0.0 or px.max() > 1.0:
            violations.append("pixel out of [0,1]")
    if image_size is not None and (image.height != image_size or image.width != image_size):
        violations.append(
            f"image is {image.height}x{image.width}, expected {image_size}x{image_size}"
        )


def validate_sample(
    sample: ManipulationSample | ExpressionSample,
    *,
    class_count: int | None = None,
    image_size: int | None = None,
) -> list[str]:
    """Return violation strings for the sample's invariants; empty means valid.

    Dataset-level facts (declared class count, configured image size) are
    checked only when passed in.
    """
    violations: list[str] = []
    if not sample.id:
        violations.append("empty sample id")
    _check_image(sample.image, violations, image_size)

    if isinstance(sample, ManipulationSample):
        mv = sample.mask.values
        if mv.ndim != 2:
            violations.append(f"mask shape {mv.shape} is not (H, W)")
        else:
            if not np.isin(mv, (0, 1)).all():
                violations.append("mask value outside {0,1}")
            if (mv.shape[0], mv.shape[1]) != (sample.image.height, sample.image.width):
                violations.append("mask size differs from image size")
        if sample.label not in (0, 1):
            violations.append(f"label {sample.label} not in {{0,1}}")
        elif mv.ndim == 2:
            if sample.label == 0 and mv.any():
                violations.append("label=0 requires empty mask")
            if sample.label == 1 and not mv.any():
                violations.append("label=1 requires nonempty mask")
    else:
        if sample.expression < 0:
            violations.append(f"expression {sample.expression} is negative")
        elif class_count is not None and sample.expression >= class_count:
            violations.append(
                f"expression {sample.expression} not below class count {class_count}"
            )
    return violations


def validate_dataset(dataset: Dataset) -> list[str]:
    """Dataset-level invariants plus per-sample validation."""
    violations: list[str] = []
    if dataset.kind not in KINDS:
        violations.append(f"unknown kind {dataset.kind!r}")
    if dataset.split not in SPLITS:
        violations.append(f"unknown split {dataset.split!r}")
    if dataset.kind == "expression" and dataset.class_count is None:
        violations.append("expression dataset requires class_count")

    seen: set[str] = set()
    sizes: set[tuple[int, int]] = set()
    expected = ManipulationSample if dataset.kind == "manipulation" else ExpressionSample
    for sample in dataset.samples:
        if sample.id in seen:
            violations.append(f"duplicate id {sample.id!r}")
        seen.add(sample.id)
        if not isinstance(sample, expected):
            violations.append(f"sample {sample.id!r} has wrong kind for dataset")
            continue
        sizes.add((sample.image.height, sample.image.width))
        for v in validate_sample(sample, class_count=dataset.class_count):
            violations.append(f"{sample.id}: {v}")
    if len(sizes) > 1:
        violations.append(f"mixed image sizes {sorted(sizes)}")
    return violations


def image_to_u8(image: FaceImage) -> np.ndarray:
    """Quantize to HWC uint8 for PNG encoding (max round-trip error 0.5/255)."""
    hwc = np.moveaxis(image.pixels, 0, 2)
    return np.clip(np.rint(hwc * 255.0), 0, 255).astype(np.uint8)


def image_from_u8(data: np.ndarray) -> FaceImage:
    chw = np.moveaxis(data.astype(np.float32) / 255.0, 2, 0)
    return FaceImage(pixels=np.ascontiguousarray(chw))


def save_dataset(dataset: Dataset, root_dir: str | Path) -> Path:
    """Write the directory layout (manifest.json, images/, masks/); returns manifest path.

    Masks encode {0,1} as {0,255} grayscale and round-trip losslessly; images
    round-trip through 8-bit quantization.
    """
    problems = validate_dataset(dataset)
    if problems:
        raise DataValidationError("cannot save invalid dataset", ids=problems)

    root = Path(root_dir)
    try:
        (root / "images").mkdir(parents=True, exist_ok=True)
        if dataset.kind == "manipulation":
            (root / "masks").mkdir(parents=True, exist_ok=True)

        entries = []
        for sample in dataset.samples:
            image_rel = f"images/{sample.id}.png"
            Image.fromarray(image_to_u8(sample.image), mode="RGB").save(root / image_rel)
            if isinstance(sample, ManipulationSample):
                mask_rel = f"masks/{sample.id}.png"
                mask_u8 = (sample.mask.values * 255).astype(np.uint8)
                Image.fromarray(mask_u8, mode="L").save(root / mask_rel)
                entries.append(
                    {
                        "id": sample.id,
                        "image": image_rel,
                        "mask": mask_rel,
                        "label": int(sample.label),
                        "expression": None,
                    }
                )
            else:
                entries.append(
                    {
                        "id": sample.id,
                        "image": image_rel,
                        "mask": None,
                        "label": None,
                        "expression": int(sample.expression),
                    }
                )

        manifest = {
            "kind": dataset.kind,
            "class_count": dataset.class_count,
            "split": dataset.split,
            "samples": entries,
        }
        manifest_path = root / MANIFEST_NAME
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write dataset under {root}: {exc}") from exc
    return manifest_path


def _load_png(path: Path, sample_id: str, mode: str) -> np.ndarray:
    if not path.is_file():
        raise DataIOError(f"sample {sample_id!r}: missing file {path}")
    try:
        with Image.open(path) as img:
            if img.mode != mode:
                img = img.convert(mode)
            return np.asarray(img)
    except DataIOError:
        raise
    except Exception as exc:
        raise DataIOError(f"sample {sample_id!r}: cannot decode {path}: {exc}") from exc


def load_dataset(root_dir: str | Path) -> Dataset:
    """Inverse of save_dataset; sample order follows the manifest."""
    root = Path(root_dir)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DataFormatError(f"no {MANIFEST_NAME} in {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"unreadable manifest {manifest_path}: {exc}") from exc

    for key in ("kind", "class_count", "split", "samples"):
        if key not in manifest:
            raise DataFormatError(f"manifest missing key {key!r}")
    kind = manifest["kind"]
    if kind not in KINDS:
        raise DataFormatError(f"manifest kind {kind!r} not in {KINDS}")

    samples: list = []
    for entry in manifest["samples"]:
        if "id" not in entry or "image" not in entry:
            raise DataFormatError(f"sample entry missing id/image: {entry}")
        sid = entry["id"]
        image = image_from_u8(_load_png(root / entry["image"], sid, "RGB"))
        if kind == "manipulation":
            if entry.get("mask") is None or entry.get("label") is None:
                raise DataFormatError(f"manipulation sample {sid!r} needs mask and label")
            mask_u8 = _load_png(root / entry["mask"], sid, "L")
            if not np.isin(mask_u8, (0, 255)).all():
                raise DataIOError(f"sample {sid!r}: mask pixels must be 0 or 255")
            mask = BinaryMask(values=(mask_u8 > 0).astype(np.uint8))
            samples.append(
                ManipulationSample(id=sid, image=image, mask=mask, label=int(entry["label"]))
            )
        else:
            if entry.get("expression") is None:
                raise DataFormatError(f"expression sample {sid!r} needs expression")
            samples.append(
                ExpressionSample(id=sid, image=image, expression=int(entry["expression"]))
            )

    dataset = Dataset(
        kind=kind,
        samples=samples,
        class_count=manifest["class_count"],
        split=manifest["split"],
    )
    problems = validate_dataset(dataset)
    if problems:
        bad = sorted({p.split(":", 1)[0] for p in problems if ":" in p})
        raise DataValidationError(f"loaded dataset invalid: {problems}", ids=bad)
    return dataset
