"""Whole-image + region feature extraction with a conv backbone."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import models, transforms

from featx.crops import crop_plan
from featx.writers import write_features, write_labels, write_regions

log = logging.getLogger("featx")

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".gif", ".webp")

_PREPROCESS = transforms.Compose(
    [
        transforms.Resize((224, 224)),
        transforms.ToTensor(),
        transforms.Normalize(
            mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
        ),
    ]
)


def build_backbone(weights_path: str | None = None, seed: int = 0) -> torch.nn.Module:
    """AlexNet trunk up to the 4096-d fc7 output.

    Pretrained checkpoints are not downloadable in offline environments, so
    the default is a seeded random initialization; pass a state-dict path to
    plug in real weights.  The feature dimension travels in the file header
    either way.
    """
    torch.manual_seed(seed)
    net = models.alexnet(weights=None)
    if weights_path:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
    net.classifier = net.classifier[:6]  # stop at the second 4096-d layer
    net.eval()
    return net


@torch.no_grad()
def embed(backbone: torch.nn.Module, images: list[Image.Image]) -> np.ndarray:
    batch = torch.stack([_PREPROCESS(img.convert("RGB")) for img in images])
    return backbone(batch).numpy().astype(np.float32)


def parse_label_file(path: str) -> list[tuple[str, list[str]]]:
    """Lines of ``filename<TAB>label1,label2,...``; order preserved."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected filename<TAB>labels")
            name, raw = line.split("\t", 1)
            labels = [t.strip() for t in raw.split(",") if t.strip()]
            if not labels:
                raise ValueError(f"{path}:{lineno}: item needs at least one label")
            out.append((name, labels))
    return out


def extract(
    image_dir: str,
    label_file: str,
    sigma: float,
    output_prefix: str,
    weights: str | None = None,
    seed: int = 0,
    batch_size: int = 16,
) -> dict:
    """Extract features for every labeled, readable image and write the
    MCHF/MCHR/MCHL files under ``output_prefix``.

    Unreadable images are skipped with a log line; every kept image yields
    one whole-image vector and five crop vectors with their rectangles.
    """
    plan = crop_plan(sigma)
    backbone = build_backbone(weights, seed=seed)
    labeled = parse_label_file(label_file)
    classes = sorted({c for _, cats in labeled for c in cats})
    class_index = {c: i for i, c in enumerate(classes)}

    kept_rows: list[np.ndarray] = []
    whole_vecs: list[np.ndarray] = []
    region_blocks: list[np.ndarray] = []
    rect_blocks: list[np.ndarray] = []
    skipped = 0
    feat_dim: int | None = None

    for name, cats in labeled:
        path = Path(image_dir) / name
        try:
            image = Image.open(path)
            image.load()
        except OSError as exc:
            log.warning("skipping unreadable image %s: %s", path, exc)
            skipped += 1
            continue
        boxes = plan.pixel_boxes(*image.size)
        batch = [image] + [image.crop(box) for box in boxes]
        vecs = embed(backbone, batch)
        if feat_dim is None:
            feat_dim = vecs.shape[1]
        elif vecs.shape[1] != feat_dim:
            raise RuntimeError(
                f"feature dimension changed from {feat_dim} to {vecs.shape[1]}"
            )
        whole_vecs.append(vecs[0])
        region_blocks.append(vecs[1:])
        rect_blocks.append(np.asarray(plan.regions, dtype=np.float32))
        row = np.zeros(len(classes), dtype=np.uint8)
        for c in cats:
            row[class_index[c]] = 1
        kept_rows.append(row)

    if not whole_vecs:
        raise RuntimeError("no readable labeled images found")

    write_features(f"{output_prefix}.mchf", np.stack(whole_vecs))
    write_regions(f"{output_prefix}.mchr", region_blocks, rect_blocks)
    write_labels(f"{output_prefix}.mchl", np.stack(kept_rows))
    return {
        "items": len(whole_vecs),
        "skipped": skipped,
        "dim": feat_dim,
        "classes": classes,
        "files": [f"{output_prefix}.{ext}" for ext in ("mchf", "mchr", "mchl")],
    }
