"""Grayscale image and dataset I/O.

Images travel as float64 arrays in [0, 1].  On disk, frames and objects
are 16-bit grayscale PNG; 8-bit PNG and PGM are accepted on ingestion.
A dataset directory holds the frames, the ground truth, and a JSON-lines
manifest whose first record carries everything needed to regenerate the
data exactly (seed, noise level, field parameters).
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "read_image",
    "write_png16",
    "write_dataset",
    "read_dataset",
    "read_manifest",
]

MANIFEST_NAME = "dataset.jsonl"


def read_image(path) -> np.ndarray:
    """Load a grayscale image and normalize it to [0, 1].

    8-bit data is scaled by 255, 16-bit (PNG ``I;16`` or PGM read as
    mode ``I``) by 65535.  Color images are rejected; the pipeline is
    grayscale only.
    """
    path = Path(path)
    with Image.open(path) as img:
        mode = img.mode
        arr = np.asarray(img)
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        return arr.astype(np.float64) / 65535.0
    if mode == "F":
        return arr.astype(np.float64)
    raise ValueError(f"{path}: unsupported mode {mode!r}; expected 8/16-bit grayscale")


def write_png16(path, image) -> None:
    """Write an image as 16-bit grayscale PNG, clipping to [0, 1]."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    data = np.round(arr * 65535.0).astype(np.uint16)
    Image.fromarray(data).save(Path(path), format="PNG")


def write_dataset(outdir, frames, ground_truth, meta: dict) -> Path:
    """Write frames + ground truth + manifest into ``outdir``.

    ``meta`` must contain whatever the caller needs for regeneration
    (seed, sigma, generator parameters); it lands verbatim in the
    manifest's dataset record.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    frames = np.asarray(frames, dtype=np.float64)

    records = []
    gt_name = "ground_truth.png"
    write_png16(outdir / gt_name, ground_truth)
    dataset_record = {
        "record": "dataset",
        "n_frames": int(frames.shape[0]),
        "shape": [int(frames.shape[1]), int(frames.shape[2])],
        "ground_truth": gt_name,
        **meta,
    }
    records.append(dataset_record)
    for index, frame in enumerate(frames):
        name = f"frame_{index:03d}.png"
        write_png16(outdir / name, frame)
        records.append({"record": "frame", "index": index, "file": name})

    manifest = outdir / MANIFEST_NAME
    with open(manifest, "w") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest


def read_manifest(directory) -> dict:
    """Parse a dataset manifest into {'dataset': record, 'frames': [...]}."""
    manifest = Path(directory) / MANIFEST_NAME
    dataset = None
    frames = []
    with open(manifest) as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("record") == "dataset":
                dataset = record
            elif record.get("record") == "frame":
                frames.append(record)
    if dataset is None:
        raise ValueError(f"{manifest}: no dataset record found")
    frames.sort(key=lambda r: r["index"])
    return {"dataset": dataset, "frames": frames}


def read_dataset(directory):
    """Load (frames, ground_truth, manifest) from a dataset directory."""
    directory = Path(directory)
    info = read_manifest(directory)
    ground_truth = read_image(directory / info["dataset"]["ground_truth"])
    frames = np.stack([read_image(directory / r["file"]) for r in info["frames"]])
    return frames, ground_truth, info
