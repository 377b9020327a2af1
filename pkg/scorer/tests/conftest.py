import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def directional_image(seed: int, size: int = 398) -> np.ndarray:
    """Synthetic image with two learnable signals: a smooth global gradient
    per channel (fragment appearance varies monotonically across the canvas,
    so relative position is inferable) mapped into a random per-image
    intensity sub-range (images get distinctive palettes, so same-image
    membership is inferable)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    chans = []
    for _ in range(3):
        a, b = rng.uniform(-1.0, 1.0, 2)
        phase = rng.uniform(0, 2 * np.pi)
        freq = rng.uniform(0.4, 2.5)
        f = a * xx + b * yy + 0.35 * np.sin(2 * np.pi * freq * (xx + yy) + phase)
        f = (f - f.min()) / (np.ptp(f) + 1e-9)
        lo = rng.uniform(0.0, 0.35)
        hi = lo + rng.uniform(0.45, 0.65)
        chans.append(((lo + f * (hi - lo)) * 255).astype(np.uint8))
    return np.stack(chans, axis=-1)


def write_images(out_dir: Path, n: int, seed0: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        Image.fromarray(directional_image(seed0 + i)).save(
            out_dir / f"img{i:04d}.png")


def run_solver_cli(*argv) -> subprocess.CompletedProcess:
    """Invoke the solver package's CLI (the component boundary)."""
    return subprocess.run([sys.executable, "-m", "reassembly", *argv],
                          capture_output=True, text=True)


def fragment_images(image_dir: Path, out_dir: Path, jitter: bool,
                    seed: int = 0) -> None:
    args = ["fragment", "--images", str(image_dir), "--out", str(out_dir),
            "--seed", str(seed), "--jitter" if jitter else "--no-jitter"]
    run = run_solver_cli(*args)
    assert run.returncode == 0, run.stderr


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> Path:
    """Six fragmented images, enough for sampler and export tests."""
    root = tmp_path_factory.mktemp("tiny")
    write_images(root / "images", 6, seed0=9000)
    fragment_images(root / "images", root / "fragments", jitter=False)
    return root / "fragments"
