import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lipcert.model import Layer, MlpNetwork


@pytest.fixture
def abs_net():
    """Two-layer network computing |x| on scalar input."""
    return MlpNetwork((Layer([[1.0], [-1.0]], [0.0, 0.0]),
                       Layer([[1.0, 1.0]], [0.0])))


@pytest.fixture
def hat_net():
    """relu(t) - 2 relu(t - 1): slopes 0, 1, -1; true Lipschitz constant 1."""
    return MlpNetwork((Layer([[1.0], [1.0]], [0.0, -1.0]),
                       Layer([[1.0, -2.0]], [0.0])))


def make_random_net(rng, dims, low=-2.0, high=2.0):
    return MlpNetwork(tuple(
        Layer(rng.uniform(low, high, size=(b, a)), rng.uniform(-1.0, 1.0, size=b))
        for a, b in zip(dims[:-1], dims[1:])))


def mnist_dir():
    """Directory holding the MNIST IDX files, or None if unavailable."""
    for cand in (os.environ.get("MNIST_DIR"),
                 Path(__file__).resolve().parent.parent / "data" / "mnist"):
        if cand and Path(cand).is_dir():
            d = Path(cand)
            for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
                if not ((d / stem).exists() or (d / (stem + ".gz")).exists()):
                    break
            else:
                return d
    return None


def mnist_paths(split="train"):
    d = mnist_dir()
    if d is None:
        return None
    prefix = "train" if split == "train" else "t10k"
    out = []
    for stem in (f"{prefix}-images-idx3-ubyte", f"{prefix}-labels-idx1-ubyte"):
        p = d / stem
        if not p.exists():
            p = d / (stem + ".gz")
        if not p.exists():
            return None
        out.append(p)
    return tuple(out)


requires_mnist = pytest.mark.skipif(
    mnist_dir() is None,
    reason="MNIST IDX files not found (set MNIST_DIR or place them in "
           "data/mnist); unavailable in this offline environment")
