"""Synthetic datasets with structured label spaces, plus bundled assets.

The generators here produce classification problems whose classes carry a
natural neighborhood structure (a circle of angles, a planar grid), which is
what the structured losses are designed to exploit.
"""

import csv
from importlib.resources import files

import numpy as np

from .structures import read_hierarchy_file

__all__ = [
    "make_circular_dataset",
    "make_grid_dataset",
    "load_cifar100_hierarchy",
    "save_dataset_csv",
]


def make_circular_dataset(n_samples, num_classes=12, concentration=4.0,
                          random_state=None):
    """Classes laid out on a circle, observed through a noisy angle.

    Each label y sits at angle 2*pi*y/k; an observation draws a von Mises
    angle centered there (concentration kappa, higher = less noise) and is
    embedded as (cos, sin).  Neighboring classes overlap, so coarsening
    adjacent labels into blocks loses little information.

    Returns (X, y) with X of shape (n_samples, 2).
    """
    rng = np.random.default_rng(random_state)
    y = rng.integers(num_classes, size=n_samples)
    centers = 2.0 * np.pi * y / num_classes
    angles = rng.vonmises(centers, concentration)
    X = np.column_stack([np.cos(angles), np.sin(angles)])
    return X, y


def make_grid_dataset(n_samples, rows=6, cols=8, noise=1.0, random_state=None):
    """Classes on a rows x cols grid, observed as jittered cell coordinates.

    Label (r, c) maps to class r * cols + c; features are (c, r) plus
    isotropic Gaussian noise in units of the cell spacing.

    Returns (X, y) with X of shape (n_samples, 2).
    """
    rng = np.random.default_rng(random_state)
    y = rng.integers(rows * cols, size=n_samples)
    r, c = y // cols, y % cols
    X = np.column_stack([c, r]) + noise * rng.standard_normal((n_samples, 2))
    return X, y


def load_cifar100_hierarchy():
    """Bundled CIFAR-100 label hierarchy.

    Returns (class_names, HierarchySpec) with three levels above the classes:
    20 superclasses, 8 categories, 4 supercategories.
    """
    path = files("strent.data").joinpath("cifar100_hierarchy.csv")
    return read_hierarchy_file(str(path))


def save_dataset_csv(path, X, y, label_name="label", feature_names=None):
    """Write (X, y) as a delimited text file with a header row."""
    X = np.asarray(X)
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(X.shape[1])]
    elif len(feature_names) != X.shape[1]:
        raise ValueError(
            f"{len(feature_names)} feature names for {X.shape[1]} columns"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(feature_names) + [label_name])
        for row, label in zip(X, y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
