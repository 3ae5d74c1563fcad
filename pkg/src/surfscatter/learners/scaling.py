from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFeature, DimensionMismatch, EmptyTrainingSet


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring with population (ddof=0) standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.mean):
            raise DimensionMismatch(f"expected {len(self.mean)} columns, got shape {X.shape}")
        return (X - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def fit_standardizer(X) -> Standardizer:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise EmptyTrainingSet("need at least 2 rows to fit a standardizer")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    bad = np.flatnonzero(~(std > 0))
    if len(bad):
        raise DegenerateFeature(f"zero-variance feature column(s) {bad.tolist()}")
    return Standardizer(mean, std)


def apply_standardizer(s: Standardizer, X) -> np.ndarray:
    return s.transform(X)
