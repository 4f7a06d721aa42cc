"""Linear scoring functions ``s(v, theta) = theta . phi(v)``.

A feature map is any callable ``phi(v) -> FeatureVector``.  Feature maps
that can build a whole block at once may also expose
``matrix(nodes, dim) -> scipy.sparse.csr_matrix``; the scorer uses it when
present.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError

__all__ = [
    "FeatureVector",
    "LinearScorer",
    "save_params",
    "load_params",
]


class FeatureVector(NamedTuple):
    """Sparse feature vector; repeated indices add up."""

    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls) -> "FeatureVector":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        np.add.at(out, self.indices, self.values)
        return out


def _check_indices(indices: np.ndarray, dim: int):
    if indices.size and (indices.min() < 0 or indices.max() >= dim):
        raise ConfigurationError(
            f"feature index out of range [0, {dim}): {indices.min()}..{indices.max()}"
        )


class LinearScorer:
    """Scores nodes by an inner product with a dense parameter vector."""

    def __init__(self, params: np.ndarray, feature_map: Callable[[int], FeatureVector]):
        params = np.asarray(params, dtype=float)
        if params.ndim != 1:
            raise ConfigurationError("parameters must be a 1-d vector")
        if not np.all(np.isfinite(params)):
            raise ConfigurationError("parameters must be finite")
        self.params = params
        self.feature_map = feature_map

    @property
    def dim(self) -> int:
        return self.params.shape[0]

    def with_params(self, params: np.ndarray) -> "LinearScorer":
        return LinearScorer(params, self.feature_map)

    def features(self, v: int) -> FeatureVector:
        fv = self.feature_map(v)
        _check_indices(fv.indices, self.dim)
        return fv

    def feature_matrix(self, nodes) -> sp.csr_matrix:
        """Rows ``phi(v)`` for each node in ``nodes``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        block = getattr(self.feature_map, "matrix", None)
        if block is not None:
            mat = block(nodes, self.dim)
            _check_indices(mat.indices, self.dim)
            return mat
        rows, cols, vals = [], [], []
        for i, v in enumerate(nodes.tolist()):
            fv = self.features(v)
            rows.append(np.full(len(fv.indices), i))
            cols.append(fv.indices)
            vals.append(fv.values)
        if rows:
            rows, cols, vals = (np.concatenate(x) for x in (rows, cols, vals))
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(nodes), self.dim))

    def score(self, v: int) -> float:
        fv = self.features(v)
        return float(np.dot(self.params[fv.indices], fv.values))

    def score_gradient(self, v: int) -> FeatureVector:
        # d/dtheta of theta . phi(v) is phi(v)
        return self.features(v)

    def scores(self, nodes) -> np.ndarray:
        return self.feature_matrix(nodes) @ self.params

    __call__ = scores


_MAGIC = b"BLP1"


def save_params(path: str | Path, params: np.ndarray) -> None:
    """Write a parameter vector as JSON (``.json``) or flat binary.

    The binary layout is a 4-byte magic, a little-endian uint64 dimension
    header, then ``dim`` little-endian float64 values.
    """
    path = Path(path)
    params = np.asarray(params, dtype="<f8")
    if path.suffix == ".json":
        path.write_text(json.dumps({"dim": int(params.size), "values": params.tolist()}))
    else:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", params.size))
            fh.write(params.tobytes())


def load_params(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        values = np.asarray(data["values"], dtype=float)
        if values.size != int(data["dim"]):
            raise ConfigurationError(f"{path}: dimension header does not match payload")
        return values
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise ConfigurationError(f"{path}: not a beamlearn parameter file")
    (dim,) = struct.unpack("<Q", raw[4:12])
    values = np.frombuffer(raw[12:], dtype="<f8")
    if values.size != dim:
        raise ConfigurationError(f"{path}: dimension header does not match payload")
    return values.astype(float)
