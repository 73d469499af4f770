"""Embedding results and their on-disk representation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError

__all__ = ["EmbeddingResult", "dataset_hash", "write_matrix_csv", "read_matrix_csv"]


def dataset_hash(*arrays) -> str:
    """SHA-256 over shape, dtype and raw bytes of one or more arrays."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype=float)
        h.update(repr(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def write_matrix_csv(path, m: np.ndarray, prefix: str) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    header = ",".join(f"{prefix}{j + 1}" for j in range(m.shape[1]))
    np.savetxt(path, m, delimiter=",", header=header, comments="", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


@dataclass(frozen=True)
class EmbeddingResult:
    """Coordinates of one or two views plus the spectrum that produced them.

    ``coords_y`` is ``None`` for one-manifold embeddings.
    """

    coords_x: np.ndarray
    coords_y: np.ndarray | None
    spectrum: np.ndarray
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        cx = np.asarray(self.coords_x, dtype=float)
        if cx.ndim != 2:
            raise InvalidInputError("coords_x must be 2-d")
        if self.coords_y is not None:
            cy = np.asarray(self.coords_y, dtype=float)
            if cy.shape[0] != cx.shape[0]:
                raise InvalidInputError("coords_x and coords_y must have the same number of rows")
            object.__setattr__(self, "coords_y", cy)
        spec = np.asarray(self.spectrum, dtype=float).reshape(-1)
        if spec.size > 1 and np.any(np.diff(spec) > 1e-10 * max(1.0, float(np.max(np.abs(spec))))):
            raise InvalidInputError("spectrum must be non-increasing")
        object.__setattr__(self, "coords_x", cx)
        object.__setattr__(self, "spectrum", spec)

    @property
    def n(self) -> int:
        return self.coords_x.shape[0]

    @property
    def k(self) -> int:
        return self.coords_x.shape[1]

    def save(self, out_dir, stem: str = "embedding") -> list[Path]:
        """Write ``<stem>_x.csv`` (and ``<stem>_y.csv``) plus ``<stem>.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / f"{stem}_x.csv"]
        write_matrix_csv(written[0], self.coords_x, "e")
        if self.coords_y is not None:
            written.append(out / f"{stem}_y.csv")
            write_matrix_csv(written[-1], self.coords_y, "e")
        meta = {
            "n": self.n,
            "k": self.k,
            "spectrum": [float(s) for s in self.spectrum],
            "config": self.config,
            "provenance": self.provenance,
        }
        written.append(out / f"{stem}.json")
        written[-1].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return written

    @classmethod
    def load(cls, out_dir, stem: str = "embedding") -> "EmbeddingResult":
        out = Path(out_dir)
        meta = json.loads((out / f"{stem}.json").read_text())
        y_path = out / f"{stem}_y.csv"
        return cls(
            coords_x=read_matrix_csv(out / f"{stem}_x.csv"),
            coords_y=read_matrix_csv(y_path) if y_path.exists() else None,
            spectrum=np.array(meta["spectrum"], dtype=float),
            config=meta["config"],
            provenance=meta["provenance"],
        )
