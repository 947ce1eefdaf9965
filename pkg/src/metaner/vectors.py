"""Plain-text word vector and stop-word file IO.

Vector file format: one word per line followed by whitespace-separated
decimal floats. Stop-word file: one word per line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def read_vector_file(path: str | Path) -> dict[str, np.ndarray]:
    """Load word vectors; all rows must share one dimension."""
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'word v1 v2 ...'")
            word = parts[0]
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad float in vector for {word!r}") from exc
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(
                    f"{path}:{lineno}: vector for {word!r} has dim {vec.size}, expected {dim}"
                )
            vectors[word] = vec
    return vectors


def write_vector_file(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in vectors.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def read_stopword_file(path: str | Path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.strip() for line in fh if line.strip()}
