"""Output files: atomic writes confined to one directory, ensemble CSVs."""

import contextlib
import csv
import logging
import os
import tempfile
from collections import OrderedDict
from typing import Dict, Iterator, TextIO, Tuple

import numpy as np
from file_or_name import file_or_name

from pcflow.ensemble import Ensemble


class OutputDirectory:
    """The only directory a command may write to."""

    def __init__(self, root: str):
        self.root = os.path.realpath(root)
        os.makedirs(self.root, exist_ok=True)

    def path(self, name: str) -> str:
        """Resolve `name` inside the directory, refusing anything outside it."""
        path = os.path.realpath(os.path.join(self.root, name))
        if os.path.commonpath([self.root, path]) != self.root or path == self.root:
            raise ValueError(f"Refusing to write {name!r} outside {self.root}")
        return path

    @contextlib.contextmanager
    def atomic_write(self, name: str) -> Iterator[TextIO]:
        """Write to a temporary file next to the target, then rename over it."""
        path = self.path(name)
        fd, tmp = tempfile.mkstemp(
            dir=os.path.dirname(path), prefix=f".{os.path.basename(path)}.", suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w", newline="") as f:
                yield f
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.remove(tmp)
            raise
        logging.getLogger("pcflow").debug(f"Wrote {path}")


def ensemble_filename(index: int, reverse_time: float) -> str:
    return f"ensemble_{index}_t{reverse_time:.6g}.csv"


@file_or_name(file="w")
def write_ensemble_csv(file: TextIO, ensemble: Ensemble, metadata: Dict[str, object]):
    """`# key=value` lines, a header row x1..xd, then one particle per row."""
    for key, value in metadata.items():
        file.write(f"# {key}={value}\n")
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(ensemble.dimension)])
    for row in ensemble.particles:
        writer.writerow([f"{value:.17g}" for value in row])


@file_or_name(file="r")
def read_ensemble_csv(file: TextIO) -> Tuple[np.ndarray, Dict[str, str]]:
    """Inverse of `write_ensemble_csv`; returns (particles, metadata)."""
    metadata = OrderedDict()
    lines = file.read().splitlines()
    body = 0
    while body < len(lines) and lines[body].startswith("#"):
        key, _, value = lines[body][1:].strip().partition("=")
        metadata[key] = value
        body += 1
    rows = list(csv.reader(lines[body:]))
    if not rows:
        raise ValueError("Ensemble CSV is missing its header row")
    d = len(rows[0])
    particles = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
    return particles.reshape(-1, d), metadata
