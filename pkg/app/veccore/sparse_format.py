# app/veccore/sparse_format.py

"""
Reader and writer for the sparse text format.

One vector per line::

    label idx:val idx:val ...

Indices in files are 1-based and mapped to 0-based internally. The label
field is kept as a string: ``+1``/``-1`` for binary files, or a
comma-separated list of category ids for multi-label files. An optional
``# dim=N`` comment fixes the feature-space dimension and an optional
``# labels=binary`` or ``# labels=multi`` comment declares how the label
field is read; other ``#`` lines and blank lines are ignored.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from app.exceptions import DataFormatError, DataIOError, DimensionMismatchError
from app.veccore import SparseVector

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_DIM_HEADER = re.compile(r"^#\s*dim\s*=\s*(\d+)\s*$")
_LABELS_HEADER = re.compile(r"^#\s*labels\s*=\s*(\w+)\s*$")
LABEL_KINDS = ("binary", "multi")
_BINARY_LABELS = {"+1": 1, "1": 1, "-1": -1}


@dataclass
class SparseDataset:
    """Labels and vectors read from one sparse file."""

    dim: int
    labels: List[str] = field(default_factory=list)
    vectors: List[SparseVector] = field(default_factory=list)
    label_kind: Optional[str] = None

    def __len__(self):
        return len(self.vectors)

    def label_sets(self) -> List[frozenset]:
        return [parse_label_set(label) for label in self.labels]

    def categories(self) -> List[str]:
        """Sorted category ids occurring in multi-label label fields."""
        found = set()
        for labels in self.label_sets():
            found.update(labels)
        return sorted(found)


def parse_label_set(label: str) -> frozenset:
    """Split a multi-label field ``a,b,c`` into a set; an empty field gives the empty set."""
    return frozenset(part for part in label.split(",") if part)


def binary_label(label: str, category: Optional[str] = None) -> int:
    """
    Map a label field to -1/+1.

    Without a category the field must be a binary label. With a category the
    result is +1 iff the category is in the field's label set.
    """
    if category is None:
        try:
            return _BINARY_LABELS[label]
        except KeyError:
            raise DataFormatError(f"expected a binary label (+1/-1), got {label!r}") from None
    return 1 if category in parse_label_set(label) else -1


def is_binary_file(labels: Sequence[str], label_kind: Optional[str] = None) -> bool:
    """
    Whether a file holds binary labels.

    A declared ``label_kind`` decides. Without one the labels are guessed:
    a file whose fields are all ``+1``, ``1`` or ``-1`` counts as binary, so a
    multi-label file using only categories named ``1`` and ``-1`` needs the
    ``# labels=multi`` header.
    """
    if label_kind is not None:
        return label_kind == "binary"
    return bool(labels) and all(label in _BINARY_LABELS for label in labels)


def parse_sparse_line(line: str, line_number: Optional[int] = None,
                      path: Optional[str] = None) -> Tuple[str, List[Tuple[int, float]]]:
    """
    Parse one data line into its label and 0-based (index, value) pairs.

    Raises:
    -------
    DataFormatError
        If a feature token is not ``idx:val`` with a positive integer index
        and a finite value, or if indices repeat.
    """
    parts = line.split()
    if not parts:
        raise DataFormatError("empty data line", path, line_number)
    label, tokens = parts[0], parts[1:]
    if ":" in label:
        raise DataFormatError(f"missing label before {label!r}", path, line_number)
    pairs = []
    seen = set()
    for token in tokens:
        idx_text, sep, val_text = token.partition(":")
        if not sep:
            raise DataFormatError(f"malformed feature {token!r}", path, line_number)
        try:
            index = int(idx_text)
            value = float(val_text)
        except ValueError:
            raise DataFormatError(f"malformed feature {token!r}", path, line_number) from None
        if index < 1:
            raise DataFormatError(f"indices are 1-based, got {index}", path, line_number)
        if value != value or value in (float("inf"), float("-inf")):
            raise DataFormatError(f"non-finite value in {token!r}", path, line_number)
        if index in seen:
            raise DataFormatError(f"duplicate index {index}", path, line_number)
        seen.add(index)
        pairs.append((index - 1, value))
    return label, pairs


def format_sparse_line(label: str, x: SparseVector) -> str:
    """Render one vector with 1-based indices and 17 significant digits."""
    features = " ".join(f"{i + 1}:{v:.17g}" for i, v in x.items())
    return f"{label} {features}".rstrip()


def read_sparse_file(path: PathLike, dim: Optional[int] = None) -> SparseDataset:
    """
    Read a sparse-format file.

    Parameters:
    -----------
    path : str or Path
        File to read.
    dim : int, optional
        Feature-space dimension. If omitted the ``# dim=N`` header is used,
        falling back to the largest index seen.

    Returns:
    --------
    SparseDataset
        Labels and vectors in file order.
    """
    path = Path(path)
    if not path.is_file():
        logger.error(f"Sparse file not found: {path}")
        raise DataIOError(f"cannot read sparse file {path}")

    header_dim = None
    label_kind = None
    rows = []
    try:
        with path.open(encoding="utf-8") as handle:
            for line_number, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    match = _DIM_HEADER.match(line)
                    if match:
                        header_dim = int(match.group(1))
                    kind = _LABELS_HEADER.match(line)
                    if kind:
                        if kind.group(1) not in LABEL_KINDS:
                            raise DataFormatError(f"unknown label kind {kind.group(1)!r}", str(path), line_number)
                        label_kind = kind.group(1)
                    continue
                rows.append(parse_sparse_line(line, line_number, str(path)) + (line_number,))
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"not valid UTF-8: {exc}", str(path)) from exc

    if dim is not None and header_dim is not None and dim != header_dim:
        raise DimensionMismatchError(dim, header_dim, f"file {path}")
    resolved = dim or header_dim
    max_index = max((i for _, pairs, _ in rows for i, _ in pairs), default=-1)
    if resolved is None:
        resolved = max(max_index + 1, 1)
    if max_index >= resolved:
        bad_line = next(n for _, pairs, n in rows if any(i >= resolved for i, _ in pairs))
        raise DataFormatError(f"index exceeds dim={resolved}", str(path), bad_line)

    if label_kind == "binary":
        for label, _, line_number in rows:
            if label not in _BINARY_LABELS:
                raise DataFormatError(f"expected a binary label (+1/-1), got {label!r}", str(path), line_number)

    dataset = SparseDataset(dim=resolved, label_kind=label_kind)
    for label, pairs, _ in rows:
        dataset.labels.append(label)
        dataset.vectors.append(SparseVector.from_pairs(resolved, pairs))
    logger.debug(f"Read {len(dataset)} vectors of dim {resolved} from {path}")
    return dataset


def write_sparse_file(path: PathLike, labels: Iterable[str], vectors: Iterable[SparseVector],
                      dim: Optional[int] = None, label_kind: Optional[str] = None) -> Path:
    """Write vectors in sparse format after a ``# dim=N`` header and, if given, a ``# labels=`` header."""
    path = Path(path)
    labels = list(labels)
    vectors = list(vectors)
    if len(labels) != len(vectors):
        raise DataFormatError(f"{len(labels)} labels for {len(vectors)} vectors", str(path))
    if dim is None:
        if not vectors:
            raise DataFormatError("dim is required to write an empty file", str(path))
        dim = vectors[0].dim
    if label_kind is not None and label_kind not in LABEL_KINDS:
        raise DataFormatError(f"unknown label kind {label_kind!r}", str(path))
    for x in vectors:
        if x.dim != dim:
            raise DimensionMismatchError(dim, x.dim, f"vector written to {path}")
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"# dim={dim}\n")
        if label_kind is not None:
            handle.write(f"# labels={label_kind}\n")
        for label, x in zip(labels, vectors):
            handle.write(format_sparse_line(label, x) + "\n")
    logger.debug(f"Wrote {len(vectors)} vectors to {path}")
    return path
