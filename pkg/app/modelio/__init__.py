# app/modelio/__init__.py

"""
Model file reader and writer.

A model file is plain text made of ``[section]`` blocks::

    # ndk-svm model
    [header]
    format_version=1
    dim=3
    m=2
    bias=-0.5
    [kernel]
    tag=ndk
    a=1
    c=0
    allow_negative_c=false
    [support_vectors]
    0.5 1:1 3:2
    -0.5 2:1

followed optionally by ``[ndk_fast]`` and ``[complex_primal]`` sections
holding the precomputed forms. Support-vector lines are ``coeff idx:val ...``
with 1-based indices. Reals are written with 17 significant digits so that a
save/load round trip reproduces every value exactly. Sections the reader
does not know are skipped.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from app.exceptions import DataFormatError, DataIOError
from app.kernels import kernel_from_block, to_block
from app.ndk_fast import ComplexPrimalModel, NdkFastModel
from app.svm import SvmModel
from app.veccore import ComplexVector, SparseVector
from app.veccore.sparse_format import format_sparse_line, parse_sparse_line

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PathLike = Union[str, Path]


@dataclass
class ModelBundle:
    """A dual model and the optional fast forms stored alongside it."""

    model: SvmModel
    fast: Optional[NdkFastModel] = None
    primal: Optional[ComplexPrimalModel] = None


def _real(value: float) -> str:
    return f"{float(value):.17g}"


def _render(model: SvmModel, fast: Optional[NdkFastModel],
            primal: Optional[ComplexPrimalModel]) -> List[str]:
    lines = [
        "# ndk-svm model",
        "[header]",
        f"format_version={FORMAT_VERSION}",
        f"dim={model.dim}",
        f"m={model.m}",
        f"bias={_real(model.bias)}",
        "[kernel]",
        *to_block(model.kernel),
        "[support_vectors]",
    ]
    for coeff, x in zip(model.coeffs, model.svs):
        lines.append(format_sparse_line(_real(coeff), x))

    if fast is not None:
        nz = np.flatnonzero(fast.z)
        lines += [
            "[ndk_fast]",
            f"S={_real(fast.S)}",
            f"u={_real(fast.u)}",
            f"c_prime={_real(fast.c_prime)}",
            f"bias={_real(fast.bias)}",
            f"provenance={fast.provenance}",
            "z=" + " ".join(f"{i + 1}:{_real(fast.z[i])}" for i in nz),
        ]
    if primal is not None:
        comps = primal.w.components
        nz = np.flatnonzero(comps)
        lines += [
            "[complex_primal]",
            f"bias={_real(primal.bias)}",
            f"provenance={primal.provenance}",
            "w=" + " ".join(f"{i + 1}:{_real(comps[i].real)}:{_real(comps[i].imag)}" for i in nz),
        ]
    return lines


def write_model_file(path: PathLike, model: SvmModel, fast: Optional[NdkFastModel] = None,
                     primal: Optional[ComplexPrimalModel] = None) -> Path:
    """Write a model (and optional precomputed forms) to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(_render(model, fast, primal)) + "\n", encoding="utf-8")
    logger.debug(f"Model written to {path} (m={model.m}, fast={fast is not None}, primal={primal is not None})")
    return path


def _split_sections(lines: List[str], path: str) -> Dict[str, List[tuple]]:
    sections: Dict[str, List[tuple]] = {}
    current = None
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current in sections:
                raise DataFormatError(f"duplicate section [{current}]", path, number)
            sections[current] = []
            continue
        if current is None:
            raise DataFormatError("content before the first section", path, number)
        sections[current].append((number, line))
    return sections


def _key_values(entries: List[tuple], path: str) -> Dict[str, str]:
    values = {}
    for number, line in entries:
        key, sep, value = line.partition("=")
        if not sep:
            raise DataFormatError(f"expected key=value, got {line!r}", path, number)
        values[key.strip()] = value.strip()
    return values


def _need(values: Dict[str, str], key: str, section: str, path: str) -> str:
    if key not in values:
        raise DataFormatError(f"[{section}] lacks {key}", path)
    return values[key]


def _float(text: str, what: str, path: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"invalid number for {what}: {text!r}", path) from None


def _int(text: str, what: str, path: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"invalid integer for {what}: {text!r}", path) from None


def _index(text: str, size: int, what: str, path: str) -> int:
    """0-based position of a 1-based index that must lie in 1..size."""
    index = _int(text, f"{what} index", path)
    if not 1 <= index <= size:
        raise DataFormatError(f"{what} index {index} outside 1..{size}", path)
    return index - 1


def read_model_file(path: PathLike) -> ModelBundle:
    """
    Read a model file written by ``write_model_file``.

    Raises:
    -------
    DataIOError
        If the file does not exist.
    DataFormatError
        If a required section or key is missing or malformed, or if a
        precomputed section was derived from a different model.
    """
    path = Path(path)
    if not path.is_file():
        logger.error(f"Model file not found: {path}")
        raise DataIOError(f"cannot read model file {path}")
    where = str(path)
    sections = _split_sections(path.read_text(encoding="utf-8").splitlines(), where)

    for name in ("header", "kernel", "support_vectors"):
        if name not in sections:
            raise DataFormatError(f"missing section [{name}]", where)
    for name in sections:
        if name not in ("header", "kernel", "support_vectors", "ndk_fast", "complex_primal"):
            logger.debug(f"Skipping unknown section [{name}] in {path}")

    header = _key_values(sections["header"], where)
    version = _int(_need(header, "format_version", "header", where), "format_version", where)
    if version > FORMAT_VERSION:
        raise DataFormatError(f"unsupported format_version {version}", where)
    dim = _int(_need(header, "dim", "header", where), "dim", where)
    m = _int(_need(header, "m", "header", where), "m", where)
    if dim < 1 or m < 0:
        raise DataFormatError(f"header needs dim >= 1 and m >= 0, got dim={dim} m={m}", where)
    bias = _float(_need(header, "bias", "header", where), "bias", where)

    kernel = kernel_from_block([line for _, line in sections["kernel"]])

    coeffs, svs = [], []
    for number, line in sections["support_vectors"]:
        label, pairs = parse_sparse_line(line, number, where)
        coeffs.append(_float(label, "coefficient", where))
        if any(i >= dim for i, _ in pairs):
            raise DataFormatError(f"index exceeds dim={dim}", where, number)
        svs.append(SparseVector.from_pairs(dim, pairs))
    if len(svs) != m:
        raise DataFormatError(f"header says m={m} but {len(svs)} support vectors found", where)

    model = SvmModel(kernel=kernel, svs=tuple(svs), coeffs=np.array(coeffs), bias=bias, dim=dim)
    bundle = ModelBundle(model=model)

    if kernel.tag != "ndk" and ("ndk_fast" in sections or "complex_primal" in sections):
        raise DataFormatError(f"precomputed NDK sections in a {kernel.tag} model", where)

    if "ndk_fast" in sections:
        values = _key_values(sections["ndk_fast"], where)
        z = np.zeros(dim)
        for token in _need(values, "z", "ndk_fast", where).split():
            idx, sep, val = token.partition(":")
            if not sep:
                raise DataFormatError(f"malformed z component {token!r}", where)
            z[_index(idx, dim, "z", where)] = _float(val, "z", where)
        bundle.fast = NdkFastModel(
            params=kernel.params,
            S=_float(_need(values, "S", "ndk_fast", where), "S", where),
            z=z,
            u=_float(_need(values, "u", "ndk_fast", where), "u", where),
            c_prime=_float(_need(values, "c_prime", "ndk_fast", where), "c_prime", where),
            bias=_float(_need(values, "bias", "ndk_fast", where), "bias", where),
            dim=dim,
            provenance=_need(values, "provenance", "ndk_fast", where),
        )

    if "complex_primal" in sections:
        values = _key_values(sections["complex_primal"], where)
        w = np.zeros(4 * dim + 1, dtype=np.complex128)
        for token in _need(values, "w", "complex_primal", where).split():
            parts = token.split(":")
            if len(parts) != 3:
                raise DataFormatError(f"malformed complex component {token!r}", where)
            w[_index(parts[0], 4 * dim + 1, "w", where)] = complex(_float(parts[1], "w", where), _float(parts[2], "w", where))
        bundle.primal = ComplexPrimalModel(
            w=ComplexVector(w),
            bias=_float(_need(values, "bias", "complex_primal", where), "bias", where),
            params=kernel.params,
            dim=dim,
            provenance=_need(values, "provenance", "complex_primal", where),
        )

    for derived in (bundle.fast, bundle.primal):
        if derived is not None and derived.provenance != model.fingerprint:
            raise DataFormatError("precomputed section does not belong to this model", where)

    logger.debug(f"Model read from {path}: kernel={kernel.tag} m={m} dim={dim}")
    return bundle
