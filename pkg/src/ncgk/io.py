"""File formats and deterministic JSON output.

Tensor files are JSON objects::

    {"n": 2, "field": "complex", "entries": [[i, j, k, l, re, im], ...]}

with 0-based indices. Unlisted entries are zero and a repeated index
quadruple is rejected. Matrices are written as nested row lists when real
and as ``{"re": [[...]], "im": [[...]]}`` otherwise; both forms are
accepted on input. Floats are written with 17 significant digits so that
equal inputs always give byte-identical files.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .errors import IngestError, NCGKError
from .tensor import Tensor4


def load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON: {exc}") from None


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise IngestError(f"{what} must be a number, got {x!r}")
    if not math.isfinite(x):
        raise IngestError(f"{what} must be finite")
    return float(x)


def _index(x, n: int, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise IngestError(f"{what} must be an integer, got {x!r}")
    if not 0 <= x < n:
        raise IngestError(f"{what} = {x} is out of range for n = {n}")
    return x


def tensor_from_obj(obj) -> Tensor4:
    """Validate a decoded tensor object and build the tensor."""
    if not isinstance(obj, dict):
        raise IngestError("tensor must be a JSON object")
    missing = {"n", "field", "entries"} - obj.keys()
    if missing:
        raise IngestError(f"tensor object lacks {sorted(missing)}")
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise IngestError("n must be a positive integer")
    field = obj["field"]
    if field not in ("real", "complex"):
        raise IngestError("field must be 'real' or 'complex'")
    entries = obj["entries"]
    if not isinstance(entries, list):
        raise IngestError("entries must be a list")
    idx, val, seen = [], [], set()
    for pos, e in enumerate(entries):
        if not isinstance(e, list) or len(e) != 6:
            raise IngestError(f"entry {pos} must be [i, j, k, l, re, im]")
        q = tuple(_index(e[a], n, f"entry {pos} index {a}") for a in range(4))
        if q in seen:
            raise IngestError(f"duplicate index quadruple {list(q)}")
        seen.add(q)
        re, im = _number(e[4], f"entry {pos} real part"), _number(e[5], f"entry {pos} imaginary part")
        if field == "real" and im != 0:
            raise IngestError(f"entry {pos} has an imaginary part in a real tensor")
        idx.append(q)
        val.append(complex(re, im))
    try:
        return Tensor4(n, np.array(idx, dtype=np.int64).reshape(-1, 4), np.array(val, dtype=np.complex128), field)
    except NCGKError as exc:
        raise IngestError(str(exc)) from None


def tensor_to_obj(M: Tensor4) -> dict:
    entries = [[*map(int, q), float(v.real), float(v.imag)] for q, v in zip(M.indices, M.values)]
    return {"n": M.n, "field": "real" if M.is_real else "complex", "entries": entries}


def read_tensor(text: str) -> Tensor4:
    """Parse the tensor file format."""
    return tensor_from_obj(load_json(text))


def matrix_to_obj(A):
    A = np.asarray(A)
    if not np.iscomplexobj(A) or np.all(A.imag == 0):
        return A.real.tolist()
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def matrix_from_obj(obj, what: str = "matrix") -> np.ndarray:
    """Accept a nested row list or a ``{"re", "im"}`` pair of them."""
    if isinstance(obj, dict):
        if set(obj) != {"re", "im"}:
            raise IngestError(f"{what} object must have exactly the keys 're' and 'im'")
        re = matrix_from_obj(obj["re"], what)
        im = matrix_from_obj(obj["im"], what)
        if re.shape != im.shape:
            raise IngestError(f"{what}: real and imaginary parts differ in shape")
        return re + 1j * im
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise IngestError(f"{what} must be a nonempty list of rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise IngestError(f"{what} rows must be nonempty and of equal length")
    return np.array([[_number(x, f"{what} entry") for x in r] for r in obj])


def read_matrices(text: str) -> list:
    """A JSON list of row-major real matrices."""
    obj = load_json(text)
    if not isinstance(obj, list) or not obj:
        raise IngestError("expected a nonempty JSON list of matrices")
    return [matrix_from_obj(m, f"matrix {i}") for i, m in enumerate(obj)]


def decomposition_to_obj(dec) -> dict:
    terms = [{"alpha": [float(np.real(a)), float(np.imag(a))], "A": matrix_to_obj(A), "B": matrix_to_obj(B)}
             for a, A, B in dec.terms]
    return {"terms": terms, "residual": tensor_to_obj(dec.residual)}


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float at 17 significant digits and keys in insertion order."""
    return _encode(obj, indent, 0) + "\n"
