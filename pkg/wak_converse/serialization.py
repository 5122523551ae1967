"""
JSON encoding of sources, joint types, channels and codes.

Loaders validate everything and raise ``SchemaError`` naming the offending
field. Writers are deterministic, so re-serializing a loaded document gives
back the same bytes.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from wak_converse.code_model import Code, GwCode, WakCode
from wak_converse.prob_core import Channel, JointPmf, ProbabilityError
from wak_converse.types_method import JointType

CODE_SCHEMA_VERSION = 1

PathLike = Union[str, Path]


class SchemaError(ValueError):
    """Raised when a JSON document does not match its schema.

    Attributes:
        code: Machine-readable reason: "missing_field", "bad_type",
            "version_mismatch", "truncated_table", "bad_value" or
            "malformed_json".
        field: Dotted path of the offending field ("$" for the document).
    """

    def __init__(self, message: str, code: str, field: str = "$"):
        super().__init__(f"{field}: {message}")
        self.code = code
        self.field = field


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(payload: Any) -> str:
    """Compact, key-order-preserving JSON with a trailing newline."""
    text = json.dumps(
        payload, separators=(",", ":"), allow_nan=False, default=_to_builtin
    )
    return text + "\n"


def parse_json(text: str) -> Any:
    """Parse JSON text, mapping syntax errors to ``SchemaError``."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(
            f"malformed JSON ({e.msg} at line {e.lineno})", "malformed_json"
        ) from e


def read_json(path: PathLike) -> Any:
    """Read and parse a JSON file."""
    with open(path, encoding="utf-8") as f:
        return parse_json(f.read())


def write_text(path: PathLike, text: str) -> None:
    """Write text with Unix newlines, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


# --- field helpers -------------------------------------------------------


def _require(data: Dict[str, Any], key: str, where: str = "") -> Any:
    if key not in data:
        raise SchemaError("field is required", "missing_field", where + key)
    return data[key]


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _int_field(data: Dict[str, Any], key: str, minimum: int = 0) -> int:
    value = _require(data, key)
    if not _is_int(value):
        raise SchemaError("must be an integer", "bad_type", key)
    if value < minimum:
        raise SchemaError(f"must be at least {minimum}", "bad_value", key)
    return value


def _int_list(value: Any, field: str) -> List[int]:
    if not isinstance(value, list):
        raise SchemaError("must be a list of integers", "bad_type", field)
    if not all(_is_int(v) for v in value):
        raise SchemaError("must contain only integers", "bad_type", field)
    return value


def _table_field(
    data: Dict[str, Any], key: str, length: int, bound: int
) -> List[int]:
    values = _int_list(_require(data, key), key)
    if len(values) < length:
        raise SchemaError(
            f"has {len(values)} entries, expected {length}",
            "truncated_table",
            key,
        )
    if len(values) > length:
        raise SchemaError(
            f"has {len(values)} entries, expected {length}", "bad_value", key
        )
    if any(v < 0 or v >= bound for v in values):
        raise SchemaError(
            f"entries must lie in [0, {bound})", "bad_value", key
        )
    return values


def _document(data: Any, kind: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise SchemaError(f"{kind} document must be an object", "bad_type")
    return data


# --- joint pmf -----------------------------------------------------------


def pmf_to_dict(pxy: JointPmf) -> Dict[str, Any]:
    """Encode a two-axis joint pmf."""
    if pxy.ndim != 2:
        raise ProbabilityError("only pair sources (X, Y) are serialized")
    return {
        "alphabet_x": list(pxy.labels[0]),
        "alphabet_y": list(pxy.labels[1]),
        "pmf": pxy.probs.tolist(),
    }


def pmf_from_dict(data: Any) -> JointPmf:
    """Decode and validate a joint pmf document."""
    data = _document(data, "source")
    alphabets = []
    for key in ("alphabet_x", "alphabet_y"):
        labels = _require(data, key)
        if not isinstance(labels, list) or not labels:
            raise SchemaError("must be a nonempty list", "bad_type", key)
        alphabets.append(tuple(str(label) for label in labels))
    rows = _require(data, "pmf")
    if not isinstance(rows, list) or not all(
        isinstance(row, list) and all(_is_number(v) for v in row)
        for row in rows
    ):
        raise SchemaError("must be a matrix of numbers", "bad_type", "pmf")
    shape = (len(alphabets[0]), len(alphabets[1]))
    if len(rows) != shape[0] or any(len(row) != shape[1] for row in rows):
        raise SchemaError(
            f"must have shape {shape} to match the alphabets",
            "bad_value",
            "pmf",
        )
    try:
        return JointPmf(np.array(rows, dtype=float), tuple(alphabets))
    except ProbabilityError as e:
        raise SchemaError(str(e), "bad_value", "pmf") from e


def load_source(path: PathLike) -> JointPmf:
    """Load a joint pmf JSON file."""
    return pmf_from_dict(read_json(path))


# --- joint types and sequences ------------------------------------------


def type_to_dict(t: JointType) -> Dict[str, Any]:
    """Encode a joint type."""
    return {"n": t.n, "counts": [list(row) for row in t.counts]}


def type_from_dict(data: Any) -> JointType:
    """Decode and validate a joint type document."""
    data = _document(data, "type")
    n = _int_field(data, "n", minimum=1)
    counts = _require(data, "counts")
    if not isinstance(counts, list) or not counts:
        raise SchemaError("must be a nonempty matrix", "bad_type", "counts")
    for i, row in enumerate(counts):
        _int_list(row, f"counts[{i}]")
    try:
        t = JointType(tuple(tuple(row) for row in counts))
    except ProbabilityError as e:
        raise SchemaError(str(e), "bad_value", "counts") from e
    if t.n != n:
        raise SchemaError(
            f"counts sum to {t.n} but n is {n}", "bad_value", "counts"
        )
    return t


def load_type(path: PathLike) -> JointType:
    """Load a joint type JSON file."""
    return type_from_dict(read_json(path))


# --- channels ------------------------------------------------------------


def channel_to_dict(ch: Channel) -> Dict[str, Any]:
    """Encode a channel (witness channels in region output)."""
    return {"rows": ch.rows.tolist(), "card_bound": ch.card_bound}


def channel_from_dict(data: Any) -> Channel:
    """Decode and validate a channel document."""
    data = _document(data, "channel")
    rows = _require(data, "rows")
    bound = data.get("card_bound")
    if bound is not None and not _is_int(bound):
        raise SchemaError(
            "must be an integer or null", "bad_type", "card_bound"
        )
    try:
        return Channel(np.array(rows, dtype=float), card_bound=bound)
    except (ProbabilityError, ValueError, TypeError) as e:
        raise SchemaError(str(e), "bad_value", "rows") from e


# --- codes ---------------------------------------------------------------


def _sparse_decoder(table: np.ndarray) -> Dict[str, Any]:
    flat = table.ravel()
    default = int(np.argmax(np.bincount(flat)))
    rows, cols = np.nonzero(table != default)
    pairs = [[int(r), int(c), int(table[r, c])] for r, c in zip(rows, cols)]
    return {"pairs": pairs, "default": default}


def _dense_decoder(
    value: Any, field: str, shape: tuple, bound: int
) -> np.ndarray:
    if not isinstance(value, dict):
        raise SchemaError("must be an object", "bad_type", field)
    default = _require(value, "default", field + ".")
    if not _is_int(default):
        raise SchemaError("must be an integer", "bad_type", field + ".default")
    if not 0 <= default < bound:
        raise SchemaError(
            f"must lie in [0, {bound})", "bad_value", field + ".default"
        )
    pairs = _require(value, "pairs", field + ".")
    if not isinstance(pairs, list):
        raise SchemaError("must be a list", "bad_type", field + ".pairs")
    table = np.full(shape, default, dtype=np.int64)
    for i, entry in enumerate(pairs):
        where = f"{field}.pairs[{i}]"
        if (
            not isinstance(entry, list)
            or len(entry) != 3
            or not all(_is_int(v) for v in entry)
        ):
            raise SchemaError("must be [m0, m, rank]", "bad_type", where)
        m0, m, rank = entry
        in_range = (
            0 <= m0 < shape[0] and 0 <= m < shape[1] and 0 <= rank < bound
        )
        if not in_range:
            raise SchemaError("entry out of range", "bad_value", where)
        table[m0, m] = rank
    return table


def code_to_dict(code: Code) -> Dict[str, Any]:
    """Encode a WAK or GW code; decoders are stored sparsely."""
    payload: Dict[str, Any] = {
        "kind": code.kind,
        "n": code.n,
        "x_size": code.x_size,
        "y_size": code.y_size,
        "sizes": list(code.sizes),
    }
    if isinstance(code, WakCode):
        payload["enc0"] = code.enc0.tolist()
        payload["enc2"] = code.enc2.tolist()
        payload["dec"] = _sparse_decoder(code.dec)
    else:
        payload["enc0"] = code.enc0.tolist()
        payload["enc1"] = code.enc1.tolist()
        payload["enc2"] = code.enc2.tolist()
        payload["dec1"] = _sparse_decoder(code.dec1)
        payload["dec2"] = _sparse_decoder(code.dec2)
    payload["version"] = CODE_SCHEMA_VERSION
    return payload


def code_from_dict(data: Any, kind: Optional[str] = None) -> Code:
    """Decode and validate a code document.

    Args:
        data: Parsed JSON.
        kind: Expected kind ("wak" or "gw"), or None to accept either.

    Raises:
        SchemaError: With a field-level message on any violation.
    """
    data = _document(data, "code")
    version = _require(data, "version")
    if version != CODE_SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported version {version!r}, expected "
            f"{CODE_SCHEMA_VERSION}",
            "version_mismatch",
            "version",
        )
    found = _require(data, "kind")
    if found not in ("wak", "gw"):
        raise SchemaError("must be 'wak' or 'gw'", "bad_value", "kind")
    if kind is not None and found != kind:
        raise SchemaError(
            f"expected a {kind} code, got {found}", "bad_value", "kind"
        )
    n = _int_field(data, "n", minimum=1)
    x_size = _int_field(data, "x_size", minimum=1)
    y_size = _int_field(data, "y_size", minimum=1)
    sizes = _int_list(_require(data, "sizes"), "sizes")
    expected = 2 if found == "wak" else 3
    if len(sizes) != expected or any(s < 1 for s in sizes):
        raise SchemaError(
            f"must hold {expected} positive sizes", "bad_value", "sizes"
        )
    x_count, y_count = x_size**n, y_size**n
    try:
        if found == "wak":
            size0, size2 = sizes
            return WakCode(
                n=n,
                x_size=x_size,
                y_size=y_size,
                size0=size0,
                size2=size2,
                enc0=_table_field(data, "enc0", x_count, size0),
                enc2=_table_field(data, "enc2", y_count, size2),
                dec=_dense_decoder(
                    _require(data, "dec"), "dec", (size0, size2), y_count
                ),
            )
        size0, size1, size2 = sizes
        pairs = x_count * y_count
        return GwCode(
            n=n,
            x_size=x_size,
            y_size=y_size,
            size0=size0,
            size1=size1,
            size2=size2,
            enc0=_table_field(data, "enc0", pairs, size0),
            enc1=_table_field(data, "enc1", pairs, size1),
            enc2=_table_field(data, "enc2", pairs, size2),
            dec1=_dense_decoder(
                _require(data, "dec1"), "dec1", (size0, size1), x_count
            ),
            dec2=_dense_decoder(
                _require(data, "dec2"), "dec2", (size0, size2), y_count
            ),
        )
    except ProbabilityError as e:
        raise SchemaError(str(e), "bad_value") from e


def dumps_code(code: Code) -> str:
    """Serialize a code deterministically."""
    return dumps(code_to_dict(code))


def loads_code(text: str, kind: Optional[str] = None) -> Code:
    """Parse a serialized code."""
    return code_from_dict(parse_json(text), kind=kind)


def save_code(code: Code, path: PathLike) -> None:
    """Write a code JSON file."""
    write_text(path, dumps_code(code))


def load_code(path: PathLike, kind: Optional[str] = None) -> Code:
    """Read a code JSON file."""
    return code_from_dict(read_json(path), kind=kind)
