"""Versioned structured-text model files with exact numeric round-trips.

The container is JSON with two tagged value forms:

  {"~f": "<float.hex()>"}                       one float scalar
  {"~a": {"dtype": d, "shape": s, "data": b}}   one numpy array, `data` the
                                                base64 of the little-endian
                                                buffer

Everything else is plain JSON. Tagging every real (scalars as hex floats,
arrays as raw base-2 buffers) makes save -> load -> predict reproduce the
original predictions bit for bit. Files are written with sorted keys and
fixed separators, so identical models serialize to identical bytes.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import ModelFileError

FORMAT_NAME = "stackgen-model"
FORMAT_VERSION = 1

_DTYPES = {"f8": "<f8", "i8": "<i8", "i4": "<i4", "b1": "|b1"}


def _encode(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return {"~f": float(obj).hex()}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        kind = obj.dtype.kind
        if kind == "f":
            tag, arr = "f8", obj.astype("<f8")
        elif kind == "i":
            tag, arr = ("i4", obj.astype("<i4")) if obj.dtype.itemsize <= 4 \
                else ("i8", obj.astype("<i8"))
        elif kind == "b":
            tag, arr = "b1", obj.astype("|b1")
        else:
            raise ModelFileError(f"cannot serialize array dtype {obj.dtype}")
        return {"~a": {"dtype": tag, "shape": list(obj.shape),
                       "data": base64.b64encode(arr.tobytes()).decode("ascii")}}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if not isinstance(k, str):
                raise ModelFileError(f"dict keys must be strings, got {k!r}")
            if k.startswith("~"):
                raise ModelFileError("dict keys may not start with '~'")
            out[k] = _encode(v)
        return out
    raise ModelFileError(f"cannot serialize {type(obj).__name__}")


def _decode(obj):
    if isinstance(obj, dict):
        if "~f" in obj:
            return float.fromhex(obj["~f"])
        if "~a" in obj:
            spec = obj["~a"]
            raw = base64.b64decode(spec["data"])
            arr = np.frombuffer(raw, dtype=_DTYPES[spec["dtype"]])
            return arr.reshape(spec["shape"]).copy()
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dump_model(payload: dict, path: str) -> None:
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
           "payload": _encode(payload)}
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def load_payload(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ModelFileError(f"missing model file: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFileError(f"corrupt model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFileError("corrupt model file: not a stackgen model")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFileError(
            f"model file version {doc.get('version')!r} is not supported "
            f"(this build reads version {FORMAT_VERSION})")
    try:
        return _decode(doc["payload"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFileError(f"corrupt model file: {exc}") from None
