"""JSON schemas for behaviors, wiring maps, assemblages, and matrices.

Floats are emitted through Python's shortest round-trip repr, so every value
survives a save/load cycle bit-exactly.  Nested arrays are row-major in the
same fixed index order the in-memory tables use.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .assemblages import Assemblage, AssemblageLosrMap
from .behaviors import Behavior, Scenario
from .errors import ValidationError
from .losr import LosrMap
from .polytopes import VertexCatalogue
from .quantum import KrausChannel


def behavior_to_dict(b: Behavior) -> dict:
    return {
        "scenario": {
            "wings": [list(w) for w in b.scenario.wings],
            "grouping": [list(g) for g in b.scenario.grouping],
        },
        "table": b.table.tolist(),
    }


def behavior_from_dict(data: dict) -> Behavior:
    try:
        sc = Scenario(
            tuple(tuple(w) for w in data["scenario"]["wings"]),
            tuple(tuple(g) for g in data["scenario"]["grouping"]),
        )
        table = np.asarray(data["table"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed behavior JSON: {exc}") from exc
    return Behavior(sc, table)


def catalogue_to_dict(cat: VertexCatalogue) -> dict:
    return {
        "kind": cat.kind,
        "scenario": behavior_to_dict(cat.behavior(0))["scenario"],
        "vertices": [cat.tables[i].tolist() for i in range(len(cat))],
    }


def losr_to_dict(m: LosrMap) -> dict:
    return {
        "lambda_weights": m.lambda_weights.tolist(),
        "alice_pre": m.alice_pre.tolist(),
        "alice_post": m.alice_post.tolist(),
        "bob_pre": m.bob_pre.tolist(),
        "bob_post": m.bob_post.tolist(),
    }


def losr_from_dict(data: dict) -> LosrMap:
    try:
        return LosrMap(
            np.asarray(data["lambda_weights"], dtype=float),
            np.asarray(data["alice_pre"], dtype=float),
            np.asarray(data["alice_post"], dtype=float),
            np.asarray(data["bob_pre"], dtype=float),
            np.asarray(data["bob_post"], dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed wiring JSON: {exc}") from exc


def matrix_to_dict(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0], "re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def matrix_from_dict(data: dict) -> np.ndarray:
    try:
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data["im"], dtype=float)
        d = int(data["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (d, d) or im.shape != (d, d):
        raise ValidationError("matrix JSON parts do not match the declared dimension")
    return re + 1j * im


def assemblage_to_dict(asm: Assemblage) -> dict:
    elements = {}
    for x in range(asm.num_inputs):
        for a in range(asm.num_outputs):
            elements[f"{x},{a}"] = matrix_to_dict(asm.elements[x, a])
    return {
        "r": asm.num_inputs,
        "s": asm.num_outputs,
        "dim": asm.dim,
        "elements": elements,
    }


def assemblage_from_dict(data: dict) -> Assemblage:
    try:
        r, s, d = int(data["r"]), int(data["s"]), int(data["dim"])
        elements = np.zeros((r, s, d, d), dtype=complex)
        for x in range(r):
            for a in range(s):
                elements[x, a] = matrix_from_dict(data["elements"][f"{x},{a}"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed assemblage JSON: {exc}") from exc
    return Assemblage(elements)


def assemblage_losr_to_dict(m: AssemblageLosrMap) -> dict:
    return {
        "lambda_weights": m.lambda_weights.tolist(),
        "pre": m.pre.tolist(),
        "post": m.post.tolist(),
        "channels": [
            [matrix_to_dict_rect(k) for k in ch.kraus_ops] for ch in m.channels
        ],
    }


def matrix_to_dict_rect(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=complex)
    return {
        "rows": m.shape[0],
        "cols": m.shape[1],
        "re": np.real(m).tolist(),
        "im": np.imag(m).tolist(),
    }


def matrix_from_dict_rect(data: dict) -> np.ndarray:
    re = np.asarray(data["re"], dtype=float)
    im = np.asarray(data["im"], dtype=float)
    return re + 1j * im


def assemblage_losr_from_dict(data: dict) -> AssemblageLosrMap:
    try:
        channels = tuple(
            KrausChannel(tuple(matrix_from_dict_rect(k) for k in ops))
            for ops in data["channels"]
        )
        return AssemblageLosrMap(
            np.asarray(data["lambda_weights"], dtype=float),
            np.asarray(data["pre"], dtype=float),
            np.asarray(data["post"], dtype=float),
            channels,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed assemblage wiring JSON: {exc}") from exc


def save_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc}") from exc
