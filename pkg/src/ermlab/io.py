"""JSON documents for classes and nested problems, CSV tables, atomic file writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .classes import DiscreteMeasure, FunctionClass, JointDistribution, LossSpec
from .complexity import CURVE_COLUMNS, ComplexityCurve
from .errors import ErmlabError


class SchemaError(ErmlabError, ValueError):
    pass


def _load_doc(doc_or_path):
    if isinstance(doc_or_path, dict):
        return doc_or_path
    with open(doc_or_path) as fh:
        return json.load(fh)


def _need(doc, key, where="document"):
    if key not in doc:
        raise SchemaError(f"{where} is missing required key {key!r}")
    return doc[key]


def load_problem(doc_or_path):
    """``{"atoms", "probs", "classes": [{"label", "members"}]}`` -> (measure, classes)."""
    doc = _load_doc(doc_or_path)
    m = int(_need(doc, "atoms"))
    probs = _need(doc, "probs")
    if len(probs) != m:
        raise SchemaError(f"probs has {len(probs)} entries, atoms = {m}")
    P = DiscreteMeasure(probs)
    classes = []
    for i, c in enumerate(_need(doc, "classes")):
        members = _need(c, "members", f"classes[{i}]")
        for j, f in enumerate(members):
            if len(f) != m:
                raise SchemaError(f"classes[{i}].members[{j}] has {len(f)} values, atoms = {m}")
        classes.append(FunctionClass(members, label=c.get("label", f"class{i}")))
    return P, classes


def _floats(a):
    return [float(v) for v in np.asarray(a).ravel()]


def problem_doc(P: DiscreteMeasure, classes) -> dict:
    return {
        "atoms": P.atom_count,
        "probs": _floats(P.probs),
        "classes": [{"label": F.label, "members": [_floats(row) for row in F.matrix]} for F in classes],
    }


def dump_problem(P: DiscreteMeasure, classes) -> str:
    """Serialize with keys in the fixed order atoms, probs, classes."""
    return json.dumps(problem_doc(P, classes), indent=2) + "\n"


def load_nested(doc_or_path):
    """Nested-problem document: the class document plus loss, joint and eps.

    ``probs`` is the covariate marginal and must agree with ``joint``.
    Returns a validated NestedProblem.
    """
    from .selection import make_nested

    doc = _load_doc(doc_or_path)
    loss_doc = _need(doc, "loss")
    loss = LossSpec(_need(loss_doc, "predictions", "loss"), _need(loss_doc, "responses", "loss"),
                    _need(loss_doc, "table", "loss"))
    joint = JointDistribution.from_pairs([tuple(p) for p in _need(doc, "joint")])
    m = int(_need(doc, "atoms"))
    marginal = np.bincount(joint.x, weights=joint.probs, minlength=m)
    if "probs" in doc and np.max(np.abs(marginal - np.asarray(doc["probs"], dtype=float))) > 1e-12:
        raise SchemaError("probs does not match the x-marginal of joint")
    classes = []
    for i, c in enumerate(_need(doc, "classes")):
        classes.append(FunctionClass(_need(c, "members", f"classes[{i}]"), label=c.get("label", f"F{i + 1}")))
    return make_nested(classes, loss, joint, _need(doc, "eps"))


def nested_doc(problem) -> dict:
    j = problem.joint
    m = max(F.atom_count for F in problem.classes)
    marginal = np.bincount(j.x, weights=j.probs, minlength=m)
    return {
        "atoms": m,
        "probs": _floats(marginal),
        "classes": [{"label": F.label, "members": [_floats(r) for r in F.matrix]} for F in problem.classes],
        "loss": {"predictions": _floats(problem.loss.predictions),
                 "responses": _floats(problem.loss.responses),
                 "table": [_floats(r) for r in problem.loss.table]},
        "joint": [[int(x), float(y), float(p)] for x, y, p in zip(j.x, j.y, j.probs)],
        "eps": _floats(problem.eps),
    }


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def write_curve_csv(path, curve) -> Path:
    return write_csv(path, CURVE_COLUMNS, curve.rows())


def read_curve_csv(path) -> ComplexityCurve:
    """Load a curve written by :func:`write_curve_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CURVE_COLUMNS:
            raise SchemaError(f"curve CSV must have header {','.join(CURVE_COLUMNS)}; got {header}")
        rows = list(reader)
    if not rows:
        raise SchemaError("curve CSV has no rows")
    try:
        r = [float(row[0]) for row in rows]
        v = [float(row[1]) for row in rows]
        se = [float(row[2]) for row in rows]
        K, n, kind = int(rows[0][3]), int(rows[0][4]), rows[0][5]
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"malformed curve row: {exc}") from None
    return ComplexityCurve(r, v, se, K, n, kind)


def json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.generic):
        return _clean(o.item())
    return o


def dumps_report(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, default=json_default) + "\n"
