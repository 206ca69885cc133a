"""JSON input formats, CSV output and run manifests.

Every loader raises :class:`InputError` (a validation error) whose message
names the file together with a line/column for syntax problems or a field
path such as ``matrices[1][0]`` for content problems.
"""

import datetime as _dt
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cocycle import CocycleSpec, DrivingSystem
from .jsr import MatrixSet
from .linalg import ValidationError
from .opshift import OperatorFamily, ShiftFinRankOperator

CSV_FORMAT = "%.17g"


class InputError(ValidationError):
    pass


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _need(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise InputError(f"{where}.{key}: expected {kind.__name__ if isinstance(kind, type) else 'a different type'}")
    return val


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _matrix(rows, where, dim=None):
    if not isinstance(rows, list) or not rows:
        raise InputError(f"{where}: expected a non-empty list of rows")
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise InputError(f"{where}[{i}]: expected a row list")
        out.append([_number(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)])
    width = {len(r) for r in out}
    if len(width) != 1:
        raise InputError(f"{where}: ragged rows")
    arr = np.array(out)
    if dim is not None and arr.shape != (dim, dim):
        raise InputError(f"{where}: shape {arr.shape} does not match dim {dim}")
    return arr


def _vector(v, where):
    if not isinstance(v, list):
        raise InputError(f"{where}: expected a list")
    return np.array([_number(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _wrap(path, fn):
    try:
        return fn()
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None
    except ValidationError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# matrix sets


def parse_matrix_set(obj):
    dim = _need(obj, "dim", "$", int)
    mats = _need(obj, "matrices", "$", list)
    if not mats:
        raise InputError("$.matrices: member list is empty")
    members = tuple(_matrix(m, f"$.matrices[{i}]", dim) for i, m in enumerate(mats))
    label = obj.get("label", "")
    if not isinstance(label, str):
        raise InputError("$.label: expected a string")
    return MatrixSet(members, label)


def dump_matrix_set(mset):
    return {"dim": mset.dim, "matrices": [m.tolist() for m in mset.members], "label": mset.label}


def load_matrix_set(path):
    obj = _read_json(path)
    return _wrap(path, lambda: parse_matrix_set(obj))


# ---------------------------------------------------------------------------
# operator families


def parse_operator(obj, where):
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    entries = []
    for i, e in enumerate(obj.get("finite_part", [])):
        loc = f"{where}.finite_part[{i}]"
        if not isinstance(e, list) or len(e) != 3:
            raise InputError(f"{loc}: expected [row, col, value]")
        r, c = e[0], e[1]
        if isinstance(r, bool) or isinstance(c, bool) or not isinstance(r, int) or not isinstance(c, int) or r < 0 or c < 0:
            raise InputError(f"{loc}: row and col must be nonnegative integers")
        entries.append((r, c, _number(e[2], f"{loc}[2]")))
    prefix = _vector(obj.get("diag_prefix", []), f"{where}.diag_prefix")
    w = _number(obj.get("tail_weight", 0.0), f"{where}.tail_weight")
    m = obj.get("shift_power", 0)
    if isinstance(m, bool) or not isinstance(m, int) or m < 0:
        raise InputError(f"{where}.shift_power: expected a nonnegative integer")
    return ShiftFinRankOperator.from_entries(entries, prefix, w, m)


def dump_operator(op):
    return {
        "finite_part": [[r, c, v] for r, c, v in op.entries()],
        "diag_prefix": op.diag_prefix.tolist(),
        "tail_weight": op.tail_weight,
        "shift_power": op.shift_power,
    }


def parse_operator_family(obj):
    members = _need(obj, "members", "$", list)
    if not members:
        raise InputError("$.members: member list is empty")
    ops = tuple(parse_operator(m, f"$.members[{i}]") for i, m in enumerate(members))
    return OperatorFamily(ops, obj.get("label", ""))


def dump_operator_family(fam):
    out = {"members": [dump_operator(m) for m in fam.members]}
    if fam.label:
        out["label"] = fam.label
    return out


def load_operator_family(path):
    obj = _read_json(path)
    return _wrap(path, lambda: parse_operator_family(obj))


# ---------------------------------------------------------------------------
# cocycles


def parse_driver(obj, seed=0):
    kind = _need(obj, "kind", "$.driver", str)
    if kind == "full_shift":
        return DrivingSystem.bernoulli(_vector(_need(obj, "p", "$.driver"), "$.driver.p"), seed)
    if kind == "markov_shift":
        P = _matrix(_need(obj, "P", "$.driver"), "$.driver.P")
        pi = _vector(_need(obj, "stationary", "$.driver"), "$.driver.stationary")
        return DrivingSystem.markov(P, pi, seed)
    if kind == "circle_rotation":
        return DrivingSystem.rotation(_number(_need(obj, "angle", "$.driver"), "$.driver.angle"), seed)
    raise InputError(f"$.driver.kind: unknown driver {kind!r}")


def dump_driver(sys):
    if sys.kind == "full_shift":
        return {"kind": sys.kind, "p": sys.p.tolist()}
    if sys.kind == "markov_shift":
        return {"kind": sys.kind, "P": sys.P.tolist(), "stationary": sys.stationary.tolist()}
    return {"kind": sys.kind, "angle": sys.angle}


def parse_cocycle(obj, seed=0):
    """Returns ``(DrivingSystem, CocycleSpec)``; the seed comes from the caller."""
    dim = _need(obj, "dim", "$", int)
    sys = parse_driver(_need(obj, "driver", "$", dict), seed)
    if ("generators" in obj) == ("fourier" in obj):
        raise InputError("$: give exactly one of 'generators' or 'fourier'")
    if "generators" in obj:
        gens = _need(obj, "generators", "$", dict)
        parsed = {}
        for key, m in gens.items():
            if not key.isdigit():
                raise InputError(f"$.generators: symbol key {key!r} is not a nonnegative integer")
            parsed[int(key)] = _matrix(m, f"$.generators.{key}", dim)
        coc = CocycleSpec(dim, generators=parsed)
    else:
        four = _need(obj, "fourier", "$", dict)
        spec = {"const": _matrix(_need(four, "const", "$.fourier"), "$.fourier.const", dim)}
        for part in ("cos", "sin"):
            terms = four.get(part, [])
            if not isinstance(terms, list):
                raise InputError(f"$.fourier.{part}: expected a list of matrices")
            spec[part] = [_matrix(m, f"$.fourier.{part}[{i}]", dim) for i, m in enumerate(terms)]
        coc = CocycleSpec(dim, fourier=spec)
    if coc.generators is not None:
        missing = set(range(sys.n_symbols)) - set(coc.generators)
        if sys.kind == "circle_rotation" or missing:
            raise InputError("$.generators: driver symbols and generator keys do not match")
    elif sys.kind != "circle_rotation":
        raise InputError("$.fourier: a fourier cocycle needs a circle_rotation driver")
    return sys, coc


def dump_cocycle(sys, coc):
    out = {"driver": dump_driver(sys), "dim": coc.dim}
    if coc.generators is not None:
        out["generators"] = {str(k): v.tolist() for k, v in sorted(coc.generators.items())}
    else:
        out["fourier"] = {
            "const": coc.fourier["const"].tolist(),
            "cos": [m.tolist() for m in coc.fourier["cos"]],
            "sin": [m.tolist() for m in coc.fourier["sin"]],
        }
    return out


def load_cocycle(path, seed=0):
    obj = _read_json(path)
    return _wrap(path, lambda: parse_cocycle(obj, seed))


def dumps(obj):
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------------------
# output


def atomic_write(path, text):
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
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


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return CSV_FORMAT % float(v)


def csv_text(columns):
    """Header row plus one line per entry; floats keep 17 significant digits."""
    names = list(columns)
    cols = [list(columns[k]) for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns have differing lengths {sorted(lengths)}")
    lines = [",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns):
    atomic_write(path, csv_text(columns))


def read_csv(path):
    """Column dict of float arrays (numeric files only)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def content_hash(path):
    """64-bit BLAKE2b digest of the file bytes, as 16 hex digits."""
    return hashlib.blake2b(Path(path).read_bytes(), digest_size=8).hexdigest()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    input_hash: str
    seed: int = None
    parameters: dict = field(default_factory=dict)
    tool_version: str = ""
    started: str = field(default_factory=_now)
    finished: str = ""
    outputs: list = field(default_factory=list)

    def finish(self):
        self.finished = _now()
        return self

    def write(self, path):
        atomic_write(path, json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True, allow_nan=False) + "\n")
