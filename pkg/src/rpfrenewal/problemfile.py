"""Problem-file ingestion and JSON/CSV emission for the CLI.

Documents are validated structurally before construction; violations raise
SchemaError carrying a JSON pointer to the offending key.  Unknown keys are
rejected everywhere.  Floats are emitted with 17 significant digits so that
all outputs round-trip bit-faithfully.
"""

import json
import math

from .errors import SchemaError
from .potential import LocallyConstantPotential
from .renewal import FFamily, RenewalProblem
from .symbolic import Subshift
from .timefunc import TimeFunction


def _ptr(*parts):
    return "/" + "/".join(str(p) for p in parts)


def _expect_object(value, ptr, required, optional=()):
    if not isinstance(value, dict):
        raise SchemaError(ptr, f"expected an object, got {type(value).__name__}")
    for key in required:
        if key not in value:
            raise SchemaError(ptr, f"missing required key {key!r}")
    allowed = set(required) | set(optional)
    for key in value:
        if key not in allowed:
            raise SchemaError(_ptr(ptr.strip("/"), key) if ptr != "/" else _ptr(key),
                              "unknown key")
    return value


def _expect_list(value, ptr):
    if not isinstance(value, list):
        raise SchemaError(ptr, f"expected an array, got {type(value).__name__}")
    return value


def _expect_number(value, ptr):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(ptr, f"expected a number, got {type(value).__name__}")
    return float(value)


def _expect_int(value, ptr):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(ptr, f"expected an integer, got {type(value).__name__}")
    return value


def word_key(word):
    """Word as a string key: digits joined, comma-separated beyond 9 letters."""
    if all(1 <= c <= 9 for c in word):
        return "".join(str(c) for c in word)
    return ",".join(str(c) for c in word)


def parse_word_key(key, ptr):
    try:
        if "," in key:
            return tuple(int(c) for c in key.split(","))
        return tuple(int(c) for c in key)
    except ValueError:
        raise SchemaError(ptr, f"cannot parse word key {key!r}") from None


def parse_shift(obj, ptr="/shift"):
    _expect_object(obj, ptr, required=("M", "A"))
    M = _expect_int(obj["M"], ptr + "/M")
    A = _expect_list(obj["A"], ptr + "/A")
    for i, row in enumerate(A):
        _expect_list(row, f"{ptr}/A/{i}")
        for j, v in enumerate(row):
            if v not in (0, 1) or isinstance(v, bool):
                raise SchemaError(f"{ptr}/A/{i}/{j}", "entries must be 0 or 1")
    try:
        return Subshift(M, A)
    except Exception as exc:
        raise SchemaError(ptr, str(exc)) from None


def parse_potential(obj, shift, ptr):
    _expect_object(obj, ptr, required=("depth", "values"))
    depth = _expect_int(obj["depth"], ptr + "/depth")
    values = obj["values"]
    if not isinstance(values, dict):
        raise SchemaError(ptr + "/values", "expected an object of word -> value")
    table = {}
    for key, v in values.items():
        kp = f"{ptr}/values/{key}"
        table[parse_word_key(key, kp)] = _expect_number(v, kp)
    try:
        return LocallyConstantPotential(shift, depth, table)
    except Exception as exc:
        raise SchemaError(ptr, str(exc)) from None


def parse_timefunction(obj, ptr):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SchemaError(ptr, "time function needs a 'kind' key")
    kind = obj["kind"]
    try:
        if kind == "pieces":
            _expect_object(obj, ptr, required=("kind", "breaks", "pieces"),
                           optional=("lower_exp", "upper_exp"))
            breaks = [_expect_number(b, f"{ptr}/breaks/{i}")
                      for i, b in enumerate(_expect_list(obj["breaks"], ptr + "/breaks"))]
            pieces = []
            for i, terms in enumerate(_expect_list(obj["pieces"], ptr + "/pieces")):
                _expect_list(terms, f"{ptr}/pieces/{i}")
                pieces.append([tuple(term) for term in terms])
            kw = {}
            for side in ("lower_exp", "upper_exp"):
                if side in obj:
                    pair = _expect_list(obj[side], f"{ptr}/{side}")
                    if len(pair) != 2:
                        raise SchemaError(f"{ptr}/{side}", "expected [C, rate]")
                    kw[side] = (float(pair[0]), float(pair[1]))
            return TimeFunction.from_pieces(breaks, pieces, **kw)
        if kind == "grid":
            _expect_object(obj, ptr, required=("kind", "t0", "dt", "values"))
            return TimeFunction.from_grid(
                _expect_number(obj["t0"], ptr + "/t0"),
                _expect_number(obj["dt"], ptr + "/dt"),
                [_expect_number(v, f"{ptr}/values/{i}")
                 for i, v in enumerate(_expect_list(obj["values"], ptr + "/values"))],
            )
        if kind == "step":
            _expect_object(obj, ptr, required=("kind",), optional=("at",))
            return TimeFunction.step(float(obj.get("at", 0.0)))
        if kind == "box":
            _expect_object(obj, ptr, required=("kind", "a", "b"))
            return TimeFunction.box(float(obj["a"]), float(obj["b"]))
        if kind == "builtin":
            _expect_object(obj, ptr, required=("kind", "name"))
            if obj["name"] == "gasket":
                from .geometry import sierpinski_tube_function

                return sierpinski_tube_function()
            raise SchemaError(ptr + "/name", f"unknown builtin {obj['name']!r}")
    except SchemaError:
        raise
    except Exception as exc:
        raise SchemaError(ptr, str(exc)) from None
    raise SchemaError(ptr + "/kind", f"unknown time-function kind {kind!r}")


def parse_ffamily(obj, shift, ptr="/f_family"):
    if not isinstance(obj, dict):
        raise SchemaError(ptr, "expected an object")
    if "shared" in obj:
        _expect_object(obj, ptr, required=("shared",))
        return FFamily.shared(shift, parse_timefunction(obj["shared"], ptr + "/shared"))
    _expect_object(obj, ptr, required=("depth", "functions"))
    depth = _expect_int(obj["depth"], ptr + "/depth")
    functions = obj["functions"]
    if not isinstance(functions, dict):
        raise SchemaError(ptr + "/functions", "expected an object of word -> function")
    fns = {}
    seen = {}
    for key, sub in functions.items():
        kp = f"{ptr}/functions/{key}"
        marker = json.dumps(sub, sort_keys=True)
        if marker not in seen:
            seen[marker] = parse_timefunction(sub, kp)
        fns[parse_word_key(key, kp)] = seen[marker]
    try:
        return FFamily(shift, depth, fns)
    except Exception as exc:
        raise SchemaError(ptr, str(exc)) from None


_OPTION_KEYS = ("tol", "qtol", "depth", "seed", "n_paths", "n_max", "t")


def parse_problem(doc):
    """Full problem document -> (RenewalProblem, options dict)."""
    _expect_object(doc, "/", required=("shift", "potentials", "f_family", "x_head"),
                   optional=("options",))
    shift = parse_shift(doc["shift"])
    pots = doc["potentials"]
    _expect_object(pots, "/potentials", required=("eta", "xi"),
                   optional=("chi", "psi", "zeta"))
    eta = parse_potential(pots["eta"], shift, "/potentials/eta")
    xi = parse_potential(pots["xi"], shift, "/potentials/xi")
    chi = (parse_potential(pots["chi"], shift, "/potentials/chi")
           if "chi" in pots else LocallyConstantPotential.constant(shift, 1.0))
    psi = parse_potential(pots["psi"], shift, "/potentials/psi") if "psi" in pots else None
    zeta = parse_potential(pots["zeta"], shift, "/potentials/zeta") if "zeta" in pots else None
    fam = parse_ffamily(doc["f_family"], shift)
    x_head = _expect_list(doc["x_head"], "/x_head")
    x_head = tuple(_expect_int(c, f"/x_head/{i}") for i, c in enumerate(x_head))
    options = {}
    if "options" in doc:
        _expect_object(doc["options"], "/options", required=(), optional=_OPTION_KEYS)
        options = dict(doc["options"])
    try:
        problem = RenewalProblem(shift, eta, xi, chi, fam, x_head, zeta=zeta, psi=psi)
    except SchemaError:
        raise
    except Exception as exc:
        raise SchemaError("/", str(exc)) from None
    return problem, options


def parse_key_spec(doc):
    from .classical import KeyRenewalSpec

    _expect_object(doc, "/", required=("p", "s", "z"))
    p = [_expect_number(v, f"/p/{i}") for i, v in enumerate(_expect_list(doc["p"], "/p"))]
    s = [_expect_number(v, f"/s/{i}") for i, v in enumerate(_expect_list(doc["s"], "/s"))]
    z = parse_timefunction(doc["z"], "/z")
    try:
        return KeyRenewalSpec(tuple(p), tuple(s), z)
    except Exception as exc:
        raise SchemaError("/", str(exc)) from None


def parse_markov_spec(doc):
    from .classical import MarkovRenewalSpec

    _expect_object(doc, "/", required=("M", "transitions", "f"))
    M = _expect_int(doc["M"], "/M")
    trans = doc["transitions"]
    if not isinstance(trans, dict):
        raise SchemaError("/transitions", "expected an object of pair -> {eta, xi}")
    table = {}
    for key, sub in trans.items():
        kp = f"/transitions/{key}"
        pair = parse_word_key(key, kp)
        if len(pair) != 2:
            raise SchemaError(kp, "transition keys are two-letter words (j, i)")
        _expect_object(sub, kp, required=("eta", "xi"))
        table[pair] = (_expect_number(sub["eta"], kp + "/eta"),
                       _expect_number(sub["xi"], kp + "/xi"))
    fobj = doc["f"]
    if not isinstance(fobj, dict):
        raise SchemaError("/f", "expected an object of state -> time function")
    f = {}
    for key, sub in fobj.items():
        kp = f"/f/{key}"
        try:
            state = int(key)
        except ValueError:
            raise SchemaError(kp, "state keys are integers") from None
        f[state] = parse_timefunction(sub, kp)
    try:
        return MarkovRenewalSpec(M, table, f)
    except Exception as exc:
        raise SchemaError("/", str(exc)) from None


# ---------------------------------------------------------------------------
# emission


def format_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "1e999" if x > 0 else "-1e999"
    return f"{x:.17g}"


def dumps(obj, indent=0):
    """JSON with floats at 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {dumps(v, indent + 2).lstrip()}'
            for k, v in obj.items()
        )
        return f"{pad}{{\n{items}\n{pad}}}" if obj else pad + "{}"
    if isinstance(obj, (list, tuple)):
        items = ", ".join(dumps(v, 0) for v in obj)
        return f"{pad}[{items}]"
    if isinstance(obj, bool) or obj is None:
        return pad + json.dumps(obj)
    if isinstance(obj, float):
        return pad + format_float(obj)
    if isinstance(obj, (int, str)):
        return pad + json.dumps(obj)
    import numpy as np

    if isinstance(obj, np.floating):
        return pad + format_float(float(obj))
    if isinstance(obj, np.integer):
        return pad + str(int(obj))
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv(rows, header, out):
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(
            format_float(v) if isinstance(v, float) else str(v) for v in row
        ) + "\n")
