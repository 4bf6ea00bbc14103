"""CSV matrices and the versioned JSON model container.

Matrices are plain comma-separated text, one sample per row, no header,
floats written with 17 significant digits so a save/load round trip is
exact. Every write goes to a temporary file in the target directory that
is then renamed over the destination.
"""

import json
import os
import tempfile

import numpy as np

from kae.errors import ModelFormatError, ParseError, ShapeError
from kae.kernels import validate_gram
from kae.layers import LayerSpec, ModelState
from kae.trainer import K2aeState

MODEL_VERSION = "kae-model/1"


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_matrix(matrix):
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ShapeError(f"expected a matrix, got {M.ndim} dimensions")
    return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in M)


def format_trace(trace):
    """CSV text of a training trace: ``epoch,total,distortion,norm1,...``."""
    width = len(trace[0].norms) if trace else 0
    header = "epoch,total,distortion," + ",".join(f"norm{l}" for l in range(1, width + 1))
    rows = [",".join([str(r.epoch)] + [f"{v:.17g}" for v in r.row()[1:]]) for r in trace]
    return "\n".join([header] + rows) + "\n"


def save_matrix(matrix, path):
    atomic_write_text(path, format_matrix(matrix))


def parse_matrix(text, source="<string>"):
    """Parse CSV text; errors name the 1-based line and column."""
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"{source}: ragged row with {len(fields)} fields, expected {width}", line=lineno)
        row = []
        for col, field in enumerate(fields, start=1):
            try:
                row.append(float(field))
            except ValueError:
                raise ParseError(f"{source}: cannot parse {field.strip()!r} as a number", lineno, col) from None
        rows.append(row)
    if not rows:
        raise ParseError(f"{source}: no data")
    return np.array(rows, dtype=np.float64)


def load_matrix(path, gram=False, validate=True):
    """Read a CSV matrix; ``gram=True`` also checks the Gram-table invariants.

    Raises
    ------
    ParseError
        Malformed or ragged content.
    ValidationError
        ``gram=True`` and the table is not square, symmetric or PSD.
    """
    with open(path, encoding="utf-8") as fh:
        M = parse_matrix(fh.read(), os.fspath(path))
    if gram and validate:
        M = validate_gram(M)
    return M


def _arr(x):
    return None if x is None else np.asarray(x, dtype=np.float64).tolist()


def model_to_dict(state):
    if isinstance(state, K2aeState):
        state.check_fresh()
        inner = state.inner
        return {
            "version": MODEL_VERSION,
            "mode": "k2ae",
            "code_layer": inner.code_layer,
            "layers": [layer.to_dict() for layer in inner.layers] + [state.last.to_dict()],
            "coeffs": [_arr(c) for c in inner.coeffs],
            "reps": [_arr(x) for x in inner.reps[1:]],
            "k_in_diag": _arr(inner.k_in_diag),
            "n_last": _arr(state.n_last),
            "w_inv": _arr(state.w_inv),
        }
    if isinstance(state, ModelState) and state.inputs is not None:
        state.check_fresh()
        return {
            "version": MODEL_VERSION,
            "mode": "finite",
            "code_layer": state.code_layer,
            "layers": [layer.to_dict() for layer in state.layers],
            "coeffs": [_arr(c) for c in state.coeffs],
            "reps": [_arr(x) for x in state.reps],
        }
    raise ModelFormatError(f"cannot serialize {type(state).__name__}")


def save_model(state, path):
    atomic_write_text(path, json.dumps(model_to_dict(state), indent=1) + "\n")


def _matrix(d, key):
    try:
        M = np.array(d[key], dtype=np.float64)
    except KeyError:
        raise ModelFormatError(f"model file lacks the {key!r} section") from None
    except (TypeError, ValueError):
        raise ModelFormatError(f"model section {key!r} is not a numeric array") from None
    if not np.all(np.isfinite(M)):
        raise ModelFormatError(f"model section {key!r} has non-finite entries")
    return M


def _matrices(d, key):
    items = d.get(key)
    if not isinstance(items, list):
        raise ModelFormatError(f"model section {key!r} must be a list")
    return [_matrix({key: v}, key) for v in items]


def model_from_dict(d, expect=None):
    if not isinstance(d, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = d.get("version")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version!r} (expected {MODEL_VERSION})")
    mode = d.get("mode")
    if mode not in ("finite", "k2ae"):
        raise ModelFormatError(f"unknown model mode {mode!r}")
    if expect is not None and mode != expect:
        raise ModelFormatError(f"expected a {expect} model, file holds a {mode} model")
    try:
        layers = [LayerSpec.from_dict(x) for x in d["layers"]]
        code_layer = d.get("code_layer")
        coeffs = _matrices(d, "coeffs")
        reps = _matrices(d, "reps")
        if mode == "finite":
            if len(reps) != len(layers) + 1:
                raise ModelFormatError("finite model needs the inputs and one representation per layer")
            state = ModelState(layers, coeffs, inputs=reps[0], code_layer=code_layer)
            for saved, fresh in zip(reps[1:], state.reps[1:]):
                if saved.shape != fresh.shape or not np.allclose(saved, fresh, rtol=1e-9, atol=1e-12):
                    raise ModelFormatError("saved representations disagree with the coefficients")
            return state
        *inner_layers, last = layers
        inner = ModelState.restore(inner_layers, coeffs, reps, _matrix(d, "k_in_diag"), code_layer)
        return K2aeState.restore(inner, last, _matrix(d, "n_last"), _matrix(d, "w_inv"))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"corrupted model file: {exc}") from None


def load_model(path, expect=None):
    """Load a model saved by :func:`save_model`.

    ``expect`` (``'finite'`` or ``'k2ae'``) rejects files of the other mode.
    A K2AE comes back evaluation-only: it encodes and scores new points but
    cannot be trained further.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{os.fspath(path)}: not a valid model file ({exc.msg}, line {exc.lineno})") from None
    return model_from_dict(d, expect)
