"""Command-line interface: ``kae <command> [options]``.

Every failure prints a single line ``kae-error[<code>]: <message>`` to
stderr and exits with status 1 (2 for usage errors).
"""

import argparse
import logging
import os
import sys

import numpy as np

from kae import _backend
from kae.datasets import KINDS, SyntheticSpec, gen_dataset, toy_grid
from kae.errors import KaeError, SpecError
from kae.gradcheck import ABS_FLOOR, FD_STEP, run_grid
from kae.io import atomic_write_text, format_matrix, format_trace, load_matrix, load_model, save_matrix, save_model
from kae.kernels import ScalarKernelSpec, gram
from kae.kpca import k2ae_linear_closed_form, kpca
from kae.layers import LayerSpec
from kae.trainer import (
    TrainConfig,
    encode,
    fit_finite,
    fit_k2ae,
    init_coefficients,
    reconstruct,
    resolve_median_bandwidths,
    test_distortion,
)

MEDIAN = "median"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def parse_kernel(text):
    """``gaussian:<gamma>``, ``gaussian:median``, ``poly:a,b,c`` or ``linear``.

    Returns a :class:`ScalarKernelSpec`, or ``MEDIAN`` for a bandwidth to be
    resolved from the layer's input.
    """
    kind, _, arg = text.strip().partition(":")
    try:
        if kind == "linear" and not arg:
            return ScalarKernelSpec.linear()
        if kind == "gaussian":
            if arg == MEDIAN:
                return MEDIAN
            return ScalarKernelSpec.gaussian(float(arg))
        if kind in ("poly", "polynomial"):
            a, b, c = arg.split(",")
            return ScalarKernelSpec.polynomial(float(a), float(b), int(c))
    except ValueError:
        pass
    raise SpecError(f"cannot parse kernel {text!r}; use gaussian:<gamma>|gaussian:median|poly:a,b,c|linear")


def _per_layer(values, count, what):
    if len(values) == 1:
        return values * count
    if len(values) != count:
        raise SpecError(f"give one {what} or one per layer ({count}), got {len(values)}")
    return values


def _ints(text, what):
    try:
        out = [int(v) for v in text.split(",")]
    except ValueError:
        raise SpecError(f"{what} must be comma-separated integers, got {text!r}") from None
    return out


def _floats(text, what):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise SpecError(f"{what} must be comma-separated numbers, got {text!r}") from None


def _emit(matrix, out):
    if out:
        save_matrix(matrix, out)
    else:
        sys.stdout.write(format_matrix(matrix))


# ---------------------------------------------------------------------------
# commands


def cmd_gen_data(args):
    spec = SyntheticSpec(args.kind, args.n_per_cluster, args.noise, args.clusters, args.seed)
    points, labels = gen_dataset(spec)
    _emit(points, args.out)
    if args.labels:
        atomic_write_text(args.labels, "".join(f"{v}\n" for v in labels))


def build_layers(args, n_layers):
    kernels = _per_layer([parse_kernel(k) for k in args.kernel], n_layers, "kernel")
    lams = _per_layer(_floats(args.lam, "--lambda"), n_layers, "lambda")
    return kernels, lams


def cmd_fit(args):
    config = TrainConfig(
        epochs=args.epochs, step=args.step, decay=args.decay, seed=args.seed,
        init_scale=args.init_scale, init=args.init,
    )
    dims = _ints(args.layers, "--layers")
    if args.mode == "finite":
        if args.data is None:
            raise SpecError("finite mode needs --data")
        X = load_matrix(args.data)
        if dims[-1] != X.shape[1]:
            dims = dims + [X.shape[1]]
        explicit = dims
        n_layers = len(dims)
        source = {"inputs": X}
    else:
        if (args.gram is None) == (args.data is None):
            raise SpecError("k2ae mode needs exactly one of --gram or --data")
        if args.gram is not None:
            k_in = load_matrix(args.gram, gram=True, validate=not args.no_validate)
        else:
            X = load_matrix(args.data)
            k_in = gram(parse_kernel(args.input_kernel), X)
        explicit = dims
        n_layers = len(dims) + 1
        source = {"k_in": k_in}
    kernels, lams = build_layers(args, n_layers)
    all_dims = explicit + [None] * (n_layers - len(explicit))
    placeholder = ScalarKernelSpec.gaussian(1.0)
    layers = [
        LayerSpec(placeholder if k == MEDIAN else k, d, lam)
        for k, d, lam in zip(kernels, all_dims, lams)
    ]
    n = next(iter(source.values())).shape[0]
    coeffs = init_coefficients(config, explicit, n)
    marked = {l for l, k in enumerate(kernels, start=1) if k == MEDIAN}
    if marked:
        layers = resolve_median_bandwidths(layers, coeffs, marked, **source)
    if args.mode == "finite":
        state, trace = fit_finite(source["inputs"], layers, config, coeffs=coeffs)
    else:
        state, trace = fit_k2ae(source["k_in"], layers, config, coeffs=coeffs,
                                validate=args.gram is None or not args.no_validate)
    save_model(state, args.out)
    trace_path = args.trace or os.path.join(os.path.dirname(os.path.abspath(args.out)), "trace.csv")
    atomic_write_text(trace_path, format_trace(trace))
    last = trace[-1]
    print(f"epochs={last.epoch} total={last.total:.10g} distortion={last.distortion:.10g}")


def _kernel_inputs(args, model):
    if args.gram_test is None or args.gram_test_diag is None:
        raise SpecError("a k2ae model needs --gram-test and --gram-test-diag")
    k_cross = load_matrix(args.gram_test)
    k_diag = load_matrix(args.gram_test_diag).reshape(-1)
    return k_cross, k_diag


def cmd_encode(args):
    model = load_model(args.model)
    if hasattr(model, "inner"):
        k_cross, k_diag = _kernel_inputs(args, model)
        codes = encode(model, k_test_train=k_cross, k_test_diag=k_diag)
    else:
        if args.data is None:
            raise SpecError("a finite model needs --data")
        codes = encode(model, load_matrix(args.data))
    _emit(codes, args.out)


def cmd_reconstruct(args):
    model = load_model(args.model, expect="finite")
    _emit(reconstruct(model, load_matrix(args.data)), args.out)


def cmd_test_distortion(args):
    model = load_model(args.model, expect="k2ae")
    k_cross, k_diag = _kernel_inputs(args, model)
    values = test_distortion(model, k_cross, k_diag)
    _emit(values, args.out)
    print(f"mean={float(np.mean(values)):.10g}", file=sys.stderr)


def cmd_kpca(args):
    k = load_matrix(args.gram, gram=True, validate=not args.no_validate)
    if args.closed_form:
        codes, distortion = k2ae_linear_closed_form(k, args.components)
        print(f"distortion={distortion:.17g}", file=sys.stderr)
    else:
        codes = kpca(k, args.components, center=args.center)
    _emit(codes, args.out)


def cmd_gradcheck(args):
    rows = run_grid(seed=args.seed, backend=args.backend, jacobian=not args.no_jacobian)
    worst_g = max(r[1] for r in rows)
    print(f"backend={args.backend or _backend.NAME} cases={len(rows)} step={FD_STEP:g} floor={ABS_FLOOR:g}")
    print(f"max_relative_error_gradient={worst_g:.3e}")
    if not args.no_jacobian:
        print(f"max_relative_error_jacobian={max(r[2] for r in rows):.3e}")


def cmd_toy(args):
    table = toy_grid(args.lam, args.mu, (-args.range, args.range), (-args.range, args.range), args.size)
    text = "phi,psi,value\n" + format_matrix(table)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser():
    p = _Parser(prog="kae", description="Kernel autoencoders over explicit data or Gram tables.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n-per-cluster", type=int, default=50)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--clusters", type=int, default=3)
    g.add_argument("--seed", type=_nonneg_int, default=0)
    g.add_argument("--out", help="points CSV (stdout if omitted)")
    g.add_argument("--labels", help="file receiving one label per line")
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="train a model and write it with its trace")
    f.add_argument("--mode", choices=("finite", "k2ae"), default="finite")
    f.add_argument("--layers", required=True,
                   help="explicit layer dims d1,d2,...; k2ae adds the implicit last layer")
    f.add_argument("--kernel", action="append", default=None,
                   help="gaussian:<gamma>|gaussian:median|poly:a,b,c|linear; once for all layers or once per layer")
    f.add_argument("--lambda", dest="lam", default="0", help="one weight or one per layer, comma-separated")
    f.add_argument("--epochs", type=_nonneg_int, default=100)
    f.add_argument("--step", type=float, default=0.1)
    f.add_argument("--decay", choices=("constant", "inverse-t"), default="constant")
    f.add_argument("--init", choices=("normal", "uniform"), default="normal")
    f.add_argument("--init-scale", type=float, default=1.0)
    f.add_argument("--seed", type=_nonneg_int, default=0)
    f.add_argument("--gram", help="input Gram table (k2ae)")
    f.add_argument("--data", help="input points (finite; k2ae uses --input-kernel on them)")
    f.add_argument("--input-kernel", default="linear", help="kernel giving the k2ae input Gram from --data")
    f.add_argument("--no-validate", action="store_true", help="skip Gram-table checks")
    f.add_argument("--out", required=True, help="model file")
    f.add_argument("--trace", help="trace CSV (default: trace.csv next to the model)")
    f.set_defaults(func=cmd_fit)

    def eval_args(q, data=True):
        q.add_argument("--model", required=True)
        if data:
            q.add_argument("--data", help="points (finite models)")
        q.add_argument("--gram-test", help="test x train inner products (k2ae models)")
        q.add_argument("--gram-test-diag", help="test self inner products, one per line (k2ae models)")
        q.add_argument("--out")

    e = sub.add_parser("encode", help="codes of new points")
    eval_args(e)
    e.set_defaults(func=cmd_encode)

    r = sub.add_parser("reconstruct", help="outputs of a finite model on new points")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    t = sub.add_parser("test-distortion", help="feature-space reconstruction error of new points")
    eval_args(t, data=False)
    t.set_defaults(func=cmd_test_distortion)

    k = sub.add_parser("kpca", help="kernel PCA codes of a Gram table")
    k.add_argument("--gram", required=True)
    k.add_argument("--components", type=int, required=True)
    k.add_argument("--center", action="store_true")
    k.add_argument("--closed-form", action="store_true",
                   help="codes and distortion of the optimal linear 2-layer k2ae instead")
    k.add_argument("--no-validate", action="store_true")
    k.add_argument("--out")
    k.set_defaults(func=cmd_kpca)

    c = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    c.add_argument("--seed", type=_nonneg_int, default=0)
    c.add_argument("--backend", choices=("python", "cython"))
    c.add_argument("--no-jacobian", action="store_true")
    c.set_defaults(func=cmd_gradcheck)

    y = sub.add_parser("toy", help="heatmap grid of the two-parameter toy objective")
    y.add_argument("--lambda", dest="lam", type=float, default=0.1)
    y.add_argument("--mu", type=float, default=0.1)
    y.add_argument("--range", type=float, default=2.0)
    y.add_argument("--size", type=int, default=101)
    y.add_argument("--out")
    y.set_defaults(func=cmd_toy)
    return p


def _one_line(text):
    return " ".join(str(text).split())


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "kernel", "unset") is None:
            args.kernel = ["gaussian:median"]
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except _UsageError as exc:
        print(f"kae-error[usage]: {_one_line(exc)}", file=sys.stderr)
        return 2
    except KaeError as exc:
        print(f"kae-error[{exc.code}]: {_one_line(exc)}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"kae-error[io]: {_one_line(exc)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
