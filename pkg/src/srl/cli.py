"""``srl`` command-line front end.

Every subcommand writes CSV files plus a ``<name>.manifest.json`` sidecar
into ``--out``.  Exit codes: 0 success, 2 invalid input or arguments,
3 budget exhausted before the requested length (partial results are still
written).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, cocycle, extend, io, jsr, opshift
from .linalg import ValidationError

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse already exits with 2 on usage errors; keep the message terse
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _parse_sequence(text):
    """``linear:LAM[,C]``, ``neg_square`` or ``min_linear:L1,C1,L2,C2``."""
    name, _, rest = text.partition(":")
    args = [float(v) for v in rest.split(",")] if rest else []
    try:
        if name == "linear" and len(args) in (1, 2):
            return extend.SubadditiveSequence.linear(*args)
        if name == "neg_square" and not args:
            return extend.SubadditiveSequence.neg_square()
        if name == "min_linear" and len(args) == 4:
            return extend.SubadditiveSequence.min_linear(*args)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    raise argparse.ArgumentTypeError(f"unrecognised sequence {text!r}")


class _Run:
    """Collects outputs for one invocation and writes the manifest."""

    def __init__(self, args, name, input_path, seed=None):
        self.out = Path(args.out)
        self.name = name
        params = {k: v for k, v in vars(args).items() if k not in ("func", "out") and not k.startswith("_")}
        params = {k: (str(v) if isinstance(v, (Path, extend.SubadditiveSequence)) else v) for k, v in params.items()}
        if isinstance(args.__dict__.get("sequence"), extend.SubadditiveSequence):
            params["sequence"] = args.sequence.label()
        self.manifest = io.RunManifest(
            command=name.replace("_", " "),
            input_hash=io.content_hash(input_path) if input_path else "",
            seed=seed,
            parameters=params,
            tool_version=__version__,
        )

    def csv(self, stem, columns):
        path = self.out / f"{stem}.csv"
        io.write_csv(path, columns)
        self.manifest.outputs.append(path.name)
        return path

    def close(self, **extra):
        self.manifest.parameters.update(extra)
        self.manifest.finish().write(self.out / f"{self.name}.manifest.json")


def _maybe_normalize(mset, args):
    if getattr(args, "normalize", False):
        mset, factor = jsr.rescale_by_norm(mset)
        return mset, factor
    return mset, 1.0


# ---------------------------------------------------------------------------
# handlers


def cmd_jsr_bounds(args):
    mset, factor = _maybe_normalize(io.load_matrix_set(args.input), args)
    up = jsr.norm_upper_bound(mset, args.max_len, args.budget)
    lo = jsr.gelfand_lower_bound(mset, args.max_len, args.budget)
    run = _Run(args, "jsr_bounds", args.input)
    run.csv("jsr_bounds", {
        "n": up.n,
        "norm_sup": up.values,
        "upper": up.running,
        "gelfand_max": lo.values,
        "lower": lo.running,
    })
    run.close(scale_factor=factor, complete=up.complete)
    if up.n.size:
        print(f"after n={up.n[-1]}: {lo.running[-1]:.12g} <= jsr <= {up.running[-1]:.12g}")
    return EXIT_OK if up.complete else EXIT_BUDGET


def cmd_jsr_bw_report(args):
    mset, factor = _maybe_normalize(io.load_matrix_set(args.input), args)
    rep = jsr.bw_report(mset, args.max_len, args.budget)
    run = _Run(args, "jsr_bw_report", args.input)
    run.csv("bw_report", rep.columns())
    run.close(scale_factor=factor, complete=rep.complete)
    if rep.n.size:
        print(f"n={rep.n[-1]} lower={rep.lower[-1]:.12g} upper={rep.upper[-1]:.12g} gap={rep.gap[-1]:.3g}")
    return EXIT_OK if rep.complete else EXIT_BUDGET


def cmd_jsr_gripenberg(args):
    mset, factor = _maybe_normalize(io.load_matrix_set(args.input), args)
    res = jsr.gripenberg_bounds(mset, args.delta, args.budget)
    run = _Run(args, "jsr_gripenberg", args.input)
    run.csv("gripenberg", {
        "lower": [res.lower],
        "upper": [res.upper],
        "width": [res.width],
        "depth": [res.depth],
        "evaluated": [res.evaluated],
        "complete": [res.complete],
    })
    run.close(scale_factor=factor, lower_word=list(res.lower_word))
    print(f"[{res.lower:.12g}, {res.upper:.12g}] depth={res.depth} evaluated={res.evaluated}")
    return EXIT_OK if res.complete else EXIT_BUDGET


def cmd_op_radii(args):
    fam = io.load_operator_family(args.input)
    rep = opshift.family_radii(fam, args.max_len, args.budget)
    run = _Run(args, "op_radii", args.input)
    run.csv("op_radii", rep.columns())
    notes = {k: (v if not isinstance(v, (np.floating, np.bool_)) else v.item()) for k, v in rep.notes.items()}
    run.close(rho_chi=rep.rho_chi, rho_f=rep.rho_f, complete=rep.complete, **notes)
    if rep.n.size:
        print(f"rho_hat~{rep.rho_hat:.12g} rho_chi={rep.rho_chi:.12g} rho_r~{rep.rho_r:.12g}")
    return EXIT_OK if rep.complete else EXIT_BUDGET


def cmd_extend_verify_alpha(args):
    alpha = extend.AlphaSequence(args.beta)
    chk = extend.verify_alpha_property(args.sequence, args.max_len, alpha)
    run = _Run(args, "extend_verify_alpha", None)
    run.csv("verify_alpha", {
        "sequence": [chk.sequence],
        "n": [chk.n],
        "direct": [chk.direct],
        "alpha_formula": [chk.alpha_formula],
        "difference": [chk.difference],
        "argmax_k": [chk.argmax_k],
        "divergent": [chk.divergent],
        "passed": [chk.passed],
    })
    run.close(passed=chk.passed)
    print(f"{chk.sequence}: direct={chk.direct:.6g} formula={chk.alpha_formula:.6g} passed={chk.passed}")
    return EXIT_OK


def cmd_extend_radii(args):
    mset = io.load_matrix_set(args.input)
    base, ext = extend.extended_radii(mset, args.max_len, extend.AlphaSequence(args.beta), args.budget)
    cols = base.columns()
    cols["ext_norm_sup"] = ext.norm_sup
    cols["ext_upper"] = ext.upper
    run = _Run(args, "extend_radii", args.input)
    run.csv("extend_radii", cols)
    run.close(complete=base.complete, **ext.notes)
    return EXIT_OK if base.complete else EXIT_BUDGET


def _seed_list(args):
    if args.seed is None and args.seeds is None:
        raise ValidationError("stochastic subcommands need --seed or --seeds")
    start = args.seed if args.seed is not None else 0
    count = args.seeds if args.seeds is not None else 1
    if start + count > 2**64:
        raise ValidationError("seed range exceeds 2^64")
    return list(range(start, start + count))


def _cocycle_run(args, name, work):
    seeds = _seed_list(args)
    sysd, coc = io.load_cocycle(args.spec, seeds[0])
    run = _Run(args, name, args.spec, seed=seeds[0])
    summary = []
    for s in seeds:
        rep = work(sysd.with_seed(s), coc)
        run.csv(f"{name}_seed{s}", rep.columns())
        row = {
            "seed": s,
            "lambda_top_hat": rep.lambda_top_hat,
            "lambda_spectrum_hat": rep.lambda_spectrum_hat.tolist(),
            "rho_limsup_hat": rep.rho_limsup_hat,
            "gap": rep.gap,
        }
        if rep.cone_returns is not None:
            row.update(cone_returns=rep.cone_returns, recurrence_liminf=rep.recurrence_liminf, **rep.notes)
        summary.append(row)
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items() if k != "lambda_spectrum_hat"))
    run.close(seeds=seeds, summary=summary)
    return EXIT_OK


def cmd_cocycle_lyapunov(args):
    return _cocycle_run(args, "cocycle_lyapunov", lambda s, c: cocycle.lyapunov_estimates(s, c, args.steps))


def cmd_cocycle_cohen(args):
    return _cocycle_run(args, "cocycle_cohen", lambda s, c: cocycle.cohen_gap(s, c, args.steps))


def _splitting_report(sysd, coc, args):
    n, h = args.steps, args.horizon
    orb = cocycle.Orbit(sysd, coc, n + h, past=h)
    rep = cocycle.cohen_gap(sysd, coc, n, orbit=orb)
    est = cocycle.oseledets_splitting_2d(sysd, coc, 0, h, orbit=orb)
    cone = cocycle.cone_check(sysd, coc, 0, args.delta_cone, n, h, orbit=orb)
    rec = cocycle.recurrence_liminf(sysd, coc, 0, n, h, orbit=orb)
    rep.cone_returns, rep.cone_flags = cone.returns, cone.flags
    rep.recurrence_liminf, rep.recurrence_track = rec.value, rec.track
    rep.notes.update(
        recurrence_n=rec.n_at,
        growth_exponent=cone.growth_exponent,
        split_gap=est.gap,
        equivariance_residual=max(est.residuals.values()),
    )
    return rep


def cmd_cocycle_splitting(args):
    return _cocycle_run(args, "cocycle_splitting", lambda s, c: _splitting_report(s, c, args))


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = _Parser(prog="srl", description="Spectral radius and Lyapunov experiments.")
    p.add_argument("--version", action="version", version=f"srl {__version__}")
    groups = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def leaf(sub, name, func, help_):
        q = sub.add_parser(name, help=help_)
        q.add_argument("--out", type=Path, default=Path("."), help="output directory")
        q.set_defaults(func=func)
        return q

    def matrix_input(q, max_len):
        q.add_argument("--input", type=Path, required=True, help="matrix set JSON")
        q.add_argument("--max-len", type=_positive_int, default=max_len)
        q.add_argument("--budget", type=_positive_int, default=jsr.DEFAULT_NODE_BUDGET)

    js = groups.add_parser("jsr", help="finite matrix sets").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func, help_ in (
        ("bounds", cmd_jsr_bounds, "exhaustive upper and lower bounds"),
        ("bw-report", cmd_jsr_bw_report, "both bounds with the gap column"),
    ):
        q = leaf(js, name, func, help_)
        matrix_input(q, 8)
        q.add_argument("--normalize", action="store_true", help="divide by the largest member norm first")
    q = leaf(js, "gripenberg", cmd_jsr_gripenberg, "branch-and-bound enclosure")
    q.add_argument("--input", type=Path, required=True)
    q.add_argument("--delta", type=_positive_float, default=0.01)
    q.add_argument("--budget", type=_positive_int, default=1_000_000)
    q.add_argument("--normalize", action="store_true")

    op = groups.add_parser("op", help="shift-plus-finite-rank operators").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(op, "radii", cmd_op_radii, "radii columns for an operator family")
    q.add_argument("--input", type=Path, required=True, help="operator family JSON")
    q.add_argument("--max-len", type=_positive_int, default=8)
    q.add_argument("--budget", type=_positive_int, default=jsr.DEFAULT_NODE_BUDGET)

    ex = groups.add_parser("extend", help="injective extension").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    q = leaf(ex, "verify-alpha", cmd_extend_verify_alpha, "check the weight sequence against a subadditive sequence")
    q.add_argument("--sequence", type=_parse_sequence, required=True, help="linear:LAM[,C] | neg_square | min_linear:L1,C1,L2,C2")
    q.add_argument("--max-len", type=_positive_int, default=10_000)
    q.add_argument("--beta", type=_positive_float, default=1.0)
    q = leaf(ex, "radii", cmd_extend_radii, "radii of the extended set next to the base")
    matrix_input(q, 8)
    q.add_argument("--beta", type=_positive_float, default=1.0)

    co = groups.add_parser("cocycle", help="linear cocycles").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func, help_ in (
        ("lyapunov", cmd_cocycle_lyapunov, "Lyapunov exponent estimates"),
        ("cohen", cmd_cocycle_cohen, "norm growth versus spectral-radius growth"),
        ("splitting", cmd_cocycle_splitting, "2-D splitting, recurrence and cone returns"),
    ):
        q = leaf(co, name, func, help_)
        q.add_argument("--spec", type=Path, required=True, help="cocycle spec JSON")
        q.add_argument("--steps", type=_positive_int, default=10_000)
        q.add_argument("--seed", type=_seed, default=None)
        q.add_argument("--seeds", type=_positive_int, default=None, help="number of consecutive seeds")
        if name == "splitting":
            q.add_argument("--horizon", type=_positive_int, default=50)
            q.add_argument("--delta-cone", type=_positive_float, default=1.0)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, cocycle.SplittingError) as exc:
        print(f"srl: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
