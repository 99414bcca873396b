"""Command-line front end: ``ffmarkov design|matrix|basis|fiber|test``.

Exit codes: 0 success, 2 bad input, 3 failed certification, 4 numerical
failure (GLM non-convergence, fiber cap, chain that cannot mix).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import fiber as fib
from .design import DesignError, alias_table, classify_clear, generate_runs, parse_design_spec
from .markov import (
    MarkovBasis,
    certify,
    classify_indispensable,
    compute_markov_basis,
    degree_census,
    reduce_to_minimal,
)
from .mcmc import ChainConfig, ChainError, GlmError, exact_p_value, fit_poisson_glm, mh_run
from .model import build_covariate_matrix, parse_model_spec, sufficient_statistic

log = logging.getLogger("ffmarkov")

EXIT_OK, EXIT_INPUT, EXIT_CERTIFY, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(Exception):
    pass


class CertificationError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    design: str | None = None
    model: str | None = None
    data: str | None = None
    options: dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    seed: int = 0


# -- inputs ----------------------------------------------------------------

def bundled(kind: str) -> list[str]:
    """Names of bundled fixtures of one kind (``designs``, ``models``, ``counts``)."""
    root = resources.files("ffmarkov") / "data" / kind
    out = []

    def walk(node, prefix):
        for child in sorted(node.iterdir(), key=lambda c: c.name):
            if child.is_dir():
                walk(child, prefix + child.name + "/")
            else:
                out.append(prefix + child.name)

    walk(root, "")
    return out


def read_input(value: str, kind: str) -> str:
    """Contents of a file path, or of a bundled fixture with that name."""
    path = Path(value)
    if path.is_file():
        return path.read_text()
    root = resources.files("ffmarkov") / "data" / kind
    for name in (value, value + ".txt", value + ".csv"):
        node = root.joinpath(*name.split("/"))
        if node.is_file():
            return node.read_text()
    raise InputError(f"{kind[:-1]} file not found: {value}")


def load_model_text(value: str) -> str:
    """A model file, a bundled model, or inline text such as ``main: all``."""
    try:
        return read_input(value, "models")
    except InputError:
        if ":" in value:
            return value
        raise


def read_counts(text: str, k: int) -> np.ndarray:
    """Counts from CSV: one row per run, the count in the last column."""
    values = []
    for row in csv.reader(io.StringIO(text)):
        row = [c.strip() for c in row if c.strip()]
        if not row or row[0].startswith("#"):
            continue
        try:
            values.append(int(row[-1]))
        except ValueError:
            if values:
                raise InputError(f"non-integer count {row[-1]!r}") from None
            continue  # header
    y = np.array(values, dtype=np.int64)
    if len(y) != k:
        raise InputError(f"data has {len(y)} counts but the design has {k} runs")
    if (y < 0).any():
        raise InputError("counts must be nonnegative")
    return y


def _setup(args):
    design = generate_runs(parse_design_spec(read_input(args.spec, "designs")))
    model = parse_model_spec(load_model_text(args.model), design) if getattr(args, "model", None) else None
    return design, model


def _labels(design) -> tuple[str, ...]:
    return tuple("y" + design.cell_label(i) for i in range(design.k))


# -- output ----------------------------------------------------------------

def _emit(args, payload: dict, table: list[list] | None, text: str, manifest: RunManifest) -> None:
    fmt = args.output
    if fmt == "json":
        payload = {"manifest": asdict(manifest), **payload}
        sys.stdout.write(json.dumps(payload, indent=1, sort_keys=True, default=_jsonable) + "\n")
    elif fmt == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        for row in table or []:
            w.writerow(row)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _manifest(args, **paths) -> RunManifest:
    skip = {"func", "output", "seed", "command", "spec", "model", "data", "verbose"}
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return RunManifest(command=args.command, options=opts, seed=args.seed, **paths)


# -- commands --------------------------------------------------------------

def cmd_design(args) -> int:
    design, _ = _setup(args)
    spec = design.spec
    names = spec.names
    aliases = alias_table(spec, args.max_length)
    clear = classify_clear(spec).as_dict(names)
    payload = {"factors": list(names), "runs": [list(r) for r in design.runs],
               "aliases": aliases, "clear": clear}
    table = [["run", *names]] + [[i + 1, *r] for i, r in enumerate(design.runs)]
    lines = ["run  " + " ".join(names)]
    lines += [f"{i + 1:>3}  " + " ".join(str(v) for v in r) for i, r in enumerate(design.runs)]
    if args.aliases or not args.runs_only:
        lines += ["", "aliases:"] + ["  " + a for a in aliases]
        lines += ["", "clear components: " + (", ".join(clear["clear_components"]) or "none"),
                  "clear two-factor interactions: " + (", ".join(clear["clear_interactions"]) or "none")]
    if args.aliases and args.output == "csv":
        table = [[a] for a in aliases]
    _emit(args, payload, table, "\n".join(lines), _manifest(args, design=args.spec))
    return EXIT_OK


def cmd_matrix(args) -> int:
    design, model = _setup(args)
    levels = [int(x) for x in args.levels.split(",")] if args.levels else None
    X = build_covariate_matrix(model, levels)
    payload = {"columns": list(X.columns), "cells": list(_labels(design)), "X": X.entries.tolist()}
    table = [["cell", *X.columns]] + [[lab, *row] for lab, row in zip(_labels(design), X.entries.tolist())]
    text = "\n".join(" ".join(str(v) for v in row) for row in X.T.tolist())
    _emit(args, payload, table, text, _manifest(args, design=args.spec, model=args.model))
    return EXIT_OK


def _basis(args, design, model) -> MarkovBasis:
    A = build_covariate_matrix(model).T
    if getattr(args, "basis", None):
        b = MarkovBasis.from_json(json.loads(Path(args.basis).read_text()))
        if b.matrix.shape != A.shape or (b.matrix != A).any():
            raise InputError("basis file was computed for a different covariate matrix")
        return b
    return compute_markov_basis(A, _labels(design))


def cmd_basis(args) -> int:
    design, model = _setup(args)
    b = _basis(args, design, model)
    if args.minimal or args.classify:
        b = reduce_to_minimal(b, order=args.order, seed=args.seed)
    if args.classify:
        b = classify_indispensable(b)
    cert = None
    if args.certify is not None:
        cert = certify(b, args.certify)
        if not cert.ok:
            raise CertificationError(
                f"{len(cert.disconnected)} of {cert.fibers_checked} fibers with total <= {args.certify} "
                f"are disconnected, e.g. t = {list(cert.disconnected[0].t)}")
    census = degree_census(b)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "basis.txt").write_text(b.to_text())
        (out / "basis.json").write_text(b.dumps() + "\n")
    payload = b.to_json()
    payload["certified_up_to"] = None if cert is None else cert.n_max
    classified = b.indispensable is not None
    table = [["degree", "count", "indispensable"]] + [
        [d, c, i if classified else ""] for d, (c, i) in census.items()]
    lines = [f"{len(b)} moves" + (" (minimal)" if b.minimal else "")]
    for d, (c, i) in census.items():
        lines.append(f"  degree {d}: {c}" + (f" ({i} indispensable)" if classified else ""))
    if cert is not None:
        lines.append(f"certified: {cert.fibers_checked} fibers with total <= {cert.n_max} connected")
    if args.moves:
        lines += ["", b.to_text().rstrip("\n")]
    _emit(args, payload, table, "\n".join(lines), _manifest(args, design=args.spec, model=args.model))
    return EXIT_OK


def cmd_fiber(args) -> int:
    design, model = _setup(args)
    A = build_covariate_matrix(model).T
    y = read_counts(read_input(args.data, "counts"), design.k)
    f = fib.enumerate_fiber(A, A @ y)
    payload: dict[str, Any] = {"t": list(f.t), "cells": list(_labels(design)), "points": f.as_lists()}
    if args.edges:
        b = _basis(args, design, model)
        payload["edges"] = [list(e) for e in fib.edge_list(f, b.moves)]
        payload["connected"] = fib.is_connected(f, b.moves)
    table = [list(_labels(design))] + f.as_lists()
    lines = [f"{len(f)} points with t = {list(f.t)}"] + [" ".join(map(str, p)) for p in f.as_lists()]
    if args.edges:
        lines += [f"{a} {b}" for a, b in payload["edges"]]
    _emit(args, payload, table, "\n".join(lines),
          _manifest(args, design=args.spec, model=args.model, data=args.data))
    return EXIT_OK


def cmd_test(args) -> int:
    design, model = _setup(args)
    X = build_covariate_matrix(model)
    A = X.T
    y = read_counts(read_input(args.data, "counts"), design.k)
    fit = fit_poisson_glm(X, y)
    if args.exact:
        res = exact_p_value(A, y, args.stat, mu=fit.mu)
    else:
        b = _basis(args, design, model)
        if not args.basis:
            b = reduce_to_minimal(b)
        cfg = ChainConfig(steps=args.steps, burn_in=args.burn_in, seed=args.seed, thinning=args.thin)
        res = mh_run(A, b, y, args.stat, cfg, mu=fit.mu)
        if args.trace:
            Path(args.trace).write_text("".join(f"{v!r}\n" for v in res.trace.tolist()))
    payload = {"result": res.as_dict(), "sufficient_statistic": sufficient_statistic(X, y).tolist(),
               "fitted": fit.mu.tolist(), "glm_iterations": fit.iterations}
    row = res.as_dict()
    table = [list(row), list(row.values())]
    text = (f"{res.statistic} = {res.observed:.6g}\n"
            f"p = {res.p_value:.6g}" + (f" (exact {res.p_exact})" if res.p_exact is not None else
                                       f" +- {res.se:.3g}, acceptance {res.acceptance_rate:.3f}, "
                                       f"{res.n_samples} samples"))
    _emit(args, payload, table, text, _manifest(args, design=args.spec, model=args.model, data=args.data))
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ffmarkov", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="random seed (chain, shuffled removal order)")
    p.add_argument("--output", choices=("json", "csv", "text"), default="text")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    # the same flags after the subcommand; SUPPRESS keeps the top-level defaults
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    shared.add_argument("--output", choices=("json", "csv", "text"), default=argparse.SUPPRESS)
    shared.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        sp.add_argument("--spec", required=True, help="design file or bundled name, e.g. 3_4-1")
        if model:
            sp.add_argument("--model", required=True,
                            help="model file, bundled name (3_4-1/main_AxB) or inline 'main: all; interactions: AxB'")

    sp = sub.add_parser("design", parents=[shared], help="runs, alias table and clear effects")
    common(sp, model=False)
    sp.add_argument("--aliases", action="store_true", help="show the alias table")
    sp.add_argument("--runs-only", action="store_true")
    sp.add_argument("--max-length", type=int, default=2, help="longest class head listed in the alias table")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("matrix", parents=[shared], help="covariate matrix")
    common(sp)
    sp.add_argument("--levels", help="contrast levels to encode, e.g. 1,2")
    sp.set_defaults(func=cmd_matrix)

    sp = sub.add_parser("basis", parents=[shared], help="Markov basis and degree census")
    common(sp)
    sp.add_argument("--minimal", action="store_true")
    sp.add_argument("--classify", action="store_true", help="flag indispensable moves (implies --minimal)")
    sp.add_argument("--certify", type=int, metavar="N_MAX", nargs="?", const=6,
                    help="check every fiber with total count <= N_MAX (default 6)")
    sp.add_argument("--order", choices=("lex", "revlex", "shuffle"), default="lex")
    sp.add_argument("--basis", help="start from a saved basis.json")
    sp.add_argument("--out", help="directory for basis.txt and basis.json")
    sp.add_argument("--moves", action="store_true", help="list moves in text output")
    sp.set_defaults(func=cmd_basis)

    sp = sub.add_parser("fiber", parents=[shared], help="enumerate the fiber of observed counts")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--edges", action="store_true", help="add the move graph as an edge list")
    sp.add_argument("--basis", help="basis.json to use for --edges")
    sp.set_defaults(func=cmd_fiber)

    sp = sub.add_parser("test", parents=[shared], help="conditional goodness-of-fit test")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--stat", choices=("pearson", "deviance"), default="pearson")
    sp.add_argument("--exact", action="store_true", help="enumerate the fiber instead of sampling")
    sp.add_argument("--steps", type=int, default=100_000)
    sp.add_argument("--burn-in", type=int, default=10_000)
    sp.add_argument("--thin", type=int, default=1)
    sp.add_argument("--basis", help="basis.json to use instead of computing one")
    sp.add_argument("--trace", help="write sampled statistics here, one per line")
    sp.set_defaults(func=cmd_test)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, DesignError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except CertificationError as e:
        print(f"certification failed: {e}", file=sys.stderr)
        return EXIT_CERTIFY
    except (GlmError, ChainError, fib.FiberTooLarge) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
