"""Command line: ``simlab run | list | show | eigen | branch``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bifurcation as bif
from . import kernels
from .errors import SimlabError
from .scenario import EXIT_SCHEMA, gallery, gallery_path, run_scenario, write_branch


def _cmd_run(args) -> int:
    if args.threads:
        kernels.set_num_threads(args.threads)
    if (args.config is None) == (args.scenario is None):
        print("give exactly one of --config or --scenario", file=sys.stderr)
        return EXIT_SCHEMA
    if args.scenario is not None:
        try:
            source = gallery_path(args.scenario)
        except KeyError:
            print(f"unknown scenario {args.scenario!r}; see 'simlab list'", file=sys.stderr)
            return EXIT_SCHEMA
    else:
        source = args.config
    code = run_scenario(source, args.out)
    summary = json.loads((Path(args.out) / "summary.json").read_text())
    for name in summary["passed"]:
        print(f"PASS {name}")
    for name in summary["failed"]:
        print(f"FAIL {name}")
    if summary["message"]:
        print(summary["message"], file=sys.stderr)
    print(f"exit {code}")
    return code


def _cmd_list(args) -> int:
    for name, doc in gallery().items():
        print(f"{name}\t{doc.get('description', '')}")
    return 0


def _cmd_show(args) -> int:
    docs = gallery()
    if args.name not in docs:
        print(f"unknown scenario {args.name!r}", file=sys.stderr)
        return EXIT_SCHEMA
    print(json.dumps(docs[args.name], indent=2))
    return 0


def _cmd_eigen(args) -> int:
    try:
        res = bif.sl_eigen(bif.SLProblem(args.k, args.eps, args.n), args.jmax)
    except (ValueError, SimlabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print("k,eps,j,lambda")
    for j, lam in enumerate(res.eigenvalues, start=1):
        print(f"{args.k},{args.eps:.17g},{j},{lam:.17g}")
    return 0


def _cmd_branch(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        eps = args.eps if args.eps is not None else bif.find_bifurcation(args.k)[0]
        state, lam = bif.build_branch_state(args.k, eps, args.amp, args.n_r, args.n_theta)
    except (ValueError, SimlabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    info = write_branch(out, state, lam)
    changes = [bif.angular_sign_changes(state.u1, j) for j in range(state.grid.n_r)]
    meta = {"k": args.k, "eps": eps, "t_amp": args.amp, "lambda_star": lam,
            "n_r": args.n_r, "n_theta": args.n_theta, "sign_changes": changes, **info}
    (out / "branch.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"lambda*={lam:.17g} eps={eps:.17g} sup_residual={info['sup_residual_1']:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write its report bundle")
    r.add_argument("--config", help="scenario JSON file")
    r.add_argument("--scenario", help="name of a bundled scenario")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--threads", type=int, default=0, help="OpenMP threads for the sweeps")
    r.set_defaults(func=_cmd_run)

    sub.add_parser("list", help="list bundled scenarios").set_defaults(func=_cmd_list)

    s = sub.add_parser("show", help="print a bundled scenario")
    s.add_argument("name")
    s.set_defaults(func=_cmd_show)

    e = sub.add_parser("eigen", help="radial eigenvalues on a thin annulus")
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--eps", type=float, required=True)
    e.add_argument("--n", type=int, default=128)
    e.add_argument("--jmax", type=int, default=3)
    e.set_defaults(func=_cmd_eigen)

    b = sub.add_parser("branch", help="first-order bifurcating branch state")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--amp", type=float, required=True)
    b.add_argument("--eps", type=float, default=None, help="default: located bifurcation point")
    b.add_argument("--n-r", type=int, default=32)
    b.add_argument("--n-theta", type=int, default=128)
    b.add_argument("--out", default=".")
    b.set_defaults(func=_cmd_branch)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
