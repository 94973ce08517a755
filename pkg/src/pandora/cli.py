"""Command-line front end.

Exit codes: 0 success or accept, 1 reject or bound violation, 2 usage or
input error, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction

from .committing import all_committing, best_committing
from .exact import NEG, solve, threshold_of_set, verify_certificate
from .model import (
    BudgetExceeded,
    Instance,
    InstanceError,
    format_rat,
    mask_of,
    parse_instance,
    parse_rat,
    random_instance,
    serialize_instance,
)
from .ptas import run_ptas
from .sim import simulate
from .twophase import TwoPhasePolicy, best_two_phase

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


def _rat(x) -> dict:
    return {"exact": format_rat(x), "decimal": float(x)}


def _show(x: Fraction) -> str:
    return f"{format_rat(x)} ({float(x):.6g})"


def _indices(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated box indices, got {text!r}")


def _rational(text: str) -> Fraction:
    try:
        return parse_rat(text)
    except InstanceError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _load(path: str) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_instance(fh.read())
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc.strerror}") from None


def _digest(inst: Instance) -> str:
    return hashlib.sha256(serialize_instance(inst).encode()).hexdigest()[:16]


def _check_indices(inst: Instance, idx: list[int]) -> None:
    for i in idx:
        if not 0 <= i < inst.n:
            raise InstanceError(f"box index {i} out of range for {inst.n} boxes")


def _action_tree(table, mask: int, alpha: Fraction):
    act = table.action(mask, alpha)
    node = {"action": repr(act)}
    if act.kind == "open":
        rest = mask & ~(1 << act.box)
        node["next"] = {
            format_rat(v): _action_tree(table, rest, max(alpha, v))
            for v, _ in table.inst.dist(act.box).atoms
        }
    return node


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, result dict, text lines)


def cmd_solve(args):
    inst = _load(args.file)
    table = solve(inst)
    tree = _action_tree(table, inst.full_mask, Fraction(0))
    digest = hashlib.sha256(json.dumps(tree, sort_keys=True).encode()).hexdigest()[:16]
    res = {"opt": _rat(table.opt), "root_action": tree["action"], "tree_digest": digest}
    lines = [
        f"OPT = {_show(table.opt)}",
        f"first action: {tree['action']}",
        f"policy tree digest: {digest}",
    ]
    return EXIT_OK, res, lines, inst


def cmd_verify(args):
    inst = _load(args.file)
    _check_indices(inst, args.order)
    u, ok = verify_certificate(inst, args.order, args.target)
    res = {"order": args.order, "target": _rat(args.target), "utility": _rat(u), "accepted": ok}
    lines = [f"utility = {_show(u)}", f"target  = {_show(args.target)}", "ACCEPT" if ok else "REJECT"]
    return (EXIT_OK if ok else EXIT_REJECT), res, lines, inst


def cmd_thresholds(args):
    inst = _load(args.file)
    idx = list(range(inst.n)) if args.set is None else args.set
    _check_indices(inst, idx)
    mask = mask_of(idx)
    tau = threshold_of_set(inst, solve(inst), mask)
    shown = "NEG" if tau is NEG else _show(tau)
    res = {"set": sorted(set(idx)), "threshold": "NEG" if tau is NEG else _rat(tau)}
    return EXIT_OK, res, [f"tau({{{','.join(map(str, sorted(set(idx))))}}}) = {shown}"], inst


def cmd_two_phase(args):
    inst = _load(args.file)
    pol, u = best_two_phase(inst)
    res = {"policy": pol.to_dict(), "utility": _rat(u)}
    return EXIT_OK, res, [json.dumps(pol.to_dict()), f"utility = {_show(u)}"], inst


def cmd_committing(args):
    inst = _load(args.file)
    rows = all_committing(inst)
    best, bu = best_committing(inst)
    opt = solve(inst).opt
    ratio = bu / opt if opt else Fraction(1)
    ok = 5 * bu >= 4 * opt
    res = {
        "choices": [{"choice": repr(c), "utility": _rat(u)} for c, u in rows],
        "best": {"choice": repr(best), "utility": _rat(bu)},
        "opt": _rat(opt),
        "ratio": _rat(ratio),
        "bound_holds": ok,
    }
    lines = [f"{repr(c):<12} {_show(u)}" for c, u in rows]
    lines += [
        f"best = {repr(best)} {_show(bu)}",
        f"OPT = {_show(opt)}",
        f"ratio = {_show(ratio)}",
        f"ratio >= 4/5: {'PASS' if ok else 'FAIL'}",
    ]
    return (EXIT_OK if ok else EXIT_REJECT), res, lines, inst


def cmd_ptas(args):
    inst = _load(args.file)
    r = run_ptas(inst, args.epsilon, use_oracle=not args.no_oracle, fine=args.fine)
    rep = r.report()
    lines = [
        json.dumps(rep["best_policy"]),
        f"utility = {_show(r.utility)}",
        f"opt_ref = {_show(r.opt_ref)}",
        f"candidates tried: {r.candidates_tried}",
    ]
    return EXIT_OK, rep, lines, inst


def cmd_simulate(args):
    inst = _load(args.file)
    if args.policy in ("optimal", "weitzman"):
        pol = solve(inst) if args.policy == "optimal" else "weitzman"
    else:
        try:
            with open(args.policy, encoding="utf-8") as fh:
                pol = TwoPhasePolicy.from_json(fh.read())
            pol.validate(inst)
        except OSError as exc:
            raise InstanceError(f"cannot read {args.policy}: {exc.strerror}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise InstanceError(f"bad policy file: {exc}") from None
    st = simulate(inst, pol, args.samples, args.seed, jobs=args.jobs)
    d = st.to_dict()
    return EXIT_OK, d, [json.dumps(d)], inst


def cmd_gen(args):
    inst = random_instance(args.n, args.atoms, args.seed)
    return EXIT_OK, json.loads(serialize_instance(inst)), [serialize_instance(inst)], None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subparser from resetting a flag given before the subcommand
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="emit a JSON report")
    p = argparse.ArgumentParser(prog="pandora", description="Pandora's box solver toolkit", parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, file=True):
        sp = sub.add_parser(name, help=help_, parents=[common])
        if file:
            sp.add_argument("file", help="instance JSON")
        sp.set_defaults(fn=fn)
        return sp

    add("solve", cmd_solve, "optimal value and policy digest")
    sp = add("verify", cmd_verify, "check an order certificate against a target")
    sp.add_argument("--order", type=_indices, required=True)
    sp.add_argument("--target", type=_rational, required=True)
    sp = add("thresholds", cmd_thresholds, "threshold of a box set")
    sp.add_argument("--set", type=_indices, default=None)
    add("two-phase", cmd_two_phase, "best two-phase policy")
    add("committing", cmd_committing, "committing policies and the 4/5 bound")
    sp = add("ptas", cmd_ptas, "discretized search pipeline")
    sp.add_argument("--epsilon", type=_rational, default=Fraction(1, 4))
    sp.add_argument("--fine", action="store_true", help="use a scheme with exact rounding")
    sp.add_argument("--no-oracle", action="store_true", help="take opt_ref from committing")
    sp = add("simulate", cmd_simulate, "Monte Carlo run of a policy")
    sp.add_argument("--policy", default="optimal", help="policy JSON file, 'optimal' or 'weitzman'")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1)
    sp = add("gen", cmd_gen, "random instance", file=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--atoms", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        code, res, lines, inst = args.fn(args)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InstanceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "json", False):
        report = {
            "command": ["pandora"] + list(argv if argv is not None else sys.argv[1:]),
            "instance_digest": _digest(inst) if inst is not None else None,
            "results": res,
            "seconds": round(time.perf_counter() - t0, 6),
        }
        print(json.dumps(report, indent=2))
    else:
        print("\n".join(lines))
    return code


if __name__ == "__main__":
    sys.exit(main())
