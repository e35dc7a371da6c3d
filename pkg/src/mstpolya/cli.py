"""Command line interface: ``mstpolya <command> [options]``.

Commands: ``types``, ``analyze``, ``simulate``, ``spectral``, ``verify`` and
``oracle``.  Exit codes: 0 success, 2 bad input or malformed urn, 3 size cap
exceeded, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import ratlinalg as rl
from .errors import CapExceededError, NotNormalError, UrnError
from .ledger import run_ledger
from .models import (
    MODELS,
    PROTECTED_SPEC_CAP,
    build_model,
    enumerate_types,
    lemma_root_check,
    phi,
    protected_mean_matrix,
    spectral_condition,
)
from .ratlinalg import Fraction, RatMatrix, format_rational
from .simulate import run_mc, stats_to_csv
from .trees import STATISTICS, exact_small_n
from .urn import (
    NORMAL,
    UrnSpec,
    asymptotic_law,
    check_assumptions,
    classify_regime,
    functional_law,
    spectral,
)


# ----------------------------------------------------------------------------
# Formatting helpers


def _num(x, exact: bool):
    if isinstance(x, Fraction):
        return format_rational(x) if exact else float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag} if x.imag else x.real
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _vec(v, exact):
    return [_num(x, exact) for x in v]


def _matrix(M, exact):
    if isinstance(M, RatMatrix):
        return M.to_strings() if exact else M.to_numpy().tolist()
    return np.asarray(M, dtype=float).tolist()


def _eig(e, exact):
    if e.exact is not None and exact:
        return format_rational(e.exact)
    return _num(e.value, False)


def _json_default(x):
    if isinstance(x, (np.generic,)):
        return x.item()
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _emit(payload, fmt: str, out):
    if fmt == "json":
        out.write(json.dumps(payload, indent=2, default=_json_default) + "\n")
    elif fmt == "csv":
        if isinstance(payload, dict) and "csv" in payload:
            out.write(payload["csv"])
        else:
            rows = payload.get("rows") if isinstance(payload, dict) else payload
            if not rows:
                out.write("\n")
                return
            cols = list(rows[0].keys())
            out.write(",".join(cols) + "\n")
            for r in rows:
                out.write(",".join(str(r[c]) for c in cols) + "\n")
    else:
        _pretty(payload, out)


def _pretty(payload, out, indent=0):
    pad = "  " * indent
    if isinstance(payload, dict):
        for k, v in payload.items():
            if k == "csv":
                continue
            if isinstance(v, (dict, list)) and v and not _flat(v):
                out.write(f"{pad}{k}:\n")
                _pretty(v, out, indent + 1)
            else:
                out.write(f"{pad}{k}: {_short(v)}\n")
    elif isinstance(payload, list):
        for item in payload:
            if isinstance(item, dict):
                out.write(pad + "  ".join(f"{k}={_short(v)}" for k, v in item.items()) + "\n")
            else:
                out.write(f"{pad}{_short(item)}\n")
    else:
        out.write(f"{pad}{payload}\n")


def _flat(v):
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


def _short(v):
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


# ----------------------------------------------------------------------------
# Commands


def cmd_types(args):
    rows = []
    for i, t in enumerate(enumerate_types(args.m)):
        rows.append(
            {
                "index": i,
                "type": t.label,
                "activity": t.activity,
                "protected": int(t.protected),
                "leaves": t.leaf_count,
            }
        )
    return {"m": args.m, "count": len(rows), "rows": rows}


def _load_bundle(args):
    return build_model(args.model, args.m, cap_override=args.cap_override)


def _mode(args) -> str:
    return args.precision or "auto"


def cmd_analyze(args):
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = UrnSpec.from_json(fh.read())
        bundle = None
    else:
        bundle = _load_bundle(args)
        spec = bundle.spec
    try:
        sd = spectral(spec, precision=_mode(args))
    except CapExceededError as exc:
        raise CapExceededError(f"{exc}; rerun with --precision float") from exc
    exact = sd.exact
    regime = classify_regime(sd)
    rep = {
        "model": bundle.model if bundle else "custom",
        "m": args.m if bundle else None,
        "q": spec.q,
        "precision": "exact" if exact else "float",
        "labels": list(spec.labels),
        "A": _matrix(sd.A, exact),
        "eigenvalues": [_eig(e, exact) for e in sd.eigenvalues],
        "lambda1": _num(sd.lambda1, exact),
        "v1": _vec(sd.v1, exact) if sd.exact else _vec(sd.v1_float(), False),
        "u1": _vec(sd.u1, exact) if sd.exact else _vec(sd.u1_float(), False),
        "diagonalizable": sd.diagonalizable,
        "regime": regime,
    }
    assumptions = check_assumptions(spec, bundle.start_state if bundle else None, sd)
    rep["assumptions"] = {c.name: c.passed for c in assumptions.checks}
    mu = tuple(sd.lambda1 * x for x in sd.v1) if sd.exact else float(sd.lambda1) * sd.v1_float()
    rep["mu"] = _vec(mu, exact)
    if regime != NORMAL:
        rep["warning"] = "NOT ASYMPTOTICALLY NORMAL: the spectral gap condition fails; no covariance is reported"
        return rep
    try:
        law = asymptotic_law(spec, sd, precision=_mode(args))
    except CapExceededError as exc:
        raise CapExceededError(f"{exc}; rerun with --precision float") from exc
    rep["method"] = law.method
    rep["sigma"] = _matrix(law.sigma, exact and law.exact)
    if bundle:
        names = args.functional or list(bundle.functionals)
        funs = {}
        for name in names:
            if name not in bundle.functionals:
                raise UrnError(f"unknown functional {name!r}; choose from {', '.join(bundle.functionals)}")
            mean, var = functional_law(law, bundle.functionals[name])
            funs[name] = {"mean": _num(mean, exact and law.exact), "variance": _num(var, exact and law.exact)}
        rep["functionals"] = funs
    return rep


# tree statistic -> (model, functional) whose law gives its asymptotics
_THEORY = {
    "two_protected": ("protected", "protected"),
    "leaves": ("one-protected", "leaves"),
    "one_protected": ("one-protected", "one_protected"),
    "internal": ("one-protected", "internal"),
}


def _theory(stat, m, cap_override):
    model, fun = _THEORY[stat]
    if model == "protected" and m > PROTECTED_SPEC_CAP and not cap_override:
        return None
    try:
        b = build_model(model, m, cap_override=cap_override)
        law = asymptotic_law(b.spec)
        mean, var = functional_law(law, b.functionals[fun])
        return float(mean), float(var)
    except (NotNormalError, CapExceededError):
        return None


def cmd_simulate(args):
    if args.mode == "urn":
        if not args.model:
            raise UrnError("urn mode needs --model")
        bundle = _load_bundle(args)
        stats = args.stat or [next(iter(bundle.functionals))]
        res = run_mc(bundle, n=args.n, trials=args.trials, seed=args.seed, statistics=stats, cap_override=args.cap_override)
        law = asymptotic_law(bundle.spec)
        theory = {s: tuple(float(x) for x in functional_law(law, bundle.functionals[s])) for s in stats}
    else:
        stats = args.stat or ["two_protected"]
        res = run_mc("tree", args.m, args.n, args.trials, args.seed, stats, cap_override=args.cap_override)
        theory = {s: _theory(s, args.m, args.cap_override) for s in stats}
    rows = []
    for s in stats:
        st = res[s]
        row = st.row()
        th = theory.get(s)
        if th is not None:
            mu, var = th
            se = (var * args.n) ** 0.5 / st.count**0.5
            row["theory_mean"] = repr(mu * args.n)
            row["theory_variance"] = repr(var * args.n)
            row["z_mean"] = repr((st.mean - mu * args.n) / se) if se > 0 else ""
        else:
            row["theory_mean"] = row["theory_variance"] = row["z_mean"] = ""
        rows.append(row)
    extra = ("theory_mean", "theory_variance", "z_mean")
    return {"rows": rows, "csv": stats_to_csv(rows, extra)}


def cmd_spectral(args):
    m = args.m
    model = args.model or "protected"
    rep = {"m": m, "model": model}
    if model == "nodes":
        sc = spectral_condition(m)
        sd = spectral(build_model("nodes", m).spec, precision="float")
        rep["eigenvalues"] = [_eig(e, False) for e in sd.eigenvalues]
        rep["characteristic_polynomial"] = [format_rational(c) for c in phi(m).coeffs]
        rep["lambda2_re"] = sc["lambda2_re"]
        rep["holds"] = sc["holds"]
        rep["regime"] = "normal" if sc["holds"] else "not-normal"
        return rep
    if model == "protected":
        if m <= 3 or args.precision == "exact":
            b = build_model("protected", m, cap_override=args.cap_override)
            sd = spectral(b.spec, precision="exact")
            eig = [_eig(e, True) for e in sd.eigenvalues]
            rest = sd.non_perron()
            lam2 = max(e.value.real for e in rest)
        else:
            A = protected_mean_matrix(m, cap_override=args.cap_override)
            vals = rl.numeric_eigen(A, check=A.shape[0] <= 150)
            k = min(range(len(vals)), key=lambda i: abs(vals[i] - 1))
            rest = vals[:k] + vals[k + 1:]
            eig = [_num(z, False) for z in vals]
            lam2 = max(z.real for z in rest)
        rep["q"] = len(eig)
        rep["eigenvalues"] = eig
        rep["lambda2_re"] = lam2
        rep["holds"] = lam2 < 0.5 - 1e-6
        if m <= PROTECTED_SPEC_CAP or args.cap_override:
            lr = lemma_root_check(m, cap_override=args.cap_override)
            rep["gap_map_identity"] = lr["identity_holds"]
            rep["phi_roots_contained"] = lr["all_contained"]
        return rep
    b = _load_bundle(args)
    sd = spectral(b.spec, precision=_mode(args))
    rep["eigenvalues"] = [_eig(e, sd.exact) for e in sd.eigenvalues]
    lam2 = sd.lambda2()
    rep["lambda2_re"] = lam2.value.real if lam2 else None
    rep["regime"] = classify_regime(sd)
    rep["holds"] = rep["regime"] == NORMAL
    return rep


def cmd_verify(args):
    entries = run_ledger(args.only)
    rep = {
        "passed": sum(e.passed for e in entries),
        "total": len(entries),
        "rows": [{"id": e.id, "status": e.status, "detail": e.detail} for e in entries],
    }
    if args.out == "json":
        rep["entries"] = [e.as_dict() for e in entries]
    rep["_failed"] = rep["passed"] != rep["total"]
    return rep


def cmd_oracle(args):
    stat = (args.stat or ["two_protected"])[0]
    dists = exact_small_n(args.m, args.n_max, stat)
    return {"m": args.m, "statistic": stat, "distributions": [d.to_dict() for d in dists],
            "rows": [{"n": d.n, "mean": format_rational(d.mean()), "variance": format_rational(d.variance())} for d in dists]}


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, default=3, help="tree arity (default 3)")
    common.add_argument("--model", choices=MODELS, help="urn model")
    common.add_argument("--out", choices=("json", "csv", "pretty"), default=None, help="output format")
    common.add_argument(
        "--precision", choices=("exact", "float"), default=None,
        help="exact rationals or floats (default: exact when the size allows it)",
    )
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--cap-override", action="store_true", help="lift the default size caps")

    p = argparse.ArgumentParser(prog="mstpolya", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("types", parents=[common], help="list small-tree types")
    a = sub.add_parser("analyze", parents=[common], help="limit law of an urn model")
    a.add_argument("--functional", action="append", help="functional name (repeatable)")
    a.add_argument("--spec", help="analyse an urn specification JSON file instead of a built-in model")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo summaries")
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--stat", action="append", help=f"statistic (tree mode: {', '.join(STATISTICS)})")
    s.add_argument("--mode", choices=("tree", "urn"), default="tree")
    sub.add_parser("spectral", parents=[common], help="spectrum and spectral-gap verdict")
    v = sub.add_parser("verify", parents=[common], help="recompute every stored published constant")
    v.add_argument("--only", help="restrict to entries whose id starts with this prefix")
    o = sub.add_parser("oracle", parents=[common], help="exact small-n distributions")
    o.add_argument("--n-max", type=int, default=7)
    o.add_argument("--stat", action="append")
    return p


_DEFAULT_OUT = {"types": "pretty", "analyze": "json", "simulate": "csv", "spectral": "pretty", "verify": "pretty", "oracle": "json"}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    args.out = args.out or _DEFAULT_OUT[args.command]
    handler = globals()[f"cmd_{args.command}"]
    try:
        rep = handler(args)
    except UrnError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code if exc.exit_code != 1 else 2
    failed = isinstance(rep, dict) and rep.pop("_failed", False)
    if args.command == "oracle" and args.out == "json":
        rep = rep["distributions"]
    elif args.out == "json" and isinstance(rep, dict):
        rep.pop("csv", None)
    _emit(rep, args.out, out)
    return 4 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
