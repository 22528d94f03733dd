"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 analysis finished with a negative
certificate (``analyze``) or a failed check (``validate``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, fisher, hardness, regret
from .errors import InvalidInput, LqgError
from .model import Parametrization, PolicySpec, load_instance

MIN_ROLLOUTS = 100
LLN_HORIZON = 2000
LLN_MAX_ROLLOUTS = 500


class UsageError(LqgError, ValueError):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows, meta: dict):
    buf = io.StringIO(newline="")
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_json(path: Path, data):
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def parse_policy(text: str, base: Path | None = None) -> PolicySpec:
    """``optimal`` | ``feedback:K.json`` | ``ce-dither:sigma0,beta``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "optimal":
        return PolicySpec.optimal()
    if name == "feedback":
        if not arg:
            raise UsageError("feedback policy needs a gain file: feedback:K.json")
        path = Path(arg)
        if base is not None and not path.is_absolute() and not path.exists():
            path = base / path
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, dict):
            if "K" not in data:
                raise UsageError(f"{path}: gain file is missing key: K")
            data = data["K"]
        return PolicySpec.linear_feedback(data)
    if name == "ce-dither":
        parts = [s for s in arg.split(",") if s.strip()]
        if len(parts) not in (1, 2):
            raise UsageError("ce-dither policy is ce-dither:sigma0[,beta]")
        sigma0 = float(parts[0])
        beta = float(parts[1]) if len(parts) == 2 else 0.25
        return PolicySpec.ce_dither(sigma0, beta)
    raise UsageError(f"unknown policy {text!r}")


def parse_sweep(text: str):
    """``marginal|observability:start:stop:points`` on a logarithmic grid."""
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError("sweep is KIND:start:stop:points")
    kind = {"marginal": hardness.SweepKind.MARGINAL_STABILITY,
            "observability": hardness.SweepKind.POOR_OBSERVABILITY}.get(parts[0].lower())
    if kind is None:
        raise UsageError(f"unknown sweep kind {parts[0]!r}")
    start, stop, points = float(parts[1]), float(parts[2]), int(parts[3])
    if points < 1:
        raise UsageError("sweep grid is empty")
    if start <= 0 or stop <= 0:
        raise UsageError("log grid endpoints must be positive")
    return kind, [float(g) for g in np.geomspace(start, stop, points)]


def parse_horizons(text: str):
    values = [int(v) for v in str(text).split(",") if v.strip()]
    if not values or min(values) < 1:
        raise UsageError("horizons must be positive integers")
    return values


def _meta(args, instance_hash=None):
    meta = {"seed": args.seed, "version": __version__}
    if instance_hash is not None:
        meta["instance_sha256"] = instance_hash
    return meta


def cmd_analyze(args) -> int:
    inst, param = load_instance(args.instance)
    report = hardness.analyze(inst, param, args.eps)
    data = report.to_dict()
    data["parametrization"] = param.kind.value
    data["eps"] = args.eps
    data["version"] = __version__
    data["instance_sha256"] = _sha256(args.instance)
    _write_json(args.out / "report.json", data)
    return 0 if report.uninformative else 2


def cmd_simulate(args) -> int:
    inst, _ = load_instance(args.instance)
    policy = parse_policy(args.policy, Path(args.instance).parent)
    rows = []
    for T in parse_horizons(args.horizon):
        direct, rep, _ = regret.paired_regret(inst, policy, T, args.rollouts, args.seed)
        rows.append([T, direct.value, direct.std_error, rep.value, rep.std_error, args.rollouts, args.seed])
    meta = _meta(args, _sha256(args.instance))
    meta["policy"] = policy.describe().replace(" ", "")
    _write_csv(args.out / "regret.csv",
               ["T", "regret_direct", "se_direct", "regret_repr", "se_repr", "n_rollouts", "seed"], rows, meta)
    return 0


def cmd_sweep(args) -> int:
    if not args.sweep:
        raise UsageError("--sweep is required")
    kind, grid = parse_sweep(args.sweep)
    result = hardness.failure_sweep(kind, grid)
    header = list(result.rows[0].keys())
    _write_csv(args.out / "sweep.csv", header, [[r[h] for h in header] for r in result.rows], _meta(args))
    x_name = "b" if kind is hardness.SweepKind.MARGINAL_STABILITY else "c"
    for name in header:
        if name in (x_name, "a"):
            continue
        lines = [f"{x_name}\t{name}"] + [f"{r[x_name]!r}\t{r[name]!r}" for r in result.rows]
        (args.out / f"sweep_{name}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(args.out / "sweep_checks.json", {"kind": kind.value, "checks": result.checks})
    return 0


def _check(name, passed, measured, tolerance, wide):
    status = "WIDE_CI" if wide else ("PASS" if passed else "FAIL")
    return {"name": name, "status": status, "measured": measured, "tolerance": tolerance}


def cmd_validate(args) -> int:
    inst, param = load_instance(args.instance)
    n = args.rollouts
    T = parse_horizons(args.horizon)[0]
    wide = n < MIN_ROLLOUTS
    checks = []
    perturbed = PolicySpec.linear_feedback(inst.K + 0.1)
    for label, policy in (("feedback_k_plus_0.1", perturbed), ("ce_dither", PolicySpec.ce_dither(1.0, 0.25))):
        direct, rep, se = regret.paired_regret(inst, policy, T, n, args.seed)
        gap = abs(direct.value - rep.value)
        checks.append(_check(f"regret_identity[{label}]", gap <= 3 * se,
                             {"direct": direct.value, "representation": rep.value, "abs_diff": gap},
                             {"three_se": 3 * se}, wide))

    if inst.state_feedback:
        sf = fisher.sf_information(inst, param, perturbed, T, n, args.seed)
        oracle = fisher.score_oracle_information(inst, param, perturbed, T, n, args.seed)
        diff = sf.samples - oracle.samples
        se = diff.std(axis=0, ddof=1) / math.sqrt(diff.shape[0])
        z = np.abs(diff.mean(axis=0)) - 3 * se
        checks.append(_check("fisher_oracle", bool(np.all(z <= 0)),
                             {"max_abs_diff": float(np.max(np.abs(diff.mean(axis=0))))},
                             {"three_se_max": float(3 * np.max(se))}, wide))

    flag, _ = hardness.certify_uninformative(inst, param, args.eps)
    if flag:
        for label, policy in (("optimal", PolicySpec.optimal()), ("feedback_k_plus_0.1", perturbed),
                              ("ce_dither", PolicySpec.ce_dither(1.0, 0.25))):
            res = hardness.info_regret_inequality_check(inst, param, policy, T, n, args.seed, args.eps)
            checks.append(_check(f"info_regret_inequality[{label}]", res.holds,
                                 {"lhs": res.lhs, "rhs": res.rhs}, {"three_se": 3 * res.std_error}, wide))

    delta = args.delta if args.delta is not None else 0.5 * float(np.linalg.eigvalsh(inst.Sigma_nu)[0])
    lln = hardness.covariance_lln_check(inst, PolicySpec.optimal(), LLN_HORIZON, args.alpha, delta,
                                        min(n, LLN_MAX_ROLLOUTS), args.seed)
    checks.append(_check("covariance_lln", lln.probability >= 0.9, {"probability": lln.probability},
                         {"min_probability": 0.9}, wide))

    prior = fisher.cosine_bump()
    for sigma in (0.3, 1.0, 3.0):
        vt = fisher.van_trees_check(sigma, prior, max(n, 1000), args.seed)
        checks.append(_check(f"van_trees[sigma={sigma}]", vt.holds,
                             {"bayes_mse": vt.bayes_mse, "bound": vt.bound}, {"three_se": 3 * vt.std_error}, wide))

    all_ok = all(c["status"] != "FAIL" for c in checks)
    _write_json(args.out / "validation.json", {
        "all_passed": all_ok, "checks": checks, "seed": args.seed, "rollouts": n, "horizon": T,
        "version": __version__, "instance_sha256": _sha256(args.instance),
    })
    return 0 if all_ok else 2


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqgbounds", description="LQG regret lower-bound toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--instance", type=Path)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--horizon", default="100", help="horizon, or comma-separated list for simulate")
    parser.add_argument("--rollouts", type=int, default=2000)
    parser.add_argument("--eps", type=float, default=0.1)
    parser.add_argument("--alpha", type=float, default=0.25)
    parser.add_argument("--delta", type=float, default=None)
    parser.add_argument("--policy", default="optimal")
    parser.add_argument("--sweep", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.seed < 0 or args.rollouts < 1:
            raise UsageError("seed must be nonnegative and rollouts positive")
        if args.command != "sweep" and args.instance is None:
            raise UsageError("--instance is required")
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args)
    except (LqgError, InvalidInput, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
