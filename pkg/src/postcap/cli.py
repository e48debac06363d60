"""Command-line front end: ``postcap iomega|capacity|simulate|check|validate``.

Exit codes: 0 ok, 1 input error, 2 solver failure, 3 infeasible rate.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from . import hermkernel as hk
from .capacities import capacity_report, oneshot_quantum_bounds
from .channels import (Channel, Subchannel, Supermap, apply_supermap, choi_from_kraus,
                       identity_supermap, make_builtin)
from .divergences import INF
from .errors import (FeasibilityFailure, InfeasibleRate, NoConvergence, PostcapError,
                     SolverFailure)
from .projective import (DEFAULT_GAP, DualCertificate, PrimalCertificate, iomega_channel,
                         validate_dual, validate_primal)
from .protocols import (TeleportProtocol, achiever_parameters, build_pea_supermap, build_pna_achiever,
                        build_teleport, check_nonsignalling, check_replacement_preserving,
                        ctc_counterexample, me_fidelity, teleport_error_bound)

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_INFEASIBLE = 0, 1, 2, 3
CSV_HEADER = ["eps", "q_lower", "q_upper", "c_lower", "c_upper", "asym_c", "asym_q"]


class InputError(PostcapError, ValueError):
    """Malformed command-line input or spec file."""


# ----------------------------------------------------------------------------
# serialisation


def fmt_float(v: float) -> str:
    if math.isnan(v):
        return "null"
    if math.isinf(v):
        return '"+inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(obj)]
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON with floats at 17 significant digits and infinities as ``"+inf"``."""
    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, float):
            return fmt_float(o)
        if isinstance(o, (int, str)):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if all(not isinstance(v, (list, dict)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")
    return enc(_jsonable(obj), 0)


def _parse_float(v) -> float:
    if isinstance(v, str):
        if v in ("+inf", "inf"):
            return INF
        if v == "-inf":
            return -INF
        raise InputError(f"not a number: {v!r}")
    if v is None:
        return math.nan
    return float(v)


def decode_matrix(data) -> np.ndarray:
    """Row-major nested lists; entries are reals or ``[re, im]`` pairs."""
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed matrix: {exc}") from exc
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise InputError(f"matrix must be 2-D (or 2-D of [re, im] pairs), got shape {arr.shape}")


# ----------------------------------------------------------------------------
# channel specs


def _parse_builtin_shorthand(text: str) -> dict:
    """``builtin:NAME[:k=v,k=v]``."""
    parts = text.split(":", 2)
    if len(parts) < 2 or not parts[1]:
        raise InputError(f"bad builtin shorthand {text!r}")
    params = {}
    if len(parts) == 3 and parts[2]:
        for kv in parts[2].split(","):
            if "=" not in kv:
                raise InputError(f"bad parameter {kv!r} in {text!r}")
            k, v = kv.split("=", 1)
            params[k.strip()] = float(v) if k.strip() not in ("d", "d_in") else int(v)
    return {"name": parts[1], "rep": {"kind": "builtin", "builtin_name": parts[1], "params": params}}


def read_channel_spec(source: str) -> dict:
    if source.startswith("builtin:"):
        return _parse_builtin_shorthand(source)
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {source}: {exc}") from exc
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {source}: {exc}") from exc
    if not isinstance(spec, dict):
        raise InputError("channel spec must be a JSON object")
    return spec


def channel_from_spec(spec: dict, subchannel: bool = False) -> Subchannel:
    """Parse a channel spec; validates complete positivity and trace preservation."""
    rep = spec.get("rep")
    if not isinstance(rep, dict) or "kind" not in rep:
        raise InputError("spec needs a 'rep' object with a 'kind'")
    kind = rep["kind"]
    name = str(spec.get("name", ""))
    if kind == "builtin":
        if "builtin_name" not in rep:
            raise InputError("builtin rep needs 'builtin_name'")
        ch = make_builtin(rep["builtin_name"], rep.get("params", {}))
    elif kind == "kraus":
        ops = [decode_matrix(k) for k in rep.get("operators", [])]
        if subchannel:
            d_out, d_in = ops[0].shape
            ch = Subchannel(d_in, d_out, choi_from_kraus(ops, d_in, d_out), name)
        else:
            ch = Channel.from_kraus(ops, name)
    elif kind == "choi":
        norm = rep.get("normalization", "state")
        m = decode_matrix(rep["matrix"])
        d_in, d_out = int(spec["d_in"]), int(spec["d_out"])
        if norm == "unnormalized":
            m = m / d_in
        elif norm != "state":
            raise InputError(f"unknown normalization {norm!r}")
        ch = (Subchannel if subchannel else Channel)(d_in, d_out, m, name)
    else:
        raise InputError(f"unknown rep kind {kind!r}")
    for key, val in (("d_in", ch.d_in), ("d_out", ch.d_out)):
        if key in spec and int(spec[key]) != val:
            raise InputError(f"spec says {key}={spec[key]} but the map has {key}={val}")
    return ch


def supermap_from_spec(spec: dict) -> Supermap:
    """``{"d_M", "d_A", "d_B", "d_Mh", "d_E", "pre": spec, "post": spec}``."""
    try:
        dims = {k: int(spec[k]) for k in ("d_M", "d_A", "d_B", "d_Mh")}
        d_E = int(spec.get("d_E", 1))
        pre = channel_from_spec(spec["pre"])
        post = channel_from_spec(spec["post"], subchannel=True)
    except KeyError as exc:
        raise InputError(f"supermap spec is missing {exc}") from exc
    return Supermap(pre, post, d_E=d_E, name=str(spec.get("name", "")), **dims)


# ----------------------------------------------------------------------------
# reports


def _certificates(res) -> dict:
    primal = None if res.primal is None else {"xi": res.primal.xi, "S": res.primal.S}
    d = res.dual
    return {"primal": primal, "dual": {"P": d.P, "Q": d.Q, "d_R": d.d_R, "d_B": d.d_B}}


def _header(args) -> dict:
    out = {"tool": "postcap", "version": __version__, "seed": args.seed,
           "tolerances": {"gap_bits": args.gap, "psd_tol": args.psd_tol, "rank_tol": args.rank_tol}}
    if not args.deterministic:
        out["timestamp"] = datetime.now(timezone.utc).isoformat()
    return out


def _iomega(args, ch):
    return iomega_channel(ch, args.gap, tol=args.psd_tol, rank_tol=args.rank_tol)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_iomega(args) -> int:
    spec = read_channel_spec(args.channel)
    ch = channel_from_spec(spec)
    res = _iomega(args, ch)
    body = {"lower_bits": res.lower_bits, "upper_bits": res.upper_bits, "finite": res.finite,
            "gap_bits": res.gap_bits, "iterations": res.iterations}
    if args.json:
        payload = _header(args) | {"channel": spec, "iomega": body, "certificates": _certificates(res)}
        _emit(dumps(payload) + "\n", args.out)
    elif args.csv:
        _emit("lower_bits,upper_bits,finite\n"
              f"{fmt_float(res.lower_bits).strip(chr(34))},{fmt_float(res.upper_bits).strip(chr(34))},{res.finite}\n",
              args.out)
    else:
        if not res.finite:
            line = "I_omega = +inf (support obstruction)"
        else:
            line = f"I_omega in [{res.lower_bits:.6f}, {res.upper_bits:.6f}] bits"
        cert = ("primal xi = %.10g, dual ratio = %.10g" % (res.primal.xi, res.dual.ratio(ch.choi))
                if res.finite else "dual certificate separates the support")
        _emit(f"{line}\n{cert}\n", args.out)
    return EXIT_OK


def eps_values(args) -> list[float]:
    if args.eps_grid:
        try:
            a, b, step = (float(t) for t in args.eps_grid.split(":"))
        except ValueError as exc:
            raise InputError(f"--eps-grid must look like A:B:STEP, got {args.eps_grid!r}") from exc
        if step <= 0 or b < a:
            raise InputError("--eps-grid needs STEP > 0 and B >= A")
        count = int(round((b - a) / step)) + 1
        return sorted(round(a + k * step, 12) for k in range(count))
    if args.eps is None:
        raise InputError("give --eps or --eps-grid")
    return [args.eps]


def _row(rep) -> list[str]:
    vals = [rep.eps, rep.q_lower_bits, rep.q_upper_bits, rep.c_lower_bits, rep.c_upper_bits,
            rep.asymptotic_c_bits, rep.asymptotic_q_bits]
    return [fmt_float(v).strip('"') for v in vals]


def cmd_capacity(args) -> int:
    spec = read_channel_spec(args.channel)
    ch = channel_from_spec(spec)
    grid = eps_values(args)
    res = _iomega(args, ch)
    rows = [capacity_report(res, e) for e in grid]
    if args.json:
        payload = _header(args) | {"channel": spec, "reports": rows, "certificates": _certificates(res)}
        _emit(dumps(payload) + "\n", args.out)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(_row(r))
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _converse_check(res, d_M: int, eps: float):
    q_hi = oneshot_quantum_bounds(res, eps)[1]
    if q_hi != INF and d_M > round(2.0 ** q_hi):
        raise InfeasibleRate(f"rate infeasible (one-shot converse): d_M={d_M} exceeds {round(2.0 ** q_hi)}")


def _achiever_bound(params) -> float:
    """Certified conditional error of the achiever at any pure input."""
    d2 = params.d_M ** 2
    if params.trivial:
        return 1.0 - 1.0 / d2
    delta = max(params.lam * params.mu - params.ratio, 0.0)
    good = params.r * (params.ratio - 1.0)
    return 1.0 - good / (delta / params.mu + good) * (1.0 - params.eps_prime)


def cmd_simulate(args) -> int:
    spec = read_channel_spec(args.channel)
    ch = channel_from_spec(spec)
    if args.dm < 1:
        raise InputError("--dm must be positive")
    eps = args.eps
    res = _iomega(args, ch)
    _converse_check(res, args.dm, eps)
    if args.scheme == "teleport":
        proto = TeleportProtocol.from_dual(ch, args.dm, res.dual)
        theta = build_teleport(ch, args.dm, proto)
        bound = teleport_error_bound(ch, args.dm, proto)
    else:
        theta = build_pna_achiever(ch, args.dm, eps, res.dual, res.primal)
        bound = _achiever_bound(achiever_parameters(args.dm, eps, res.dual, res.primal, ch.choi))
    sim = apply_supermap(theta, ch)
    me_err = 1.0 - me_fidelity(sim)
    success = float(np.trace(sim.choi).real)
    body = {"scheme": args.scheme, "d_M": args.dm, "eps": eps, "error_bound": bound,
            "me_error": me_err, "success_probability": success, "meets_eps": bool(bound <= eps),
            "iomega_lower_bits": res.lower_bits, "iomega_upper_bits": res.upper_bits}
    if args.json:
        _emit(dumps(_header(args) | {"channel": spec, "simulation": body}) + "\n", args.out)
    else:
        _emit(f"scheme {args.scheme}, d_M = {args.dm}, eps = {eps}\n"
              f"conditional error bound: {bound:.10g}\n"
              f"maximally entangled input error: {me_err:.10g}\n"
              f"conclusive probability: {success:.10g}\n", args.out)
    return EXIT_OK


def _scheme_supermap(args) -> Supermap:
    if args.supermap:
        return supermap_from_spec(read_channel_spec(args.supermap))
    if args.scheme == "ctc":
        return build_pea_supermap(ctc_counterexample())
    if args.scheme == "identity":
        return identity_supermap(2)
    ch = channel_from_spec(read_channel_spec(args.channel))
    res = _iomega(args, ch)
    if args.scheme == "teleport":
        return build_teleport(ch, args.dm, TeleportProtocol.from_dual(ch, args.dm, res.dual))
    if args.scheme == "pna":
        return build_pna_achiever(ch, args.dm, args.eps or 0.5, res.dual, res.primal)
    raise InputError(f"unknown scheme {args.scheme!r}")


def cmd_check(args) -> int:
    if not args.supermap and not args.scheme:
        raise InputError("give --supermap FILE or --scheme")
    theta = _scheme_supermap(args)
    out: dict = {}
    for direction in args.direction:
        if direction == "replacement":
            viol, p, sigma = check_replacement_preserving(theta, args.samples, args.seed)
            out["replacement"] = {"violation": viol, "p": p, "sigma_prime": sigma}
        else:
            out[direction] = {"violation": check_nonsignalling(theta, direction, args.samples, args.seed)}
    if args.json:
        _emit(dumps(_header(args) | {"checks": out}) + "\n", args.out)
    else:
        lines = []
        for k, v in out.items():
            if k == "replacement":
                lines.append(f"replacement violation: {v['violation']:.3e} (p = {v['p']:.10g})")
            else:
                lines.append(f"{k} violation: {v['violation']:.3e}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    """Re-check the certificates stored in a JSON report."""
    data = read_channel_spec(args.report)
    try:
        ch = channel_from_spec(data["channel"])
        certs = data["certificates"]
        dual = certs["dual"]
    except KeyError as exc:
        raise InputError(f"report is missing {exc}") from exc
    dc = DualCertificate(decode_matrix(dual["P"]), decode_matrix(dual["Q"]), int(dual["d_R"]), int(dual["d_B"]))
    ok = validate_dual(ch.choi, dc, psd_tol=args.psd_tol)
    lower = dc.bound_bits(ch.choi)
    upper = INF
    if certs.get("primal") is not None:
        pc = PrimalCertificate(_parse_float(certs["primal"]["xi"]), decode_matrix(certs["primal"]["S"]))
        ok = ok and validate_primal(ch.choi, pc, ch.d_in, ch.d_out, psd_tol=args.psd_tol)
        upper = pc.bits
    if not ok:
        sys.stderr.write("certificate validation failed\n")
        return EXIT_INPUT
    lo = "+inf" if lower == INF else f"{max(lower, 0.0):.6f}"
    hi = "+inf" if upper == INF else f"{upper:.6f}"
    sys.stdout.write(f"certificates valid: I_omega in [{lo}, {hi}] bits\n")
    return EXIT_OK


# ----------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gap", type=float, default=DEFAULT_GAP, help="bisection gap in bits")
    common.add_argument("--psd-tol", type=float, default=hk.PSD_TOL)
    common.add_argument("--rank-tol", type=float, default=hk.RANK_TOL)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--deterministic", action="store_true", help="omit the timestamp")
    common.add_argument("--json", action="store_true")
    common.add_argument("--out", default=None, help="write output to FILE")

    p = argparse.ArgumentParser(prog="postcap", description="Certified projective mutual information and the capacity bounds built on it.",
                                epilog="exit codes: 0 ok, 1 input error, 2 solver failure, 3 infeasible rate")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("iomega", parents=[common], help="projective mutual information of a channel")
    s.add_argument("--channel", required=True, help="spec file or builtin:NAME:k=v,...")
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_iomega)

    s = sub.add_parser("capacity", parents=[common], help="one-shot and asymptotic capacity bounds")
    s.add_argument("--channel", required=True)
    s.add_argument("--eps", type=float)
    s.add_argument("--eps-grid", help="A:B:STEP, inclusive")
    s.set_defaults(func=cmd_capacity)

    s = sub.add_parser("simulate", parents=[common], help="build and score a protocol")
    s.add_argument("--channel", required=True)
    s.add_argument("--dm", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--scheme", choices=["teleport", "pna"], default="teleport")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check", parents=[common], help="nonsignalling and replacement checks")
    s.add_argument("--supermap", help="supermap spec file")
    s.add_argument("--scheme", choices=["teleport", "pna", "ctc", "identity"])
    s.add_argument("--channel", default="builtin:depolarizing:p=0.5")
    s.add_argument("--dm", type=int, default=2)
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--samples", type=int, default=10)
    s.add_argument("--direction", nargs="+", choices=["ab", "ba", "replacement"], default=["ab", "ba", "replacement"])
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("validate", parents=[common], help="re-check certificates in a JSON report")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if getattr(args, "eps", None) is not None and not 0 < args.eps < 1:
        sys.stderr.write(f"error: eps={args.eps} must lie in (0, 1)\n")
        return EXIT_INPUT
    try:
        return args.func(args)
    except InfeasibleRate as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INFEASIBLE
    except (SolverFailure, FeasibilityFailure, NoConvergence) as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER
    except (PostcapError, ValueError, KeyError, TypeError, IndexError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
