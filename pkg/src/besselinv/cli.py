"""Command-line front end.

Every run writes its artifacts to ``--out`` (default ``$BESSELINV_OUT`` or
the working directory) and starts each artifact with a provenance header:
config hash, tolerances, library versions.  Exit status is 0 on success,
2 when the uniqueness verdict is UNDECIDED and 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import traceback
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_ERROR, EXIT_UNDECIDED = 0, 1, 2
OUT_ENV = "BESSELINV_OUT"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for UNDECIDED
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: usage error: {message}\n")
        raise SystemExit(EXIT_ERROR)


def fmt(x) -> str:
    return f"{x:.17g}"


def _beta(s: str):
    s = s.strip().lower()
    if s in ("inf", "infinity", "dirichlet"):
        return math.inf
    return float(s)


def _betas(s: str) -> list:
    return [_beta(t) for t in s.split(",") if t.strip()]


def _floats(s: str) -> list[float]:
    return [float(t) for t in s.split(",") if t.strip()]


def _potential(spec: str):
    from .potential import load_potential, named_potential

    if spec is None:
        raise UsageError("a potential is required (--q)")
    p = Path(spec)
    if p.suffix in (".toml", ".json"):
        if not p.exists():
            raise UsageError(f"--q: file not found: {spec}")
        return load_potential(p)
    return named_potential(spec)


def _jsonable(o):
    if is_dataclass(o) and not isinstance(o, type):
        return _jsonable(asdict(o))
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else str(x)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, complex):
        return [o.real, o.imag]
    return o


def provenance(config: dict, tolerances: dict) -> dict:
    import numba
    import scipy

    canon = json.dumps(_jsonable(config), sort_keys=True)
    return {
        "tool": "besselinv", "version": __version__,
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "config": _jsonable(config), "tolerances": tolerances,
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


class Emitter:
    def __init__(self, out: Path, header: dict):
        self.out = out
        self.header = header
        out.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []

    def json(self, name: str, payload: dict) -> Path:
        path = self.out / name
        path.write_text(json.dumps({"provenance": self.header, **_jsonable(payload)}, indent=2) + "\n")
        self.written.append(str(path))
        return path

    def csv(self, name: str, header: list[str], rows) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# besselinv {__version__} config_hash={self.header['config_hash']}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
        self.written.append(str(path))
        return path


def _tolerances(args) -> dict:
    from . import solver

    return {"rtol": args.rtol if args.rtol is not None else solver.RTOL, "atol": solver.ATOL}


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(args, em: Emitter) -> int:
    from .spectrum import locate_eigenvalues

    q = _potential(args.q)
    rows, payload = [], []
    for beta in args.beta:
        sp = locate_eigenvalues(args.ell, q, beta, args.n, first=args.first, jobs=args.jobs,
                                with_constants=args.zeta, rtol=args.rtol)
        payload.append(sp.to_dict())
        for p in sp.points:
            rows.append([fmt(beta) if math.isfinite(beta) else "inf", p.index, float(p.lam),
                         float(p.zeta) if p.zeta is not None else ""])
    em.csv("spectrum.csv", ["beta", "index", "lambda", "zeta"], rows)
    em.json("spectrum.json", {"spectra": payload})
    for r in rows:
        print(*[v if isinstance(v, str) else (fmt(v) if isinstance(v, float) else v) for v in r], sep=",")
    return EXIT_OK


def cmd_hscan(args, em: Emitter) -> int:
    from .hfield import (agreement_point, circle_profile, h_profile, mean_perturbation_limit,
                         real_zeros_of_h)

    q, qh = _potential(args.q), _potential(args.qh)
    a = agreement_point(q, qh, args.a)
    lams = np.linspace(args.lam_lo, args.lam_hi, args.samples)
    prof = h_profile(args.ell, q, qh, list(lams), a=a, derivative=args.derivative, jobs=args.jobs)
    em.csv("h_profile.csv", ["lambda", "H", "log_abs_H", "Hdot"],
           [[s.lam.real, s.h.value.real, s.h.log_abs, s.hdot if s.hdot is not None else ""]
            for s in prof.samples])
    out = {"profile": prof.to_dict(),
           "real_zeros": real_zeros_of_h(args.ell, q, qh, args.lam_lo, args.lam_hi, a=a)}
    if args.circle:
        out["circles"] = {fmt(r): circle_profile(args.ell, q, qh, r, a=a, jobs=args.jobs).to_dict()
                          for r in args.circle}
    if args.limit:
        lim = mean_perturbation_limit(int(args.ell), q, qh, a=a)
        out["limit"] = {"value": lim.value, "inconclusive": lim.inconclusive, "spread": lim.spread,
                        "method": lim.method}
        print(f"limit {fmt(lim.value)} inconclusive={lim.inconclusive}")
    em.json("hscan.json", out)
    print(f"agreement point {fmt(a)}; real zeros {len(out['real_zeros'])}")
    return EXIT_OK


def cmd_uniqueness(args, em: Emitter) -> int:
    from .uniqueness import UNDECIDED, criterion_margin, dataset_corollary, load_dataset

    if not Path(args.data).exists():
        raise UsageError(f"--data: file not found: {args.data}")
    data = load_dataset(args.data, a=args.a)
    R = np.linspace(args.r_grid[0], args.r_grid[1], int(args.r_grid[2])) if args.r_grid else None
    rep = criterion_margin(data, R)
    out = {"verdict": rep.verdict, "criterion": rep.to_dict()}
    try:
        cor = dataset_corollary(data)
        out["corollary"] = cor.to_dict()
    except (ValueError, ArithmeticError) as e:
        out["corollary"] = {"skipped": str(e)}
    em.json("uniqueness.json", out)
    em.csv("margin.csv", ["R", "integral", "margin", "running_max"],
           zip(rep.R, rep.integral, rep.margin, rep.running_max))
    print(f"verdict {rep.verdict} coef_lnR={fmt(rep.coef_lnR)} slope_R={fmt(rep.slope_R)}")
    return EXIT_UNDECIDED if rep.verdict == UNDECIDED else EXIT_OK


def _problem(args):
    from .inverse import ReconstructionProblem, synthetic_targets

    if args.problem:
        if not Path(args.problem).exists():
            raise UsageError(f"--problem: file not found: {args.problem}")
        pr = ReconstructionProblem.from_dict(json.loads(Path(args.problem).read_text()))
        if args.seed is not None:
            pr.seed = args.seed
        return pr
    if not args.truth:
        raise UsageError("either --problem or --truth is required")
    truth = _potential(args.truth)
    beta = args.beta[0]
    idx = list(range(1, args.n + 1)) if args.indices is None else [int(v) for v in args.indices]
    zidx = idx if args.zeta_indices is None else [int(v) for v in args.zeta_indices]
    tg = synthetic_targets(args.ell, truth, beta, idx, zeta_indices=zidx, a=args.a or 1.0)
    tail = truth if (args.a or 1.0) < 1 else None
    return ReconstructionProblem(args.ell, tg, args.basis, args.dim, tail=tail, reg=args.reg,
                                 max_iter=args.max_iter, seed=args.seed or 0, truth=truth)


def cmd_reconstruct(args, em: Emitter) -> int:
    from .inverse import reconstruct

    pr = _problem(args)
    res = reconstruct(pr, jobs=args.jobs)
    em.json("reconstruction.json", {"problem": pr.to_dict(), "result": res.to_dict()})
    err = "n/a" if res.l2_error is None else fmt(res.l2_error)
    print(f"converged={res.converged} max_residual={fmt(res.max_residual)} l2_error={err}")
    return EXIT_OK


def cmd_probe(args, em: Emitter) -> int:
    from .inverse import nonuniqueness_probe

    pr = _problem(args)
    res = nonuniqueness_probe(pr, args.rho)
    em.json("probe.json", {"problem": pr.to_dict(), "result": res.to_dict()})
    print(f"{res.status} distance={fmt(res.distance)} max_residual={fmt(res.max_residual)}")
    return EXIT_OK


def cmd_verify(args, em: Emitter) -> int:
    from .solver import characteristic, characteristic_wronskian
    from .spectrum import derivative_identity_residual, locate_eigenvalues, multiplier_kappa, norming_constant, tau

    q = _potential(args.q)
    rows = []
    worst = 0.0
    for beta in args.beta:
        sp = locate_eigenvalues(args.ell, q, beta, args.n, jobs=args.jobs)
        for p in sp.points:
            if args.identity == "lemma2.2":
                v = derivative_identity_residual(p, args.ell, q)
            elif args.identity == "norming":
                k = multiplier_kappa(p, args.ell, q)
                v = abs(norming_constant(p, args.ell, q) / (k * k * tau(args.ell, q, p.lam)) - 1)
            else:
                lam = p.lam + 1.0
                d1 = characteristic(args.ell, q, lam, beta)
                d2 = characteristic_wronskian(args.ell, q, lam, beta)
                v = abs(d1 - d2) / max(abs(d1), 1e-300)
            worst = max(worst, v)
            rows.append([fmt(beta) if math.isfinite(beta) else "inf", p.index, float(p.lam), float(v)])
    em.csv(f"verify_{args.identity}.csv", ["beta", "index", "lambda", "relative_residual"], rows)
    ok = worst <= args.threshold
    em.json(f"verify_{args.identity}.json", {"identity": args.identity, "max_relative_residual": worst,
                                             "threshold": args.threshold, "passed": ok})
    print(f"{args.identity}: max relative residual {fmt(worst)} ({'ok' if ok else 'FAILED'})")
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {"spectrum": cmd_spectrum, "hscan": cmd_hscan, "uniqueness": cmd_uniqueness,
            "reconstruct": cmd_reconstruct, "probe": cmd_probe, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="besselinv", description="Spectral toolkit for -f'' + l(l+1)x^-2 f + q f on (0,1).")
    ap.add_argument("--version", action="version", version=f"besselinv {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with defaults for this command's options")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--rtol", type=float, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--ell", type=float, default=0.0)
    common.add_argument("--beta", type=_betas, default=[math.inf], help="comma list, 'inf' for Dirichlet")
    common.add_argument("--q", help="potential file (.toml/.json) or name: zero, x, const:<c>")
    common.add_argument("--a", type=float, default=None)
    common.add_argument("--n", type=int, default=10)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectrum", parents=[common])
    p.add_argument("--first", type=int, default=1)
    p.add_argument("--zeta", action="store_true", help="also compute norming constants")

    p = sub.add_parser("hscan", parents=[common])
    p.add_argument("--qh", required=False, default="zero")
    p.add_argument("--lam-lo", type=float, default=-10.0)
    p.add_argument("--lam-hi", type=float, default=400.0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--circle", type=_floats, default=None, help="comma list of radii r (|lam| = r^2)")
    p.add_argument("--derivative", action="store_true")
    p.add_argument("--limit", action="store_true", help="extrapolate lam^(l+1) H at infinity")

    p = sub.add_parser("uniqueness", parents=[common])
    p.add_argument("--data", required=True, help="mixed dataset JSON")
    p.add_argument("--r-grid", type=_floats, default=None, help="lo,hi,count")

    for name in ("reconstruct", "probe"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--problem", help="problem JSON")
        p.add_argument("--truth", help="ground-truth potential for synthetic data")
        p.add_argument("--indices", type=_floats, default=None)
        p.add_argument("--zeta-indices", type=_floats, default=None)
        p.add_argument("--basis", default="cells", choices=["cells", "cosine", "polynomial"])
        p.add_argument("--dim", type=int, default=8)
        p.add_argument("--reg", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=60)
        if name == "probe":
            p.add_argument("--rho", type=float, default=0.1)

    p = sub.add_parser("verify", parents=[common])
    p.add_argument("identity", choices=["lemma2.2", "norming", "wronskian"])
    p.add_argument("--threshold", type=float, default=1e-6)
    return ap


def _apply_config(ap, args, argv):
    """Values from ``--config`` fill options not given on the command line."""
    import tomli

    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"--config: file not found: {path}")
    cfg = tomli.loads(path.read_text())
    section = cfg.get(args.command, cfg)
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, val in section.items():
        if not isinstance(val, (str, int, float, bool, list)):
            continue
        k = key.replace("-", "_")
        if not hasattr(args, k):
            raise UsageError(f"config: unknown field {args.command}.{key}")
        if k in given:
            continue
        if k == "beta":
            val = [_beta(str(v)) for v in (val if isinstance(val, list) else [val])]
        setattr(args, k, val)
    return args


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.config:
            args = _apply_config(ap, args, argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if args.ell < -0.5:
            raise UsageError("--ell must be >= -1/2")
        if args.n < 1:
            raise UsageError("--n must be >= 1")
        config = {k: v for k, v in vars(args).items() if k not in ("out", "jobs")}
        out = Path(args.out or os.environ.get(OUT_ENV, "."))
        em = Emitter(out, provenance(config, _tolerances(args)))
        return COMMANDS[args.command](args, em)
    except UsageError as e:
        sys.stderr.write(f"besselinv: usage error: {e}\n")
        return EXIT_ERROR
    except Exception as e:  # noqa: BLE001 - report and map to exit 1
        mod = type(e).__module__
        sys.stderr.write(f"besselinv: error in {args.command} ({mod}.{type(e).__name__}): {e}\n")
        if os.environ.get("BESSELINV_DEBUG"):
            traceback.print_exc()
        return EXIT_ERROR


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
