"""Command-line experiment runner.

Structured results are JSON, tables are CSV; every float is written with 17
significant digits.  Exit status: 0 success, 1 invalid input, 2 internal
error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diophantine import AlphaRep, badly_approx_classify
from .dynsys import DynSystem, TorusPoint
from .potential import (
    PotentialWindow,
    SampleFunction,
    flatten_along_tube,
    gordon_certify,
    gordon_gap_verify,
    omega_f_tube_sample,
    periodic_approximant,
    sample_potential,
)
from .repetition import prp_probe, qk_divergence_check, rp_search, theorem4_probe
from .spectrum import build_truncation, covariance_check, decay_diagnostic, spectrum_report
from .transfer import (
    GordonProbeReport,
    cayley_max_norms,
    gordon_lower_bound_probe,
    propagate,
    random_invertible,
    random_unit_vectors,
    telescoping_bound_check,
)

SUBCOMMANDS = (
    "orbit", "rp-search", "prp-probe", "theorem4", "classify-alpha", "sample-potential",
    "gordon-certify", "approximant", "flatten", "gordon-gap", "propagate", "gordon-probe",
    "aux1-suite", "aux2-suite", "spectrum", "covariance",
)

# fixed chunking keeps randomized suites independent of the pool size
SUITE_CHUNKS = 16

EXAMPLES = """\
examples:
  gordonlab orbit --system skew --alpha rational:1/4 --omega 0.1,0.2 --lo 0 --hi 2
  gordonlab orbit --system rotation --alpha golden --alpha golden --omega 0,0 --lo 0 --hi 3
  gordonlab classify-alpha --alpha golden --horizon 100000
  gordonlab classify-alpha --alpha liouville:4 --horizon 100000
  gordonlab classify-alpha --alpha rational:1/3 --horizon 100
  gordonlab rp-search --system rotation --alpha golden --omega 0 --epsilon 0.01 --r 2 --qmax 100
  gordonlab rp-search --system skew --alpha golden --omega 0,0 --epsilon 0.05 --r 1 --qmax 2000
  gordonlab prp-probe --system rotation --alpha golden --omega 0.3 --kmax 8 --qmax 10000
  gordonlab prp-probe --system skew --alpha golden --omega 0,0 --kmax 3 --qmax 2000
  gordonlab prp-probe --system rotation --alpha rational:0/1 --omega 0.4 --kmax 4 --qmax 10
  gordonlab theorem4 --alpha liouville:4 --omega 0.1,0.2 --kmax 3 --qmax 2000
  gordonlab theorem4 --alpha golden --omega 0,0 --kmax 3 --qmax 2000
  gordonlab theorem4 --alpha rational:1/4 --omega 0.1,0.2 --kmax 3 --qmax 2000
  gordonlab sample-potential --system rotation --alpha rational:1/2 --omega 0 --f cos --lo 0 --hi 4
  gordonlab sample-potential --system skew --alpha rational:1/4 --omega 0.1,0.2 --f cos --axis 1 --lo 0 --hi 3
  gordonlab gordon-certify --system periodic --pattern 1,-1 --q-list 2,4,6 --C 1
  gordonlab gordon-certify --system rotation --alpha liouville:3 --omega 0 --f cos --q-list 10 --C 2
  gordonlab gordon-certify --system rotation --alpha 'cf:0;1,...' --alpha 'cf:0;2,...' --omega 0,0 --f sinsum --q-list 3,8,21
  gordonlab approximant --system periodic --pattern 0,1,2 --q 3 --m 1
  gordonlab flatten --alpha golden --k 3 --f cos
  gordonlab gordon-gap --alpha golden --k 3 --j 1
  gordonlab gordon-gap --alpha golden --k 3 --j 1 --offset-frac 0.5
  gordonlab gordon-gap --alpha golden --k 3 --j 1 --use-base
  gordonlab propagate --system none --constant 0 --E 0 --psi0 1,0 --n 1
  gordonlab gordon-probe --system none --constant 0 --E 0 --psi0 1,0 --T-list 1,2,3
  gordonlab gordon-probe --system periodic --pattern 0,1 --E-grid=-3,3,16 --psi0 1,0 --T-list 2,4,6,8
  gordonlab gordon-probe --system rotation --alpha liouville:3 --omega 0 --f cos --E 0.5 --psi0 1,0 --T-list 10
  gordonlab aux1-suite --cases 1000 --max-len 20 --seed 0
  gordonlab aux2-suite --cases 10000 --seed 0
  gordonlab spectrum --system none --constant 0 --N 3
  gordonlab spectrum --system none --constant 0 --N 100
  gordonlab covariance --system rotation --alpha golden --omega 0.3 --f cos --t 1 --N 32
  gordonlab covariance --system skew --alpha golden --omega 0.3,0.7 --f cos --t -3 --N 64
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}\n")


# -- output -------------------------------------------------------------------


def _fmt(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj) -> str:
    """JSON with floats at 17 significant digits and stable key order."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    return json.dumps(str(obj))


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def resolve_threads(flag: int | None) -> int:
    """--threads, then GORDONLAB_THREADS, then the machine's core count."""
    if flag is not None:
        n = flag
    elif os.environ.get("GORDONLAB_THREADS"):
        n = int(os.environ["GORDONLAB_THREADS"])
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ValueError("thread count must be >= 1")
    return n


# -- config --------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def to_text(self) -> str:
        return json.dumps({"subcommand": self.subcommand, "params": self.params}, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        if "subcommand" not in raw:
            raise ValueError("config needs a 'subcommand' field")
        return cls(raw["subcommand"], dict(raw.get("params", {})))

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "ExperimentConfig":
        skip = {"cmd", "config", "dump_config", "output", "threads"}
        return cls(args.cmd, {k: v for k, v in sorted(vars(args).items()) if k not in skip})


# -- argument handling -----------------------------------------------------------


def _add_system(p, potential: bool = False):
    kinds = ["rotation", "skew"] + (["none", "periodic"] if potential else [])
    p.add_argument("--system", choices=kinds, default="rotation")
    p.add_argument("--alpha", action="append", default=None, help="repeat once per torus coordinate")
    p.add_argument("--omega", default="0")
    if potential:
        p.add_argument("--f", choices=["cos", "sinsum", "constant"], default="cos")
        p.add_argument("--axis", type=int, default=0)
        p.add_argument("--constant", type=float, default=0.0)
        p.add_argument("--pattern", default=None, help="one period of V for --system periodic")
        p.add_argument("--window-csv", default=None, help="read V from a CSV with columns n,V")


def _system(args) -> DynSystem:
    alphas = [AlphaRep.parse(a) for a in (args.alpha or ["golden"])]
    if args.system == "skew":
        if len(alphas) != 1:
            raise ValueError("the skew-shift takes one --alpha")
        return DynSystem.skew(alphas[0])
    if args.system != "rotation":
        raise ValueError(f"--system {args.system} has no dynamics")
    return DynSystem.rotation(*alphas)


def _omega(args, sys: DynSystem) -> TorusPoint:
    w = TorusPoint(tuple(_floats(args.omega)))
    if w.dim != sys.dim:
        raise ValueError(f"--omega has {w.dim} coordinates, system needs {sys.dim}")
    return w


def _sample_fn(args) -> SampleFunction:
    if args.f == "cos":
        return SampleFunction.cosine(args.axis)
    if args.f == "sinsum":
        return SampleFunction.sinsum()
    return SampleFunction.constant(args.constant)


def _potential(args, lo: int, hi: int) -> PotentialWindow:
    if args.window_csv:
        with open(args.window_csv) as fh:
            return PotentialWindow.from_csv(fh.read())
    if args.system == "none":
        return PotentialWindow.from_values(lo, np.full(hi - lo + 1, args.constant))
    if args.system == "periodic":
        if not args.pattern:
            raise ValueError("--system periodic needs --pattern")
        pat = np.array(_floats(args.pattern))
        return PotentialWindow.from_values(lo, pat[np.arange(lo, hi + 1) % len(pat)])
    sys = _system(args)
    return sample_potential(_sample_fn(args), sys, _omega(args, sys), lo, hi)


def build_parser() -> _Parser:
    top = _Parser(prog="gordonlab", description="Gordon-potential laboratory",
                  epilog=EXAMPLES, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = top.add_subparsers(dest="cmd", parser_class=_Parser)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="JSON config; explicit flags win")
        p.add_argument("--output", "-o", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        return p

    p = cmd("orbit", "orbit coordinates as CSV")
    _add_system(p)
    p.add_argument("--lo", type=int, default=0)
    p.add_argument("--hi", type=int, default=10)

    p = cmd("rp-search", "smallest return time at one (epsilon, r) level")
    _add_system(p)
    p.add_argument("--epsilon", type=float, required=False, default=0.1)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--qmax", type=int, default=1000)
    p.add_argument("--no-accelerate", action="store_true")

    p = cmd("prp-probe", "return times at levels 1/k, r = k")
    _add_system(p)
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--qmax", type=int, default=1000)

    p = cmd("theorem4", "Diophantine verdict beside a skew-shift probe")
    p.add_argument("--alpha", default="golden")
    p.add_argument("--omega", default="0,0")
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--qmax", type=int, default=2000)
    p.add_argument("--horizon", type=int, default=10**5)

    p = cmd("classify-alpha", "badly-approximable evidence for alpha")
    p.add_argument("--alpha", default="golden")
    p.add_argument("--horizon", type=int, default=10**5)

    p = cmd("sample-potential", "V(n) = f(T^n omega) as CSV")
    _add_system(p, potential=True)
    p.add_argument("--lo", type=int, default=0)
    p.add_argument("--hi", type=int, default=10)

    p = cmd("gordon-certify", "Gordon inequalities for a list of return times")
    _add_system(p, potential=True)
    p.add_argument("--q-list", required=False, default="1")
    p.add_argument("--m-list", default=None)
    p.add_argument("--C", type=float, default=2.0)

    p = cmd("approximant", "periodic approximant of V at one return time")
    _add_system(p, potential=True)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--m", type=int, default=1)

    for name, help_ in (("flatten", "flatten f along an orbit tube on the circle"),
                        ("gordon-gap", "Gordon gaps of the flattened function at a tube point")):
        p = cmd(name, help_)
        p.add_argument("--alpha", default="golden")
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--qk", type=int, default=None, help="default: smallest q with an RP certificate at (1/k, 3)")
        p.add_argument("--qmax", type=int, default=10**4)
        p.add_argument("--f", choices=["cos", "constant"], default="cos")
        p.add_argument("--constant", type=float, default=0.0)
        if name == "gordon-gap":
            p.add_argument("--j", type=int, default=1)
            p.add_argument("--offset-frac", type=float, default=0.0, help="offset as a fraction of r_k")
            p.add_argument("--use-base", action="store_true")

    p = cmd("propagate", "transfer-matrix propagation of Psi(0)")
    _add_system(p, potential=True)
    p.add_argument("--E", type=float, default=0.0)
    p.add_argument("--psi0", default="1,0")
    p.add_argument("--n", type=int, default=1)

    p = cmd("gordon-probe", "four-point lower bounds over an energy grid")
    _add_system(p, potential=True)
    p.add_argument("--E", type=float, default=None)
    p.add_argument("--E-grid", default=None, help="lo,hi,count")
    p.add_argument("--psi0", default="1,0")
    p.add_argument("--T-list", default="1")

    p = cmd("aux1-suite", "randomized telescoping-bound suite")
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--max-len", type=int, default=20)

    p = cmd("aux2-suite", "randomized Cayley-Hamilton bound suite")
    p.add_argument("--cases", type=int, default=10**4)

    p = cmd("spectrum", "eigenvalues, residuals and IPR of a truncation")
    _add_system(p, potential=True)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--center", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-13)

    p = cmd("covariance", "covariance identity on interior indices")
    _add_system(p, potential=True)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--N", type=int, default=64)
    return top


# -- subcommand bodies -------------------------------------------------------------


def _run_orbit(args, threads):
    sys = _system(args)
    orb = sys.orbit(_omega(args, sys), args.lo, args.hi)
    lines = ["n," + ",".join(f"x{i}" for i in range(sys.dim))]
    for n, row in zip(range(args.lo, args.hi + 1), orb):
        lines.append(f"{n}," + ",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _run_rp_search(args, threads):
    sys = _system(args)
    w = _omega(args, sys)
    cert = rp_search(sys, w, args.epsilon, args.r, args.qmax, accelerate=not args.no_accelerate, workers=threads)
    if cert is None:
        return dumps({"found": False, "epsilon": args.epsilon, "r": args.r, "q_max_searched": args.qmax,
                      "system": sys.describe(), "omega": list(w.coords)}) + "\n"
    return dumps({"found": True, **cert.to_dict()}) + "\n"


def _run_prp_probe(args, threads):
    sys = _system(args)
    rep = prp_probe(sys, _omega(args, sys), args.kmax, args.qmax, workers=threads)
    out = rep.to_dict()
    try:
        chk = qk_divergence_check(rep)
        out["divergence"] = {"ok": chk.ok, "q_sequence": chk.q_sequence}
    except ValueError as e:
        out["divergence"] = {"ok": None, "error": str(e)}
    return dumps(out) + "\n"


def _run_theorem4(args, threads):
    alpha = AlphaRep.parse(args.alpha)
    w = TorusPoint(tuple(_floats(args.omega)))
    rep = theorem4_probe(alpha, w, args.kmax, args.qmax, args.horizon, workers=threads)
    return dumps(rep.to_dict()) + "\n"


def _run_classify(args, threads):
    alpha = AlphaRep.parse(args.alpha)
    return dumps({"alpha": alpha.text, **badly_approx_classify(alpha, args.horizon).to_dict()}) + "\n"


def _run_sample(args, threads):
    return _potential(args, args.lo, args.hi).to_csv()


def _run_certify(args, threads):
    qs = _ints(args.q_list)
    V = _potential(args, 1 - max(qs), 2 * max(qs))
    ms = _ints(args.m_list) if args.m_list else None
    return dumps(gordon_certify(V, qs, args.C, ms).to_dict()) + "\n"


def _run_approximant(args, threads):
    V = _potential(args, -2 * args.q, 2 * args.q)
    return dumps(periodic_approximant(V, args.q, args.m).to_dict()) + "\n"


def _flattened(args):
    alpha = AlphaRep.parse(args.alpha)
    anchor = TorusPoint.from_exact([alpha.exact_value()])
    qk = args.qk
    if qk is None:
        cert = rp_search(DynSystem.rotation(alpha), anchor, 1.0 / args.k, 3, args.qmax)
        if cert is None:
            raise ValueError(f"no return time up to {args.qmax} at level (1/{args.k}, 3)")
        qk = cert.q
    f = SampleFunction.cosine() if args.f == "cos" else SampleFunction.constant(args.constant)
    return alpha, flatten_along_tube(f, alpha, args.k, qk, anchor)


def _run_flatten(args, threads):
    return dumps(_flattened(args)[1].to_dict()) + "\n"


def _run_gap(args, threads):
    alpha, g = _flattened(args)
    w = omega_f_tube_sample(alpha, g.k, g.q_k, args.j, g.r_k, args.offset_frac * g.r_k, g.anchor)
    rep = gordon_gap_verify(g, w, use_base=args.use_base)
    return dumps({"k": g.k, "q_k": g.q_k, "r_k": g.r_k, "omega": list(w.coords), **rep.to_dict()}) + "\n"


def _run_propagate(args, threads):
    lo, hi = min(0, args.n), max(0, args.n)
    V = _potential(args, lo, hi)
    psi = propagate(V, args.E, _floats(args.psi0), args.n)
    return dumps({"E": args.E, "n": args.n, "psi": [float(psi[0]), float(psi[1])]}) + "\n"


def _energies(args) -> list[float]:
    if args.E_grid:
        lo, hi, count = args.E_grid.split(",")
        return np.linspace(float(lo), float(hi), int(count)).tolist()
    return [0.0 if args.E is None else args.E]


def _run_gordon_probe(args, threads):
    Ts = _ints(args.T_list)
    V = _potential(args, -2 * max(Ts), 2 * max(Ts) + 1)
    psi0 = _floats(args.psi0)
    Es = _energies(args)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        reports = list(pool.map(lambda E: gordon_lower_bound_probe(V, E, psi0, Ts), Es))
    return GordonProbeReport(tuple(r for rep in reports for r in rep.rows)).to_csv()


def _chunk_sizes(total: int) -> list[int]:
    base, extra = divmod(total, SUITE_CHUNKS)
    return [base + (i < extra) for i in range(SUITE_CHUNKS)]


def _aux1_chunk(seed, n, max_len):
    rng = np.random.default_rng(seed)
    worst, held = -np.inf, 0
    for _ in range(n):
        L = int(rng.integers(1, max_len + 1))
        A = rng.uniform(-2, 2, size=(L, 2, 2))
        Am = rng.uniform(-2, 2, size=(L, 2, 2))
        chk = telescoping_bound_check(A, Am)
        held += chk.holds
        worst = max(worst, chk.lhs / chk.rhs if chk.rhs > 0 else 0.0)
    return held, worst


def _run_aux1(args, threads):
    seeds = np.random.SeedSequence(args.seed).spawn(SUITE_CHUNKS)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        res = list(pool.map(lambda a: _aux1_chunk(*a, args.max_len), zip(seeds, _chunk_sizes(args.cases))))
    held = sum(h for h, _ in res)
    return dumps({"suite": "aux1", "cases": args.cases, "max_len": args.max_len, "seed": args.seed,
                  "held": held, "all_hold": held == args.cases,
                  "max_lhs_over_rhs": max(w for _, w in res)}) + "\n"


def _aux2_chunk(seed, n):
    rng = np.random.default_rng(seed)
    return cayley_max_norms(random_invertible(rng, n), random_unit_vectors(rng, n))


def _run_aux2(args, threads):
    seeds = np.random.SeedSequence(args.seed).spawn(SUITE_CHUNKS)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        res = np.concatenate(list(pool.map(lambda a: _aux2_chunk(*a), zip(seeds, _chunk_sizes(args.cases)))))
    held = int(np.sum(res >= 0.5 - 1e-9))
    return dumps({"suite": "aux2", "cases": args.cases, "seed": args.seed, "held": held,
                  "all_hold": held == args.cases, "min_max_norm": float(res.min())}) + "\n"


def _run_spectrum(args, threads):
    start = args.center - args.N // 2
    V = _potential(args, min(0, start), max(0, start + args.N - 1))
    return spectrum_report(build_truncation(V, args.N, args.center), args.tol).to_csv()


def _run_covariance(args, threads):
    sys = _system(args)
    chk = covariance_check(_sample_fn(args), sys, _omega(args, sys), args.t, args.N)
    return dumps({"t": args.t, "N": args.N, **chk.to_dict()}) + "\n"


RUNNERS = {
    "orbit": _run_orbit, "rp-search": _run_rp_search, "prp-probe": _run_prp_probe,
    "theorem4": _run_theorem4, "classify-alpha": _run_classify, "sample-potential": _run_sample,
    "gordon-certify": _run_certify, "approximant": _run_approximant, "flatten": _run_flatten,
    "gordon-gap": _run_gap, "propagate": _run_propagate, "gordon-probe": _run_gordon_probe,
    "aux1-suite": _run_aux1, "aux2-suite": _run_aux2, "spectrum": _run_spectrum,
    "covariance": _run_covariance,
}


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        raise UsageError(parser.format_usage() + "gordonlab: error: a subcommand is required\n")
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_text(fh.read())
        if cfg.subcommand != args.cmd:
            raise UsageError(f"config is for {cfg.subcommand!r}, not {args.cmd!r}\n")
        sp = parser._subparsers._group_actions[0].choices[args.cmd]
        known = {a.dest for a in sp._actions}
        unknown = set(cfg.params) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}\n")
        sp.set_defaults(**cfg.params)
        args = parser.parse_args(argv)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except UsageError as e:
        sys.stderr.write(str(e))
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except (OSError, ValueError) as e:
        sys.stderr.write(f"gordonlab: error: {e}\n")
        return 1
    try:
        if args.dump_config:
            text = ExperimentConfig.from_args(args).to_text()
        else:
            text = RUNNERS[args.cmd](args, resolve_threads(args.threads))
    except (ValueError, KeyError, OSError) as e:
        sys.stderr.write(f"gordonlab {args.cmd}: error: {e}\n")
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
