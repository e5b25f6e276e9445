"""Command-line front end.

Subcommands cover single-shot queries (insphere, make-state, sample,
certify, family, witness, gme) and batch campaigns (volume, bisect, tables,
generate, gme-campaign). Flag precedence is command line, then --config
file, then built-in defaults.

Exit codes: 0 success, 2 certification is inconclusive or the family is
infeasible, 3 solver failure, 4 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import campaigns, lhs
from .conic import SolverConfig
from .errors import LhsError
from .geometry import SOLID_NAMES, random_directions, set_to_json, solid_directions
from .operators import (
    DensityMatrix,
    HermitianOperator,
    negativity,
    operator_from_json,
    operator_to_json,
)
from .states import (
    BELL_VECTORS,
    RngStream,
    amplitude_damped,
    bell_diagonal,
    noisy_tripartite,
    sample_bures,
    sample_hs,
    werner,
)
from .witnesses import QUANTIFIER_KINDS, gme_witness, optimal_witness

__all__ = ["main"]

EXIT_OK = 0
EXIT_INCONCLUSIVE = 2
EXIT_SOLVER_FAILURE = 3
EXIT_BAD_INPUT = 4


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_config(path: str) -> dict:
    """Flat `key = value` lines; # starts a comment; values are coerced to
    bool/int/float when they parse as one."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LhsError("bad-config", f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LhsError("bad-config", f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise LhsError("bad-config", f"line {lineno}: empty key")
        values[key.replace("-", "_")] = _coerce(value)
    return values


def _solver_config(args) -> SolverConfig:
    kwargs = {}
    if getattr(args, "tol_feas", None) is not None:
        kwargs["eps_feas"] = float(args.tol_feas)
    for key in ("eps_psd", "max_iterations", "inaccurate_band"):
        value = getattr(args, key, None)
        if value is not None:
            kwargs[key] = value
    return SolverConfig(**kwargs)


def _read_state(path: str) -> DensityMatrix:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise LhsError("bad-state-file", f"cannot read state: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LhsError("bad-state-file", f"state file is not JSON: {exc}") from exc
    return DensityMatrix(operator_from_json(doc))


def _write_json(path: Path, doc: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    return path


def _out_file(args, default_name: str) -> Path:
    return Path(args.out) if args.out else Path(default_name)


def _out_dir(args, default_name: str) -> str:
    return args.out if args.out else default_name


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _workers(args) -> int:
    return 1 if args.workers is None else args.workers


# ---------------------------------------------------------------------------
# Single-shot commands


def cmd_insphere(args) -> int:
    if args.solid is not None:
        mset = solid_directions(args.solid)
    elif args.random is not None:
        mset = random_directions(args.random, RngStream(_seed(args), 0).generator)
    else:
        raise LhsError("bad-parameter", "need --solid or --random")
    print(f"name: {mset.name}")
    print(f"measurements: {len(mset.directions)}")
    print(f"vertices: {mset.vertexCount}")
    print(f"insphere radius: {mset.insphere:.6f}")
    if args.out:
        path = _write_json(Path(args.out), set_to_json(mset))
        print(f"wrote {path}")
    return EXIT_OK


def _parse_params(text: str | None) -> dict:
    if not text:
        return {}
    params = {}
    for chunk in text.split(","):
        if "=" not in chunk:
            raise LhsError("bad-parameter", f"expected k=v in --params, got {chunk!r}")
        key, value = chunk.split("=", 1)
        try:
            params[key.strip()] = float(value)
        except ValueError as exc:
            raise LhsError("bad-parameter", f"non-numeric value in --params: {value!r}") from exc
    return params


def _need(params: dict, family: str, *keys: str) -> list[float]:
    missing = [k for k in keys if k not in params]
    if missing:
        raise LhsError("bad-parameter", f"{family} needs --params {','.join(missing)}")
    return [params[k] for k in keys]


def cmd_make_state(args) -> int:
    params = _parse_params(args.params)
    family = args.family
    if family == "werner":
        (w,) = _need(params, family, "w")
        rho = werner(w)
    elif family == "bell-diag":
        p = _need(params, family, "p1", "p2", "p3", "p4")
        rho = bell_diagonal(p)
    elif family == "phi-plus":
        vec = BELL_VECTORS[0]
        rho = DensityMatrix(HermitianOperator((2, 2), np.outer(vec, vec.conj())))
    elif family == "amplitude-damped":
        (eta,) = _need(params, family, "eta")
        rho = amplitude_damped(eta)
    elif family in ("noisy-ghz", "noisy-w"):
        (p,) = _need(params, family, "p")
        rho = noisy_tripartite(family.split("-")[1], p)
    else:
        raise LhsError("bad-parameter", f"unknown state family {family!r}")
    path = _write_json(_out_file(args, f"{family}.json"), operator_to_json(rho))
    print(f"wrote {path} (negativity {negativity(rho):.6f})")
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.measure not in ("hs", "bures"):
        raise LhsError("bad-parameter", f"unknown measure {args.measure!r}")
    out = Path(_out_dir(args, "samples"))
    out.mkdir(parents=True, exist_ok=True)
    draw = sample_hs if args.measure == "hs" else sample_bures
    for i in range(args.n):
        rho = draw(RngStream(_seed(args), i))
        _write_json(out / f"state-{i:04d}.json", operator_to_json(rho))
    print(f"wrote {args.n} {args.measure} states to {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    rho = _read_state(args.state)
    mset = solid_directions(args.solid)
    config = _solver_config(args)
    gamma = None
    if args.gamma:
        gamma = _read_state(args.gamma)
    if len(rho.dims) == 3:
        outcome = lhs.certify_multipartite(rho, mset, args.mode, gamma=gamma,
                                           config=config)
    elif args.mode == "povm":
        outcome = lhs.certify_povm(rho, mset, gamma=gamma, config=config)
    else:
        outcome = lhs.certify_projective(rho, mset, config)
    if not outcome.certified:
        print(f"status: {outcome.status}")
        if outcome.message:
            print(outcome.message)
        return EXIT_INCONCLUSIVE
    cert = outcome.certificate
    path = _write_json(_out_file(args, f"{Path(args.state).stem}.cert.json"),
                       lhs.certificate_to_json(cert))
    print(f"status: certified (mode {cert.mode}, set {mset.name}, r {mset.insphere:.4f})")
    print(f"residual: {cert.residual:.3e}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_family(args) -> int:
    spec = lhs.named_family(args.family)
    mset = solid_directions(args.solid)
    result = lhs.maximize_family(spec, mset, args.mode, config=_solver_config(args))
    if result.status != "optimal":
        print(f"status: {result.status}")
        if result.message:
            print(result.message)
        return EXIT_INCONCLUSIVE
    theta = ", ".join(f"{t:.6f}" for t in result.theta)
    print(f"theta*: {theta}")
    print(f"objective: {result.objective:.6f}")
    path = _write_json(_out_file(args, f"{args.family}-{args.solid}.cert.json"),
                       lhs.certificate_to_json(result.certificate))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_witness(args) -> int:
    rho = _read_state(args.state)
    result = optimal_witness(rho, args.kind, _solver_config(args))
    print(f"kind: {result.kind}")
    print(f"mu*: {result.mu:.8f}")
    print(f"E: {result.E:.8f}")
    path = _write_json(_out_file(args, f"{Path(args.state).stem}.witness.json"),
                       {"kind": result.kind, "mu": result.mu, "E": result.E,
                        "W": operator_to_json(result.W)})
    print(f"wrote {path}")
    return EXIT_OK


def cmd_gme(args) -> int:
    rho = _read_state(args.state)
    result = gme_witness(rho, _solver_config(args))
    print(f"value: {result.value:.8e}")
    print("genuinely multipartite entangled" if result.value < 0
          else "not detected by fully decomposable witnesses")
    doc = {
        "value": result.value,
        "W": operator_to_json(result.W),
        "decompositions": {
            cut: {"P": operator_to_json(p), "Q": operator_to_json(q)}
            for cut, (p, q) in result.decompositions.items()
        },
    }
    path = _write_json(_out_file(args, f"{Path(args.state).stem}.gme.json"), doc)
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Campaign commands


def _campaign_config(args, kind: str, count: int) -> campaigns.CampaignConfig:
    kwargs = dict(
        kind=kind,
        count=count,
        seed=_seed(args),
        workers=_workers(args),
        outDir=_out_dir(args, f"{kind}-out"),
    )
    if args.tol_feas is not None:
        kwargs["tolFeas"] = float(args.tol_feas)
    for attr, key in (("solid", "solid"), ("mode", "mode"),
                      ("measure", "measure"), ("quantifier", "quantifier"),
                      ("max_iters", "maxIters"), ("iter_tol", "iterTol"),
                      ("first_stream", "firstStream"),
                      ("stop_after", "stopAfterSuccesses")):
        value = getattr(args, attr, None)
        if value is not None:
            kwargs[key] = value
    return campaigns.CampaignConfig(**kwargs)


def _count(args, desk: int, full: int) -> int:
    if args.count is not None:
        return args.count
    return full if getattr(args, "full", False) else desk


def cmd_volume(args) -> int:
    cfg = _campaign_config(args, "volume", _count(args, 2000, 20000))
    summary = campaigns.run_volume_estimation(cfg)
    lo, hi = summary["separableCI"]
    print(f"samples: {summary['n']} ({cfg.measure}, {cfg.solid}, {cfg.mode})")
    print(f"separable fraction: {summary['separableFraction']:.4f} "
          f"(95% CI {lo:.4f}..{hi:.4f})")
    lo, hi = summary["lhsCI"]
    print(f"local fraction of entangled: {summary['lhsFractionOfEntangled']:.4f} "
          f"(95% CI {lo:.4f}..{hi:.4f})")
    if summary["solverFailures"]:
        print(f"solver failures: {summary['solverFailures']} (excluded)")
    ref = summary["reference"]
    if ref:
        low, high = ref["lhsFractionOfEntangled"]
        print(f"reference values: separable {ref['separableFraction']}, "
              f"local-of-entangled {low} (detailed campaign) to {high} (headline bound)")
    print(f"wrote {cfg.outDir}")
    return EXIT_OK


def cmd_bisect(args) -> int:
    try:
        low, high = (float(x) for x in args.bracket.split(","))
    except ValueError as exc:
        raise LhsError("bad-parameter", f"--bracket expects lo,hi: {exc}") from exc
    theta = campaigns.run_threshold_bisection(
        args.family, args.solid, args.mode, (low, high), args.tol,
        _solver_config(args))
    print(f"theta*: {theta:.6f} (bracket [{low}, {high}], tol {args.tol})")
    return EXIT_OK


def cmd_tables(args) -> int:
    cfg = _campaign_config(args, "table", 1)
    table = campaigns.run_table_reproduction(cfg)
    width = max(len(s) for s in SOLID_NAMES[:6])
    print(f"{'solid':<{width}}  {'family':<15}  {'theta':>8}  {'reference':>9}  "
          f"{'deviation':>9}  status")
    for row in table["rows"]:
        theta = "-" if row["theta"] is None else f"{row['theta']:.4f}"
        dev = "-" if row["deviation"] is None else f"{row['deviation']:.4f}"
        print(f"{row['solid']:<{width}}  {row['family']:<15}  {theta:>8}  "
              f"{row['reference']:>9}  {dev:>9}  {row['status']}")
    print(f"wrote {cfg.outDir}")
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _campaign_config(args, "generate", _count(args, 500, 300000))
    summary = campaigns.run_generator_campaign(cfg)
    print(f"runs: {summary['runs']} ({cfg.solid}, {cfg.mode}, {cfg.quantifier})")
    print(f"negativity: mean {summary['meanNegativity']:.4f} "
          f"sigma {summary['stdNegativity']:.4f}")
    print(f"pairwise trace distance: mean {summary['meanDistance']:.4f} "
          f"sigma {summary['stdDistance']:.4f}")
    if summary["failures"]:
        print(f"failed runs: {summary['failures']} (excluded)")
    print(f"wrote {cfg.outDir}")
    return EXIT_OK


def cmd_gme_campaign(args) -> int:
    # witness values along a GME trajectory live between 1e-7 and 1e-3, so
    # the generic campaign tolerance of 1e-5 would stop every run at step two
    if args.iter_tol is None:
        args.iter_tol = 1e-9
    cfg = _campaign_config(args, "gme", _count(args, 10, 1000))
    summary = campaigns.run_gme_campaign(cfg)
    print(f"runs: {summary['runs']} ({cfg.solid}, {cfg.mode})")
    print(f"successes: {summary['successCount']}")
    print(f"best witness value: {summary['bestValue']:.3e}")
    print(f"wrote {cfg.outDir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors, which collides with the
    exit-code contract (2 = inconclusive); surface them as bad input."""

    def error(self, message):
        raise LhsError("bad-arguments", message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG campaign seed")
    common.add_argument("--workers", type=int, default=None, help="parallel workers")
    common.add_argument("--tol-feas", type=float, default=None,
                        help="solver feasibility tolerance")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--config", default=None,
                        help="flat key = value config file")

    parser = _Parser(
        prog="lhsmodels",
        description="Certify, generate, and survey entangled states with "
                    "local-hidden-state models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    # subparsers parse into a fresh namespace, so config-file defaults must
    # be pushed onto each of them, not just the root parser
    parser.subcommand_parsers = []
    _add_parser = sub.add_parser

    def add_parser(*args, **kwargs):
        p = _add_parser(*args, **kwargs)
        parser.subcommand_parsers.append(p)
        return p

    sub.add_parser = add_parser

    p = sub.add_parser("insphere", parents=[common],
                       help="measurement set and its insphere radius")
    p.add_argument("--solid", choices=SOLID_NAMES, default=None)
    p.add_argument("--random", type=int, default=None, metavar="M")
    p.set_defaults(handler=cmd_insphere)

    p = sub.add_parser("make-state", parents=[common], help="write a state JSON")
    p.add_argument("--family", required=True)
    p.add_argument("--params", default=None, help="comma list k=v")
    p.set_defaults(handler=cmd_make_state)

    p = sub.add_parser("sample", parents=[common], help="draw random states")
    p.add_argument("--measure", default="hs")
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("certify", parents=[common],
                       help="decide whether a state admits a local model")
    p.add_argument("--state", required=True)
    p.add_argument("--solid", choices=SOLID_NAMES, default="icosahedron")
    p.add_argument("--mode", choices=("projective", "povm"), default="projective")
    p.add_argument("--gamma", default=None, help="POVM auxiliary state JSON")
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("family", parents=[common],
                       help="largest certified member of a state family")
    p.add_argument("--family", required=True,
                   choices=("werner", "bell-diag", "bell-diag-rank3"))
    p.add_argument("--solid", choices=SOLID_NAMES, default="icosahedron")
    p.add_argument("--mode", choices=("projective", "povm"), default="projective")
    p.set_defaults(handler=cmd_family)

    p = sub.add_parser("witness", parents=[common],
                       help="optimal entanglement witness of a state")
    p.add_argument("--state", required=True)
    p.add_argument("--kind", choices=QUANTIFIER_KINDS,
                   default="one-sided-generalized-robustness")
    p.set_defaults(handler=cmd_witness)

    p = sub.add_parser("gme", parents=[common],
                       help="fully decomposable witness of a three-qubit state")
    p.add_argument("--state", required=True)
    p.set_defaults(handler=cmd_gme)

    p = sub.add_parser("volume", parents=[common],
                       help="certified-volume estimation campaign")
    p.add_argument("--measure", default=None, choices=("hs", "bures"))
    p.add_argument("--solid", choices=SOLID_NAMES, default=None)
    p.add_argument("--mode", choices=("projective", "povm"), default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--first-stream", type=int, default=None)
    p.add_argument("--full", action="store_true", help="published-scale count")
    p.set_defaults(handler=cmd_volume)

    p = sub.add_parser("bisect", parents=[common],
                       help="largest certified parameter of a noise family")
    p.add_argument("--family", required=True,
                   choices=("amplitude-damped", "noisy-ghz", "noisy-w"))
    p.add_argument("--solid", choices=SOLID_NAMES, default="icosahedron")
    p.add_argument("--mode", choices=("projective", "povm"), default="projective")
    p.add_argument("--bracket", default="0.0,1.0", help="lo,hi")
    p.add_argument("--tol", type=float, default=0.01)
    p.set_defaults(handler=cmd_bisect)

    p = sub.add_parser("tables", parents=[common],
                       help="family thresholds across the six reference solids")
    p.set_defaults(handler=cmd_tables)

    p = sub.add_parser("generate", parents=[common],
                       help="witness-driven local-state generator campaign")
    p.add_argument("--solid", choices=SOLID_NAMES, default=None)
    p.add_argument("--mode", choices=("projective", "povm"), default=None)
    p.add_argument("--quantifier", choices=QUANTIFIER_KINDS, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--iter-tol", type=float, default=None)
    p.add_argument("--first-stream", type=int, default=None)
    p.add_argument("--full", action="store_true", help="published-scale count")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("gme-campaign", parents=[common],
                       help="search for genuinely multipartite entangled local states")
    p.add_argument("--solid", choices=SOLID_NAMES, default=None)
    p.add_argument("--mode", choices=("projective", "povm"), default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--iter-tol", type=float, default=None)
    p.add_argument("--first-stream", type=int, default=None)
    p.add_argument("--stop-after", type=int, default=None,
                   help="stop once this many successes are found")
    p.add_argument("--full", action="store_true", help="published-scale count")
    p.set_defaults(handler=cmd_gme_campaign)

    return parser


def _find_config(argv: list[str]) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config_path = _find_config(argv)
        if config_path is not None:
            overrides = load_config(config_path)
            for p in [parser] + parser.subcommand_parsers:
                p.set_defaults(**overrides)
        args = parser.parse_args(argv)
        return args.handler(args)
    except LhsError as err:
        print(f"error: {err}", file=sys.stderr)
        if err.code.startswith("bad-") or err.code in ("too-large", "too-few"):
            return EXIT_BAD_INPUT
        return EXIT_SOLVER_FAILURE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
