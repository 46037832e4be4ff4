import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from bounds.base import BoundOptions, LowerBoundOpts
from bounds.exact import DEFAULT_ENUMERATION_CAP, exact_log_marginal, posterior_marginals, sigma_std
from bounds.lower import lb_optimize
from bounds.upper import upper_bound_for
from components.metrics import summarize_records
from components.report import (
    emit_aggregate,
    emit_csv,
    emit_frame,
    emit_options,
    emit_trace,
    format_value,
    sidecar_paths,
)
from networks.io import load_network
from networks.model import Evidence, ancestral_sample
from utils.experiment import EVIDENCE_POLICIES, SIGMA_STD_EXACT_FAN_IN, ExperimentRunner, ExperimentSpec, run_trial
from utils.priors import PriorSpec

logger = logging.getLogger("belief_bounds")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
EXIT_CONFIG = 2
EXIT_IO = 1


def parse_sizes(raw: str):
    try:
        sizes = tuple(int(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ValueError(f"Invalid --sizes {raw!r}; expected comma-separated integers") from None
    if not sizes:
        raise ValueError("--sizes needs at least one layer size")
    return sizes


def load_evidence_file(path) -> Evidence:
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: evidence file must hold a JSON object mapping node ids to bits")
    try:
        return Evidence({int(k): v for k, v in raw.items()})
    except (TypeError, ValueError) as e:
        raise ValueError(f"{path}: {e}") from e


def resolve_evidence(net, args) -> Evidence:
    if args.evidence_file:
        return load_evidence_file(args.evidence_file)
    if not net.is_bipartite:
        raise ValueError("Evidence policies need a two-level network; pass --evidence-file instead")
    if args.evidence == "sampled":
        state = ancestral_sample(net, np.random.default_rng(args.seed))
        return Evidence.from_state(state, net.l1)
    return Evidence.constant(net.l1, 1 if args.evidence == "ones" else 0)


def print_result(rows):
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        text = format_value(value) if isinstance(value, float) else str(value)
        print(f"{key.ljust(width)}  {text}")


def cmd_validate(args) -> int:
    net = load_network(args.path)
    print_result([
        ("kind", net.kind.value),
        ("nodes", net.n),
        ("edges", sum(1 for _ in net.edges())),
        ("roots", int(net.is_root.sum())),
        ("bipartite", net.is_bipartite),
    ])
    return 0


def cmd_exact(args) -> int:
    net = load_network(args.network)
    ev = resolve_evidence(net, args)
    result = exact_log_marginal(net, ev, args.cap)
    rows = [("log_marginal", result.log_marginal), ("states", result.enumerated_states)]
    if net.is_bipartite and set(ev.assignments) == set(net.l1) and max(map(net.fan_in, net.l1), default=0) <= SIGMA_STD_EXACT_FAN_IN:
        rows.append(("sigma_std", sigma_std(net, ev)))
    print_result(rows)
    if args.posterior:
        for node, p in zip(ev.hidden(net), posterior_marginals(net, ev, args.cap)):
            print(f"P(S_{node}=1 | evidence) = {format_value(float(p))}")
    return 0


def cmd_upper(args) -> int:
    net = load_network(args.network)
    ev = resolve_evidence(net, args)
    opts = BoundOptions(tol=args.tol, max_sweeps=args.max_sweeps, xi_max=args.xi_max, trace=bool(args.trace))
    result = upper_bound_for(net, ev, opts).optimize()
    print_result([
        ("log_bound", result.log_bound),
        ("sweeps", result.sweeps),
        ("converged", result.converged),
        ("degenerate", result.degenerate),
        ("xi_cap_hit", result.xi_cap_hit),
    ])
    if args.trace:
        emit_trace(result.trace, args.trace, ("sweep", "coordinate", "log_bound"))
    return 0


def cmd_lower(args) -> int:
    net = load_network(args.network)
    ev = resolve_evidence(net, args)
    opts = LowerBoundOpts(
        sigmoid_expectation_mode=args.lb_mode,
        expansion_terms=args.expansion_terms,
        use_quadratic=args.quadratic,
        expansion_tail=not args.no_tail,
        tol=args.tol,
        max_sweeps=args.max_sweeps,
        trace=bool(args.trace),
    )
    result = lb_optimize(net, ev, opts)
    print_result([("log_bound", result.log_bound), ("sweeps", result.sweeps), ("converged", result.converged)])
    if args.trace:
        emit_trace(result.trace, args.trace, ("sweep", "log_bound"))
    return 0


def _spec_overrides(args) -> dict:
    return dict(
        trials=args.trials,
        seed=args.seed,
        sizes=parse_sizes(args.sizes) if args.sizes else None,
        evidence=args.evidence,
        leak=args.leak,
        lb_mode=args.lb_mode,
        quadratic=args.quadratic or None,
        expansion_terms=args.expansion_terms,
        expansion_tail=args.tail,
        workers=args.workers,
    )


def cmd_trial(args) -> int:
    if not args.prior:
        raise ValueError("trial needs --prior")
    prior = PriorSpec.parse(args.prior)
    spec = ExperimentSpec.for_figure("custom", kind=prior.kind.value, values=(prior.value,), **_spec_overrides(args))
    if len(spec.sizes) != 1:
        raise ValueError("trial runs at a single layer size")
    record = run_trial(spec, 0, args.index)
    emit_csv([record], args.out or sys.stdout)
    return 0


def cmd_figure(args) -> int:
    overrides = _spec_overrides(args)
    if args.prior:
        prior = PriorSpec.parse(args.prior)
        if args.command in ("fig3", "fig5"):
            raise ValueError(f"{args.command} sweeps its own scaling grid; --prior is not accepted")
        if args.command != "custom":
            prior.check_kind("sigmoid" if args.command == "fig2" else "noisy_or")
        overrides.update(kind=prior.kind.value, values=(prior.value,))
    elif args.command == "custom":
        raise ValueError("custom runs need --prior")
    spec = ExperimentSpec.for_figure(args.command, **overrides)

    runner = ExperimentRunner(spec)
    trials, aggregate = runner.run()
    out = Path(args.out or f"{args.command}.csv")
    paths = sidecar_paths(out)
    emit_csv(trials, out)
    emit_aggregate(aggregate, paths["aggregate"], with_size=not spec.is_sweep)
    modes = runner.modes_frame()
    if not modes.empty:
        emit_frame(modes, paths["modes"])
    emit_options(spec.to_dict(), paths["options"])

    summary = summarize_records(trials)
    logger.info("%s summary: %s", spec.figure, summary)
    if summary["sandwich_violations"]:
        logger.error("%d trials violate lb <= exact <= ub", summary["sandwich_violations"])
    print(f"Saved {len(trials)} trials to {out} and medians to {paths['aggregate']}")
    return 0


def _add_evidence_args(parser):
    parser.add_argument("--evidence", choices=EVIDENCE_POLICIES, default="sampled",
                        help="L1 evidence: sampled from the network, all zeros or all ones.")
    parser.add_argument("--evidence-file", default=None, help="JSON object mapping node ids to observed bits.")
    parser.add_argument("--seed", type=int, default=0)


def _add_lower_args(parser, lb_mode_default):
    parser.add_argument("--lb-mode", choices=("exact", "aux"), default=lb_mode_default,
                        help="Sigmoid expectations by parent enumeration or by the auxiliary bound.")
    parser.add_argument("--quadratic", action="store_true", help="Use the quadratic noisy-OR lower bound.")
    parser.add_argument("--expansion-terms", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="belief-bounds",
        description="Variational upper and lower bounds on marginals of sigmoid and noisy-OR belief networks.",
    )
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Check a network file against the model invariants.")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("exact", help="Exact log-marginal by enumeration.")
    p.add_argument("--network", required=True)
    _add_evidence_args(p)
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP, help="Maximum number of unassigned nodes.")
    p.add_argument("--posterior", action="store_true", help="Also print posterior marginals.")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("upper", help="Optimized upper bound for a two-level network.")
    p.add_argument("--network", required=True)
    _add_evidence_args(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--xi-max", type=float, default=1e6)
    p.add_argument("--trace", default=None, help="Write the optimizer trace to this CSV.")
    p.set_defaults(func=cmd_upper)

    p = sub.add_parser("lower", help="Optimized mean-field lower bound.")
    p.add_argument("--network", required=True)
    _add_evidence_args(p)
    _add_lower_args(p, "exact")
    p.add_argument("--no-tail", action="store_true",
                   help="Drop the noisy-OR expansion remainder (the result is then an approximation).")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=200)
    p.add_argument("--trace", default=None, help="Write the optimizer trace to this CSV.")
    p.set_defaults(func=cmd_lower)

    for name, text in (
        ("trial", "Run a single random trial and print its record."),
        ("fig2", "Sigmoid 8x8 relative errors against sigma_std."),
        ("fig3", "Sigmoid bound gap against sigma*sqrt(n)."),
        ("fig4", "Noisy-OR 8x8 relative errors against sigma_std."),
        ("fig5", "Noisy-OR bound gap against sqrt(n)/phi."),
        ("custom", "Any prior and sizes, medians per cell."),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--prior", default=None, help="gaussian:<sigma> or dirichlet:<phi>.")
        p.add_argument("--sizes", default=None, help="Comma-separated layer sizes, e.g. 8,32,128.")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--evidence", choices=EVIDENCE_POLICIES, default=None)
        p.add_argument("--leak", type=float, default=None, help="Add an always-on parent with this weight.")
        _add_lower_args(p, None)
        p.add_argument("--tail", action=argparse.BooleanOptionalAction, default=None,
                       help="Keep the certified noisy-OR expansion remainder (default: on for sweeps, off for scaling runs).")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None)
        if name == "trial":
            p.add_argument("--index", type=int, default=0, help="Trial index within the cell.")
            p.set_defaults(func=cmd_trial)
        else:
            p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        return args.func(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
