"""
Batch experiments on random n x n two-level networks.

A run is a list of cells (layer size, prior parameter) with a fixed number of
trials each. Every trial draws its own network and evidence from an
independent random stream, so results do not depend on scheduling.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from bounds.base import BoundOptions, LowerBoundOpts
from bounds.exact import DEFAULT_ENUMERATION_CAP, exact_log_marginal, sigma_std
from bounds.lower import lb_optimize
from bounds.upper import upper_bound_for
from components.metrics import binned_medians, gap_metric, grouped_medians, relative_error, symmetric_gap
from components.report import TRIAL_COLUMNS
from networks.model import Evidence, NetworkKind, ancestral_sample
from .priors import PriorSpec, complete_bipartite, sample_parameters, trial_rng

logger = logging.getLogger(__name__)

FIGURES = ("fig2", "fig3", "fig4", "fig5", "custom")
SWEEP_FIGURES = ("fig2", "fig4")
SCALING_FIGURES = ("fig3", "fig5")
EVIDENCE_POLICIES = ("sampled", "zeros", "ones")

SIGMA_GRID = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
PHI_GRID = (16.0, 8.0, 4.0, 2.0, 1.0, 0.5, 0.25)
SIGMOID_SCALING = (0.5, 1.0, 2.0, 4.0)  # sigma * sqrt(n)
NOISY_OR_SCALING = (0.25, 0.5, 1.0, 2.0)  # sqrt(n) / phi
SCALING_SIZES = (8, 32, 128)

EXACT_EXPECTATION_MAX_N = 8
SIGMA_STD_EXACT_FAN_IN = 20
SIGMA_STD_SAMPLES = 20_000
SWEEP_BINS = 20


@dataclass
class ExperimentSpec:
    figure: str = "custom"
    kind: str = "sigmoid"
    sizes: Tuple[int, ...] = (8,)
    values: Tuple[float, ...] = ()
    trials: int = 100
    seed: int = 0
    evidence: str = "sampled"
    leak: Optional[float] = None
    lb_mode: Optional[str] = None
    quadratic: bool = False
    expansion_terms: int = 16
    expansion_tail: Optional[bool] = None
    oracle_cap: int = DEFAULT_ENUMERATION_CAP
    workers: int = 1

    def __post_init__(self):
        self.kind = NetworkKind.parse(self.kind).value
        self.sizes = tuple(int(n) for n in self.sizes)
        self.values = tuple(float(v) for v in self.values)
        self.validate_parameters()

    def validate_parameters(self):
        if self.figure not in FIGURES:
            raise ValueError(f"Unknown figure {self.figure!r}; expected one of {', '.join(FIGURES)}")
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise ValueError("Layer sizes must be positive integers")
        if not self.values or any(not v > 0 for v in self.values):
            raise ValueError("Prior values must be a non-empty list of positive numbers")
        if self.trials < 1:
            raise ValueError("Need at least one trial per cell")
        if self.evidence not in EVIDENCE_POLICIES:
            raise ValueError(f"Evidence policy must be one of {', '.join(EVIDENCE_POLICIES)}")
        if self.lb_mode not in (None, "exact", "aux"):
            raise ValueError("Lower-bound mode must be 'exact' or 'aux'")
        if self.leak is not None and not np.isfinite(self.leak):
            raise ValueError("Leak weight must be finite")
        if self.kind == NetworkKind.NOISY_OR.value and self.leak is not None and self.leak < 0:
            raise ValueError("Noisy-OR leak weight must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.is_sweep:
            if len(self.sizes) != 1:
                raise ValueError(f"{self.figure} runs at a single layer size")
            if self.sizes[0] > self.oracle_cap:
                raise ValueError(
                    f"{self.figure} needs the exact oracle, but n={self.sizes[0]} exceeds the enumeration cap {self.oracle_cap}"
                )

    @classmethod
    def for_figure(cls, figure: str, **overrides) -> "ExperimentSpec":
        defaults = {
            "fig2": dict(kind="sigmoid", sizes=(8,), values=SIGMA_GRID),
            "fig3": dict(kind="sigmoid", sizes=SCALING_SIZES, values=SIGMOID_SCALING),
            "fig4": dict(kind="noisy_or", sizes=(8,), values=PHI_GRID),
            "fig5": dict(kind="noisy_or", sizes=SCALING_SIZES, values=NOISY_OR_SCALING, evidence="ones"),
            "custom": dict(),
        }
        if figure not in defaults:
            raise ValueError(f"Unknown figure {figure!r}; expected one of {', '.join(FIGURES)}")
        params = dict(defaults[figure])
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(figure=figure, **params)

    @property
    def is_sweep(self) -> bool:
        return self.figure in SWEEP_FIGURES

    @property
    def is_scaling(self) -> bool:
        return self.figure in SCALING_FIGURES

    def lower_bound_tail(self) -> bool:
        """Sweeps keep the certified expansion tail; scaling runs drop it unless asked."""
        if self.expansion_tail is not None:
            return bool(self.expansion_tail)
        return not self.is_scaling

    @property
    def family(self) -> str:
        return "gaussian" if self.kind == NetworkKind.SIGMOID.value else "dirichlet"

    def cells(self) -> List[Tuple[int, float, float]]:
        """(n, prior parameter, abscissa) per cell; scaling runs convert their abscissa to sigma or phi."""
        cells = []
        for n in self.sizes:
            for v in self.values:
                if not self.is_scaling:
                    cells.append((n, v, v))
                elif self.kind == NetworkKind.SIGMOID.value:
                    cells.append((n, v / math.sqrt(n), v))
                else:
                    cells.append((n, math.sqrt(n) / v, v))
        return cells

    def lower_bound_mode(self, n: int) -> str:
        if self.lb_mode is not None:
            return self.lb_mode
        return "exact" if n <= EXACT_EXPECTATION_MAX_N else "aux"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialRecord:
    seed: int
    n: int
    prior_param: float
    sigma_std: float
    exact_log_p: Optional[float]
    ub_log: float
    lb_log: float
    rel_err_ub: float
    rel_err_lb: float
    gap_metric: float
    sweeps_ub: int
    sweeps_lb: int
    degenerate: bool
    cell: int = 0
    trial: int = 0
    abscissa: float = np.nan
    gap_symmetric: float = np.nan
    xi_cap_hit: bool = False
    extra_bounds: dict = field(default_factory=dict)


def trial_seed(base_seed: int, cell: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(cell), int(trial)]).generate_state(1)[0])


def _evidence_for(spec: ExperimentSpec, net, state) -> Evidence:
    if spec.evidence == "sampled":
        return Evidence.from_state(state, net.l1)
    return Evidence.constant(net.l1, 1 if spec.evidence == "ones" else 0)


def _sigma_std(net, ev, rng) -> float:
    if max((net.fan_in(i) for i in net.l1), default=0) <= SIGMA_STD_EXACT_FAN_IN:
        return sigma_std(net, ev, mode="exact", fan_in_cap=SIGMA_STD_EXACT_FAN_IN)
    return sigma_std(net, ev, mode="monte_carlo", samples=SIGMA_STD_SAMPLES, rng=rng)


def _lower_opts(spec: ExperimentSpec, n: int, **overrides) -> LowerBoundOpts:
    params = dict(
        sigmoid_expectation_mode=spec.lower_bound_mode(n),
        expansion_terms=spec.expansion_terms,
        use_quadratic=spec.quadratic,
        expansion_tail=spec.lower_bound_tail(),
    )
    params.update(overrides)
    return LowerBoundOpts(**params)


def run_trial(spec: ExperimentSpec, cell: int, trial_index: int) -> TrialRecord:
    n, prior_param, abscissa = spec.cells()[cell]
    rng = trial_rng(spec.seed, cell, trial_index)
    prior = PriorSpec(spec.family, prior_param)
    theta, l2_priors = sample_parameters(prior, (n, n), rng)
    net = complete_bipartite(spec.kind, theta, l2_priors, leak=spec.leak)
    state = ancestral_sample(net, rng)
    ev = _evidence_for(spec, net, state)
    sig = _sigma_std(net, ev, rng)

    exact = None
    if not spec.is_scaling and len(ev.hidden(net)) <= spec.oracle_cap:
        exact = exact_log_marginal(net, ev, spec.oracle_cap).log_marginal

    ub = upper_bound_for(net, ev, BoundOptions()).optimize()
    lb = lb_optimize(net, ev, _lower_opts(spec, n))

    extra = {}
    if net.kind is NetworkKind.SIGMOID and spec.lower_bound_mode(n) == "exact":
        extra["lb_log_aux"] = lb_optimize(net, ev, _lower_opts(spec, n, sigmoid_expectation_mode="aux")).log_bound
    elif net.kind is NetworkKind.NOISY_OR:
        for quadratic in (False, True):
            for tail in (True, False):
                key = ("lb_log_quadratic" if quadratic else "lb_log_simple") + ("" if tail else "_untailed")
                if quadratic == spec.quadratic and tail == spec.lower_bound_tail():
                    extra[key] = lb.log_bound
                else:
                    opts = _lower_opts(spec, n, use_quadratic=quadratic, expansion_tail=tail)
                    extra[key] = lb_optimize(net, ev, opts).log_bound

    degenerate = bool(ub.degenerate) or (net.kind is NetworkKind.NOISY_OR and ev.all_zero())
    if net.kind is NetworkKind.NOISY_OR and ev.all_zero():
        rel_ub = rel_lb = 0.0 if exact is not None else np.nan
        gap = 0.0
    else:
        rel_ub = relative_error(ub.log_bound, exact)
        rel_lb = relative_error(lb.log_bound, exact)
        gap = gap_metric(ub.log_bound, lb.log_bound)

    return TrialRecord(
        seed=trial_seed(spec.seed, cell, trial_index),
        n=n,
        prior_param=prior_param,
        sigma_std=sig,
        exact_log_p=exact,
        ub_log=ub.log_bound,
        lb_log=lb.log_bound,
        rel_err_ub=rel_ub,
        rel_err_lb=rel_lb,
        gap_metric=gap,
        sweeps_ub=ub.sweeps,
        sweeps_lb=lb.sweeps,
        degenerate=degenerate,
        cell=cell,
        trial=trial_index,
        abscissa=abscissa,
        gap_symmetric=symmetric_gap(ub.log_bound, lb.log_bound),
        xi_cap_hit=ub.xi_cap_hit,
        extra_bounds=extra,
    )


def _run_task(args) -> TrialRecord:
    spec, cell, trial = args
    return run_trial(spec, cell, trial)


class ExperimentRunner:
    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.records: List[TrialRecord] = []

    def run(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Runs every trial and returns (trial table, aggregate table)."""
        if self.spec.is_sweep:
            return self.run_sweep()
        return self.run_scaling()

    def _execute(self):
        spec = self.spec
        cells = spec.cells()
        tasks = [(spec, c, t) for c in range(len(cells)) for t in range(spec.trials)]
        if spec.workers > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                records = list(pool.map(_run_task, tasks, chunksize=max(1, spec.trials // spec.workers)))
        else:
            records = []
            for c, (n, prior_param, _) in enumerate(cells):
                logger.info("%s cell %d/%d: n=%d %s=%g", spec.figure, c + 1, len(cells), n, spec.family, prior_param)
                records.extend(run_trial(spec, c, t) for t in range(spec.trials))
        self.records = sorted(records, key=lambda r: (r.cell, r.trial))
        return self.records

    def run_sweep(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        self._execute()
        trials = self.trial_frame()
        return trials, binned_medians(trials, "sigma_std", bins=SWEEP_BINS)

    def run_scaling(self) -> Tuple[pd.DataFrame, pd.DataFrame]:
        self._execute()
        trials = self.trial_frame()
        return trials, self.calculate_metrics(trials)

    def calculate_metrics(self, trials: pd.DataFrame = None) -> pd.DataFrame:
        """Median errors per (n, abscissa) cell."""
        trials = self.trial_frame() if trials is None else trials
        frame = trials.assign(abscissa=[r.abscissa for r in self.records])
        return grouped_medians(frame, by=("n", "abscissa"))

    def trial_frame(self) -> pd.DataFrame:
        rows = [{k: getattr(r, k) for k in TRIAL_COLUMNS} for r in self.records]
        return pd.DataFrame(rows, columns=list(TRIAL_COLUMNS))

    def modes_frame(self) -> pd.DataFrame:
        """Per-trial bounds from the alternative lower-bound forms."""
        rows = []
        for r in self.records:
            if not r.extra_bounds:
                continue
            row = {"cell": r.cell, "trial": r.trial, "seed": r.seed, "n": r.n, "prior_param": r.prior_param,
                   "exact_log_p": r.exact_log_p, "ub_log": r.ub_log, "lb_log": r.lb_log}
            row.update(r.extra_bounds)
            rows.append(row)
        return pd.DataFrame(rows)
