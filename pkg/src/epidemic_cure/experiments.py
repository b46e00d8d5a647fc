"""Monte Carlo harness and empirical checks of the CURE performance bounds.

Every quantity is summarised by its sample mean with a two-sided 99%
normal-approximation half-width ``z * sqrt(var / count)``, ``z = 2.5758``.
An upper bound passes when ``mean - half_width <= bound``, a lower bound
when ``mean + half_width >= bound``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Iterable, Sequence

from .crusade import ExactCrusades, RestrictedCrusades, parse_order
from .graph import Bag, Graph, parse_graph_spec
from .policy import (EXCURSION, PATH, WAITING, CureConfig, CurePolicy, degree_policy,
                     excursion_bound, no_curing_policy, uniform_policy)
from .sim import DEFAULT_MAX_EVENTS, RngStream, Trace, run

log = logging.getLogger(__name__)

CONFIDENCE = 0.99
Z = NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)
MIN_EXCURSIONS = 100
EXACT_DEFAULT_MAX = 20
POLICIES = ("cure", "uniform", "degree", "none")
THREADS_ENV = "EPIDEMIC_CURE_THREADS"

CSV_FIELDS = ("replication_id", "seed", "outcome", "tau", "attempts", "excursions",
              "long_excursions", "waiting_time_total", "path_time_total",
              "excursion_time_total")


class AllCensored(RuntimeError):
    pass


class HypothesisError(ValueError):
    """A bound's preconditions do not hold for the configuration."""


# -- statistics ------------------------------------------------------------

@dataclass
class Summary:
    mean: float
    variance: float
    count: int
    half_width: float
    censored: int = 0

    @classmethod
    def of(cls, values: Sequence[float], censored: int = 0) -> "Summary":
        values = list(values)
        k = len(values)
        if k == 0:
            return cls(math.nan, math.nan, 0, math.inf, censored)
        mean = math.fsum(values) / k
        if k < 2:
            return cls(mean, 0.0, k, math.inf, censored)
        var = math.fsum((x - mean) ** 2 for x in values) / (k - 1)
        return cls(mean, var, k, Z * math.sqrt(var / k), censored)


@dataclass
class BoundReport:
    name: str
    kind: str             # "upper" or "lower"
    bound: float
    inputs: dict
    summary: Summary
    verdict: str = ""
    note: str = ""

    def __post_init__(self):
        if not self.verdict:
            self.verdict = self.recompute()

    def recompute(self) -> str:
        s = self.summary
        if s.count == 0:
            return "inconclusive"
        if self.kind == "upper":
            return "pass" if s.mean - s.half_width <= self.bound else "fail"
        return "pass" if s.mean + s.half_width >= self.bound else "fail"

    def line(self) -> str:
        s = self.summary
        rel = "<=" if self.kind == "upper" else ">="
        return (f"{self.name}: mean={s.mean:.6g} +/- {s.half_width:.3g} (n={s.count}) "
                f"{rel} {self.bound:.6g} -> {self.verdict.upper()}")


def failure_probability(n: int, budget: float, max_degree: int) -> float:
    """Bound on the chance that an excursion is long: ``3 / (2**K - 1)``.

    ``K = ceil(budget / (8 * max_degree))``; for ``K < 2`` the bound is 1.
    ``n`` is accepted for symmetry with the other bound formulas.
    """
    k = excursion_bound(budget, max_degree)
    if k < 2:
        return 1.0
    return (2.0**2 - 1) / (2.0**k - 1)


def gambler_ruin_oracle(upper: int, start: int, up_rate: float, down_rate: float) -> float:
    """Probability that a birth-death walk from ``start`` hits ``upper`` before 0."""
    if not 0 < start < upper:
        raise ValueError("need 0 < start < upper")
    if up_rate <= 0 or down_rate <= 0:
        raise ValueError("rates must be positive")
    ratio = down_rate / up_rate
    if ratio == 1:
        return start / upper
    return (ratio**start - 1) / (ratio**upper - 1)


def simulate_birth_death(upper: int, start: int, up_rate: float, down_rate: float,
                         reps: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo of the stopped walk: (frequency of hitting ``upper``, mean duration)."""
    rng = RngStream(seed, 0)
    total = up_rate + down_rate
    hits = 0
    duration = 0.0
    for _ in range(reps):
        m = start
        while 0 < m < upper:
            duration += rng.exponential(total)
            m += 1 if rng.uniform() * total < up_rate else -1
        hits += m == upper
    return hits / reps, duration / reps


# -- configuration and one replication ------------------------------------

@dataclass
class ExperimentConfig:
    graph: str = "line:16"
    policy: str = "cure"
    budget: float = 128.0
    init: str = "all"
    reps: int = 1000
    seed: int = 0
    max_events: int = DEFAULT_MAX_EVENTS
    max_time: float = math.inf
    crusade_mode: str = "auto"     # auto | exact | restricted
    order: str | None = None       # path to a whitespace-separated ordering
    check_rates: bool = True

    def validate(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if self.crusade_mode not in ("auto", "exact", "restricted"):
            raise ValueError(f"unknown crusade mode {self.crusade_mode!r}")


@dataclass
class RunRecord:
    replication_id: int
    seed: int
    outcome: str
    tau: float
    attempts: int
    excursions: int
    long_excursions: int
    waiting_time_total: float
    path_time_total: float
    excursion_time_total: float
    excursion_lengths: list[float] = field(default_factory=list)
    excursion_long: list[bool] = field(default_factory=list)
    waiting_lengths: list[float] = field(default_factory=list)
    rate_checks: int = 0
    rate_violations: int = 0
    max_excursion_cut: int = 0

    @property
    def extinct(self) -> bool:
        return self.outcome == "extinct"

    def csv_row(self) -> list:
        return [self.replication_id, self.seed, self.outcome, repr(self.tau), self.attempts,
                self.excursions, self.long_excursions, repr(self.waiting_time_total),
                repr(self.path_time_total), repr(self.excursion_time_total)]


class Context:
    """Per-process objects shared read-only by all replications."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.graph = parse_graph_spec(cfg.graph)
        self.provider = None
        self.cutwidth = None
        if cfg.policy == "cure":
            self.provider = make_provider(self.graph, cfg.crusade_mode, cfg.order)
            self.cutwidth = self.provider.width_bound()
            self.cure_cfg = CureConfig.for_graph(self.graph, cfg.budget, self.cutwidth)

    def policy(self):
        if self.cfg.policy == "cure":
            return CurePolicy(self.cure_cfg, self.provider, check_rates=self.cfg.check_rates)
        return {"uniform": uniform_policy, "degree": degree_policy,
                "none": no_curing_policy}[self.cfg.policy]()


def make_provider(g: Graph, mode: str = "auto", order_path: str | None = None):
    """Crusade provider for CURE: exact optimal crusades or a restricted ordering.

    ``auto`` picks exact mode up to ``EXACT_DEFAULT_MAX`` nodes when no
    ordering file is given.
    """
    order = None
    if order_path is not None:
        with open(order_path) as fh:
            order = parse_order(fh.read())
    if mode == "auto":
        mode = "exact" if g.n <= EXACT_DEFAULT_MAX and order is None else "restricted"
    if mode == "exact":
        return ExactCrusades(g)
    return RestrictedCrusades(g, order)


def initial_bag(spec: str, g: Graph, rng: RngStream) -> Bag:
    if spec == "all":
        return g.nodes
    kind, _, arg = spec.partition(":")
    if kind == "list":
        nodes = [int(x) for x in arg.replace(",", " ").split()] if arg else []
        return g.bag(nodes)
    if kind == "frac":
        p = float(arg)
        if not 0 <= p <= 1:
            raise ValueError("fraction must lie in [0, 1]")
        k = max(1, round(p * g.n)) if p > 0 else 0
        pool = list(range(g.n))
        for i in range(k):
            j = i + int(rng.uniform() * (g.n - i))
            pool[i], pool[j] = pool[j], pool[i]
        return Bag(pool[:k])
    raise ValueError(f"bad init spec {spec!r}; use all, list:0,1,... or frac:p")


def phase_durations(trace: Trace) -> dict:
    """Per-phase durations read off the phase marks of a finished trace.

    An excursion is long when the next mark belongs to a later attempt.
    Phases cut short by censoring are dropped.
    """
    marks = trace.phases
    end = trace.outcome.at
    extinct = trace.outcome.extinct
    totals = {WAITING: 0.0, PATH: 0.0, EXCURSION: 0.0}
    excursions: list[float] = []
    long_flags: list[bool] = []
    waits: list[float] = []
    for i, mark in enumerate(marks):
        last = i + 1 == len(marks)
        stop = end if last else marks[i + 1].at
        d = stop - mark.at
        if mark.tag in totals:
            totals[mark.tag] += d
        complete = not last or extinct
        if mark.tag == EXCURSION and complete:
            excursions.append(d)
            long_flags.append(not last and marks[i + 1].attempt != mark.attempt)
        elif mark.tag == WAITING and complete:
            waits.append(d)
    return {"totals": totals, "excursions": excursions, "long": long_flags, "waits": waits,
            "attempts": max((m.attempt for m in marks), default=0),
            "excursion_count": sum(1 for m in marks if m.tag == EXCURSION)}


def run_replication(ctx: Context, i: int) -> RunRecord:
    cfg = ctx.cfg
    rng = RngStream(cfg.seed, i)
    start = initial_bag(cfg.init, ctx.graph, rng)
    policy = ctx.policy()
    trace = run(ctx.graph, policy, start, cfg.budget, rng, max_time=cfg.max_time,
                max_events=cfg.max_events, record_events=False)
    ph = phase_durations(trace)
    rec = RunRecord(
        replication_id=i, seed=cfg.seed, outcome=trace.outcome.label, tau=trace.outcome.at,
        attempts=ph["attempts"], excursions=ph["excursion_count"],
        long_excursions=sum(ph["long"]),
        waiting_time_total=ph["totals"][WAITING], path_time_total=ph["totals"][PATH],
        excursion_time_total=ph["totals"][EXCURSION],
        excursion_lengths=ph["excursions"], excursion_long=ph["long"],
        waiting_lengths=ph["waits"])
    if isinstance(policy, CurePolicy) and policy.state is not None:
        st = policy.state
        rec.rate_checks = st.rate_checks
        rec.rate_violations = st.rate_violations
        rec.max_excursion_cut = st.max_excursion_cut
    return rec


def _run_chunk(cfg: ExperimentConfig, ids: Sequence[int]) -> list[RunRecord]:
    ctx = Context(cfg)
    return [run_replication(ctx, i) for i in ids]


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    graph: Graph
    cutwidth: int | None
    records: list[RunRecord]

    @property
    def censored(self) -> int:
        return sum(1 for r in self.records if not r.extinct)

    def extinction_summary(self) -> Summary:
        taus = [r.tau for r in self.records if r.extinct]
        if not taus:
            raise AllCensored(f"all {len(self.records)} runs were censored")
        if self.censored:
            warnings.warn(f"{self.censored} of {len(self.records)} runs censored; "
                          "excluded from the extinction-time mean", stacklevel=2)
        return Summary.of(taus, self.censored)

    def rate_violations(self) -> int:
        return sum(r.rate_violations for r in self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.records:
            w.writerow(r.csv_row())
        return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Run ``cfg.reps`` independent replications; results are ordered by id."""
    ctx = Context(cfg)
    workers = worker_count() if workers is None else workers
    ids = list(range(cfg.reps))
    if workers <= 1 or cfg.reps < 2 * workers:
        records = [run_replication(ctx, i) for i in ids]
    else:
        chunks = [ids[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * workers, chunks))
        records = sorted((r for part in parts for r in part), key=lambda r: r.replication_id)
    return ExperimentResult(cfg, ctx.graph, ctx.cutwidth, records)


def estimate_extinction_time(cfg: ExperimentConfig) -> Summary:
    return run_experiment(cfg).extinction_summary()


# -- bound checks ----------------------------------------------------------

def _result(cfg: ExperimentConfig, result: ExperimentResult | None) -> ExperimentResult:
    return result if result is not None else run_experiment(cfg)


def _require_cure(cfg: ExperimentConfig) -> None:
    if cfg.policy != "cure":
        raise HypothesisError("this bound concerns the CURE policy; use --policy cure")


def _inputs(res: ExperimentResult) -> dict:
    g = res.graph
    budget = res.config.budget
    k = excursion_bound(budget, g.max_degree)
    return {"n": g.n, "r": budget, "Delta": g.max_degree, "W": res.cutwidth, "K": k,
            "p": failure_probability(g.n, budget, g.max_degree)}


def verify_lemma2(cfg: ExperimentConfig, result: ExperimentResult | None = None
                  ) -> tuple[BoundReport, BoundReport]:
    """Long-excursion frequency against ``p`` and mean excursion length against ``4 / r``."""
    _require_cure(cfg)
    res = _result(cfg, result)
    inputs = _inputs(res)
    flags = [float(f) for r in res.records for f in r.excursion_long]
    lengths = [d for r in res.records for d in r.excursion_lengths]
    freq = BoundReport("long_excursion_probability", "upper", inputs["p"], inputs,
                       Summary.of(flags))
    mean_len = BoundReport("mean_excursion_length", "upper", 4 / cfg.budget, inputs,
                           Summary.of(lengths))
    for rep in (freq, mean_len):
        if rep.summary.count < MIN_EXCURSIONS:
            rep.verdict = "inconclusive"
            rep.note = f"only {rep.summary.count} completed excursions (< {MIN_EXCURSIONS})"
    violations = res.rate_violations()
    if violations:
        freq.note = (freq.note + "; " if freq.note else "") + \
            f"{violations} excursion events with cut > r/2"
    return freq, mean_len


def verify_lemma3(cfg: ExperimentConfig, result: ExperimentResult | None = None) -> BoundReport:
    """Mean waiting-period length, pooled over attempts, against ``8 n / r``."""
    _require_cure(cfg)
    res = _result(cfg, result)
    inputs = _inputs(res)
    waits = [d for r in res.records for d in r.waiting_lengths]
    return BoundReport("mean_waiting_period", "upper", 8 * res.graph.n / cfg.budget,
                       inputs, Summary.of(waits))


def extinction_time_bound(n: int, budget: float, max_degree: int) -> float:
    p = failure_probability(n, budget, max_degree)
    return 1 / (1 - n * p) * 13 * n / budget


def check_cure_hypotheses(g: Graph, budget: float, cutwidth: int | None) -> None:
    p = failure_probability(g.n, budget, g.max_degree)
    if cutwidth is None:
        raise HypothesisError("cutwidth unknown: cannot check r >= 4W")
    if budget < 4 * cutwidth:
        raise HypothesisError(f"r = {budget} < 4W = {4 * cutwidth}")
    if g.n * p >= 1:
        raise HypothesisError(f"n*p = {g.n * p:.4g} >= 1; the bound is vacuous")


def verify_theorem1(cfg: ExperimentConfig, result: ExperimentResult | None = None) -> BoundReport:
    """Mean extinction time against ``13 n / (r (1 - n p))``."""
    _require_cure(cfg)
    if result is None:
        ctx = Context(cfg)
        check_cure_hypotheses(ctx.graph, cfg.budget, ctx.cutwidth)
    res = _result(cfg, result)
    check_cure_hypotheses(res.graph, cfg.budget, res.cutwidth)
    inputs = _inputs(res)
    return BoundReport("mean_extinction_time", "upper",
                       extinction_time_bound(res.graph.n, cfg.budget, res.graph.max_degree),
                       inputs, res.extinction_summary())


def verify_corollary_lower_bound(cfg: ExperimentConfig,
                                 result: ExperimentResult | None = None) -> BoundReport:
    """Mean extinction time from ``I0 = V`` against the lower bound ``n / r``."""
    if cfg.init != "all":
        raise HypothesisError("the lower bound needs every node initially infected (--init all)")
    res = _result(cfg, result)
    inputs = {"n": res.graph.n, "r": cfg.budget, "policy": cfg.policy}
    return BoundReport("extinction_time_lower_bound", "lower", res.graph.n / cfg.budget, inputs,
                       res.extinction_summary())


VERIFIERS = {
    "lemma2": verify_lemma2,
    "lemma3": verify_lemma3,
    "theorem1": verify_theorem1,
    "corollary": verify_corollary_lower_bound,
}


def summary_document(res: ExperimentResult, reports: Iterable[BoundReport] = ()) -> dict:
    reports = list(reports)
    cfg = asdict(res.config)
    if math.isinf(cfg["max_time"]):
        cfg["max_time"] = None
    doc = {"config": cfg, "graph": {"name": res.graph.name, "n": res.graph.n,
                                    "edges": len(res.graph.edges),
                                    "max_degree": res.graph.max_degree,
                                    "cutwidth": res.cutwidth},
           "replications": len(res.records), "censored": res.censored,
           "rate_checks": sum(r.rate_checks for r in res.records),
           "rate_violations": res.rate_violations()}
    extinct = [r.tau for r in res.records if r.extinct]
    if extinct:
        doc["extinction_time"] = asdict(Summary.of(extinct, res.censored))
    doc["reports"] = [_report_dict(r) for r in reports]
    doc["verdicts"] = {r.name: r.verdict for r in reports}
    return doc


def _report_dict(rep: BoundReport) -> dict:
    d = asdict(rep)
    d["summary"] = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                    for k, v in d["summary"].items()}
    return d


def doc_reports(doc: dict) -> list[BoundReport]:
    out = []
    for d in doc["reports"]:
        s = {k: (math.inf if k == "half_width" and v is None else
                 math.nan if v is None else v) for k, v in d["summary"].items()}
        out.append(BoundReport(d["name"], d["kind"], d["bound"], d["inputs"], Summary(**s),
                               d["verdict"], d["note"]))
    return out


def write_outputs(out_dir: str, res: ExperimentResult, reports: Iterable[BoundReport] = (),
                  stem: str = "") -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    prefix = f"{stem}_" if stem else ""
    csv_path = os.path.join(out_dir, f"{prefix}replications.csv")
    json_path = os.path.join(out_dir, f"{prefix}summary.json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(res.to_csv())
    with open(json_path, "w") as fh:
        json.dump(summary_document(res, reports), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def sweep(cfg: ExperimentConfig, budgets: Sequence[float]) -> list[tuple[float, Summary]]:
    rows = []
    for b in budgets:
        sub = ExperimentConfig(**{**asdict(cfg), "budget": float(b)})
        rows.append((float(b), run_experiment(sub).extinction_summary()))
    return rows


def sweep_monotone_violations(rows: Sequence[tuple[float, Summary]]) -> list[tuple[float, float]]:
    """Budget pairs ``(r, 2r)`` where the mean at ``2r`` exceeds the mean at ``r``
    by more than the combined half-widths (heuristic sanity check)."""
    by_budget = dict(rows)
    bad = []
    for b, s in rows:
        s2 = by_budget.get(2 * b)
        if s2 is not None and s2.mean > s.mean + s.half_width + s2.half_width:
            bad.append((b, 2 * b))
    return bad
