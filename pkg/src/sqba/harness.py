"""Budgeted attack sweeps and ASR tables.

Each example is attacked once at the largest query budget. Every time the
attack improves its best adversarial iterate it records ``(queries, rho)``;
success at a smaller budget ``b`` means some record has ``queries <= b`` and
``rho <= rho_budget``. Success sets are therefore nested across budgets.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import HsjaConfig, hsja_attack
from .data import Dataset
from .errors import DataError, InputError
from .io import load_dataset, load_model
from .nn import Network
from .oracle import HardLabelOracle
from .sqba import SqbaConfig, sqba_attack

log = logging.getLogger(__name__)

DEFAULT_BUDGETS = (100, 250, 500, 750, 1000)
ASR_COLUMNS = ["method", "surrogate", "budget", "asr", "n", "mean_queries_on_success", "mean_rho_on_success"]
ATTACK_COLUMNS = ["method", "surrogate", "example", "true_class", "queries_used", "iterations", "final_rho",
                  "success", "verified", "first_success_query", "improvements", "reason"]
TRACE_COLUMNS = ["method", "surrogate", "example", "t", "distance", "beta", "p_t", "delta", "queries", "event"]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return "" if v is None else str(v)


@dataclass
class ExperimentSpec:
    target: str
    surrogates: list
    dataset: str
    query_budgets: list = field(default_factory=lambda: list(DEFAULT_BUDGETS))
    rho_budget: float = 0.1
    methods: list = field(default_factory=lambda: ["sqba", "hsja"])
    sample_count: int = 200
    seed: int = 0
    workers: int = 1
    sqba: dict = field(default_factory=dict)
    hsja: dict = field(default_factory=dict)

    def __post_init__(self):
        if list(self.query_budgets) != sorted(self.query_budgets) or any(b < 0 for b in self.query_budgets):
            raise InputError("query budgets must be non-negative and ascending")
        unknown = set(self.methods) - {"sqba", "hsja"}
        if unknown:
            raise InputError(f"unknown methods {sorted(unknown)}")

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        raw = json.loads(Path(path).read_text())
        base = Path(path).parent
        for key in ("target", "dataset"):
            raw[key] = str((base / raw[key]).resolve()) if not Path(raw[key]).is_absolute() else raw[key]
        raw["surrogates"] = [str((base / s).resolve()) if not Path(s).is_absolute() else s
                             for s in raw.get("surrogates", [])]
        return cls(**raw)


@dataclass
class AttackRecord:
    method: str
    surrogate: str
    example: int
    true_class: int
    queries_used: int
    iterations: int
    final_rho: float
    success: bool
    verified: bool
    improvements: list
    reason: str
    first_success_query: int | None = None
    trace: list = field(default_factory=list, repr=False)

    def success_at(self, budget: int, rho_budget: float):
        """``(queries, rho)`` of the first qualifying improvement within ``budget``, else None."""
        if not self.verified:
            return None
        for q, r in self.improvements:
            if q <= budget and r <= rho_budget:
                return q, r
        return None


@dataclass
class AsrTable:
    budgets: list
    rows: dict = field(default_factory=dict)  # (method, surrogate) -> {budget: cell dict}

    def asr(self, method, surrogate, budget):
        return self.rows[(method, surrogate)][budget]["asr"]

    def to_rows(self):
        out = []
        for (method, surrogate), cells in sorted(self.rows.items()):
            for b in self.budgets:
                out.append({"method": method, "surrogate": surrogate, "budget": b, **cells[b]})
        return out


def prepare_eval_set(net: Network, dataset: Dataset, n: int, seed: int = 0):
    """Seeded sample of ``n`` examples that ``net`` classifies correctly.

    Returns ``(subset, indices)`` with indices into ``dataset``, sorted.
    """
    if n < 0:
        raise InputError("n must be non-negative")
    if n == 0:
        return dataset.subset([]), np.zeros(0, dtype=np.int64)
    pred = np.concatenate([np.atleast_1d(net.predict(dataset.images[i : i + 512]))
                           for i in range(0, len(dataset), 512)])
    correct = np.flatnonzero(pred == dataset.labels)
    if len(correct) < n:
        raise DataError(f"only {len(correct)} correctly classified examples, {n} requested")
    idx = np.sort(np.random.default_rng(seed).choice(correct, size=n, replace=False))
    return dataset.subset(idx), idx


def _attack_one(job):
    method, target, surrogate, sname, x, c, example, budget, rho_budget, cfg_kw = job
    oracle = HardLabelOracle(target, c, budget)
    if method == "sqba":
        res = sqba_attack(surrogate, oracle, x, c, SqbaConfig(query_budget=budget, rho_budget=rho_budget, **cfg_kw))
    else:
        res = hsja_attack(oracle, x, c, HsjaConfig(query_budget=budget, rho_budget=rho_budget, **cfg_kw))
    # re-check outside the metered oracle; not counted against the budget
    verified = res.x_adv is not None and int(target.predict(res.x_adv)) != c
    return AttackRecord(method, sname, int(example), int(c), res.queries_used, res.iterations,
                        res.final_rho, bool(res.success and verified), bool(verified),
                        list(res.improvements), res.reason,
                        res.first_success_query(rho_budget) if verified else None, res.trace)


def run_attacks(target: Network, surrogates: dict, dataset: Dataset, indices, methods, budget: int,
                rho_budget: float = 0.1, seed: int = 0, sqba_kw=None, hsja_kw=None, workers: int = 1):
    """Attack every example with every (method, surrogate); records sorted deterministically."""
    jobs = []
    for method in methods:
        pairs = sorted(surrogates.items()) if method == "sqba" else [("-", None)]
        for sname, snet in pairs:
            kw = dict(sqba_kw or {}) if method == "sqba" else dict(hsja_kw or {})
            for x, c, ex in zip(dataset.images, dataset.labels, indices):
                jobs.append((method, target, snet, sname, x, int(c), int(ex), budget, rho_budget,
                             {**kw, "seed": seed * 1_000_003 + int(ex)}))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_attack_one, jobs, chunksize=4))
    else:
        records = [_attack_one(j) for j in jobs]
    records.sort(key=lambda r: (r.method, r.surrogate, r.example))
    return records


def build_table(records, budgets, rho_budget: float = 0.1) -> AsrTable:
    table = AsrTable(list(budgets))
    groups: dict = {}
    for r in records:
        groups.setdefault((r.method, r.surrogate), []).append(r)
    for key, recs in groups.items():
        cells = {}
        for b in budgets:
            hits = [h for h in (r.success_at(b, rho_budget) for r in recs) if h is not None]
            cells[b] = {
                "asr": 100.0 * len(hits) / len(recs),
                "n": len(recs),
                "mean_queries_on_success": float(np.mean([h[0] for h in hits])) if hits else float("nan"),
                "mean_rho_on_success": float(np.mean([h[1] for h in hits])) if hits else float("nan"),
            }
        table.rows[key] = cells
    return table


def run_experiment(spec: ExperimentSpec):
    """Load models and data, run the sweep, return ``(AsrTable, records)``."""
    target = load_model(spec.target)
    surrogates = {Path(p).stem: load_model(p) for p in spec.surrogates}
    dataset = load_dataset(spec.dataset)
    if "sqba" in spec.methods and not surrogates:
        raise InputError("sqba needs at least one surrogate model")
    subset, idx = prepare_eval_set(target, dataset, spec.sample_count, spec.seed)
    budget = max(spec.query_budgets) if spec.query_budgets else 0
    log.info("attacking %d examples with %s at budget %d", len(idx), ", ".join(spec.methods), budget)
    records = run_attacks(target, surrogates, subset, idx, spec.methods, budget, spec.rho_budget,
                          spec.seed, spec.sqba, spec.hsja, spec.workers)
    return build_table(records, spec.query_budgets, spec.rho_budget), records


def _encode_improvements(imps):
    return ";".join(f"{q}:{format(float(r), '.10g')}" for q, r in imps)


def decode_improvements(text: str):
    if not text:
        return []
    return [(int(q), float(r)) for q, r in (item.split(":") for item in text.split(";"))]


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def emit_report(table: AsrTable, records, out_dir) -> dict:
    """Write ``asr.csv``, ``attacks.csv`` and ``traces.csv`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"asr": out / "asr.csv", "attacks": out / "attacks.csv", "traces": out / "traces.csv"}
    _write_csv(paths["asr"], ASR_COLUMNS, table.to_rows())
    attack_rows = []
    trace_rows = []
    for r in records:
        row = asdict(r)
        row.pop("trace")
        row["improvements"] = _encode_improvements(r.improvements)
        attack_rows.append(row)
        for tr in r.trace:
            trace_rows.append({"method": r.method, "surrogate": r.surrogate, "example": r.example, **tr})
    _write_csv(paths["attacks"], ATTACK_COLUMNS, attack_rows)
    _write_csv(paths["traces"], TRACE_COLUMNS, trace_rows)
    return paths


def read_asr_csv(path) -> AsrTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    budgets = sorted({int(r["budget"]) for r in rows})
    table = AsrTable(budgets)
    for r in rows:
        cell = {"asr": float(r["asr"]), "n": int(r["n"]),
                "mean_queries_on_success": float(r["mean_queries_on_success"]),
                "mean_rho_on_success": float(r["mean_rho_on_success"])}
        table.rows.setdefault((r["method"], r["surrogate"]), {})[int(r["budget"])] = cell
    return table


def read_attacks_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        AttackRecord(r["method"], r["surrogate"], int(r["example"]), int(r["true_class"]), int(r["queries_used"]),
                     int(r["iterations"]), float(r["final_rho"]), r["success"] == "1", r["verified"] == "1",
                     decode_improvements(r["improvements"]), r["reason"],
                     int(r["first_success_query"]) if r["first_success_query"] else None)
        for r in rows
    ]
