"""Comparison of exact, approximate and simulated loss on the published tables.

Rows are transcribed as printed, including inputs that look misprinted;
those rows carry a footnote and, where a single-parameter correction
reproduces both printed values, an ``alternative`` configuration that the
report evaluates alongside.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from capshare import approx, exact, sim
from capshare.errors import StageError, StateSpaceTooLarge
from capshare.model import RequestClass, ServiceLength, SystemConfig, validate

APPROX_TOL = 5e-4
EXACT_TOL = 5e-4
EXACT_TOL_H2 = 5e-3
SIM_COVERAGE = 0.9

SKIPPED = "skipped"
CSV_HEADER = ["id", "m", "classes", "exact_paper", "exact", "approx_paper", "approx", "sim", "sim_ci_low", "sim_ci_high"]

_SHORT = {"exponential": "exp", "erlang2": "erl2", "hyperexp2_balanced": "h2"}


@dataclass(frozen=True)
class SimParams:
    arrivals: int = 1_000_000
    replications: int = 20
    warmup: float = 0.1
    seed: int = 20240101
    check_invariants: bool = False


@dataclass(frozen=True)
class TableRow:
    table: int
    id: int
    config: SystemConfig
    exact_paper: float
    approx_paper: float
    exact_tol: float = EXACT_TOL
    excluded: bool = False
    note: Optional[str] = None
    alternative: Optional[SystemConfig] = None
    alternative_label: Optional[str] = None


@dataclass
class ExperimentRow:
    id: int
    config: SystemConfig
    approx: approx.ErlangBResult
    exact: object = SKIPPED  # float or SKIPPED
    sim: object = SKIPPED  # LossEstimate or SKIPPED
    reference_exact: Optional[float] = None
    reference_approx: Optional[float] = None
    exact_tol: float = EXACT_TOL
    approx_tol: float = APPROX_TOL
    excluded: bool = False
    notes: list = field(default_factory=list)

    @property
    def approx_delta(self):
        if self.reference_approx is None:
            return None
        return self.approx.blocking - self.reference_approx

    @property
    def exact_delta(self):
        if self.reference_exact is None or self.exact == SKIPPED:
            return None
        return self.exact - self.reference_exact

    @property
    def approx_ok(self):
        d = self.approx_delta
        return d is None or abs(d) <= self.approx_tol

    @property
    def exact_ok(self):
        d = self.exact_delta
        return d is None or abs(d) <= self.exact_tol

    @property
    def sim_covers_exact(self):
        if self.sim == SKIPPED or self.exact == SKIPPED:
            return None
        return self.sim.ci_low <= self.exact <= self.sim.ci_high

    @property
    def flagged(self):
        return not self.excluded and not (self.approx_ok and self.exact_ok)


def analyze(config: SystemConfig, run_exact: bool = True, run_sim: bool = False,
            sim_params: SimParams = SimParams(), *, row_id=0, max_states: int = exact.DEFAULT_MAX_STATES):
    validate(config)
    try:
        row = ExperimentRow(row_id, config, approx.approximate_loss(config))
    except Exception as exc:
        raise StageError("approx", exc) from exc
    if run_exact:
        try:
            row.exact = exact.loss_probability_exact(config, max_states)
        except StateSpaceTooLarge as exc:
            row.notes.append(f"exact skipped: {exc}")
        except Exception as exc:
            raise StageError("exact", exc) from exc
    if run_sim:
        try:
            row.sim = sim.run(config, sim_params.arrivals, sim_params.replications, sim_params.warmup,
                              sim_params.seed, check_invariants=sim_params.check_invariants)
        except Exception as exc:
            raise StageError("sim", exc) from exc
    return row


def _two_class(m, d, lam, b, second):
    svc2 = {"exp": ServiceLength.exponential, "erl2": ServiceLength.erlang2,
            "h2": ServiceLength.hyperexp2}[second]
    return SystemConfig(m, [
        RequestClass(float(lam[0]), d[0], ServiceLength.exponential(float(b[0]))),
        RequestClass(float(lam[1]), d[1], svc2(float(b[1]))),
    ])


F = Fraction
# (m, (d1, d2), (lam1, lam2), (b1, b2), exact, approx)
_TABLE1 = [
    (2, (1, 2), (1, 1), (F(1, 2), F(1, 4)), 0.2632, 0.2614),
    (2, (1, 2), (2, 1), (F(1, 3), F(1, 3)), 0.3289, 0.3259),
    (2, (1, 2), (1, 1), (1, F(1, 2)), 0.4444, 0.4405),
    (3, (2, 3), (1, 1), (F(1, 2), F(1, 3)), 0.3265, 0.3007),
    (2, (1, 2), (1, 9), (F(1, 10), F(1, 20)), 0.3187, 0.3139),
    (5, (1, 4), (9, 9), (F(1, 6), F(1, 12)), 0.4498, 0.4080),
    (5, (1, 4), (9, 9), (F(1, 3), F(1, 6)), 0.5813, 0.5683),
    (3, (2, 3), (1, F(1, 4)), (1, 1), 0.3796, 0.4030),
    (3, (2, 3), (1, F(1, 2)), (1, 1), 0.4698, 0.5054),
    (3, (2, 3), (1, 1), (1, 1), 0.6875, 0.6075),
]
_TABLE2 = [0.2644, 0.3301, 0.4458, 0.3284]
_TABLE3 = [0.2628, 0.3287, 0.4441, 0.3262]
# (kind, m, d, lam, b, exact, approx)
_TABLE4 = [
    ("exponential", 3, 2, 1, 1, 0.2500, 0.3259),
    ("erlang2", 3, 2, 1, 1, 0.2458, 0.3259),
    ("hyperexp2_balanced", 3, 1, 1, 1, 0.2514, 0.3259),
    ("exponential", 19, 10, 1, 1, 0.2083, 0.2216),
    ("exponential", 9, 5, 1, 1, 0.2174, 0.2449),
    ("exponential", 7, 2, 2, 1, 0.1185, 0.1444),
    ("exponential", 11, 2, 2, 1, 0.1265, 0.1545),
]

_APPROX_SLIP = "printed approximate value is not reproduced by the load reduction at the printed inputs"


def _table1():
    rows = []
    for k, (m, d, lam, b, ex, ap) in enumerate(_TABLE1, start=1):
        note, alt, label = None, None, None
        if k in (1, 4, 8):
            note = _APPROX_SLIP
        elif k == 6:
            note = "both printed values are reproduced with b1 = 1/3 instead of the printed 1/6"
            alt, label = _two_class(m, d, lam, (F(1, 3), b[1]), "exp"), "b1 = 1/3"
        elif k == 10:
            note = "computed exact value differs from the printed one in a single digit (0.5875 vs 0.6875)"
        rows.append(TableRow(1, k, _two_class(m, d, lam, b, "exp"), ex, ap,
                             note=note, alternative=alt, alternative_label=label))
    return rows


def _phase_table(table, second, exact_values, tol):
    rows = []
    for k, ex in enumerate(exact_values, start=1):
        m, d, lam, b, _, ap = _TABLE1[k - 1]
        note = _APPROX_SLIP if k in (1, 4) else None
        if table == 3:
            tail = "balanced H2 second moment is not given; computed with scv = 2"
            note = f"{note}; {tail}" if note else tail
        rows.append(TableRow(table, k, _two_class(m, d, lam, b, second), ex, ap, exact_tol=tol, note=note))
    return rows


def _table4(row3_channels_required=1):
    rows = []
    for k, (kind, m, d, lam, b, ex, ap) in enumerate(_TABLE4, start=1):
        if k == 3:
            d = row3_channels_required
        config = SystemConfig.single(m, float(lam), d, ServiceLength(kind, float(b)))
        note, alt, label, excluded = None, None, None, False
        if k == 3:
            excluded = True
            note = ("excluded from tolerance checks: printed d = 1 is inconsistent with the printed values, "
                    "which follow the d = 2 pattern of rows 1-2")
            other = 2 if d == 1 else 1
            alt, label = replace(config, classes=[replace(config.classes[0], channels_required=other)]), f"d = {other}"
        elif k == 6:
            note = "printed exact value is not reproduced at the printed inputs; no single-parameter correction found"
        elif k == 7:
            note = "both printed values are reproduced with offered load 4 (e.g. arrival rate 4) instead of 2"
            alt, label = SystemConfig.single(m, 4.0, d, ServiceLength(kind, float(b))), "arrival rate 4"
        rows.append(TableRow(4, k, config, ex, ap, excluded=excluded, note=note,
                             alternative=alt, alternative_label=label))
    return rows


def builtin_tables(row3_channels_required: int = 1) -> dict:
    """Published configurations keyed by table number."""
    return {
        1: _table1(),
        2: _phase_table(2, "erl2", _TABLE2, EXACT_TOL),
        3: _phase_table(3, "h2", _TABLE3, EXACT_TOL_H2),
        4: _table4(row3_channels_required),
    }


def evaluate_row(row: TableRow, run_sim: bool, sim_params: SimParams) -> ExperimentRow:
    out = analyze(row.config, run_exact=True, run_sim=run_sim, sim_params=sim_params, row_id=row.id)
    out.reference_exact = row.exact_paper
    out.reference_approx = row.approx_paper
    out.exact_tol = row.exact_tol
    out.excluded = row.excluded
    if row.note:
        out.notes.append(row.note)
    if row.alternative is not None:
        a = approx.approximate_loss(row.alternative).blocking
        e = exact.loss_probability_exact(row.alternative)
        out.notes.append(f"With {row.alternative_label}: exact {e:.4f}, approx {a:.4f}")
    return out


@dataclass
class TableReport:
    table: int
    rows: list
    sim_enabled: bool

    @property
    def sim_coverage(self):
        covered = [r.sim_covers_exact for r in self.rows if r.sim_covers_exact is not None]
        return sum(covered) / len(covered) if covered else None

    def failures(self):
        out = []
        for r in self.rows:
            if r.excluded:
                continue
            if not r.approx_ok:
                out.append(f"table {self.table} row {r.id}: approx {r.approx.blocking:.4f} vs paper {r.reference_approx:.4f}")
            if not r.exact_ok:
                out.append(f"table {self.table} row {r.id}: exact {r.exact:.4f} vs paper {r.reference_exact:.4f}")
        # simulator coverage is a regression check on Table 1 only
        if self.table == 1 and self.sim_coverage is not None and self.sim_coverage < SIM_COVERAGE:
            out.append(f"table 1: simulation CI covers the exact value in only {self.sim_coverage:.0%} of rows")
        return out


def reproduce(run_sim: bool = True, sim_params: SimParams = SimParams(), row3_channels_required: int = 1) -> list:
    return [TableReport(t, [evaluate_row(r, run_sim, sim_params) for r in rows], run_sim)
            for t, rows in builtin_tables(row3_channels_required).items()]


def _fmt(x, full):
    if x is None:
        return ""
    if x == SKIPPED:
        return SKIPPED
    return repr(float(x)) if full else f"{x:.4f}"


def _fmt_delta(x, full):
    if x is None:
        return ""
    if full:
        return f"{x:+.3e}"
    return "+0.0000" if abs(x) < 5e-5 else f"{x:+.4f}"


def _frac(x):
    f = Fraction(x).limit_denominator(1000)
    return str(f) if abs(float(f) - x) < 1e-12 else repr(x)


def describe_classes(config: SystemConfig) -> str:
    """Compact ``lambda:d:b:kind`` list, one entry per class, ``;``-separated."""
    parts = []
    for c in config.classes:
        kind = _SHORT[c.service.kind]
        if c.service.kind == "hyperexp2_balanced":
            kind += f"(scv={c.service.scv:g})"
        parts.append(f"{_frac(c.arrival_rate)}:{c.channels_required}:{_frac(c.service.mean)}:{kind}")
    return ";".join(parts)


def render_markdown(report: TableReport, full_precision: bool = False) -> str:
    head = ["id", "m", "classes (λ:d:b:dist)", "exact (paper)", "exact", "Δ exact",
            "approx (paper)", "approx", "Δ approx"]
    if report.sim_enabled:
        head += ["sim", "sim 95% CI"]
    head.append("status")
    lines = [f"## Table {report.table}", "", "| " + " | ".join(head) + " |",
             "|" + "---|" * len(head)]
    notes = []
    for r in report.rows:
        status = "excluded" if r.excluded else ("FLAG" if r.flagged else "ok")
        if r.notes:
            notes.append((r.id, r.notes))
            status += f" [{r.id}]"
        cells = [str(r.id), str(r.config.channels), describe_classes(r.config),
                 _fmt(r.reference_exact, full_precision), _fmt(r.exact, full_precision),
                 _fmt_delta(r.exact_delta, full_precision),
                 _fmt(r.reference_approx, full_precision), _fmt(r.approx.blocking, full_precision),
                 _fmt_delta(r.approx_delta, full_precision)]
        if report.sim_enabled:
            if r.sim == SKIPPED:
                cells += [SKIPPED, ""]
            else:
                cells += [_fmt(r.sim.point, full_precision),
                          f"[{_fmt(r.sim.ci_low, full_precision)}, {_fmt(r.sim.ci_high, full_precision)}]"]
        cells.append(status)
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    if report.sim_enabled and report.sim_coverage is not None:
        lines.append(f"Simulation CI covers the computed exact value in {report.sim_coverage:.0%} of rows.")
        lines.append("")
    for rid, texts in notes:
        lines.append(f"[{rid}] " + " ".join(t.rstrip(".") + "." for t in texts))
    if notes:
        lines.append("")
    return "\n".join(lines)


def render_csv(report: TableReport, full_precision: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        has_sim = r.sim != SKIPPED
        w.writerow([
            r.id, r.config.channels, describe_classes(r.config),
            _fmt(r.reference_exact, full_precision), _fmt(r.exact, full_precision),
            _fmt(r.reference_approx, full_precision), _fmt(r.approx.blocking, full_precision),
            _fmt(r.sim.point, full_precision) if has_sim else SKIPPED,
            _fmt(r.sim.ci_low, full_precision) if has_sim else "",
            _fmt(r.sim.ci_high, full_precision) if has_sim else "",
        ])
    return buf.getvalue()
