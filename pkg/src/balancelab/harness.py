"""Parameter-schedule sweeps that measure the solver's limit structure.

Three families of sweeps, all returning one ScheduleReport type:

* ``monotone_in_m_check`` / ``monotone_in_ell_check`` solve the same
  problem along a schedule of perturbation weights and compare consecutive
  runs cellwise.  The perturbation phi_{l,m}(r) = (1/l) atan(r^-) -
  (1/m) atan(r^+) is strictly decreasing in r, so weakening the positive
  side (m up) raises the solution while strengthening the negative side
  (l up) lowers it; the transformed field v inherits the ordering.  The
  discrete scheme only keeps this ordering up to its consistency error,
  so violations are recorded as data next to the tolerance
  ``scheme_tol(dx) = 10 dx (1 + max|v|)``, never raised as errors.
* ``j_schedule_run`` sweeps the graph-smoothing index with fixed (l, m)
  and reports consecutive L1 distances at the final time; callers assert
  Cauchy behavior.
* ``self_convergence_order`` estimates the refinement order from a
  dx-halving grid triple by cell-pair averaging the finer runs.

Every sweep builds one regularized problem per schedule point (the tables
depend on the full parameter set) and forces one shared time step, the
smallest stable step over the schedule, so runs stay comparable point by
point.  Schedule points solve concurrently; aggregation is by schedule
index, so repeated invocations give bit-identical reports.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent import futures

import numpy as np

from .solver import DEFAULT_CFL, Field, cfl_dt, regularized, solve

SCHEDULE_KINDS = ("m", "ell", "j")

# Ordering directions along the schedule: later m entries raise v, later
# ell entries lower it, and the j sweep asserts no ordering at all.
_DIRECTIONS = {"m": "increasing", "ell": "decreasing", "j": "none"}


def scheme_tol(dx, values):
    """Ordering tolerance 10*dx*(1 + max|values|).

    The continuous ordering is exact; the scheme perturbs it at its
    consistency order, so the allowance scales with dx and with the
    solution magnitude.  The constant is deliberately generous and always
    reported alongside the measurements, never absorbed silently.
    """
    values = np.asarray(values, dtype=float)
    vmax = float(np.max(np.abs(values))) if values.size else 0.0
    return 10.0 * float(dx) * (1.0 + vmax)


def _validate_schedule(schedule):
    vals = [float(s) for s in schedule]
    if not vals:
        raise ValueError("schedule must be nonempty")
    if any(a >= b for a, b in zip(vals, vals[1:])):
        raise ValueError("schedule must be strictly increasing")
    return vals


@dataclasses.dataclass
class ScheduleReport:
    """Aggregated measurements of one schedule sweep.

    ``schedule`` holds the strictly increasing parameter values, one entry
    of ``summaries`` describes each run, and the pairwise fields compare
    consecutive runs: ``distances`` are L1 gaps of u at the final time,
    ``violation_counts`` / ``violation_maxima`` measure cellwise ordering
    failures beyond ``tolerance`` over every snapshot (empty for sweeps
    that assert no ordering), and ``orders`` are log2 ratios of
    consecutive distances (None where a distance vanishes, so every
    recorded estimate is finite).
    """

    kind: str
    schedule: list
    summaries: list
    distances: list
    violation_counts: list
    violation_maxima: list
    orders: list
    tolerance: float
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        self.schedule = _validate_schedule(self.schedule)
        n_pairs = self.n_pairs
        if len(self.summaries) != len(self.schedule):
            raise ValueError("one summary per schedule point required")
        if len(self.distances) != n_pairs:
            raise ValueError("one distance per consecutive pair required")
        for name in ("violation_counts", "violation_maxima"):
            if len(getattr(self, name)) not in (0, n_pairs):
                raise ValueError(f"{name} must be empty or one per pair")
        if len(self.orders) != max(n_pairs - 1, 0):
            raise ValueError("one order slot per consecutive distance pair")
        for o in self.orders:
            if o is not None and not math.isfinite(o):
                raise ValueError("estimated orders must be finite")

    @property
    def n_points(self):
        return len(self.schedule)

    @property
    def n_pairs(self):
        return max(len(self.schedule) - 1, 0)

    @property
    def max_violation(self):
        return max(self.violation_maxima, default=0.0)

    @property
    def total_violations(self):
        return int(sum(self.violation_counts))

    def to_dict(self):
        return {
            "kind": self.kind,
            "schedule": list(self.schedule),
            "summaries": [dict(s) for s in self.summaries],
            "distances": list(self.distances),
            "violation_counts": list(self.violation_counts),
            "violation_maxima": list(self.violation_maxima),
            "orders": list(self.orders),
            "tolerance": self.tolerance,
            "max_violation": self.max_violation,
            "total_violations": self.total_violations,
            "meta": dict(self.meta),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        """One row per consecutive pair, ready for plotting distances/orders."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair", "value_lo", "value_hi", "l1_distance",
                        "violations", "max_violation", "order"])
            for i in range(self.n_pairs):
                count = self.violation_counts[i] if self.violation_counts else 0
                vmax = self.violation_maxima[i] if self.violation_maxima else 0.0
                order = self.orders[i] if i < len(self.orders) else None
                w.writerow([i, repr(self.schedule[i]), repr(self.schedule[i + 1]),
                            repr(self.distances[i]), count, repr(vmax),
                            "" if order is None else repr(order)])


# ---------------------------------------------------------------------------
# Shared sweep machinery
# ---------------------------------------------------------------------------


def solve_points(specs, grid, snapshots=8, cfl=DEFAULT_CFL):
    """Solve one run per spec with a single shared time step.

    Each point gets its own regularized tables (they record the full
    parameter set); the step is the smallest stable step over the sweep so
    consecutive runs share snapshot instants exactly.  Points run
    concurrently and results are collected in schedule order.
    """
    regs = [regularized(s, grid) for s in specs]
    dts = []
    for s, r in zip(specs, regs):
        u0 = s.initial_values(grid.centers, grid.dx)
        dts.append(cfl_dt(Field(u0, r.v_of_u(u0)), s, grid, reg=r, cfl=cfl))
    dt = float(min(dts))
    workers = max(1, min(len(specs), os.cpu_count() or 1))
    with futures.ThreadPoolExecutor(max_workers=workers) as ex:
        runs = list(ex.map(
            lambda i: solve(specs[i], grid, snapshots=snapshots,
                            dt_override=dt, reg=regs[i]),
            range(len(specs))))
    return runs, dt


def _summarize(value, run, grid):
    _, U, V = run.snapshot_matrix()
    return {
        "value": float(value),
        "u_min": float(U[-1].min()),
        "u_max": float(U[-1].max()),
        "u_l1": float(np.abs(U[-1]).sum() * grid.dx),
        "v_abs_max": float(np.abs(V).max()),
        "n_steps": run.n_steps,
        "final_t": run.final_t,
    }


def _orders_from(distances):
    orders = []
    for a, b in zip(distances, distances[1:]):
        orders.append(math.log2(a / b) if a > 0.0 and b > 0.0 else None)
    return orders


def _sweep_report(kind, schedule, specs, grid, snapshots, cfl, meta):
    runs, dt = solve_points(specs, grid, snapshots, cfl)
    stacks = [run.snapshot_matrix() for run in runs]
    summaries = [_summarize(v, run, grid) for v, run in zip(schedule, runs)]
    tol = scheme_tol(grid.dx, np.concatenate([V.ravel() for _, _, V in stacks]))

    distances, counts, maxima = [], [], []
    direction = _DIRECTIONS[kind]
    for (_, U_lo, V_lo), (_, U_hi, V_hi) in zip(stacks, stacks[1:]):
        distances.append(float(np.abs(U_lo[-1] - U_hi[-1]).sum() * grid.dx))
        if direction == "increasing":
            excess = V_lo - V_hi
        elif direction == "decreasing":
            excess = V_hi - V_lo
        else:
            continue
        counts.append(int(np.count_nonzero(excess > tol)))
        maxima.append(float(max(excess.max(), 0.0)))

    meta = dict(meta)
    meta.update({
        "ordering": direction,
        "dt": dt,
        "snapshots": snapshots,
        "grid": {"n_cells": grid.n_cells, "x_lo": grid.x_lo,
                 "x_hi": grid.x_hi, "dx": grid.dx},
    })
    return ScheduleReport(
        kind=kind, schedule=list(schedule), summaries=summaries,
        distances=distances, violation_counts=counts,
        violation_maxima=maxima, orders=_orders_from(distances),
        tolerance=tol, meta=meta)


# ---------------------------------------------------------------------------
# Public sweeps
# ---------------------------------------------------------------------------


def monotone_in_m_check(spec, grid, ell, m_schedule, snapshots=8,
                        cfl=DEFAULT_CFL):
    """Check cellwise v_{l,m} <= v_{l,m'} + tol for consecutive m < m'.

    Solves once per schedule entry with the given fixed ell, compares
    every snapshot of consecutive runs, and reports violation counts and
    the largest excess.  A single-entry schedule yields an empty pairwise
    report.  Violations are measurements, not errors.
    """
    values = _validate_schedule(m_schedule)
    specs = [dataclasses.replace(spec, ell=float(ell), m=v) for v in values]
    return _sweep_report("m", values, specs, grid, snapshots, cfl,
                         {"ell": float(ell), "j": spec.j})


def monotone_in_ell_check(spec, grid, ell_schedule, m, snapshots=8,
                          cfl=DEFAULT_CFL):
    """Check cellwise v_{l',m} <= v_{l,m} + tol for consecutive l < l'.

    Mirror of :func:`monotone_in_m_check` with the order reversed: raising
    ell strengthens the negative-side damping, so later runs must sit
    below earlier ones.
    """
    values = _validate_schedule(ell_schedule)
    specs = [dataclasses.replace(spec, ell=v, m=float(m)) for v in values]
    return _sweep_report("ell", values, specs, grid, snapshots, cfl,
                         {"m": float(m), "j": spec.j})


def j_schedule_run(spec, grid, j_schedule, snapshots=8, cfl=DEFAULT_CFL):
    """Sweep the graph-smoothing index with fixed (ell, m).

    Reports consecutive L1 distances of u at the final time; callers
    assert Cauchy behavior (distances decreasing along the schedule).  No
    ordering is asserted, so the violation fields stay empty.
    """
    values = _validate_schedule(j_schedule)
    js = []
    for v in values:
        if v != int(v) or v < 1:
            raise ValueError("j schedule entries must be integers >= 1")
        js.append(int(v))
    specs = [dataclasses.replace(spec, j=j) for j in js]
    return _sweep_report("j", js, specs, grid, snapshots, cfl,
                         {"ell": spec.ell, "m": spec.m})


def double_limit_run(spec, grid, ell_schedule, m_schedule, snapshots=8,
                     cfl=DEFAULT_CFL):
    """Execute the nested double limit: m sweeps inside an ell sweep.

    For each ell the full m schedule is checked (inner limit), then the
    ell schedule is checked once at the largest m (outer limit).  Returns
    ``{"m_reports": [one per ell], "ell_report": ...}``.
    """
    ells = _validate_schedule(ell_schedule)
    ms = _validate_schedule(m_schedule)
    m_reports = [monotone_in_m_check(spec, grid, ell, ms, snapshots=snapshots,
                                     cfl=cfl) for ell in ells]
    ell_report = monotone_in_ell_check(spec, grid, ells, ms[-1],
                                       snapshots=snapshots, cfl=cfl)
    return {"m_reports": m_reports, "ell_report": ell_report}


def self_convergence_order(spec, grids, snapshots=4, cfl=DEFAULT_CFL):
    """Estimated refinement order from a dx-halving grid triple.

    order = log2(||u_dx - u_{dx/2}||_1 / ||u_{dx/2} - u_{dx/4}||_1) with
    the finer run restricted to the coarser grid by cell-pair averaging.
    A vanishing denominator (exact agreement, e.g. constant data) returns
    the +inf sentinel.
    """
    if len(grids) != 3:
        raise ValueError("need exactly three grids")
    for g_lo, g_hi in zip(grids, grids[1:]):
        if (g_lo.x_lo, g_lo.x_hi) != (g_hi.x_lo, g_hi.x_hi):
            raise ValueError("grids must share the domain")
        if g_hi.n_cells != 2 * g_lo.n_cells:
            raise ValueError("grids must halve dx at each step")
    finals = [solve(spec, g, snapshots=snapshots, cfl=cfl).final_u
              for g in grids]

    def restrict(u):
        return u.reshape(-1, 2).mean(axis=1)

    d_coarse = float(np.abs(finals[0] - restrict(finals[1])).sum() * grids[0].dx)
    d_fine = float(np.abs(finals[1] - restrict(finals[2])).sum() * grids[1].dx)
    if d_fine == 0.0:
        return math.inf
    if d_coarse == 0.0:
        return -math.inf
    return math.log2(d_coarse / d_fine)
