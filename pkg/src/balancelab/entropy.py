"""Entropy-inequality residuals and pair gaps for finite-volume runs.

Each inequality of the verification suite is evaluated as a midpoint
quadrature on the run's own space-time grid (slab-midpoint snapshots in
time, cell centers in space), against smooth product-bump test functions
with analytic derivatives.  The convention throughout: a residual is the
inequality's left side minus its right side, so nonnegative means the
inequality holds with margin.

Scalar forms, for a state u with transformed companion v and k ranging
over the transformed variable (eta denotes the per-cell inverse map
u = eta(x, v)):

  SEMI_PLUS   (u - eta(x,k))^+ psi_t + chi_{v>k}(A(v)-A(k)) psi_x
              + chi_{v>k} f psi, plus the initial term
              int (u0 - eta(x,k))^+ psi(0,.)
  SEMI_MINUS  mirrored positive part with a minus sign on the f term and
              initial term int (eta(x,k) - u0)^+ psi(0,.)
  SGN / N2    |u - eta(x,k)| psi_t + sgn(v-k)(A(v)-A(k)) psi_x
              + sgn(v-k) f psi + int |u0 - eta(x,k)| psi(0,.)
  N1          k in u-space: |u-k| psi_t + sgn(u-k)(Phi(x,u)-Phi(x,k)) psi_x
              + sgn(u-k)(f - div_x Phi(x,k)) psi + int |u0-k| psi(0,.)
              (smooth-in-x coefficients only)

Pair gaps for two runs sharing grid, times, and regularized operator:

  CONTRACTION |u1-u2| psi_t + sgn(v1-v2)(A(v1)-A(v2)) psi_x
              + sgn(v1-v2)(f1-f2) psi + int_{v1=v2} |f1-f2| psi
  COMPARISON  positive-part variant with diagonal (f1-f2)^+
  KATO        the u-space modulus variant with diagonal on {u1=u2}
"""

import csv
import json
from dataclasses import dataclass, field as _field

import numpy as np

from .problem import perturbation

FORMS = ("SEMI_PLUS", "SEMI_MINUS", "SGN", "N1", "N2")
PAIR_KINDS = ("CONTRACTION", "COMPARISON", "KATO")

# required resolution of a test-function support: cells / time slabs per radius
MIN_CELLS_PER_RADIUS = 8
MIN_SLABS_PER_RADIUS = 8


# ---------------------------------------------------------------------------
# Test functions: products of the standard smooth bump
# ---------------------------------------------------------------------------


def bump_profile(y):
    """exp(1 - 1/(1 - y^2)) inside |y| < 1, zero outside; peak value 1."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - yi * yi))
    return out


def bump_profile_dy(y):
    """Derivative of the bump profile: -2y/(1-y^2)^2 times the profile."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    q = 1.0 - yi * yi
    out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * yi / (q * q))
    return out


@dataclass
class TestFunction:
    """Nonnegative space-time bump psi(t,x) = b((t-tc)/rt) b((x-xc)/rx)."""

    __test__ = False  # keep pytest from collecting the class by its name

    t_center: float
    x_center: float
    r_t: float
    r_x: float
    label: str = ""

    def __post_init__(self):
        if self.r_t <= 0 or self.r_x <= 0:
            raise ValueError("test function radii must be positive")
        if not self.label:
            self.label = "t%g_x%g_r%gx%g" % (self.t_center, self.x_center,
                                             self.r_t, self.r_x)

    def value(self, t, x):
        """(len(t), len(x)) matrix of psi values."""
        return np.outer(bump_profile((np.asarray(t, dtype=float) - self.t_center) / self.r_t),
                        bump_profile((np.asarray(x, dtype=float) - self.x_center) / self.r_x))

    def dt_matrix(self, t, x):
        return np.outer(bump_profile_dy((np.asarray(t, dtype=float) - self.t_center) / self.r_t) / self.r_t,
                        bump_profile((np.asarray(x, dtype=float) - self.x_center) / self.r_x))

    def dx_matrix(self, t, x):
        return np.outer(bump_profile((np.asarray(t, dtype=float) - self.t_center) / self.r_t),
                        bump_profile_dy((np.asarray(x, dtype=float) - self.x_center) / self.r_x) / self.r_x)


def battery_from_geometry(spec, t_fracs=(0.3, 0.5, 0.7),
                          x_fracs=(0.3, 0.5, 0.7),
                          radius_fracs=(0.15, 0.25)):
    """Deterministic battery from fractional centers and radii.

    Centers sit at the given fractions of the time horizon and space
    extent, radii at the given fractions of both extents; every fraction
    must keep the support strictly interior.
    """
    length = spec.x_hi - spec.x_lo
    out = []
    for tf in t_fracs:
        for xf in x_fracs:
            for rho in radius_fracs:
                if not (0.0 < tf - rho and tf + rho < 1.0
                        and 0.0 < xf - rho and xf + rho < 1.0):
                    raise ValueError(
                        "battery support leaves the interior: center fraction"
                        f" {tf:g}/{xf:g} with radius fraction {rho:g}")
                out.append(TestFunction(
                    tf * spec.T, spec.x_lo + xf * length,
                    rho * spec.T, rho * length,
                    label="t%.2g_x%.2g_r%.2g" % (tf, xf, rho)))
    return out


def standard_battery(spec):
    """The fixed 18-member battery: centers at {0.3, 0.5, 0.7} fractions of
    the time and space extents, radii at {0.15, 0.25} fractions."""
    return battery_from_geometry(spec)


def k_samples(values, reg, n=33, space="v", pad=0.5):
    """Sample levels spanning the state range padded by 0.5, plus the
    critical values where violations concentrate: plateau endpoints of the
    flux parametrization and coefficient-scaled jump values of the
    nonlinearity (v-space), or the jump locations themselves (u-space)."""
    w = np.asarray(values, dtype=float)
    lo = float(w.min()) - pad
    hi = float(w.max()) + pad
    ks = list(np.linspace(lo, hi, n))
    graph = reg.field.graph
    if space == "v":
        if reg.par is not None:
            for a, b, _ in reg.par.plateaus:
                ks += [a, b]
        else:
            _, row_c = reg.field.distinct_rows()
            for c in row_c:
                for j_lo, j_hi in np.atleast_2d(graph.jumps.reshape(-1, 2)):
                    ks += [c * j_lo, c * j_hi]
    else:
        ks += list(graph.breakpoints)
    ks = sorted(k for k in set(ks) if lo <= k <= hi)
    return np.asarray(ks)


# ---------------------------------------------------------------------------
# Report container
# ---------------------------------------------------------------------------


@dataclass
class EntropyReport:
    """Residuals per (form, k, psi) with summary minima and grid data."""

    grid_info: dict
    rows: list = _field(default_factory=list)

    def append(self, form, k, psi_label, residual):
        if not np.isfinite(residual):
            raise ValueError("non-finite residual for %s k=%g" % (form, k))
        self.rows.append((form, float(k), psi_label, float(residual)))

    def minima(self):
        out = {}
        for form, _, _, res in self.rows:
            out[form] = min(out.get(form, np.inf), res)
        return out

    def to_dict(self):
        return {
            "grid": dict(self.grid_info),
            "minima": self.minima(),
            "rows": [
                {"form": f, "k": k, "psi_id": p, "residual": r}
                for f, k, p, r in self.rows
            ],
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["form", "k", "psi_id", "residual"])
            for form, k, psi_label, res in self.rows:
                writer.writerow([form, repr(k), psi_label, repr(res)])


# ---------------------------------------------------------------------------
# Residual evaluation
# ---------------------------------------------------------------------------


class ResidualEvaluator:
    """Midpoint-quadrature residuals of one run against many (form, k, psi).

    Precomputes the psi-independent integrand fields per (form, k) and the
    psi fields per test function, so batteries reuse both caches.
    """

    def __init__(self, run, reg):
        self.run = run
        self.reg = reg
        self.spec = reg.spec
        times, U, V = run.snapshot_matrix()
        self.t_mid = times[:-1]
        self.n_slabs = len(self.t_mid)
        self.slab = self.spec.T / self.n_slabs
        expected = (np.arange(self.n_slabs) + 0.5) * self.slab
        if not np.allclose(self.t_mid, expected, rtol=0, atol=1e-10 * max(self.spec.T, 1.0)):
            raise ValueError("snapshot times are not slab midpoints")
        self.U = U[:-1]
        self.V = V[:-1]
        self.x = run.grid.centers
        self.dx = run.grid.dx
        self.u0 = self.spec.initial_values(self.x, self.dx)
        src = self.spec.source
        F = np.empty_like(self.U)
        for s, t in enumerate(self.t_mid):
            F[s] = src.eval_mollified(self.spec.j, t, self.x, self.U[s]) \
                + perturbation(self.V[s], self.spec.ell, self.spec.m)
        self.f_cells = F
        self.AV = reg.curve(self.V)
        self._terms_cache = {}
        self._psi_cache = {}

    # -- plumbing ---------------------------------------------------------------

    def _check_resolution(self, psi):
        need_cells = MIN_CELLS_PER_RADIUS * self.dx
        need_slabs = MIN_SLABS_PER_RADIUS * self.slab
        if psi.r_x < need_cells or psi.r_t < need_slabs:
            raise ValueError(
                "test function support unresolved: radius (%.3g, %.3g) needs "
                "at least %d cells and %d slabs per radius; use n_cells >= %d "
                "and snapshots >= %d"
                % (psi.r_t, psi.r_x, MIN_CELLS_PER_RADIUS, MIN_SLABS_PER_RADIUS,
                   int(np.ceil(MIN_CELLS_PER_RADIUS * (self.x[-1] - self.x[0] + self.dx) / psi.r_x)),
                   int(np.ceil(MIN_SLABS_PER_RADIUS * self.spec.T / psi.r_t))))

    def _psi_fields(self, psi):
        key = id(psi)
        if key not in self._psi_cache:
            self._psi_cache[key] = (
                psi.value(self.t_mid, self.x),
                psi.dt_matrix(self.t_mid, self.x),
                psi.dx_matrix(self.t_mid, self.x),
                psi.value(np.asarray([0.0]), self.x)[0],
            )
        return self._psi_cache[key]

    def terms(self, form, k):
        """psi-independent integrand fields (G1, G2, G3, W0) of one form:
        residual = int (G1 psi_t + G2 psi_x + G3 psi) + int W0 psi(0, .)."""
        key = (form, float(k))
        if key in self._terms_cache:
            return self._terms_cache[key]
        theta = self.reg.theta
        curve = self.reg.curve
        if form == "N1":
            if not self.reg.field.smooth_in_x:
                raise ValueError(
                    "the u-space Kruzkov form needs coefficients smooth in x "
                    "(div of the composed flux is measure-valued otherwise)")
            sg = np.sign(self.U - k)
            phi_k = curve(theta.theta_of(k))
            div_phi_k = np.gradient(phi_k, self.dx)
            out = (np.abs(self.U - k),
                   sg * (self.AV - phi_k),
                   sg * (self.f_cells - div_phi_k),
                   np.abs(self.u0 - k))
        else:
            eta_k = theta.eta_cells(k)
            a_k = float(curve(k))
            if form == "SEMI_PLUS":
                chi = (self.V > k).astype(float)
                out = (np.maximum(self.U - eta_k, 0.0),
                       chi * (self.AV - a_k),
                       chi * self.f_cells,
                       np.maximum(self.u0 - eta_k, 0.0))
            elif form == "SEMI_MINUS":
                chi = (k > self.V).astype(float)
                out = (np.maximum(eta_k - self.U, 0.0),
                       chi * (a_k - self.AV),
                       -chi * self.f_cells,
                       np.maximum(eta_k - self.u0, 0.0))
            elif form in ("SGN", "N2"):
                sg = np.sign(self.V - k)
                out = (np.abs(self.U - eta_k),
                       sg * (self.AV - a_k),
                       sg * self.f_cells,
                       np.abs(self.u0 - eta_k))
            else:
                raise ValueError("unknown form %r" % (form,))
        self._terms_cache[key] = out
        return out

    def residual(self, form, k, psi):
        self._check_resolution(psi)
        G1, G2, G3, W0 = self.terms(form, k)
        P, Pt, Px = self._psi_fields(psi)[:3]
        P0 = self._psi_fields(psi)[3]
        interior = self.dx * self.slab * float(
            np.sum(G1 * Pt) + np.sum(G2 * Px) + np.sum(G3 * P))
        return interior + self.dx * float(np.sum(W0 * P0))

    def battery_report(self, forms, ks, psis):
        """Residuals in fixed lexicographic (form, k, psi) order.

        ``ks`` is an array shared by all forms or a dict form -> array
        (the u-space forms sample k differently)."""
        info = {
            "n_cells": self.run.grid.n_cells,
            "dx": self.dx,
            "snapshots": self.n_slabs,
            "T": self.spec.T,
        }
        report = EntropyReport(info)
        for form in forms:
            k_list = ks[form] if isinstance(ks, dict) else ks
            for k in np.asarray(k_list, dtype=float):
                for psi in psis:
                    report.append(form, k, psi.label, self.residual(form, k, psi))
        return report


# ---------------------------------------------------------------------------
# Initial trace and pair diagnostics
# ---------------------------------------------------------------------------


def initial_trace_error(run, u0_values, window=None, n_snapshots=10):
    """Curve t -> int_K |u(t,.) - u0| dx over the earliest snapshots."""
    times, U, _ = run.snapshot_matrix()
    x = run.grid.centers
    u0 = np.asarray(u0_values, dtype=float)
    if window is None:
        mask = np.ones_like(x, dtype=bool)
    else:
        mask = (x >= window[0]) & (x <= window[1])
    head = min(n_snapshots, len(times))
    vals = run.grid.dx * np.sum(np.abs(U[:head][:, mask] - u0[mask]), axis=1)
    return times[:head], vals


def l1_distance_curve(run1, run2):
    """Curve t -> ||u1(t) - u2(t)||_L1, trapezoid in x per snapshot."""
    _require_matching(run1, run2)
    times, U1, _ = run1.snapshot_matrix()
    _, U2, _ = run2.snapshot_matrix()
    diff = np.abs(U1 - U2)
    trap = np.sum(diff, axis=1) - 0.5 * (diff[:, 0] + diff[:, -1])
    return times, run1.grid.dx * trap


def _require_matching(run1, run2):
    g1, g2 = run1.grid, run2.grid
    if g1.n_cells != g2.n_cells or g1.x_lo != g2.x_lo or g1.x_hi != g2.x_hi:
        raise ValueError("runs live on different grids")
    if len(run1.times) != len(run2.times) or not np.array_equal(run1.times, run2.times):
        raise ValueError("runs have different snapshot times")


def _pair_fields(kind, ev1, ev2):
    """The psi-independent integrand fields (G1, G2, G3 + diagonal) of a
    two-solution inequality; the diagonal right-hand term lives on the
    exact floating-point equality set of the states."""
    U1, V1, f1, A1 = ev1.U, ev1.V, ev1.f_cells, ev1.AV
    U2, V2, f2, A2 = ev2.U, ev2.V, ev2.f_cells, ev2.AV
    if kind == "CONTRACTION":
        sg = np.sign(V1 - V2)
        return (np.abs(U1 - U2), sg * (A1 - A2),
                sg * (f1 - f2) + np.where(V1 == V2, np.abs(f1 - f2), 0.0))
    if kind == "COMPARISON":
        chi = (V1 > V2).astype(float)
        return (np.maximum(U1 - U2, 0.0), chi * (A1 - A2),
                chi * (f1 - f2) + np.where(V1 == V2, np.maximum(f1 - f2, 0.0), 0.0))
    sg = np.sign(U1 - U2)
    return (np.abs(U1 - U2), sg * (A1 - A2),
            sg * (f1 - f2) + np.where(U1 == U2, np.abs(f1 - f2), 0.0))


def pair_gap_battery(kind, run1, run2, reg1, reg2, psis):
    """Gaps (left minus right side) of a two-solution inequality, one per
    test function.

    Both runs must share the grid, the snapshot times, and the regularized
    operator (same flux curve and theta tables); only the sources and data
    may differ.
    """
    if kind not in PAIR_KINDS:
        raise ValueError("unknown pair kind %r" % (kind,))
    _require_matching(run1, run2)
    if not (np.array_equal(reg1.curve.values, reg2.curve.values)
            and np.array_equal(reg1.theta.table, reg2.theta.table)):
        raise ValueError("pair gaps need identical flux and theta tables")
    ev1 = ResidualEvaluator(run1, reg1)
    ev2 = ResidualEvaluator(run2, reg2)
    G1, G2, G3 = _pair_fields(kind, ev1, ev2)
    out = []
    for psi in psis:
        ev1._check_resolution(psi)
        P, Pt, Px = ev1._psi_fields(psi)[:3]
        out.append(ev1.dx * ev1.slab * float(
            np.sum(G1 * Pt) + np.sum(G2 * Px) + np.sum(G3 * P)))
    return np.asarray(out)


def pair_gap(kind, run1, run2, reg1, reg2, psi):
    """Single test-function variant of ``pair_gap_battery``."""
    return float(pair_gap_battery(kind, run1, run2, reg1, reg2, [psi])[0])
