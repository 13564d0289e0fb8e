"""Problem bundles: sources, the strictly dissipative perturbation, initial
data, and hypothesis validation.

A problem couples a monotone nonlinearity theta(x, u) = c(x) * g(u), a flux
curve A (possibly with jumps), a separable source f(t, x, u) = C(t, x) G(u)
with G nonincreasing and G(0) = 0, an initial datum, and the regularization
indices j (smoothing), ell / m (perturbation strengths; inf disables a side).

Sources come from a closed-form registry so that dissipativity is verifiable
and mollification has exact separable form: mollifying C(t,x) G(u) with the
product kernel factorizes into mollified C times mollified G, and the
trigonometric modulations pick up the kernel cosine factor in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flux import FluxCurve, build_parametrization
from .monotone import MonotoneGraph, ThetaField, compose_graphs, mollifier_nodes

# ---------------------------------------------------------------------------
# Strictly dissipative perturbation
# ---------------------------------------------------------------------------


def perturbation(r, ell, m):
    """phi_{ell,m}(r) = (1/ell) atan(max(-r,0)) - (1/m) atan(max(r,0)).

    Strictly decreasing in r, zero at zero, bounded by pi/(2 min(ell, m));
    ell = inf or m = inf switches the corresponding side off.
    """
    if ell < 1 or m < 1:
        raise ValueError("perturbation indices must be >= 1")
    r = np.asarray(r, dtype=float)
    neg = np.arctan(np.maximum(-r, 0.0)) / ell
    pos = np.arctan(np.maximum(r, 0.0)) / m
    out = neg - pos
    return float(out) if out.ndim == 0 else out


def perturbation_lipschitz(ell, m):
    """Lipschitz constant of phi_{ell,m} in r (atan is 1-Lipschitz)."""
    return max(1.0 / ell, 1.0 / m)


# ---------------------------------------------------------------------------
# Source registry: f(t, x, u) = C(t, x) * G(u)
# ---------------------------------------------------------------------------


def _kernel_cos_factor(z):
    """Mollifying sin/cos(w y) in y with radius r multiplies the amplitude by
    kappa(w r) = sum_q weight_q cos(w r s_q)."""
    nodes, weights = mollifier_nodes()
    return float(weights @ np.cos(z * nodes))


_SOURCES = {
    "zero": {"dissipative": True, "test_only": False},
    "linear": {"dissipative": True, "test_only": False},
    "arctan": {"dissipative": True, "test_only": False},
    "modulated": {"dissipative": True, "test_only": False},
    "antilinear_test": {"dissipative": False, "test_only": True},
}


@dataclass
class SourceSpec:
    """Registry-backed separable source term."""

    id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in _SOURCES:
            raise ValueError(f"unknown source id {self.id!r}")
        p = dict(self.params)
        if self.id in ("linear", "arctan", "antilinear_test"):
            p.setdefault("c", 1.0)
            if p["c"] < 0:
                raise ValueError("source coefficient must be nonnegative")
        if self.id == "modulated":
            p.setdefault("amp", 1.0)
            p.setdefault("mod", 0.5)
            p.setdefault("freq_t", 1.0)
            p.setdefault("freq_x", 1.0)
            p.setdefault("g", "neg_arctan")
            if p["amp"] < 0 or abs(p["mod"]) > 1.0:
                raise ValueError("modulated source needs amp >= 0 and |mod| <= 1")
            if p["g"] not in ("neg_u", "neg_arctan"):
                raise ValueError("modulated g must be neg_u or neg_arctan")
        self.params = p

    # -- separable factors ---------------------------------------------------

    def c_values(self, t, x):
        """C(t, x) for scalar t and array x."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.id == "zero":
            return np.zeros_like(x)
        if self.id == "modulated":
            return p["amp"] * (
                1.0 + p["mod"] * math.sin(p["freq_t"] * t) * np.cos(p["freq_x"] * x)
            )
        return np.full_like(x, p["c"])

    def g_values(self, u):
        u = np.asarray(u, dtype=float)
        if self.id == "zero":
            return np.zeros_like(u)
        if self.id == "antilinear_test":
            return u.copy()
        if self.id == "linear" or (self.id == "modulated" and self.params["g"] == "neg_u"):
            return -u
        return -np.arctan(u)

    def eval(self, t, x, u):
        """Raw f(t, x, u); x and u arrays of matching shape."""
        return self.c_values(t, x) * self.g_values(u)

    # -- mollified evaluation --------------------------------------------------

    def c_mollified(self, j, t, x):
        """C mollified in (t, x) with radius 1/j: exact closed forms."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.id == "zero":
            return np.zeros_like(x)
        if self.id == "modulated":
            kt = _kernel_cos_factor(p["freq_t"] / j)
            kx = _kernel_cos_factor(p["freq_x"] / j)
            return p["amp"] * (
                1.0 + p["mod"] * kt * kx * math.sin(p["freq_t"] * t) * np.cos(p["freq_x"] * x)
            )
        return np.full_like(x, p["c"])

    def g_mollified(self, j, u):
        """G mollified in u with radius 1/j, normalized so the value at 0 is 0."""
        u = np.asarray(u, dtype=float)
        if self.id in ("zero", "linear", "antilinear_test") or (
            self.id == "modulated" and self.params["g"] == "neg_u"
        ):
            return self.g_values(u)  # affine: symmetric kernel leaves it fixed
        nodes, weights = mollifier_nodes()
        r = 1.0 / j
        pts = u[..., None] - r * nodes
        # row-wise kernel sums reduce identical rows to identical bits, so
        # subtracting the u = 0 row keeps g_mollified(j, 0) = 0 exactly
        base = (np.arctan(pts) * weights).sum(axis=-1)
        corr = float((np.arctan(-r * nodes) * weights).sum())
        return corr - base

    def eval_mollified(self, j, t, x, u):
        """f^j(t, x, u) with f^j(t, x, 0) = 0 exactly."""
        return self.c_mollified(j, t, x) * self.g_mollified(j, u)

    # -- metadata --------------------------------------------------------------

    @property
    def dissipative(self):
        return _SOURCES[self.id]["dissipative"]

    @property
    def test_only(self):
        return _SOURCES[self.id]["test_only"]

    def lipschitz_u(self):
        p = self.params
        if self.id == "zero":
            return 0.0
        if self.id == "modulated":
            return p["amp"] * (1.0 + abs(p["mod"]))
        return p["c"]

    def to_dict(self):
        return {"id": self.id, "params": dict(self.params)}

    @staticmethod
    def from_dict(d):
        return SourceSpec(d["id"], dict(d.get("params", {})))


# ---------------------------------------------------------------------------
# Initial data registry
# ---------------------------------------------------------------------------


def _bump(y):
    """C-infinity bump normalized to peak 1 at y = 0, supported on (-1, 1)."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - y[inside] ** 2))
    return out


_U0_IDS = ("zero", "constant", "box", "bump", "twolobe")


def initial_state(u0, x_centers, dx):
    """Cell values of the initial datum; box data use exact cell averages."""
    uid = u0.get("id", "zero")
    p = u0.get("params", {})
    x = np.asarray(x_centers, dtype=float)
    if uid == "zero":
        return np.zeros_like(x)
    if uid == "constant":
        return np.full_like(x, float(p.get("value", 1.0)))
    if uid == "box":
        h, a, b = float(p["height"]), float(p["a"]), float(p["b"])
        left = np.maximum(x - 0.5 * dx, a)
        right = np.minimum(x + 0.5 * dx, b)
        return h * np.clip((right - left) / dx, 0.0, 1.0)
    if uid == "bump":
        h, a, b = float(p["height"]), float(p["a"]), float(p["b"])
        y = (2.0 * (x - a) / (b - a)) - 1.0
        return h * _bump(y)
    if uid == "twolobe":
        h, a, b = float(p["height"]), float(p["a"]), float(p["b"])
        skew = float(p.get("skew", 0.8))
        r = 0.25 * (b - a)
        return h * _bump((x - (a + r)) / r) - skew * h * _bump((x - (b - r)) / r)
    raise ValueError(f"unknown initial datum id {uid!r}")


# ---------------------------------------------------------------------------
# ProblemSpec
# ---------------------------------------------------------------------------


def _index_to_json(v):
    return "inf" if math.isinf(v) else v


@dataclass
class ProblemSpec:
    """Declarative problem instance; grids materialize the theta field."""

    x_lo: float
    x_hi: float
    T: float
    theta_graph: MonotoneGraph
    coeff: dict
    flux: FluxCurve
    source: SourceSpec
    u0: dict
    j: int = 16
    ell: float = 1.0
    m: float = 1.0
    gap_slope: float = 1.0
    sample_radius: float = 2.0
    pad: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if not self.x_lo < self.x_hi:
            raise ValueError("domain must have x_lo < x_hi")
        if self.j < 1 or self.ell < 1 or self.m < 1:
            raise ValueError("indices j, ell, m must be >= 1")
        if self.sample_radius <= 0:
            raise ValueError("sample radius must be positive")
        kind = self.coeff.get("kind", "const")
        if kind not in ("const", "pwc", "smooth"):
            raise ValueError(f"unknown coefficient kind {kind!r}")
        if kind == "smooth":
            a = float(self.coeff.get("a", 1.0))
            b = float(self.coeff.get("b", 0.0))
            if a - abs(b) <= 0:
                raise ValueError("smooth coefficient must stay positive: need a > |b|")
        if self.u0.get("id", "zero") not in _U0_IDS:
            raise ValueError(f"unknown initial datum id {self.u0.get('id')!r}")

    # -- materialization -------------------------------------------------------

    def make_theta_field(self, x_centers):
        kind = self.coeff.get("kind", "const")
        if kind == "const":
            return ThetaField.homogeneous(x_centers, self.theta_graph)
        if kind == "pwc":
            return ThetaField.separable_pwc(
                x_centers, self.theta_graph, self.coeff["x_breaks"], self.coeff["region_c"]
            )
        a = float(self.coeff.get("a", 1.0))
        b = float(self.coeff.get("b", 0.0))
        k = float(self.coeff.get("k", 1.0))
        phase = float(self.coeff.get("phase", 0.0))
        return ThetaField.separable_smooth(
            x_centers, self.theta_graph, lambda s: a + b * np.sin(k * s + phase)
        )

    def initial_values(self, x_centers, dx):
        return initial_state(self.u0, x_centers, dx)

    # -- serialization ----------------------------------------------------------

    def to_dict(self):
        return {
            "domain": {"x_lo": self.x_lo, "x_hi": self.x_hi, "T": self.T, "pad": self.pad},
            "theta": {"graph": self.theta_graph.to_dict(), "coeff": dict(self.coeff)},
            "flux": {"curve": self.flux.to_dict(), "gap_slope": self.gap_slope},
            "source": self.source.to_dict(),
            "u0": {"id": self.u0.get("id", "zero"), "params": dict(self.u0.get("params", {}))},
            "indices": {
                "j": self.j,
                "ell": _index_to_json(self.ell),
                "m": _index_to_json(self.m),
            },
            "sample_radius": self.sample_radius,
        }

    @staticmethod
    def from_dict(d):
        dom = d["domain"]
        idx = d.get("indices", {})
        return ProblemSpec(
            x_lo=float(dom["x_lo"]),
            x_hi=float(dom["x_hi"]),
            T=float(dom["T"]),
            theta_graph=MonotoneGraph.from_dict(d["theta"]["graph"]),
            coeff=dict(d["theta"].get("coeff", {"kind": "const"})),
            flux=FluxCurve.from_dict(d["flux"]["curve"]),
            source=SourceSpec.from_dict(d.get("source", {"id": "zero"})),
            u0=dict(d.get("u0", {"id": "zero"})),
            j=int(idx.get("j", 16)),
            ell=float(idx.get("ell", 1.0)),
            m=float(idx.get("m", 1.0)),
            gap_slope=float(d["flux"].get("gap_slope", 1.0)),
            sample_radius=float(d.get("sample_radius", 2.0)),
            pad=float(dom.get("pad", 0.0)),
        )


# ---------------------------------------------------------------------------
# Hypothesis validation
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: dict
    note: str

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "witness": self.witness,
            "note": self.note,
        }


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks]}

    def summary_lines(self):
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            extra = "" if c.passed else f"  witness={c.witness}"
            lines.append(f"[{mark}] {c.name}: {c.note}{extra}")
        return lines


def _minimal_selection_from_eval(field, i, u):
    lo, hi = field.eval(i, np.asarray([u], dtype=float))
    lo, hi = float(lo[0]), float(hi[0])
    if lo > 0.0:
        return lo
    if hi < 0.0:
        return hi
    return 0.0


def validate_spec(spec, n_cells=64, n_u=65, field=None):
    """Discrete hypothesis checks; returns a structured report, never raises.

    ``field`` overrides the materialized theta field (useful for probing
    deliberately broken fields that the separable constructors cannot build).
    """
    checks = []
    x = np.linspace(spec.x_lo, spec.x_hi, n_cells + 1)
    centers = 0.5 * (x[:-1] + x[1:])
    dx = x[1] - x[0]
    if field is None:
        field = spec.make_theta_field(centers)
    R = spec.sample_radius

    # theta passes through (x, 0, 0) in every cell
    bad = None
    for i in range(n_cells):
        lo, hi = field.eval(i, np.asarray([0.0]))
        if lo[0] > 1e-12 or hi[0] < -1e-12:
            bad = {"cell": i, "value_interval": [float(lo[0]), float(hi[0])]}
            break
    checks.append(
        CheckResult(
            "theta_zero",
            bad is None,
            bad or {},
            "0 in theta(x, 0) cell by cell",
        )
    )

    # coercivity envelopes h1 <= |minimal selection| <= h2 on [-R, R]
    us = np.linspace(-R, R, n_u)
    sel = np.empty((n_cells, n_u))
    for i in range(n_cells):
        for k, u in enumerate(us):
            sel[i, k] = abs(_minimal_selection_from_eval(field, i, float(u)))
    h1 = sel.min(axis=0)
    h2 = sel.max(axis=0)
    mid = n_u // 2
    mono_ok = bool(
        np.all(np.diff(h1[mid:]) >= -1e-9) and np.all(np.diff(h1[: mid + 1]) <= 1e-9)
    )
    ends_ok = bool(h1[0] > 0.0 and h1[-1] > 0.0)
    witness = {}
    if not ends_ok:
        witness = {"h1_at_-R": float(h1[0]), "h1_at_+R": float(h1[-1])}
    if not mono_ok:
        witness["h1"] = [float(v) for v in h1]
    checks.append(
        CheckResult(
            "theta_envelopes",
            mono_ok and ends_ok,
            witness,
            f"min envelope h1 in [{h1.min():.3g}, {h1.max():.3g}], "
            f"max envelope h2 up to {h2.max():.3g} on |u| <= {R}",
        )
    )

    # source vanishes at u = 0
    ts = np.linspace(0.0, spec.T, 5)
    worst = 0.0
    for t in ts:
        worst = max(worst, float(np.abs(spec.source.eval(t, centers, np.zeros(n_cells))).max()))
    checks.append(
        CheckResult(
            "source_zero",
            worst <= 1e-14,
            {} if worst <= 1e-14 else {"max_abs": worst},
            "f(t, x, 0) = 0 on the sampling grid",
        )
    )

    # source dissipativity on sampled pairs
    upairs = np.linspace(-R, R, 17)
    worst_val = -np.inf
    worst_wit = {}
    for t in (0.0, 0.5 * spec.T, spec.T):
        for xi in centers[:: max(1, n_cells // 8)]:
            fv = spec.source.eval(t, np.full_like(upairs, xi), upairs)
            prod = (fv[:, None] - fv[None, :]) * (upairs[:, None] - upairs[None, :])
            k = int(np.argmax(prod))
            val = float(prod.flat[k])
            if val > worst_val:
                worst_val = val
                a, b = divmod(k, len(upairs))
                worst_wit = {"t": float(t), "x": float(xi), "u": float(upairs[a]), "v": float(upairs[b])}
    diss_ok = worst_val <= 1e-12
    checks.append(
        CheckResult(
            "source_dissipative",
            diss_ok,
            {} if diss_ok else dict(worst_wit, value=worst_val),
            "(f(u) - f(v)) (u - v) <= 0 on sampled pairs",
        )
    )

    # initial datum compactly supported inside the padded domain
    fine = np.linspace(spec.x_lo, spec.x_hi, 1025)
    vals = initial_state(spec.u0, fine, (spec.x_hi - spec.x_lo) / 1024)
    margin = max(spec.pad, 2.0 * dx)
    edge = (fine < spec.x_lo + margin) | (fine > spec.x_hi - margin)
    sup_edge = float(np.abs(vals[edge]).max()) if edge.any() else 0.0
    supp_ok = sup_edge <= 1e-14
    checks.append(
        CheckResult(
            "u0_support",
            supp_ok,
            {} if supp_ok else {"max_abs_near_boundary": sup_edge, "margin": margin},
            "initial datum vanishes near the domain boundary",
        )
    )

    # flux jumps must compose with every cell graph
    if spec.flux.has_jumps:
        par = build_parametrization(spec.flux, spec.gap_slope)
        outer = par.inverse_graph()
        _, row_c = field.distinct_rows() if hasattr(field, "distinct_rows") else (None, [1.0])
        err = None
        for c in np.unique(np.asarray(row_c, dtype=float)):
            try:
                compose_graphs(outer, spec.theta_graph.scaled(float(c)))
            except ValueError as e:
                err = {"coefficient": float(c), "reason": str(e)}
                break
        checks.append(
            CheckResult(
                "flux_jump_composition",
                err is None,
                err or {},
                "flux jumps absorb into the nonlinearity via the plateau map",
            )
        )

    # growth-constant hypotheses are analytic statements about all of R;
    # recorded as informational only
    checks.append(
        CheckResult(
            "growth_constants_info",
            True,
            {},
            "asymptotic growth/coercivity constants are not discretely checkable; "
            "envelopes above cover the sampled range",
        )
    )
    return ValidationReport(checks)
