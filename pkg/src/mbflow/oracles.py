"""Pairing oracles.

The operator assembly in :mod:`mbflow.flowcat` is a pure sign-and-sum layer;
every moduli-space integral it needs is delegated to a *pairing oracle*.
Oracles answer :class:`PairingQuery` values and are pure (same input, same
output).  Values are exact rationals wherever possible; numerical quadrature
reports a float and is snapped to a small rational before it may enter the
exact algebra.

Query kinds
-----------
category   M^{s,k}_{i_1..i_r}[θ_a, f, ..., f, θ_b]
morphism   H^{s,k}_{i_1..i_p | j_1..j_q}[α, f^C.., f^D.., γ]
mixed      (F×H)^{s,k}_{i.. | j.. | l..}[α, f^C.., f^D.., f^E.., γ]
homotopy   K^{s,k}_{i.. | j..}[α, f^C.., f^D.., γ]
identity   diagonal-collapsed morphism pairing of an identity flow morphism

A ``None`` answer means the oracle has no data for the query; the assembler
turns that into :class:`OracleMissingPairing` when the term is required.
Tabulated oracles instead default absent keys to zero.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np


class OracleError(Exception):
    pass


class OracleMissingPairing(OracleError):
    def __init__(self, query):
        super().__init__(f"no pairing data for {query}")
        self.query = query


class NotConverged(OracleError):
    pass


@dataclass(frozen=True)
class PairingQuery:
    kind: str
    s: int
    k: int
    i_seq: tuple = ()
    j_seq: tuple = ()
    l_seq: tuple = ()
    a: int = 0
    b: int = 0
    tag: str = ""


@dataclass(frozen=True)
class OracleValue:
    value: Fraction | float
    exact: bool
    snapped: bool = False

    def as_rational(self, query=None) -> Fraction:
        if self.exact:
            return self.value  # type: ignore[return-value]
        raise OracleError(f"inexact oracle value {self.value} for {query}")


def exact(v) -> OracleValue:
    return OracleValue(Fraction(v), True)


ZERO = exact(0)


class MorseCountOracle:
    """Signed rigid-count matrices for Morse categories (all c_i = 0).

    ``counts[(i, j)][b][a]`` is the signed number of rigid trajectories from
    generator ``a`` of level ``i`` to generator ``b`` of level ``j``.  All
    interior pairings vanish for degree reasons (a point's kernel has formal
    degree −1) and never reach the oracle; missing data means zero.
    """

    def __init__(self, counts: dict):
        self.counts = {k: [list(map(Fraction, row)) for row in m] for k, m in counts.items()}

    def query(self, q: PairingQuery) -> OracleValue | None:
        if q.kind != "category" or q.i_seq:
            return ZERO
        m = self.counts.get((q.s, q.s + q.k))
        if m is None:
            return ZERO
        return exact(m[q.b][q.a])


class TabulatedOracle:
    """Exact lookup table; absent keys are zero."""

    def __init__(self, entries: dict | None = None):
        self.entries: dict = {}
        for q, v in (entries or {}).items():
            self.entries[q] = Fraction(v)

    def put(self, q: PairingQuery, value) -> None:
        self.entries[q] = Fraction(value)

    def query(self, q: PairingQuery) -> OracleValue:
        return exact(self.entries.get(q, Fraction(0)))


class CombinedOracle:
    """First oracle that answers wins; later ones are fallbacks."""

    def __init__(self, *oracles):
        self.oracles = oracles

    def query(self, q: PairingQuery) -> OracleValue | None:
        for o in self.oracles:
            v = o.query(q)
            if v is not None:
                return v
        return None


# -- circle defining data ---------------------------------------------------


@dataclass(frozen=True)
class CircleDefiningData:
    """Harmonic defining data on S¹ with the limiting sawtooth kernel.

    Angles are measured in turns (t ∈ [0,1)); the harmonic basis is
    {1, dt} with dual basis {dt, −1}.  The kernel

        f(t₁, t₂) = 1/2 − ((t₂ − t₁) mod 1) + offset

    is the limit of the paper-style primitives; its jump of +1 across the
    diagonal is pinned by the homotopy relation id − p = d I_f + I_f d.
    ``offset`` shifts by a closed 0-form and gives an alternative admissible
    defining-data variant.
    """

    offset: Fraction = Fraction(0)

    def kernel(self, t1, t2):
        if isinstance(t1, Fraction) and isinstance(t2, Fraction):
            u = (t2 - t1) % 1
            return Fraction(1, 2) - u + self.offset
        u = (np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float)) % 1.0
        return 0.5 - u + float(self.offset)


def circle_kernel(data: CircleDefiningData, theta1, theta2):
    """Kernel value at angles in radians, f = 1/2 − ((θ₂−θ₁) mod 2π)/2π."""
    if isinstance(theta1, Fraction) and isinstance(theta2, Fraction):
        # rational angles are interpreted as rational multiples of 2π
        return data.kernel(theta1, theta2)
    u = (float(theta2) - float(theta1)) % (2 * math.pi)
    return 0.5 - u / (2 * math.pi) + float(data.offset)


def circle_homotopy_residuals(
    data: CircleDefiningData, max_mode: int = 8, points: int = 2**14
) -> dict[int, float]:
    """Max residual of (id − p − dI_f − I_f d) on e^{inθ} per mode, trapezoid rule.

    Both form degrees are exercised.  On 0-forms the identity reduces to
    I_f(d e^{int}) = e^{int} − p(e^{int}); on 1-forms to d I_f(e^{int} dt)
    = e^{int} dt − p(e^{int} dt).  The kernel integral is evaluated by an
    honest trapezoid sum over the uniform grid (jump node averaged).
    """
    n_pts = points
    grid = np.arange(n_pts) / n_pts
    saw = data.kernel(0.0, grid)
    saw[0] = float(data.offset)  # averaged jump value at the diagonal node
    out: dict[int, float] = {}
    for n in range(0, max_mode + 1):
        if n == 0:
            # 0-form 1: id − p = 0 and both homotopy terms vanish exactly;
            # 1-form dt: I_f(dt) is the plain sawtooth mean
            mean = float(np.sum(saw) / n_pts)
            out[0] = abs(mean)
            continue
        # trapezoid value of c_n = ∫ f(t1, t2) e^{2πin t1} dt1 / e^{2πin t2}
        c_n = complex(np.sum(saw * np.exp(-2j * math.pi * n * grid)) / n_pts)
        resid = abs(1 - 2j * math.pi * n * c_n)
        out[n] = max(resid, abs(1 - 2j * math.pi * (-n) * complex(c_n.conjugate())))
    return out


# -- numerical quadrature ----------------------------------------------------


@dataclass
class Chart:
    """A parametrized moduli product: a cube [0,1)^dim with an integrand.

    ``integrand`` receives an array of shape (npts, dim) and returns values;
    all in-scope charts are periodic in each axis, so the product trapezoid
    rule is the composite rule of choice.  ``integrand_degree`` and ``dim``
    feed the degree short-circuit.
    """

    dim: int
    integrand: Callable
    integrand_degree: int | None = None


@dataclass
class QuadratureOracle:
    """Composite trapezoid quadrature with refinement-stability acceptance.

    A reported value must be stable to ``tol`` across two successive grid
    doublings; results within ``snap_tol`` of a rational with denominator
    at most ``snap_denominator`` are snapped so downstream algebra stays
    exact.  Evaluation is deterministic: a fixed ladder of grids.
    """

    charts: dict = field(default_factory=dict)
    base_resolution: int = 64
    max_refinements: int = 7
    tol: float = 1e-7
    snap_denominator: int = 16
    snap_tol: float = 1e-6

    def register(self, query: PairingQuery, chart: Chart) -> None:
        self.charts[query] = chart

    def query(self, q: PairingQuery) -> OracleValue | None:
        chart = self.charts.get(q)
        if chart is None:
            return None
        if chart.integrand_degree is not None and chart.integrand_degree != chart.dim:
            return ZERO
        val, stable = self.integrate(chart)
        if not stable:
            raise NotConverged(f"quadrature did not stabilize for {q}")
        snapped = snap_rational(val, self.snap_denominator, self.snap_tol)
        if snapped is not None:
            return OracleValue(snapped, True, snapped=True)
        return OracleValue(val, False)

    def integrate(self, chart: Chart) -> tuple[float, bool]:
        if chart.dim == 0:
            pts = np.zeros((1, 0))
            return float(np.sum(chart.integrand(pts))), True
        prev = None
        n = self.base_resolution
        for _ in range(self.max_refinements + 1):
            val = self._grid_sum(chart, n)
            if prev is not None and abs(val - prev) < self.tol:
                return val, True
            prev = val
            n *= 2
        return prev, False

    def _grid_sum(self, chart: Chart, n: int) -> float:
        axes = [np.arange(n) / n] * chart.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = np.asarray(chart.integrand(pts), dtype=float)
        return float(vals.sum() / (n**chart.dim))


def snap_rational(x: float, max_den: int = 16, tol: float = 1e-6) -> Fraction | None:
    """Nearest fraction with denominator <= max_den, if within tol."""
    best = Fraction(x).limit_denominator(max_den)
    if abs(float(best) - x) < tol:
        return best
    return None


def quadrature_pairing(oracle: QuadratureOracle, query: PairingQuery) -> dict:
    """Value plus a stability/snap report for one registered chart."""
    chart = oracle.charts.get(query)
    if chart is None:
        raise OracleMissingPairing(query)
    if chart.integrand_degree is not None and chart.integrand_degree != chart.dim:
        return {"value": Fraction(0), "exact": True, "snapped": False, "stable": True,
                "short_circuit": True}
    val, stable = oracle.integrate(chart)
    snapped = snap_rational(val, oracle.snap_denominator, oracle.snap_tol)
    return {
        "value": snapped if snapped is not None else val,
        "raw": val,
        "exact": snapped is not None,
        "snapped": snapped is not None,
        "stable": stable,
        "short_circuit": False,
    }


def morse_pairing(oracle: MorseCountOracle, s: int, k: int, a: int, b: int) -> Fraction:
    v = oracle.query(PairingQuery("category", s, k, a=a, b=b))
    return v.as_rational()


def tabulated_pairing(oracle: TabulatedOracle, query: PairingQuery) -> Fraction:
    return oracle.query(query).as_rational(query)
