"""Desk-scale gradient-flow front end on embedded surfaces.

Finds critical points of the bundled Morse functions on S² and T², integrates
ascending gradient flow with RK4, counts rigid connecting orbits with signs,
and emits flow-category models whose assembled complexes reproduce the known
surface cohomology.  The Morse-Bott pathway ships one hard-wired model: the
two-level category of f = z² on S² (equator circle below two polar points),
with circle defining data and quadrature charts for its moduli pairings.

Signs come from orientation transport of unstable frames: an orbit into a
saddle is signed by the frame (incoming direction, chosen unstable vector)
against the surface orientation; an orbit leaving a saddle by which unstable
end it uses.  Global coherence is enforced a posteriori by the d² = 0 and
Betti acceptance checks rather than re-deriving the fiber-product
orientation conventions geometrically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .complexes import Generator
from .flowcat import FlowCategoryModel, LevelData
from .linalg import Matrix
from .oracles import (
    Chart,
    CircleDefiningData,
    MorseCountOracle,
    PairingQuery,
    QuadratureOracle,
)


class EngineError(Exception):
    pass


class DegenerateCritical(EngineError):
    """Hessian below the nondegeneracy floor outside the Morse-Bott built-ins."""


class NonTransverse(EngineError):
    """An arrival looks tangential within tolerance; re-tilt the function."""


@dataclass
class EngineConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 60
    hessian_min_eig: float = 1e-6
    dedupe_tol: float = 1e-6
    rk_h_min: float = 1e-4
    rk_h_max: float = 1e-2
    arrival_radius: float = 1e-3
    seeds: int = 2**10
    seed_radius: float = 2e-3
    max_steps: int = 60000
    grid_density: int = 28


@dataclass
class CriticalPoint:
    point: np.ndarray          # chart coordinates (torus) or unit vector (sphere)
    index: int
    value: float
    eigenvalues: np.ndarray    # of the metric-normalized Hessian
    unstable_dir: np.ndarray | None
    stable_dir: np.ndarray | None
    label: str = ""


@dataclass
class FlowLine:
    start: int
    end: int
    samples: np.ndarray
    sign: int


# -- surfaces -------------------------------------------------------------


class SphereSurface:
    """Round unit S² in R³; state vectors are ambient unit 3-vectors."""

    name = "sphere"
    chart_dim = 3

    def __init__(self, function: str = "height", tilt: float = 0.0):
        if function not in ("height", "zsq", "tilted", "constant"):
            raise EngineError(f"unknown sphere function {function!r}")
        self.function = function
        self.tilt = tilt

    def f(self, p):
        p = np.atleast_2d(p)
        if self.function == "height":
            return p[:, 2]
        if self.function == "zsq":
            return p[:, 2] ** 2
        if self.function == "tilted":
            c = 1.0 / math.hypot(1.0, self.tilt)
            return c * (p[:, 2] + self.tilt * p[:, 0])
        return np.zeros(len(p))

    def ambient_grad(self, p):
        p = np.atleast_2d(p)
        if self.function == "height":
            g = np.zeros_like(p)
            g[:, 2] = 1.0
            return g
        if self.function == "zsq":
            g = np.zeros_like(p)
            g[:, 2] = 2.0 * p[:, 2]
            return g
        if self.function == "tilted":
            c = 1.0 / math.hypot(1.0, self.tilt)
            g = np.zeros_like(p)
            g[:, 2] = c
            g[:, 0] = c * self.tilt
            return g
        return np.zeros_like(p)

    def grad(self, p):
        p = np.atleast_2d(p)
        g = self.ambient_grad(p)
        return g - p * np.sum(g * p, axis=1, keepdims=True)

    def project(self, p):
        p = np.atleast_2d(p)
        return p / np.linalg.norm(p, axis=1, keepdims=True)

    def embed(self, p):
        return np.atleast_2d(p)

    def tangent_basis(self, p):
        p = np.asarray(p, dtype=float)
        probe = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        t1 = probe - p * (probe @ p)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(p, t1)
        return t1, t2

    def hess_tangent(self, p):
        """Covariant Hessian in an orthonormal tangent frame (shape op = id)."""
        p = np.asarray(p, dtype=float)
        t1, t2 = self.tangent_basis(p)
        if self.function == "zsq":
            amb = np.zeros((3, 3))
            amb[2, 2] = 2.0
        else:
            amb = np.zeros((3, 3))
        radial = float(self.ambient_grad(p[None, :])[0] @ p)
        frame = np.stack([t1, t2], axis=1)
        return frame.T @ amb @ frame - radial * np.eye(2), frame

    def grid_seeds(self, n):
        pts = []
        for i in range(n):
            for j in range(2 * n):
                th = math.pi * (i + 0.5) / n
                ph = 2 * math.pi * j / (2 * n)
                pts.append(
                    [math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)]
                )
        return np.array(pts)

    def newton_step(self, p):
        h, frame = self.hess_tangent(p)
        g = self.grad(p[None, :])[0]
        g2 = frame.T @ g
        try:
            delta = np.linalg.solve(h, -g2)
        except np.linalg.LinAlgError:
            return None
        step = frame @ delta
        return self.project((p + step)[None, :])[0]

    def orient_det(self, p, a, b):
        """Orientation of (a, b) in T_p with the outward normal convention."""
        return float(np.linalg.det(np.stack([p, a, b])))

    def distance(self, p, q):
        return float(np.linalg.norm(np.asarray(p) - np.asarray(q)))


class TorusSurface:
    """Standing torus: x(u,v) = ((R + r cos v) cos u, r sin v, (R + r cos v) sin u).

    f = z + tilt·y.  The zero-tilt height has saddle-saddle connections along
    the inner equator; any small tilt in y breaks them.
    """

    name = "torus"
    chart_dim = 2

    def __init__(self, R: float = 2.0, r: float = 0.6, tilt: float = 0.15):
        self.R, self.r, self.tilt = R, r, tilt

    def f(self, p):
        p = np.atleast_2d(p)
        u, v = p[:, 0], p[:, 1]
        return (self.R + self.r * np.cos(v)) * np.sin(u) + self.tilt * self.r * np.sin(v)

    def _partials(self, p):
        p = np.atleast_2d(p)
        u, v = p[:, 0], p[:, 1]
        w = self.R + self.r * np.cos(v)
        fu = w * np.cos(u)
        fv = -self.r * np.sin(v) * np.sin(u) + self.tilt * self.r * np.cos(v)
        return fu, fv, w

    def grad(self, p):
        fu, fv, w = self._partials(p)
        return np.stack([fu / (w**2), fv / (self.r**2)], axis=1)

    def project(self, p):
        return np.mod(np.atleast_2d(p), 2 * math.pi)

    def embed(self, p):
        p = np.atleast_2d(p)
        u, v = p[:, 0], p[:, 1]
        w = self.R + self.r * np.cos(v)
        return np.stack([w * np.cos(u), self.r * np.sin(v), w * np.sin(u)], axis=1)

    def coord_hessian(self, p):
        u, v = float(p[0]), float(p[1])
        w = self.R + self.r * math.cos(v)
        fuu = -w * math.sin(u)
        fuv = -self.r * math.sin(v) * math.cos(u)
        fvv = -self.r * math.cos(v) * math.sin(u) - self.tilt * self.r * math.sin(v)
        return np.array([[fuu, fuv], [fuv, fvv]])

    def metric(self, p):
        v = float(p[1])
        w = self.R + self.r * math.cos(v)
        return np.diag([w**2, self.r**2])

    def hess_tangent(self, p):
        g = self.metric(p)
        h = self.coord_hessian(p)
        ginv = np.linalg.inv(g)
        sq = np.diag(1.0 / np.sqrt(np.diag(g)))
        frame = None
        return sq @ h @ sq, frame

    def grid_seeds(self, n):
        us = 2 * math.pi * np.arange(n) / n
        vs = 2 * math.pi * np.arange(n) / n
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        return np.stack([uu.ravel(), vv.ravel()], axis=1)

    def newton_step(self, p):
        fu, fv, _ = self._partials(p[None, :])
        g = np.array([fu[0], fv[0]])
        h = self.coord_hessian(p)
        try:
            delta = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            return None
        return self.project((p + delta)[None, :])[0]

    def orient_det(self, p, a, b):
        return float(a[0] * b[1] - a[1] * b[0])

    def distance(self, p, q):
        return float(np.linalg.norm(self.embed(p[None, :])[0] - self.embed(q[None, :])[0]))


# -- critical points -------------------------------------------------------


def find_critical_points(surface, config: EngineConfig | None = None) -> list[CriticalPoint]:
    """Grid seeding + Newton polish + dedupe; indices from Hessian signature.

    Degenerate Hessians raise outside the Morse-Bott built-ins; f = z² on S²
    reports its equator through :class:`DegenerateCritical` so callers route
    to the Morse-Bott pathway.
    """
    cfg = config or EngineConfig()
    if isinstance(surface, SphereSurface) and surface.function == "constant":
        return []
    seeds = surface.grid_seeds(cfg.grid_density)
    found: list[CriticalPoint] = []
    for seed in seeds:
        p = np.array(seed, dtype=float)
        ok = False
        for _ in range(cfg.newton_max_iter):
            g = surface.grad(p[None, :])[0]
            if np.linalg.norm(g) < cfg.newton_tol:
                ok = True
                break
            nxt = surface.newton_step(p)
            if nxt is None:
                break
            if np.linalg.norm(nxt - p) > 1.0:
                p = nxt
                continue
            p = nxt
        if not ok:
            continue
        if any(surface.distance(p, c.point) < cfg.dedupe_tol for c in found):
            continue
        hess, _ = surface.hess_tangent(p)
        eigs = np.linalg.eigvalsh(hess)
        if np.min(np.abs(eigs)) < cfg.hessian_min_eig:
            if isinstance(surface, SphereSurface) and surface.function == "zsq":
                raise DegenerateCritical(
                    "degenerate critical circle (equator of z²): use the "
                    "Morse-Bott pathway build_morsebott_s2_example()"
                )
            raise DegenerateCritical(f"degenerate Hessian at {p}: eigs {eigs}")
        index = int(np.sum(eigs < 0))
        found.append(
            CriticalPoint(
                point=p,
                index=index,
                value=float(surface.f(p[None, :])[0]),
                eigenvalues=eigs,
                unstable_dir=None,
                stable_dir=None,
            )
        )
    found.sort(key=lambda c: c.value)
    for n, c in enumerate(found):
        c.label = f"c{n}.i{c.index}"
        if c.index == 1:
            c.unstable_dir, c.stable_dir = _saddle_frame(surface, c.point)
    return found


def _saddle_frame(surface, p):
    """Unit unstable/stable eigendirections of the ascending flow at a saddle.

    The frame orientation choice is: first nonzero component positive.
    """
    if isinstance(surface, SphereSurface):
        h, frame = surface.hess_tangent(p)
        vals, vecs = np.linalg.eigh(h)
        unst = frame @ vecs[:, np.argmax(vals)]
        stab = frame @ vecs[:, np.argmin(vals)]
    else:
        g = surface.metric(p)
        h = surface.coord_hessian(p)
        vals, vecs = np.linalg.eig(np.linalg.inv(g) @ h)
        vals = np.real(vals)
        vecs = np.real(vecs)
        unst = vecs[:, np.argmax(vals)]
        stab = vecs[:, np.argmin(vals)]
    for vec in (unst, stab):
        nz = np.flatnonzero(np.abs(vec) > 1e-9)
        if len(nz) and vec[nz[0]] < 0:
            vec *= -1.0
    return unst / np.linalg.norm(unst), stab / np.linalg.norm(stab)


# -- flow integration --------------------------------------------------------


def _rk4_step(surface, pts, h):
    k1 = surface.grad(pts)
    k2 = surface.grad(surface.project(pts + 0.5 * h * k1))
    k3 = surface.grad(surface.project(pts + 0.5 * h * k2))
    k4 = surface.grad(surface.project(pts + h * k3))
    return surface.project(pts + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))


def integrate_flow(surface, pts, cfg: EngineConfig, targets=None, record=False):
    """Vectorized ascending RK4 until all trajectories settle near maxima.

    Returns (final points, per-seed min distance to each tracked point,
    samples when recording).  Monotonicity of f and the arc-length energy
    bound are enforced at every step.
    """
    pts = np.array(np.atleast_2d(pts), dtype=float)
    nseeds = len(pts)
    track = [np.array(t, dtype=float) for t in (targets or [])]
    min_dist = np.full((nseeds, len(track)), np.inf)
    arc = np.zeros(nseeds)
    f0 = surface.f(pts)
    min_grad = np.full(nseeds, np.inf)
    samples = [pts.copy()] if record else None
    fprev = f0.copy()
    for _ in range(cfg.max_steps):
        g = surface.grad(pts)
        speed = np.linalg.norm(g, axis=1)
        min_grad = np.minimum(min_grad, np.where(speed > 1e-8, speed, np.inf))
        if np.all(speed < 1e-9):
            break
        h = np.clip(0.35 / (speed + 1e-12), cfg.rk_h_min, cfg.rk_h_max)[:, None]
        nxt = _rk4_step(surface, pts, h)
        step_len = np.linalg.norm(surface.embed(nxt) - surface.embed(pts), axis=1)
        arc += step_len
        fnew = surface.f(nxt)
        if np.any(fnew < fprev - 1e-9):
            raise EngineError("f decreased along an integrated flow line")
        emb = surface.embed(nxt)
        for t_i, tp in enumerate(track):
            d = np.linalg.norm(emb - surface.embed(tp[None, :])[0], axis=1)
            min_dist[:, t_i] = np.minimum(min_dist[:, t_i], d)
        pts = nxt
        fprev = fnew
        if record:
            samples.append(pts.copy())
        if np.all(speed < 1e-7) or np.max(step_len) < 1e-12:
            break
    return pts, min_dist, arc, min_grad, samples


def _energy_bound_ok(surface, frm, to, arc, min_grad):
    df = float(surface.f(to.point[None, :])[0] - surface.f(frm.point[None, :])[0])
    if not math.isfinite(min_grad) or min_grad <= 0:
        return True
    return arc <= df / min_grad * 1.5 + 1e-6


def count_connecting_orbits(surface, criticals, frm: CriticalPoint, to: CriticalPoint,
                            config: EngineConfig | None = None,
                            return_lines: bool = False):
    """Signed rigid count between critical points of index gap one.

    For an index-1 target the stable disk is one-dimensional; its two
    separatrix branches are integrated explicitly and their transverse
    arrival inside the unstable-sphere disk of ``frm`` is what is counted.
    For an index-1 source the unstable sphere is the two seed points
    ±r₀·u, each integrated to whichever maximum captures it.
    """
    cfg = config or EngineConfig()
    if to.index - frm.index != 1:
        raise EngineError("rigid counting needs index(to) - index(frm) = 1")
    if frm.index == 0:
        count, lines = _count_min_to_saddle(surface, criticals, frm, to, cfg)
    elif frm.index == 1:
        count, lines = _count_saddle_to_max(surface, criticals, frm, to, cfg)
    else:
        raise EngineError(f"unsupported index pair ({frm.index}->{to.index}) on a surface")
    if return_lines:
        return count, lines
    return count


def _cp_position(criticals, cp) -> int:
    for i, c in enumerate(criticals):
        if c is cp:
            return i
    return -1


def _descend_branch(surface, saddle: CriticalPoint, side: int, cfg: EngineConfig,
                    record=False):
    """One stable-disk branch of `saddle`: seed at ±r₀·s, integrate −∇f."""
    start = surface.project(
        (saddle.point + side * cfg.seed_radius * saddle.stable_dir)[None, :]
    )
    p = start
    samples = [p.copy()] if record else None
    fprev = surface.f(p)
    arc = 0.0
    min_grad = np.inf
    for _ in range(cfg.max_steps):
        g = -surface.grad(p)
        speed = float(np.linalg.norm(g))
        if speed < 1e-10:
            break
        min_grad = min(min_grad, speed)
        h = min(max(0.35 / speed, cfg.rk_h_min), cfg.rk_h_max)
        k1 = g
        k2 = -surface.grad(surface.project(p + 0.5 * h * k1))
        k3 = -surface.grad(surface.project(p + 0.5 * h * k2))
        k4 = -surface.grad(surface.project(p + h * k3))
        nxt = surface.project(p + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4))
        fnew = surface.f(nxt)
        if float(fnew - fprev) > 1e-9:
            raise EngineError("f increased along a descending separatrix branch")
        arc += float(np.linalg.norm(surface.embed(nxt) - surface.embed(p)))
        p, fprev = nxt, fnew
        if record:
            samples.append(p.copy())
    return p[0], arc, min_grad, samples


def _count_min_to_saddle(surface, criticals, frm, to, cfg):
    """Rigid orbits into an index-1 point: its stable disk is two descending
    separatrix branches; each branch landing in the unstable-sphere disk of
    ``frm`` is one transversally-arriving orbit.  The ascending orbit enters
    the saddle along −(branch side)·s, and is signed against the chosen
    unstable frame in the oriented tangent plane."""
    count = 0
    lines = []
    det_su = surface.orient_det(to.point, to.stable_dir, to.unstable_dir)
    if abs(det_su) < 1e-8:
        raise NonTransverse("stable and unstable directions are tangential")
    for side in (1, -1):
        endpoint, arc, min_grad, samples = _descend_branch(surface, to, side, cfg,
                                                           record=True)
        d = surface.distance(endpoint, frm.point)
        if d > 50 * cfg.arrival_radius:
            continue
        speed = float(np.linalg.norm(surface.grad(endpoint[None, :])))
        if speed > 1e-6:
            raise NonTransverse(
                f"stable-disk branch stalled at distance {d:.2e} with speed {speed:.2e}"
            )
        if not _energy_bound_ok(surface, frm, to, arc, min_grad):
            raise EngineError("arc-length energy bound violated")
        sign = 1 if (-side * det_su) > 0 else -1
        count += sign
        lines.append(FlowLine(
            _cp_position(criticals, frm), _cp_position(criticals, to),
            np.concatenate(samples[::-1]) if samples else np.empty(0), sign,
        ))
    return count, lines


def _count_saddle_to_max(surface, criticals, frm, to, cfg):
    count = 0
    lines = []
    for side in (1, -1):
        start = surface.project(
            (frm.point + side * cfg.seed_radius * frm.unstable_dir)[None, :]
        )[0]
        final, _, arc, min_grad, samples = integrate_flow(
            surface, start[None, :], cfg, record=True
        )
        d = surface.distance(final[0], to.point)
        if d < 50 * cfg.arrival_radius:
            if not _energy_bound_ok(surface, frm, to, float(arc[0]), float(min_grad[0])):
                raise EngineError("arc-length energy bound violated")
            count += side
            lines.append(FlowLine(
                _cp_position(criticals, frm), _cp_position(criticals, to),
                np.concatenate(samples) if samples else np.empty(0), side,
            ))
    return count, lines


# -- category construction ----------------------------------------------------


def build_morse_flow_category(surface, config: EngineConfig | None = None) -> FlowCategoryModel:
    """Levels by critical value, rigid signed counts, Morse count oracle."""
    cfg = config or EngineConfig()
    if isinstance(surface, SphereSurface) and surface.function == "constant":
        return _constant_sphere_category()
    criticals = find_critical_points(surface, cfg)
    if not criticals:
        raise EngineError("no critical points found")
    levels: list[list[int]] = []
    for ci, c in enumerate(criticals):
        if levels and abs(criticals[levels[-1][0]].value - c.value) < 1e-8:
            levels[-1].append(ci)
        else:
            levels.append([ci])
    level_data = []
    level_of = {}
    for li, members in enumerate(levels):
        idxs = {criticals[m].index for m in members}
        if len(idxs) > 1:
            raise EngineError("level mixes Morse indices; grading undefined")
        gens = [Generator(criticals[m].label, 0) for m in members]
        level_data.append(LevelData.make(li, 0, gens, grading=idxs.pop()))
        for m in members:
            level_of[m] = li
    moduli = {}
    counts = {}
    for li in range(len(levels)):
        for lj in range(li + 1, len(levels)):
            gap = level_data[lj].grading - level_data[li].grading
            if gap >= 1:
                moduli[(li, lj)] = gap - 1
            if gap == 1:
                mat = [
                    [
                        count_connecting_orbits(
                            surface, criticals, criticals[a], criticals[b], cfg
                        )
                        for a in levels[li]
                    ]
                    for b in levels[lj]
                ]
                if any(any(row) for row in mat):
                    counts[(li, lj)] = mat
    oracle = MorseCountOracle(counts)
    return FlowCategoryModel(level_data, moduli, oracle, tag=f"{surface.name}:{getattr(surface, 'function', 'height')}")


def _constant_sphere_category() -> FlowCategoryModel:
    lvl = LevelData.make(
        0,
        2,
        [Generator("one", 0), Generator("vol", 2)],
        grading=0,
        dual_matrix=Matrix([[0, 1], [1, 0]]),
    )
    return FlowCategoryModel([lvl], {}, MorseCountOracle({}), tag="sphere:constant")


def build_morsebott_s2_example(kernel_offset: Fraction = Fraction(0)) -> FlowCategoryModel:
    """The two-level Morse-Bott model of f = z² on S².

    Level 0 is the equator circle (minimum) with harmonic reduction
    {1, dθ/2π}; level 1 holds the two polar points (maxima).  The moduli are
    two circles of longitudes with identity source chart and constant
    target; the grading check is d₀ = d₁ + c₁ − m₀₁ − 1 = 2 + 0 − 1 − 1 = 0.
    Pairings are quadrature charts over the moduli circles; the kernel
    offset selects an alternative circle defining-data variant.
    """
    tag = f"s2bott:{kernel_offset}"
    circle = CircleDefiningData(offset=kernel_offset)
    equator = LevelData.make(
        0,
        1,
        [Generator("one", 0), Generator("vol", 1)],
        grading=0,
        dual_matrix=Matrix([[0, -1], [1, 0]]),
    )
    poles = LevelData.make(1, 0, [Generator("1N", 0), Generator("1S", 0)], grading=2)
    oracle = QuadratureOracle()
    # vol against each pole's unit class: the moduli circle maps to the
    # equator by the identity chart; the two circles carry opposite
    # orientations
    oracle.register(
        PairingQuery("category", 0, 1, a=1, b=0, tag=tag),
        Chart(1, lambda pts: np.ones(len(pts)), integrand_degree=1),
    )
    oracle.register(
        PairingQuery("category", 0, 1, a=1, b=1, tag=tag),
        Chart(1, lambda pts: -np.ones(len(pts)), integrand_degree=1),
    )
    model = FlowCategoryModel([equator, poles], {(0, 1): 1}, oracle, tag=tag)
    model.circle_data = circle
    return model


# -- continuation (the bundled S² pair demo) -----------------------------------


def _interp_grad(sa: SphereSurface, sb: SphereSurface, t: float, pts):
    chi = 0.0 if t <= 0 else (1.0 if t >= 1 else 3 * t**2 - 2 * t**3)
    ga = sa.grad(pts)
    gb = sb.grad(pts)
    return (1 - chi) * ga + chi * gb


def continuation_counts(sa: SphereSurface, sb: SphereSurface,
                        config: EngineConfig | None = None) -> dict:
    """Rigid continuation counts between the two bundled S² Morse categories.

    The interpolation flow map Φ over the nonautonomous window is a
    diffeomorphism, so the minimum-to-minimum moduli is the single preimage
    Φ⁻¹(min_B) with positive sign, located here by shooting; likewise for
    the maxima under the reversed flow.
    """
    cfg = config or EngineConfig()
    cps_a = find_critical_points(sa, cfg)
    cps_b = find_critical_points(sb, cfg)
    min_a, max_a = cps_a[0], cps_a[-1]
    min_b, max_b = cps_b[0], cps_b[-1]

    def window_map(p, reverse=False):
        pts = np.array(p, dtype=float)[None, :]
        steps = 400
        h = 1.0 / steps
        for n in range(steps):
            t = (steps - 1 - n) * h if reverse else n * h
            sgn = -1.0 if reverse else 1.0

            def g(x, tt=t):
                return sgn * _interp_grad(sa, sb, tt, x)

            k1 = g(pts)
            k2 = g(sa.project(pts + 0.5 * h * k1))
            k3 = g(sa.project(pts + 0.5 * h * k2))
            k4 = g(sa.project(pts + h * k3))
            pts = sa.project(pts + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4))
        return pts[0]

    def shoot(target, start, reverse):
        p = np.array(start, dtype=float)
        for _ in range(80):
            err = window_map(p, reverse) - target
            t1, t2 = sa.tangent_basis(p)
            eps = 1e-6
            j = np.zeros((3, 2))
            j[:, 0] = (window_map(sa.project((p + eps * t1)[None, :])[0], reverse)
                       - window_map(p, reverse)) / eps
            j[:, 1] = (window_map(sa.project((p + eps * t2)[None, :])[0], reverse)
                       - window_map(p, reverse)) / eps
            tb_t, tb_s = sa.tangent_basis(target)
            a = np.stack([j.T @ tb_t, j.T @ tb_s], axis=1).T
            rhs = -np.array([err @ tb_t, err @ tb_s])
            try:
                delta = np.linalg.solve(a, rhs)
            except np.linalg.LinAlgError:
                return None
            p = sa.project((p + delta[0] * t1 + delta[1] * t2)[None, :])[0]
            if np.linalg.norm(window_map(p, reverse) - target) < 1e-10:
                return p
        return None

    sol_min = shoot(min_b.point, min_b.point, reverse=False)
    sol_max = shoot(max_a.point, max_a.point, reverse=True)
    return {
        "min_to_min": 1 if sol_min is not None else 0,
        "max_to_max": 1 if sol_max is not None else 0,
        "min_solution": sol_min,
        "max_solution": sol_max,
    }


def dump_trajectories_csv(path, samples) -> None:
    """Debug CSV dump: one row per (step, seed, coordinates...)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for step, pts in enumerate(samples):
            for seed, row in enumerate(np.atleast_2d(pts)):
                writer.writerow([step, seed, *[f"{x:.12g}" for x in row]])
