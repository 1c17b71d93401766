"""Model operators for a piecewise constant magnetic field on a half-space.

The field has unit strength in the sector {0 < theta < alpha} of the
(x1, x2) half-plane and strength ``a`` in {alpha < theta < pi}; its
direction is tilted by ``gamma`` out of the plane.  Everything the
package computes reduces to four families of spectral bottoms:

* ``fiber_band`` / ``band_table`` / ``band_infimum``: the 1D fiber
  operator -d^2/dt^2 + (b_a(t) - xi)^2 on the line, its band function
  mu_a(xi) and the band infimum beta_a at the minimizer xi_a;
* ``de_gennes`` / ``de_gennes_constant``: the half-line Neumann
  oscillator -d^2/dt^2 + (t - xi)^2 on t > 0 and its minimum Theta_0;
* ``lu_pan``: the ground energy zeta(nu) of the half-plane reduction
  -d^2/ds^2 - d^2/dt^2 + (t cos(nu) - s sin(nu))^2, Neumann at t = 0,
  for a unit field tilted by nu from the boundary;
* ``ground_energy`` / ``essential_bottom``: the bottom sigma of the 2D
  reduced operator -(grad - iA)^2 + (w(x) - tau)^2 on the half-plane at
  fiber parameter tau, and the closed-form bottom of its essential
  spectrum  inf_xi [ mu_a(tau sin g + xi cos g) + (xi sin g - tau cos g)^2 ].

Truncation boxes use Dirichlet walls (upper bounds of the continuum
values) and grow automatically so every potential well stays a fixed
margin away from the walls.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import PchipInterpolator

from .eigensolver import EigenConfig, EigenResult, smallest_eigs
from .errors import (
    GammaZero,
    MinimizerAtEdge,
    NotConverged,
    TableRangeExceeded,
    ValidationError,
)
from .lattice import (
    DEFAULT_NODE_CAP,
    BoundarySpec,
    Grid1D,
    HalfPlaneGrid,
    HermitianSparse,
    assemble_1d,
    assemble_2d_magnetic,
    link_phases,
)

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class ModelParams:
    """The triple (alpha, gamma, a) identifying one field configuration."""

    alpha: float
    gamma: float
    a: float

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi:
            raise ValidationError(f"alpha must lie in (0, pi), got {self.alpha}")
        if not 0.0 <= self.gamma <= math.pi / 2.0:
            raise ValidationError(f"gamma must lie in [0, pi/2], got {self.gamma}")
        if not -1.0 <= self.a < 1.0 or self.a == 0.0:
            raise ValidationError(
                f"a must lie in [-1, 1) and be nonzero, got {self.a}"
            )


@dataclass(frozen=True)
class Discretization:
    """Grids, truncation boxes and eigensolver settings.

    1D solves use spacing ``h`` on [-t_half, t_half] (de Gennes on
    [0, halfline]), extended so potential wells keep ``margin1d`` of
    clearance.  2D solves use (h1, h2) on [-x1_half, x1_half] x
    [0, x2_max], extended along x1 so the boundary wells at large |tau|
    keep ``margin2d`` of clearance.  ``scan_coarsen`` is the grid-factor
    used while scanning over tau before re-evaluating candidates at full
    resolution.  ``fiber_form`` selects the fiber potential:
    "primitive" is (b_a(t) - xi)^2 with b_a the primitive of the field
    step; "printed" is the literal branch a*(t - xi)^2 for t < 0, only
    meaningful for a > 0.
    """

    h: float = 0.01
    t_half: float = 12.0
    halfline: float = 20.0
    margin1d: float = 12.0
    h1: float = 0.1
    h2: float = 0.1
    x1_half: float = 20.0
    x2_max: float = 40.0
    margin2d: float = 10.0
    table_lo: float = -40.0
    table_hi: float = 40.0
    table_steps: int = 801
    scan_coarsen: int = 2
    eig: EigenConfig = EigenConfig()
    eig2d_tol: float = 2e-8
    node_cap: int = DEFAULT_NODE_CAP
    fiber_form: str = "primitive"

    def __post_init__(self):
        for name in ("h", "h1", "h2"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        for name in ("t_half", "halfline", "x1_half", "x2_max"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.fiber_form not in ("primitive", "printed"):
            raise ValidationError("fiber_form must be 'primitive' or 'printed'")

    def eig2d(self) -> EigenConfig:
        return replace(self.eig, tol=self.eig2d_tol)


DEFAULT_DISC = Discretization()


# ----------------------------------------------------------------------
# field profile and potentials


def field_profile(a: float, t):
    """Primitive b_a of the step field: b_a(t) = t for t >= 0, a*t below."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 0.0, t, a * t)
    return out if out.ndim else float(out)


def fiber_potential(a: float, xi: float, t, form: str = "primitive"):
    """Potential of the 1D fiber operator at Fourier parameter xi."""
    t = np.asarray(t, dtype=float)
    if form == "primitive":
        return (field_profile(a, t) - xi) ** 2
    if form == "printed":
        if a <= 0.0:
            raise ValidationError(
                "the printed fiber form a*(t-xi)^2 is not a nonnegative "
                "potential for a <= 0"
            )
        return np.where(t >= 0.0, 1.0, a) * (t - xi) ** 2
    raise ValidationError(f"unknown fiber form {form!r}")


def _sector_one(params: ModelParams, x1, x2):
    """True on the closure of the unit-strength sector {0 <= theta <= alpha}.

    Nodes exactly on the discontinuity line x1 sin(a) = x2 cos(a) count
    as sector one; both gauge branches agree there.
    """
    return x1 * math.sin(params.alpha) - x2 * math.cos(params.alpha) >= 0.0


def gauge_potential(params: ModelParams):
    """The in-plane gauge (0, A2) of the reduced 2D operator.

    A2 = cos(g) (x1 - (1-a) cot(al) x2) on sector one and a cos(g) x1 on
    sector two; continuous across the discontinuity line, with discrete
    curl cos(g) and a cos(g) times the cell area on the two sides.
    """
    sa, ca = math.sin(params.alpha), math.cos(params.alpha)
    cg = math.cos(params.gamma)
    cot = ca / sa
    a = params.a

    def gauge(x1, x2):
        one = _sector_one(params, x1, x2)
        a2 = np.where(one, cg * (x1 - (1.0 - a) * cot * x2), a * cg * x1)
        return np.zeros_like(np.asarray(a2)), a2

    return gauge


def electric_potential(params: ModelParams, tau: float, x1, x2):
    """V(x; tau) = (s(x) sin(g) (x1 sin(al) - x2 cos(al)) - tau)^2."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    sa, ca = math.sin(params.alpha), math.cos(params.alpha)
    sg = math.sin(params.gamma)
    s = np.where(_sector_one(params, x1, x2), 1.0, params.a)
    w = s * sg * (x1 * sa - x2 * ca)
    out = (w - tau) ** 2
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------
# shared solve helpers


def _solve_or_raise(H, cfg: EigenConfig, x0=None, precond=None) -> EigenResult:
    r = smallest_eigs(H, cfg, x0=x0, precond=precond)
    if not r.converged:
        raise NotConverged(
            f"eigensolver stalled at residual {float(np.max(r.residuals)):.3e}"
        )
    return r


def golden_min(f, lo: float, hi: float, xtol: float):
    """Golden-section minimum of a smooth unimodal f on [lo, hi].

    Returns (x, f(x)) with the bracket narrowed below xtol; the best
    evaluated point is returned, so f is never extrapolated.
    """
    a, b = (lo, hi) if lo < hi else (hi, lo)
    span = b - a
    if span <= xtol:
        x = 0.5 * (a + b)
        return x, f(x)
    steps = int(math.ceil(math.log(xtol / span) / math.log(_INVPHI)))
    c = a + _INVPHI2 * span
    d = a + _INVPHI * span
    fc, fd = f(c), f(d)
    for _ in range(steps):
        if fc < fd:
            b, d, fd = d, c, fc
            span *= _INVPHI
            c = a + _INVPHI2 * span
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            span *= _INVPHI
            d = a + _INVPHI * span
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _snap(value: float, h: float, up: bool) -> float:
    n = math.ceil(value / h) if up else math.floor(value / h)
    return n * h


# ----------------------------------------------------------------------
# 1D fiber problems


@dataclass
class Mode1D:
    """A fiber eigenpair: energy plus the physical nodal profile."""

    value: float
    grid: Grid1D
    psi: np.ndarray  # physical values on all grid nodes (zero at Dirichlet ends)


def _fiber_wells(a: float, xi_values) -> list[float]:
    wells = []
    for xi in np.atleast_1d(xi_values):
        if xi >= 0.0:
            wells.append(float(xi))
        ratio = xi / a
        if ratio < 0.0:
            wells.append(float(ratio))
    return wells


def _fiber_grid(a: float, xi_values, disc: Discretization) -> Grid1D:
    wells = _fiber_wells(a, xi_values)
    lo = min([-disc.t_half] + [w - disc.margin1d for w in wells])
    hi = max([disc.t_half] + [w + disc.margin1d for w in wells])
    lo = _snap(lo, disc.h, up=False)
    hi = _snap(hi, disc.h, up=True)
    n = int(round((hi - lo) / disc.h)) + 1
    return Grid1D(lo, hi, n)


class _Fiber1D:
    """Warm-started fiber solves on one shared grid.

    A tridiagonal LU costs O(n), so every solve gets a fresh shifted-LU
    preconditioner; warm starts make each solve a handful of iterations.
    """

    def __init__(self, a: float, grid: Grid1D, disc: Discretization):
        self.a = a
        self.grid = grid
        self.disc = disc
        self.t = grid.nodes()
        self._x0 = None
        self._last = None

    def solve(self, xi: float) -> tuple[float, HermitianSparse, EigenResult]:
        V = fiber_potential(self.a, xi, self.t, self.disc.fiber_form)
        H = assemble_1d(self.grid, V, "dirichlet", "dirichlet")
        shift = -0.05 if self._last is None else self._last - max(0.2, 0.2 * abs(self._last))
        r = _solve_or_raise(H, self.disc.eig, x0=self._x0, precond=_lu_precond(H, shift))
        self._x0 = r.vectors
        self._last = float(r.values[0])
        return self._last, H, r

    def value(self, xi: float) -> float:
        return self.solve(xi)[0]


def fiber_band(a: float, xi: float, disc: Discretization = DEFAULT_DISC) -> Mode1D:
    """Bottom mu_a(xi) of the fiber operator with its eigenfunction.

    The Dirichlet box is extended so every zero of (b_a(t) - xi) keeps
    margin1d of clearance; the value is an upper bound of the continuum
    band function.
    """
    ModelParams(math.pi / 2, 0.0, a)  # reuses the range checks on a
    grid = _fiber_grid(a, [xi], disc)
    solver = _Fiber1D(a, grid, disc)
    value, H, r = solver.solve(xi)
    psi = np.zeros(grid.n, dtype=r.vectors.dtype)
    psi[H.node_index] = H.physical_values(r.vectors[:, 0])
    return Mode1D(value, grid, psi)


def de_gennes(xi: float, disc: Discretization = DEFAULT_DISC) -> float:
    """Half-line Neumann oscillator energy at well position xi."""
    hi = max(disc.halfline, xi + disc.margin1d)
    hi = _snap(hi, disc.h, up=True)
    n = int(round(hi / disc.h)) + 1
    grid = Grid1D(0.0, hi, n)
    t = grid.nodes()
    H = assemble_1d(grid, (t - xi) ** 2, "neumann", "dirichlet")
    r = _solve_or_raise(H, disc.eig, precond=_lu_precond(H, -0.05))
    return float(r.values[0])


@functools.lru_cache(maxsize=64)
def de_gennes_constant(disc: Discretization = DEFAULT_DISC) -> tuple[float, float]:
    """(Theta_0, xi_0): the minimum of the half-line Neumann band.

    Coarse scan on [0, 2] followed by golden-section refinement to 1e-8
    in xi.  The classical identity xi_0^2 = Theta_0 holds up to
    discretization error and is asserted in the tests.
    """
    hi = _snap(disc.halfline, disc.h, up=True)
    n = int(round(hi / disc.h)) + 1
    grid = Grid1D(0.0, hi, n)
    t = grid.nodes()
    state = {"vec": None, "last": None}

    def energy(xi: float) -> float:
        H = assemble_1d(grid, (t - xi) ** 2, "neumann", "dirichlet")
        last = state["last"]
        shift = -0.05 if last is None else last - max(0.2, 0.2 * abs(last))
        r = _solve_or_raise(H, disc.eig, x0=state["vec"], precond=_lu_precond(H, shift))
        state["vec"] = r.vectors
        state["last"] = float(r.values[0])
        return state["last"]

    xs = np.linspace(0.0, 2.0, 41)
    vals = [energy(x) for x in xs]
    i = int(np.argmin(vals))
    lo = xs[max(i - 1, 0)]
    hi_b = xs[min(i + 1, len(xs) - 1)]
    xi0, theta0 = golden_min(energy, lo, hi_b, 1e-8)
    return float(theta0), float(xi0)


# ----------------------------------------------------------------------
# band tables and the band infimum

_PLATEAU_TOL = 1e-6  # flatness threshold marking a non-attained infimum


@dataclass
class BandTable:
    """Sampled band function xi -> mu_a(xi) with monotone-cubic interpolation."""

    a: float
    xi: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.xi.ndim != 1 or self.xi.size < 2 or np.any(np.diff(self.xi) <= 0):
            raise ValueError("xi samples must be strictly increasing")
        if np.any(self.mu <= 0.0):
            raise ValueError("band values must be positive")
        self._interp = PchipInterpolator(self.xi, self.mu, extrapolate=False)

    @property
    def xi_lo(self) -> float:
        return float(self.xi[0])

    @property
    def xi_hi(self) -> float:
        return float(self.xi[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.xi_lo) or np.any(x > self.xi_hi):
            raise TableRangeExceeded(
                f"band argument outside table range [{self.xi_lo}, {self.xi_hi}]"
            )
        out = self._interp(x)
        return out if out.ndim else float(out)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("xi,mu\n")
            for x, m in zip(self.xi, self.mu):
                fh.write(f"{x:.17g},{m:.17g}\n")

    @staticmethod
    def from_csv(path, a: float = 0.0) -> "BandTable":
        xi, mu = [], []
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "xi,mu":
                raise ValueError(f"unexpected band table header {header!r}")
            for line in fh:
                sx, sm = line.strip().split(",")
                xi.append(float(sx))
                mu.append(float(sm))
        return BandTable(a, np.asarray(xi), np.asarray(mu))


def _edge_is_plateau(mu: np.ndarray, edge: int) -> bool:
    """True when the table edge sits on a flat tail (infimum not attained)."""
    probe = max(2, mu.size // 20)
    inner = mu[probe] if edge == 0 else mu[-1 - probe]
    scale = max(1.0, abs(float(mu[edge])))
    return abs(float(mu[edge]) - float(inner)) <= _PLATEAU_TOL * scale


@functools.lru_cache(maxsize=32)
def band_table(
    a: float,
    xi_lo: float,
    xi_hi: float,
    steps: int,
    disc: Discretization = DEFAULT_DISC,
) -> BandTable:
    """Sample mu_a on a uniform xi grid (warm-started along the sweep).

    The range must bracket the band minimum in its interior; an edge
    minimum raises MinimizerAtEdge unless the edge lies on a flat
    plateau, which marks an infimum attained only in the limit (the
    a in (0,1) bands decrease to their infimum as xi -> -infinity).
    """
    if not xi_lo < xi_hi:
        raise ValueError("need xi_lo < xi_hi")
    if steps < 16:
        raise ValueError("need at least 16 steps")
    xs = np.linspace(xi_lo, xi_hi, steps)
    grid = _fiber_grid(a, [xi_lo, xi_hi], disc)
    solver = _Fiber1D(a, grid, disc)
    mu = np.array([solver.value(x) for x in xs])
    i = int(np.argmin(mu))
    if i in (0, steps - 1) and not _edge_is_plateau(mu, 0 if i == 0 else -1):
        raise MinimizerAtEdge(
            f"band minimum at table edge xi={xs[i]:.3f}; widen the range"
        )
    return BandTable(a, xs, mu)


@functools.lru_cache(maxsize=64)
def band_infimum(
    a: float, disc: Discretization = DEFAULT_DISC
) -> tuple[float, float | None]:
    """(beta_a, xi_a): the band infimum and its minimizer.

    The default table brackets the minimum for a < 0, where golden
    section on direct fiber solves refines xi_a to 1e-8.  For a in
    (0, 1) the band decreases monotonically to its infimum, the table
    edge plateau value is returned and xi_a is None.
    """
    table = band_table(a, disc.table_lo, disc.table_hi, disc.table_steps, disc)
    i = int(np.argmin(table.mu))
    if i in (0, table.mu.size - 1):
        return float(table.mu[i]), None
    lo, hi = float(table.xi[i - 1]), float(table.xi[i + 1])
    grid = _fiber_grid(a, [lo, hi], disc)
    solver = _Fiber1D(a, grid, disc)
    xi_a, beta = golden_min(solver.value, lo, hi, 1e-8)
    return float(beta), float(xi_a)


# ----------------------------------------------------------------------
# 2D solves: Lu-Pan energies and the reduced fiber operator


@dataclass
class Mode2D:
    """A 2D eigenpair with its grid and assembled operator."""

    value: float
    grid: HalfPlaneGrid
    op: HermitianSparse
    eig: EigenResult

    def physical(self) -> np.ndarray:
        """Eigenfunction nodal values on the full grid, shape (n2, n1)."""
        full = np.zeros(self.grid.n_nodes, dtype=self.eig.vectors.dtype)
        full[self.op.node_index] = self.op.physical_values(self.eig.vectors[:, 0])
        return full.reshape(self.grid.n2, self.grid.n1)


def _make_grid2d(x1_lo, x1_hi, x2_max, h1, h2) -> HalfPlaneGrid:
    x1_lo = _snap(x1_lo, h1, up=False)
    x1_hi = _snap(x1_hi, h1, up=True)
    x2_hi = _snap(x2_max, h2, up=True)
    n1 = int(round((x1_hi - x1_lo) / h1)) + 1
    n2 = int(round(x2_hi / h2)) + 1
    return HalfPlaneGrid(x1_lo, x1_hi, x2_hi, n1, n2)


def _lu_precond(H: HermitianSparse, shift: float):
    eye = sp.identity(H.n, dtype=H.dtype, format="csr")
    lu = spla.splu((H.csr - shift * eye).tocsc())
    return lu.solve


def _solve2d_hinted(H, cfg, x0=None, hint=None) -> EigenResult:
    """One-shot 2D solve; a value hint buys an LU preconditioner."""
    if hint is None:
        return smallest_eigs(H, cfg, x0=x0)
    shift = hint - max(0.15, 0.15 * abs(hint))
    return smallest_eigs(H, cfg, x0=x0, precond=_lu_precond(H, shift))


@functools.lru_cache(maxsize=64)
def lu_pan(nu: float, disc: Discretization = DEFAULT_DISC) -> float:
    """zeta(nu): ground energy for a unit field tilted by nu in [0, pi/2].

    nu = 0 delegates to the de Gennes minimum (the 2D reduction is only
    valid for nu > 0) and nu = pi/2 returns the separated value 1
    exactly (s^2-oscillator times a Neumann half-line); both shortcuts
    are cross-checked against full 2D solves in the tests.
    """
    if not 0.0 <= nu <= math.pi / 2.0:
        raise ValidationError(f"nu must lie in [0, pi/2], got {nu}")
    if nu == 0.0:
        return de_gennes_constant(disc)[0]
    if abs(nu - math.pi / 2.0) < 1e-12:
        return 1.0
    return lu_pan_2d(nu, disc).value


def lu_pan_2d(nu: float, disc: Discretization = DEFAULT_DISC, hint=None) -> Mode2D:
    """The full 2D half-plane solve behind lu_pan (no shortcuts)."""
    grid = _make_grid2d(-disc.x1_half, disc.x1_half, disc.x2_max, disc.h1, disc.h2)
    X1, X2 = grid.meshgrid()
    V = (X2 * math.cos(nu) - X1 * math.sin(nu)) ** 2
    zero_gauge = lambda x1, x2: (np.zeros_like(x1), np.zeros_like(x2))
    phases = link_phases(zero_gauge, grid)
    H = assemble_2d_magnetic(grid, phases, V, BoundarySpec.physical(), disc.node_cap)
    r = _solve2d_hinted(H, disc.eig2d(), hint=hint)
    if not r.converged:
        raise NotConverged("2D tilted-field solve did not converge")
    return Mode2D(float(r.values[0]), grid, H, r)


def _sigma_extents(params: ModelParams, taus, disc: Discretization):
    """x1 range covering the boundary wells w(x1, 0) = tau for all taus."""
    lo, hi = -disc.x1_half, disc.x1_half
    sg, sa = math.sin(params.gamma), math.sin(params.alpha)
    if sg <= 0.0:
        return lo, hi  # gamma = 0: V is constant, no wells to chase
    for tau in (float(np.min(taus)), float(np.max(taus))):
        right = tau / (sg * sa)
        if right > 0.0:
            hi = max(hi, right + disc.margin2d)
        left = tau / (params.a * sg * sa)
        if left < 0.0:
            lo = min(lo, left - disc.margin2d)
    return lo, hi


class SigmaSolver:
    """Reduced 2D fiber operator over a range of tau on one grid.

    The magnetic part is tau-independent, so the operator is assembled
    once and only the diagonal is updated per tau.  Solves warm-start
    from the previous eigenvector and share a sparse-LU preconditioner
    that is refreshed when it stops being effective.
    """

    _REFRESH_ITERS = 45

    def __init__(self, params: ModelParams, disc: Discretization, taus, coarse=False):
        factor = disc.scan_coarsen if coarse else 1
        h1, h2 = disc.h1 * factor, disc.h2 * factor
        lo, hi = _sigma_extents(params, taus, disc)
        self.params = params
        self.disc = disc
        self.grid = _make_grid2d(lo, hi, disc.x2_max, h1, h2)
        self.phases = link_phases(gauge_potential(params), self.grid)
        X1, X2 = self.grid.meshgrid()
        self._base = assemble_2d_magnetic(
            self.grid,
            self.phases,
            np.zeros_like(X1),
            BoundarySpec.physical(),
            disc.node_cap,
        )
        csr = self._base.csr
        rows = np.repeat(np.arange(csr.shape[0]), np.diff(csr.indptr))
        self._diag_pos = np.flatnonzero(csr.indices == rows)
        keep = self._base.node_index
        self._x1k = X1.ravel()[keep]
        self._x2k = X2.ravel()[keep]
        self._precond = None
        self._x0 = None

    def matrix(self, tau: float) -> HermitianSparse:
        V = electric_potential(self.params, tau, self._x1k, self._x2k)
        csr = self._base.csr.copy()
        csr.data[self._diag_pos] += V
        return HermitianSparse(
            csr,
            weight=self._base.weight,
            node_index=self._base.node_index,
            grid=self.grid,
        )

    def _refresh(self, H, value):
        shift = value - max(0.15, 0.15 * abs(value))
        self._precond = _lu_precond(H, shift)

    def solve(self, tau: float) -> Mode2D:
        H = self.matrix(tau)
        cfg = self.disc.eig2d()
        r = smallest_eigs(H, cfg, x0=self._x0, precond=self._precond)
        if not r.converged or r.used_fallback or r.iterations > self._REFRESH_ITERS:
            self._refresh(H, float(r.values[0]))
            r2 = smallest_eigs(H, cfg, x0=r.vectors, precond=self._precond)
            if r2.converged:
                r = r2
        if not r.converged:
            raise NotConverged(f"sigma solve at tau={tau} did not converge")
        self._x0 = r.vectors
        return Mode2D(float(r.values[0]), self.grid, H, r)

    def value(self, tau: float) -> float:
        return self.solve(tau).value


def ground_energy(
    params: ModelParams,
    tau: float,
    disc: Discretization = DEFAULT_DISC,
    hint=None,
) -> Mode2D:
    """sigma(alpha, gamma, a, tau): bottom of the reduced 2D operator.

    Assembles the covariant 5-point operator with the step gauge and the
    electric potential at fiber parameter tau on a box extended to cover
    the boundary wells, Neumann on x2 = 0 and Dirichlet on the
    artificial walls (an upper bound of the continuum value up to
    stencil error).
    """
    solver = SigmaSolver(params, disc, [tau], coarse=False)
    if hint is not None:
        H = solver.matrix(tau)
        r = _solve2d_hinted(H, disc.eig2d(), hint=hint)
        if not r.converged:
            raise NotConverged(f"sigma solve at tau={tau} did not converge")
        return Mode2D(float(r.values[0]), solver.grid, H, r)
    return solver.solve(tau)


def essential_bottom(params: ModelParams, tau: float, table: BandTable) -> float:
    """Bottom of the essential spectrum of the reduced operator at tau.

    Minimizes mu_a(u) + ((u sin(g) - tau)/cos(g))^2 over the tabulated
    band arguments u (the substitution u = tau sin(g) + xi cos(g) makes
    the table itself the scan grid).  Requires gamma > 0; at gamma =
    pi/2 the penalty pins u = tau and the value degenerates to mu_a(tau).
    """
    if params.gamma == 0.0:
        raise GammaZero("the essential-spectrum formula requires gamma != 0")
    sg, cg = math.sin(params.gamma), math.cos(params.gamma)
    if cg < 1e-14:
        return float(table(tau))

    def objective(u):
        return table(u) + ((np.asarray(u) * sg - tau) / cg) ** 2

    vals = objective(table.xi)
    i = int(np.argmin(vals))
    if i in (0, table.xi.size - 1):
        raise TableRangeExceeded(
            "essential-spectrum minimizer at the edge of the band table; "
            "widen the table range"
        )
    u_best, val = golden_min(
        lambda u: float(objective(u)),
        float(table.xi[i - 1]),
        float(table.xi[i + 1]),
        1e-9,
    )
    return float(val)
