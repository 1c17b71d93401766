"""Grids and gauge-consistent finite-difference assembly.

All discrete operators in the package come from this module: the 1D
3-point stencil for fiber operators on a truncated line, and the 2D
5-point covariant (Peierls) stencil for magnetic operators on a
truncated half-plane {x2 >= 0}.

Boundary conventions
--------------------
* Dirichlet edges are handled by row/column truncation: boundary nodes
  are simply not unknowns.
* Neumann edges use a mirror ghost node.  Eliminating the ghost doubles
  the inward coupling of the boundary row, which breaks symmetry; the
  row/column is rescaled by 1/sqrt(2) (a diagonal similarity) so the
  assembled matrix is exactly Hermitian while keeping the same
  eigenvalues.  The similarity weights are stored on the returned
  operator: the physical nodal value is vector / weight.
* The magnetic Neumann condition is imposed through the same mirror
  construction applied to the covariant difference, so it is gauge
  covariant by construction.

Hermiticity is exact at bit level: each off-diagonal pair is written
once as (value, conj(value)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, MemoryCapError

NEUMANN = "neumann"
DIRICHLET = "dirichlet"
_TAGS = (NEUMANN, DIRICHLET)

#: refuse to assemble 2D operators above this many grid nodes
DEFAULT_NODE_CAP = 2_500_000

_SQRT2 = np.sqrt(2.0)


def _check_tag(tag: str) -> str:
    if tag not in _TAGS:
        raise ValueError(f"boundary tag must be one of {_TAGS}, got {tag!r}")
    return tag


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid with n nodes on [t_min, t_max]."""

    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ValueError("need t_min < t_max")
        if self.n < 3:
            raise ValueError("need at least 3 nodes")

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n)


@dataclass(frozen=True)
class HalfPlaneGrid:
    """Uniform tensor grid on [x1_min, x1_max] x [0, x2_max].

    Node (i, j) sits at (x1_min + i*h1, j*h2).  The j = 0 row is the
    physical boundary; the other three edges are artificial truncation
    edges.  Flat indexing is row-major in x2: flat = j*n1 + i.
    """

    x1_min: float
    x1_max: float
    x2_max: float
    n1: int
    n2: int

    def __post_init__(self):
        if not (self.x1_min < 0.0 < self.x1_max):
            raise ValueError("need x1_min < 0 < x1_max")
        if self.x2_max <= 0.0:
            raise ValueError("need x2_max > 0")
        if self.n1 < 3 or self.n2 < 3:
            raise ValueError("need at least 3 nodes per direction")

    @property
    def h1(self) -> float:
        return (self.x1_max - self.x1_min) / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return self.x2_max / (self.n2 - 1)

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n2

    def x1_nodes(self) -> np.ndarray:
        return np.linspace(self.x1_min, self.x1_max, self.n1)

    def x2_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.x2_max, self.n2)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(X1, X2) arrays of shape (n2, n1), row-major in x2."""
        return np.meshgrid(self.x1_nodes(), self.x2_nodes(), indexing="xy")


@dataclass(frozen=True)
class BoundarySpec:
    """Per-edge boundary tags for a HalfPlaneGrid.

    The physical configuration is Neumann on the bottom (x2 = 0) and
    Dirichlet on the three artificial edges; that is the default.  Other
    combinations are allowed for tests and model problems.
    """

    bottom: str = NEUMANN
    top: str = DIRICHLET
    left: str = DIRICHLET
    right: str = DIRICHLET

    def __post_init__(self):
        for tag in (self.bottom, self.top, self.left, self.right):
            _check_tag(tag)

    @staticmethod
    def physical() -> "BoundarySpec":
        return BoundarySpec()

    @staticmethod
    def all_dirichlet() -> "BoundarySpec":
        return BoundarySpec(bottom=DIRICHLET)


class ScalarField:
    """Nonnegative real values sampled on grid nodes.

    Every electric potential in the models is a square, so negative
    samples are rejected here once and for all.
    """

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("potential samples must be finite")
        if np.any(v < 0.0):
            raise ValueError("potential samples must be nonnegative")
        self.values = v

    @property
    def shape(self):
        return self.values.shape


def _as_potential(potential, shape) -> np.ndarray:
    field = potential if isinstance(potential, ScalarField) else ScalarField(potential)
    if field.values.shape != shape:
        raise DimensionError(
            f"potential shape {field.values.shape} does not match grid {shape}"
        )
    return field.values


class GaugeField:
    """Unit-modulus phases on the directed edges of a HalfPlaneGrid.

    hphase[j, i] is the phase on the edge (i, j) -> (i+1, j) and
    vphase[j, i] the phase on (i, j) -> (i, j+1); the reverse edge
    carries the complex conjugate.
    """

    def __init__(self, grid: HalfPlaneGrid, hphase, vphase):
        hphase = np.asarray(hphase, dtype=complex)
        vphase = np.asarray(vphase, dtype=complex)
        if hphase.shape != (grid.n2, grid.n1 - 1):
            raise DimensionError("horizontal phase array has wrong shape")
        if vphase.shape != (grid.n2 - 1, grid.n1):
            raise DimensionError("vertical phase array has wrong shape")
        self.grid = grid
        self.hphase = hphase
        self.vphase = vphase

    def max_modulus_error(self) -> float:
        return max(
            float(np.max(np.abs(np.abs(self.hphase) - 1.0))),
            float(np.max(np.abs(np.abs(self.vphase) - 1.0))),
        )

    def plaquette_flux(self) -> np.ndarray:
        """Discrete curl: flux through each plaquette, shape (n2-1, n1-1).

        Counterclockwise product of link phases equals exp(-i * flux),
        so for the exact phases of a linear gauge the returned value is
        curl(A) * h1 * h2.
        """
        loop = (
            self.hphase[:-1, :]
            * self.vphase[:, 1:]
            * np.conj(self.hphase[1:, :])
            * np.conj(self.vphase[:, :-1])
        )
        return -np.angle(loop)


def link_phases(gauge, grid: HalfPlaneGrid) -> GaugeField:
    """Peierls phases from a vector potential by the midpoint rule.

    ``gauge(x1, x2) -> (A1, A2)`` must accept numpy arrays and be finite
    at all edge midpoints.  phase(edge) = exp(-i A(mid).dx); in
    particular a vanishing component yields phase exactly 1 on the
    edges it governs, and the midpoint rule is exact for gauges that
    are linear within a plaquette.
    """
    x1 = grid.x1_nodes()
    x2 = grid.x2_nodes()
    h1, h2 = grid.h1, grid.h2

    hx, hy = np.meshgrid(x1[:-1] + 0.5 * h1, x2, indexing="xy")
    a1, _ = gauge(hx, hy)
    line_h = np.broadcast_to(np.asarray(a1, dtype=float), hx.shape) * h1

    vx, vy = np.meshgrid(x1, x2[:-1] + 0.5 * h2, indexing="xy")
    _, a2 = gauge(vx, vy)
    line_v = np.broadcast_to(np.asarray(a2, dtype=float), vx.shape) * h2

    if not (np.all(np.isfinite(line_h)) and np.all(np.isfinite(line_v))):
        raise ValueError("gauge potential is not finite at an edge midpoint")
    return GaugeField(grid, np.exp(-1j * line_h), np.exp(-1j * line_v))


def gauge_transform(phases: GaugeField, chi) -> GaugeField:
    """Apply the lattice gauge transform phase(i->j) *= exp(i(chi_j - chi_i)).

    chi holds one finite real per grid node, shape (n2, n1).  The
    spectrum of any operator assembled from the transformed phases is
    identical up to solver tolerance.
    """
    grid = phases.grid
    chi = np.asarray(chi, dtype=float)
    if chi.shape != (grid.n2, grid.n1):
        raise DimensionError("chi must have one value per grid node")
    if not np.all(np.isfinite(chi)):
        raise ValueError("chi must be finite")
    hfac = np.exp(1j * (chi[:, 1:] - chi[:, :-1]))
    vfac = np.exp(1j * (chi[1:, :] - chi[:-1, :]))
    return GaugeField(grid, phases.hphase * hfac, phases.vphase * vfac)


class HermitianSparse:
    """Hermitian sparse matrix in compressed-row form.

    Wraps a canonical ``scipy.sparse.csr_matrix`` (sorted indices, no
    duplicates).  Assemblers attach the Neumann similarity weights and
    the flat grid indices of the retained nodes so eigenvectors can be
    mapped back to physical nodal values (physical = vector / weight).
    """

    def __init__(self, csr, weight=None, node_index=None, grid=None):
        csr = csr.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        self.csr = csr
        self.weight = weight
        self.node_index = node_index
        self.grid = grid

    @property
    def n(self) -> int:
        return self.csr.shape[0]

    # spec name for the same thing
    @property
    def dimension(self) -> int:
        return self.n

    @property
    def indptr(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def data(self) -> np.ndarray:
        return self.csr.data

    @property
    def dtype(self):
        return self.csr.dtype

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.csr @ x

    def __matmul__(self, x):
        return self.csr @ x

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def is_hermitian(self) -> bool:
        """Exact entrywise check H == conj(H)^T (no tolerance)."""
        diff = self.csr - self.csr.getH()
        return diff.nnz == 0 or not np.any(diff.data)

    def physical_values(self, vector: np.ndarray) -> np.ndarray:
        """Undo the Neumann similarity scaling on an eigenvector."""
        if self.weight is None:
            return vector
        return vector / self.weight


def assemble_1d(grid: Grid1D, potential, bc_left: str, bc_right: str) -> HermitianSparse:
    """3-point stencil for -d^2/dt^2 + V(t) with per-end boundary tags.

    Interior rows carry 2/h^2 + V on the diagonal and -1/h^2 on the
    off-diagonals.  A Neumann end keeps its node with the mirror-ghost
    row rescaled (coupling -sqrt(2)/h^2, weight 1/sqrt(2)); a Dirichlet
    end drops its node.
    """
    _check_tag(bc_left)
    _check_tag(bc_right)
    V = _as_potential(potential, (grid.n,))

    keep = np.arange(grid.n)
    if bc_left == DIRICHLET:
        keep = keep[1:]
    if bc_right == DIRICHLET:
        keep = keep[:-1]
    m = keep.size
    if m < 1:
        raise DimensionError("no unknowns left after Dirichlet truncation")

    inv = 1.0 / grid.h**2
    diag = 2.0 * inv + V[keep]

    off = np.full(m - 1, -inv)
    weight = np.ones(m)
    if bc_left == NEUMANN:
        off[0] = -_SQRT2 * inv
        weight[0] = 1.0 / _SQRT2
    if bc_right == NEUMANN:
        off[-1] = -_SQRT2 * inv
        weight[-1] = 1.0 / _SQRT2

    mat = sp.diags([off, diag, off], [-1, 0, 1], format="csr")
    return HermitianSparse(mat, weight=weight, node_index=keep, grid=grid)


def _neumann_exponent(spec: BoundarySpec, grid: HalfPlaneGrid) -> np.ndarray:
    """Number of Neumann edges through each node, shape (n2, n1)."""
    count = np.zeros((grid.n2, grid.n1), dtype=int)
    if spec.bottom == NEUMANN:
        count[0, :] += 1
    if spec.top == NEUMANN:
        count[-1, :] += 1
    if spec.left == NEUMANN:
        count[:, 0] += 1
    if spec.right == NEUMANN:
        count[:, -1] += 1
    return count


def assemble_2d_magnetic(
    grid: HalfPlaneGrid,
    phases: GaugeField,
    potential,
    bc: BoundarySpec,
    node_cap: int = DEFAULT_NODE_CAP,
) -> HermitianSparse:
    """5-point covariant stencil -(grad - iA)^2 + V on a truncated box.

    Diagonal 2/h1^2 + 2/h2^2 + V(node); each retained edge couples with
    -phase/h^2, scaled by sqrt(2) when it leaves a Neumann boundary
    along the normal (mirror ghost + similarity, see module docstring).
    The result is bit-exactly Hermitian.
    """
    if grid.n_nodes > node_cap:
        raise MemoryCapError(
            f"grid has {grid.n_nodes} nodes, above the cap of {node_cap}"
        )
    if phases.grid != grid:
        raise DimensionError("phases were built for a different grid")
    V = _as_potential(potential, (grid.n2, grid.n1))

    n1, n2 = grid.n1, grid.n2
    keep_mask = np.ones((n2, n1), dtype=bool)
    if bc.bottom == DIRICHLET:
        keep_mask[0, :] = False
    if bc.top == DIRICHLET:
        keep_mask[-1, :] = False
    if bc.left == DIRICHLET:
        keep_mask[:, 0] = False
    if bc.right == DIRICHLET:
        keep_mask[:, -1] = False

    index = -np.ones((n2, n1), dtype=np.int64)
    flat_keep = np.flatnonzero(keep_mask.ravel())
    index.ravel()[flat_keep] = np.arange(flat_keep.size)
    m = flat_keep.size
    if m < 1:
        raise DimensionError("no unknowns left after Dirichlet truncation")

    inv1 = 1.0 / grid.h1**2
    inv2 = 1.0 / grid.h2**2

    nexp = _neumann_exponent(bc, grid)
    weight2d = np.power(2.0, -0.5 * nexp)

    rows = [np.arange(m)]
    cols = [np.arange(m)]
    vals = [(2.0 * inv1 + 2.0 * inv2 + V.ravel()[flat_keep]).astype(complex)]

    def add_edges(ra, ca, value):
        """One undirected edge batch: entry and exact conjugate."""
        rows.append(ra)
        cols.append(ca)
        vals.append(value)
        rows.append(ca)
        cols.append(ra)
        vals.append(np.conj(value))

    # horizontal edges (i,j)-(i+1,j)
    both = keep_mask[:, :-1] & keep_mask[:, 1:]
    jj, ii = np.nonzero(both)
    if ii.size:
        scale = np.ones(ii.size)
        if bc.left == NEUMANN:
            scale[ii == 0] = _SQRT2
        if bc.right == NEUMANN:
            scale[ii == n1 - 2] = _SQRT2
        val = -phases.hphase[jj, ii] * inv1 * scale
        add_edges(index[jj, ii], index[jj, ii + 1], val)

    # vertical edges (i,j)-(i,j+1)
    both = keep_mask[:-1, :] & keep_mask[1:, :]
    jj, ii = np.nonzero(both)
    if ii.size:
        scale = np.ones(ii.size)
        if bc.bottom == NEUMANN:
            scale[jj == 0] = _SQRT2
        if bc.top == NEUMANN:
            scale[jj == n2 - 2] = _SQRT2
        val = -phases.vphase[jj, ii] * inv2 * scale
        add_edges(index[jj, ii], index[jj + 1, ii], val)

    allvals = np.concatenate(vals)
    if not np.any(allvals.imag):
        allvals = allvals.real  # gauge with A2 = 0: keep the matrix real
    mat = sp.coo_matrix(
        (allvals, (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    ).tocsr()
    return HermitianSparse(
        mat,
        weight=weight2d.ravel()[flat_keep],
        node_index=flat_keep,
        grid=grid,
    )
