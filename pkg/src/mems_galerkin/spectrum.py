"""Eigenbasis of L = beta*Lap^2 - tau*Lap on an interval or a radial ball.

The operator is discretized with centered finite differences on a uniform
grid.  The stiffness matrix is assembled in factored form A = F^T F with

    F = [sqrt(beta) W^(1/2) D ; sqrt(tau) W^(1/2) G]

where D maps the free nodal unknowns to nodal values of the discrete
Laplacian, G to nodal values of the discrete gradient and W holds the
quadrature weights.  The generalized problem A x = mu B x with B = W
restricted to the free nodes is then solved as a singular value problem of
F B^(-1/2), which keeps the small eigenvalues accurate even though
cond(A) grows like h^-4.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    DimensionNotSupported,
    EigensolveFailure,
    InvalidSpec,
    LengthMismatch,
    ResolutionTooCoarse,
    SingularAssembly,
    TruncationTooLarge,
)

BASIS_VERSION = "mems-basis-1"
MAX_DIM = 7
MIN_RESOLUTION = 16
DEFAULT_ORDER = 4
CLUSTER_RTOL = 1e-10


class BoundaryCondition(str, enum.Enum):
    DIRICHLET = "dirichlet"  # clamped: u = du/dn = 0
    NAVIER = "navier"  # pinned: u = Lap u = 0


@dataclass(frozen=True)
class Interval:
    length: float = 1.0

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise InvalidSpec(f"Interval length must be positive, got {self.length}")

    @property
    def measure(self) -> float:
        return float(self.length)

    def describe(self) -> str:
        return f"interval(L={self.length!r})"


@dataclass(frozen=True)
class RadialBall:
    """Unit ball in R^dim, restricted to radially symmetric functions."""

    dim: int
    radius: float = field(default=1.0, init=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionMismatch(
                "RadialBall needs dim >= 2; use Interval for one-dimensional problems"
            )
        if self.dim > MAX_DIM:
            raise DimensionNotSupported(
                f"dim_n = {self.dim} is not supported: the W^(4,2) -> L^inf embedding "
                f"requires n <= {MAX_DIM}"
            )

    @property
    def measure(self) -> float:
        n = self.dim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1)

    def describe(self) -> str:
        return f"ball(n={self.dim})"


Domain = Union[Interval, RadialBall]


@dataclass(frozen=True)
class OperatorSpec:
    beta: float
    tau: float
    lam: float
    domain: Domain
    bc: BoundaryCondition
    dim_n: int

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition(self.bc))
        if not self.beta > 0:
            raise InvalidSpec(f"beta must be > 0, got {self.beta}")
        if not self.tau >= 0:
            raise InvalidSpec(f"tau must be >= 0, got {self.tau}")
        if not self.lam >= 0:
            raise InvalidSpec(f"lambda must be >= 0, got {self.lam}")
        if self.dim_n > MAX_DIM:
            raise DimensionNotSupported(
                f"dim_n = {self.dim_n} is not supported (n <= {MAX_DIM} required for "
                "the Sobolev embedding W^(4,2) -> L^inf)"
            )
        if self.dim_n < 1:
            raise InvalidSpec(f"dim_n must be >= 1, got {self.dim_n}")
        _check_dimension(self.domain, self.dim_n)

    def with_lambda(self, lam: float) -> "OperatorSpec":
        return OperatorSpec(self.beta, self.tau, lam, self.domain, self.bc, self.dim_n)


def _check_dimension(domain: Domain, dim_n: int) -> None:
    if isinstance(domain, Interval) and dim_n != 1:
        raise DimensionMismatch(f"Interval requires dim_n = 1, got {dim_n}")
    if isinstance(domain, RadialBall) and dim_n != domain.dim:
        raise DimensionMismatch(
            f"RadialBall of dimension {domain.dim} does not match dim_n = {dim_n}"
        )


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    dim_n: int
    nodes: np.ndarray
    weights: np.ndarray
    h: float

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def radial(self) -> bool:
        return isinstance(self.domain, RadialBall)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def build_grid(domain: Domain, dim_n: int, N: int) -> Grid:
    """Uniform nodes with trapezoid weights carrying the (radial) measure."""
    if N < MIN_RESOLUTION:
        raise ResolutionTooCoarse(f"resolution N = {N} < {MIN_RESOLUTION}")
    _check_dimension(domain, dim_n)
    if isinstance(domain, Interval):
        nodes = np.linspace(0.0, domain.length, N + 1)
        h = domain.length / N
        weights = np.full(N + 1, h)
        weights[0] = weights[-1] = h / 2
    else:
        nodes = np.linspace(0.0, 1.0, N + 1)
        h = 1.0 / N
        weights = h * nodes ** (dim_n - 1)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        # surface factor absorbed into a rescale so the weights sum to |B| exactly
        weights *= domain.measure / weights.sum()
    return Grid(domain, dim_n, _frozen(nodes), _frozen(weights), float(h))


# --------------------------------------------------------------------------
# finite difference assembly

_D2 = {2: (np.array([1.0, -2.0, 1.0]),), 4: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12,)}
_D1 = {2: (np.array([-0.5, 0.0, 0.5]),), 4: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12,)}

# value at r = 0 of the even polynomial through u_1..u_m (interpolation in r^2)
_ORIGIN = {2: np.array([4.0, -1.0]) / 3, 4: np.array([1.5, -0.6, 0.1])}


def _navier_ghosts(order: int, n: int, h: float) -> np.ndarray:
    """Weights expressing the ghost values beyond r = 1 through u_{N-1}..u_{N-m}.

    The ghosts come from the polynomial that interpolates the last interior
    values, vanishes at r = 1 and satisfies u'' + (n-1) u' = 0 there.
    """
    m = order // 2 + 1
    deg = m + 1
    V = np.zeros((deg + 1, deg + 1))
    for i in range(1, m + 1):
        V[i - 1] = (-float(i)) ** np.arange(deg + 1)
    V[m, 0] = 1.0
    V[m + 1, 1] = (n - 1) * h
    V[m + 1, 2] = 2.0
    rhs = np.zeros((deg + 1, m))
    rhs[:m, :m] = np.eye(m)
    coef = np.linalg.solve(V, rhs)
    g = order // 2
    return np.array([(float(j) ** np.arange(deg + 1)) @ coef for j in range(1, g + 1)])


def _extension(grid: Grid, bc: BoundaryCondition, order: int):
    """Sparse map from free unknowns to values on nodes -g..N+g."""
    N, g = grid.N, order // 2
    free = np.arange(1, N)
    M = len(free)
    rows = {}

    def unit(i):
        return {i - 1: 1.0}

    for i in range(1, N):
        rows[i] = unit(i)
    rows[N] = {}
    if grid.radial:
        rows[0] = {j: c for j, c in enumerate(_ORIGIN[order])}
        for j in range(1, g + 1):
            rows[-j] = dict(rows[j])
        if bc is BoundaryCondition.DIRICHLET:
            for j in range(1, g + 1):
                rows[N + j] = dict(rows[N - j])
        else:
            W = _navier_ghosts(order, grid.dim_n, grid.h)
            for j in range(1, g + 1):
                rows[N + j] = {N - 1 - i - 1: W[j - 1, i] for i in range(W.shape[1])}
    else:
        rows[0] = {}
        sign = 1.0 if bc is BoundaryCondition.DIRICHLET else -1.0
        for j in range(1, g + 1):
            rows[-j] = {k: sign * v for k, v in rows[j].items()}
            rows[N + j] = {k: sign * v for k, v in rows[N - j].items()}

    data, ri, ci = [], [], []
    for node, entries in rows.items():
        for col, val in entries.items():
            ri.append(node + g)
            ci.append(col)
            data.append(val)
    E = sp.csr_matrix((data, (ri, ci)), shape=(N + 1 + 2 * g, M))
    return free, E


def _stencil(N: int, g: int, coefs: np.ndarray, scale: np.ndarray) -> sp.csr_matrix:
    """(N+1) x (N+1+2g) matrix applying a centered stencil at every node."""
    w = len(coefs) // 2
    ri, ci, data = [], [], []
    for i in range(N + 1):
        for k, c in enumerate(coefs):
            if c != 0.0:
                ri.append(i)
                ci.append(i + g + k - w)
                data.append(c * scale[i])
    return sp.csr_matrix((data, (ri, ci)), shape=(N + 1, N + 1 + 2 * g))


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Assembled pencil (A, B) on the free unknowns plus the difference maps.

    ``lap`` and ``grad`` act on free unknowns and return nodal values on
    0..N; ``prolong`` returns the nodal values themselves (boundary and
    origin entries reconstructed from the constraints).
    """

    spec: "OperatorSpec"
    grid: Grid
    order: int
    free: np.ndarray
    prolong: sp.csr_matrix
    lap: sp.csr_matrix
    grad: sp.csr_matrix
    stiffness: np.ndarray
    mass: np.ndarray

    def factor(self) -> np.ndarray:
        """F with A = F^T F (dense)."""
        sw = np.sqrt(self.grid.weights)[:, None]
        blocks = [math.sqrt(self.spec.beta) * (sw * self.lap.toarray())]
        if self.spec.tau > 0:
            blocks.append(math.sqrt(self.spec.tau) * (sw * self.grad.toarray()))
        return np.vstack(blocks)

    def restrict(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u)[..., self.free]


def _laplacian_maps(grid: Grid, bc: BoundaryCondition, order: int):
    N, g, h = grid.N, order // 2, grid.h
    free, E = _extension(grid, bc, order)
    ones = np.ones(N + 1)
    d2 = _stencil(N, g, _D2[order][0], ones / h**2)
    d1 = _stencil(N, g, _D1[order][0], ones / h)
    if grid.radial:
        n = grid.dim_n
        r = grid.nodes
        inv_r = np.zeros(N + 1)
        inv_r[1:] = (n - 1) / r[1:]
        # Lap u(0) = n u''(0) by symmetry; never divide by r at the origin
        diag2 = np.ones(N + 1)
        diag2[0] = n
        lap = sp.diags(diag2) @ d2 + sp.diags(inv_r) @ d1
    else:
        lap = d2
    lap = (lap @ E).tocsr()
    grad = (d1 @ E).tocsr()
    if bc is BoundaryCondition.NAVIER:
        keep = np.ones(N + 1)
        keep[N] = 0.0
        if not grid.radial:
            keep[0] = 0.0
        lap = (sp.diags(keep) @ lap).tocsr()
    prolong = E[g : g + N + 1].tocsr()
    return free, prolong, lap, grad


@lru_cache(maxsize=32)
def _assemble_cached(base: OperatorSpec, N: int, order: int):
    grid = build_grid(base.domain, base.dim_n, N)
    free, prolong, lap, grad = _laplacian_maps(grid, base.bc, order)
    if len(free) == 0:
        raise SingularAssembly("boundary elimination left no free unknowns")
    w = grid.weights
    A = base.beta * (lap.T @ sp.diags(w) @ lap)
    if base.tau > 0:
        A = A + base.tau * (grad.T @ sp.diags(w) @ grad)
    A = A.toarray()
    A = 0.5 * (A + A.T)
    A.flags.writeable = False
    mass = _frozen(w[free])
    return DiscreteOperator(base, grid, order, free, prolong, lap, grad, A, mass)


def assemble_operator(spec: OperatorSpec, grid: Grid, order: int = DEFAULT_ORDER) -> DiscreteOperator:
    """Stiffness and mass matrices of L on the free nodes of ``grid``."""
    if order not in (2, 4):
        raise InvalidSpec(f"stencil order must be 2 or 4, got {order}")
    _check_dimension(grid.domain, spec.dim_n)
    if grid.domain != spec.domain:
        raise DimensionMismatch("grid and spec refer to different domains")
    return _assemble_cached(spec.with_lambda(0.0), grid.N, order)


# --------------------------------------------------------------------------
# spectral basis


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    spec: OperatorSpec
    grid: Grid
    K: int
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # shape (K, N+1)
    order: int = DEFAULT_ORDER
    version: str = BASIS_VERSION

    @property
    def operator(self) -> DiscreteOperator:
        return assemble_operator(self.spec, self.grid, self.order)

    def orthonormality_defect(self) -> float:
        G = (self.eigenfunctions * self.grid.weights) @ self.eigenfunctions.T
        return float(np.max(np.abs(G - np.eye(self.K))))

    def energy_gram(self) -> np.ndarray:
        op = self.operator
        x = op.restrict(self.eigenfunctions).T
        w = self.grid.weights[:, None]
        Lx = op.lap @ x
        G = self.spec.beta * (Lx.T @ (w * Lx))
        if self.spec.tau > 0:
            Dx = op.grad @ x
            G = G + self.spec.tau * (Dx.T @ (w * Dx))
        return G

    def diagonality_defect(self) -> float:
        G = self.energy_gram()
        return float(np.max(np.abs(G - np.diag(self.eigenvalues))))


def _rayleigh(op: DiscreteOperator, X: np.ndarray) -> np.ndarray:
    w = op.grid.weights
    LX = op.lap @ X.T
    num = op.spec.beta * np.sum(w[:, None] * LX**2, axis=0)
    if op.spec.tau > 0:
        GX = op.grad @ X.T
        num = num + op.spec.tau * np.sum(w[:, None] * GX**2, axis=0)
    den = np.sum(op.mass[:, None] * X.T**2, axis=0)
    return num / den


def _first_significant(v: np.ndarray) -> float:
    tol = 1e-12 * np.max(np.abs(v))
    for x in v[1:]:
        if abs(x) > tol:
            return x
    return v[0]


def compute_spectrum(spec: OperatorSpec, grid: Grid, K: int, order: int = DEFAULT_ORDER) -> SpectralBasis:
    """The K smallest eigenpairs, L2-orthonormal under the grid weights."""
    if K < 1 or K > grid.N // 4:
        raise TruncationTooLarge(f"K = {K} must satisfy 1 <= K <= N/4 = {grid.N // 4}")
    op = assemble_operator(spec, grid, order)
    sb = np.sqrt(op.mass)
    Fm = op.factor() / sb[None, :]
    try:
        _, s, Vt = scipy.linalg.svd(Fm, full_matrices=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolveFailure(f"singular value decomposition failed: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise EigensolveFailure("non-finite singular values")
    idx = np.argsort(s)[:K]
    lam = s[idx] ** 2
    Y = Vt[idx]
    if lam[0] <= 0:
        raise EigensolveFailure("stiffness matrix is not positive definite on the free nodes")

    # re-orthogonalize inside numerically degenerate clusters
    i = 0
    while i < K:
        j = i + 1
        while j < K and abs(lam[j] - lam[i]) < CLUSTER_RTOL * lam[j]:
            j += 1
        if j - i > 1:
            Q, _ = np.linalg.qr(Y[i:j].T)
            block = Q.T
            first = block[:, 0]
            order_ = np.argsort(-np.abs(first), kind="stable")
            Y[i:j] = block[order_]
            lam[i:j] = np.mean(lam[i:j])
        i = j

    X = Y / sb[None, :]
    # Rayleigh quotients through the sparse difference maps are accurate to
    # O(eps / h^2) relative, well below the SVD's O(eps * sigma_max) floor
    lam = _rayleigh(op, X)
    phi = (op.prolong @ X.T).T
    for k in range(K):
        if _first_significant(phi[k]) < 0:
            phi[k] = -phi[k]
    return SpectralBasis(spec.with_lambda(0.0), grid, K, _frozen(lam), _frozen(phi), order)


# --------------------------------------------------------------------------
# inner products and projections


def _check_len(u, grid: Grid):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != grid.N + 1:
        raise LengthMismatch(f"expected {grid.N + 1} nodal values, got {u.shape[-1]}")
    return u


def l2_inner_product(u, v, grid: Grid) -> float:
    u = _check_len(u, grid)
    v = _check_len(v, grid)
    if u.shape != v.shape:
        raise LengthMismatch(f"shape mismatch {u.shape} vs {v.shape}")
    return float(np.sum(grid.weights * u * v))


def energy_inner_product(u, v, spec: OperatorSpec, grid: Grid, order: int = DEFAULT_ORDER) -> float:
    """beta <Lap u, Lap v> + tau <grad u, grad v> with the assembly stencils."""
    u = _check_len(u, grid)
    v = _check_len(v, grid)
    op = assemble_operator(spec, grid, order)
    xu, xv = op.restrict(u), op.restrict(v)
    w = grid.weights
    val = spec.beta * np.sum(w * (op.lap @ xu) * (op.lap @ xv))
    if spec.tau > 0:
        val += spec.tau * np.sum(w * (op.grad @ xu) * (op.grad @ xv))
    return float(val)


def synthesize(basis: SpectralBasis, coeffs) -> np.ndarray:
    """Grid values of sum_k c_k w_k; accepts (K,) or (S, K)."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape[-1] != basis.K:
        raise LengthMismatch(f"expected {basis.K} coefficients, got {c.shape[-1]}")
    return c @ basis.eigenfunctions


def analyze(basis: SpectralBasis, u) -> np.ndarray:
    """L2 projection coefficients <u, w_k>; accepts (N+1,) or (S, N+1)."""
    u = _check_len(u, basis.grid)
    return (u * basis.grid.weights) @ basis.eigenfunctions.T


def embedding_constant(basis: SpectralBasis, K: int | None = None) -> float:
    """Norm of point evaluation on span{w_1..w_K} under ||u||^2 + ||Lu||^2.

    A finite-dimensional lower approximation of the embedding constant of
    W^(4,2) into L^inf.
    """
    if basis.spec.dim_n > MAX_DIM:
        raise DimensionNotSupported(
            f"embedding constant undefined for n = {basis.spec.dim_n}: requires n <= {MAX_DIM}"
        )
    K = basis.K if K is None else K
    phi = basis.eigenfunctions[:K]
    lam = basis.eigenvalues[:K]
    kernel = np.sum(phi**2 / (1.0 + lam**2)[:, None], axis=0)
    return float(math.sqrt(np.max(kernel)))


def truncate_basis(basis: SpectralBasis, K: int) -> SpectralBasis:
    """The first K eigenpairs of ``basis`` as a basis of its own."""
    if not 1 <= K <= basis.K:
        raise TruncationTooLarge(f"cannot truncate a {basis.K}-mode basis to K = {K}")
    return SpectralBasis(
        basis.spec, basis.grid, K, basis.eigenvalues[:K], basis.eigenfunctions[:K], basis.order, basis.version
    )
