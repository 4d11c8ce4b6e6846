"""Neural tangent kernel B, the integral operator T_B and its spectrum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .grid import Field, GridMismatchError, SpaceTimeGrid
from .net import ACTIVATION_BOUNDS, ACTIVATIONS, InitDistribution, NetParams, init_params, preactivation

DEFAULT_MEMORY_BUDGET = 2 * 1024**3
DEFAULT_MC_SAMPLES = 10_000


_FEATURE_BLOCK = 4_000_000


class ResourceError(MemoryError):
    """Dense kernel would exceed the configured memory budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(f"dense kernel needs {required / 2**20:.1f} MiB, budget is {budget / 2**20:.1f} MiB")
        self.required = required
        self.budget = budget


def kernel_value(theta, p, p_prime, activation: str = "tanh") -> float:
    """Per-neuron tangent kernel.

    ``theta`` is ``(c, w_t, (w_x, w_y), eta)``; ``p`` and ``p_prime`` are (t, x, y).
    """
    c, w_t, w, eta = theta
    sigma, dsigma = ACTIVATIONS[activation]
    t, x, y = p
    s, xs, ys = p_prime
    z = w_t * t + w[0] * x + w[1] * y + eta
    zp = w_t * s + w[0] * xs + w[1] * ys + eta
    return float(sigma(z) * sigma(zp) + c**2 * dsigma(z) * dsigma(zp) * (t * s + x * xs + y * ys + 1.0))


@dataclass(frozen=True)
class KernelOperator:
    grid: SpaceTimeGrid
    matrix: np.ndarray  # (size, size), rows/cols row-major in (t, x, y)
    provenance: tuple
    c_bound: float
    activation: str = "tanh"

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights.combined.ravel()

    def sup_bound(self) -> float:
        """Entrywise bound on |B| from activation bounds and the support of c."""
        cs, cds = ACTIVATION_BOUNDS[self.activation]
        g = self.grid
        tx = g.t_max**2 + max(g.x_min**2, g.x_max**2) + max(g.y_min**2, g.y_max**2) + 1.0
        return cs**2 + self.c_bound**2 * cds**2 * tx

    def weighted_frobenius(self) -> float:
        """||B||_{L2(D_T x D_T)} under the grid quadrature."""
        w = self.weights
        return float(np.sqrt(np.einsum("i,ij,j->", w, self.matrix**2, w)))

    def to_csv(self, path) -> None:
        np.savetxt(path, self.matrix, delimiter=",", fmt="%.17g")


def _features(params: NetParams, points: np.ndarray) -> np.ndarray:
    """Unscaled tangent features, (nodes, 5 n): sigma, c sigma' * (t, x, y, 1)."""
    sigma, dsigma = params.sigma()
    z = preactivation(params, points)
    d = dsigma(z) * params.c
    return np.concatenate([sigma(z), d * points[:, :1], d * points[:, 1:2], d * points[:, 2:3], d], axis=1)


def assemble_kernel(source, grid: SpaceTimeGrid, sample_count: int = DEFAULT_MC_SAMPLES,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET, activation: str = "tanh") -> KernelOperator:
    """Average of the per-neuron kernel over the neurons of ``source`` (a ``NetParams``,
    the empirical measure) or over ``sample_count`` draws from ``source`` (an
    ``InitDistribution``, Monte Carlo for the initial measure)."""
    nodes = grid.size
    required = 8 * nodes * nodes
    if required > memory_budget:
        raise ResourceError(required, memory_budget)
    if isinstance(source, NetParams):
        params = source
        provenance = ("empirical", source.n, source.seed)
        c_bound = float(np.abs(source.c).max())
    elif isinstance(source, InitDistribution):
        params = init_params(sample_count, 2 / 3, source, activation)
        provenance = ("monte_carlo", sample_count, source.seed)
        c_bound = source.c_bound
    else:
        raise TypeError("source must be NetParams or InitDistribution")
    pts = grid.points
    B = np.zeros((nodes, nodes))
    # feature block capped at a few million entries
    step = max(1, _FEATURE_BLOCK // (5 * nodes))
    for start in range(0, params.n, step):
        sl = slice(start, min(params.n, start + step))
        part = NetParams(sl.stop - sl.start, params.beta, params.c[sl], params.w_t[sl], params.w[sl],
                         params.eta[sl], params.activation)
        F = _features(part, pts)
        B += F @ F.T
    B /= params.n
    B = 0.5 * (B + B.T)
    return KernelOperator(grid, B, provenance, c_bound, params.activation)


def apply_operator(K: KernelOperator, u_hat: Field) -> Field:
    """[T_B u](p) = sum_p' B(p, p') w(p') u(p')."""
    if u_hat.grid != K.grid:
        raise GridMismatchError("field and kernel live on different grids")
    return Field(K.grid, K.matrix @ (K.weights * u_hat.values.ravel()))


def quadratic_form(K: KernelOperator, u_hat: Field) -> float:
    """(u, T_B u) in L2(D_T)."""
    v = K.weights * u_hat.values.ravel()
    return float(v @ K.matrix @ v)


def kernel_spectrum(K: KernelOperator, k_max: int | None = None) -> np.ndarray:
    """Leading eigenvalues (descending) of W^1/2 B W^1/2, i.e. of T_B on the grid."""
    s = np.sqrt(K.weights)
    sym = s[:, None] * K.matrix * s[None, :]
    try:
        vals = linalg.eigvalsh(sym)
    except linalg.LinAlgError as err:
        raise ArithmeticError("symmetric eigensolver did not converge") from err
    vals = vals[::-1]
    return vals if k_max is None else vals[:k_max]


def kernel_drift(initial: KernelOperator, current: KernelOperator) -> float:
    """||B_current - B_initial|| / ||B_initial|| in the weighted Frobenius norm.

    Diagnostic for lazy training: small drift means the tangent kernel barely
    moved from its initial value.
    """
    if initial.grid != current.grid:
        raise GridMismatchError("kernels live on different grids")
    w = initial.weights
    diff = current.matrix - initial.matrix
    base = initial.weighted_frobenius()
    return float(np.sqrt(np.einsum("i,ij,j->", w, diff**2, w))) / base if base > 0 else float("inf")
