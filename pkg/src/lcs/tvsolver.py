"""Total-variation reconstruction from line-based measurements.

The decoder solves

    min_x  TV(x) + lam/2 * ||A x - y||^2

where ``A = diag(Phi, ..., Phi)`` applies the line operator to every line of
the image.  ``A`` is never formed; it is applied by reshaping the image into a
``(num_lines, line_len)`` matrix and multiplying by ``Phi``.

The split ``w = D x`` turns this into an augmented Lagrangian

    L(w, x; nu) = |w|_1 - <nu, w - D x> + beta/2 ||w - D x||^2
                  + lam/2 ||A x - y||^2

which is minimised by alternating a closed-form shrinkage in ``w``, a few
preconditioned gradient steps in ``x`` and a multiplier ascent step in ``nu``.

Internally intensities are divided by 255, so ``lam`` and ``beta`` (and the
objective values) refer to images in [0, 1].
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DimensionError, DivergenceError
from .imaging import Image

__all__ = [
    "GradientField",
    "SolverConfig",
    "SolverState",
    "LineOperator",
    "grad",
    "grad_adjoint",
    "tv",
    "shrink",
    "initialize",
    "objective",
    "al_x_value",
    "al_x_gradient",
    "reconstruct",
]

FLAVORS = ("anisotropic", "isotropic")
PEAK = 255.0


@dataclass(frozen=True, eq=False)
class GradientField:
    """Forward differences; ``dx[:, -1]`` and ``dy[-1, :]`` are always zero."""

    dx: np.ndarray
    dy: np.ndarray

    @property
    def shape(self):
        return self.dx.shape

    def stacked(self):
        return np.stack([self.dx, self.dy])


@dataclass(frozen=True)
class SolverConfig:
    """Solver hyperparameters.

    ``lam`` weights the measurement fidelity and ``beta`` the splitting
    penalty.  Measurements are noiseless, so ``lam`` is large enough for the
    fidelity term to act as a constraint.
    """

    lam: float = 1e4
    beta: float = 32.0
    max_outer: int = 300
    max_inner: int = 10
    tol: float = 1e-4
    tv_flavor: str = "anisotropic"

    def __post_init__(self):
        for name in ("lam", "beta", "tol"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite number, got {v}")
        if self.max_outer < 1:
            raise ValueError(f"max_outer must be at least 1, got {self.max_outer}")
        if self.max_inner < 1:
            raise ValueError(f"max_inner must be at least 1, got {self.max_inner}")
        if self.tv_flavor not in FLAVORS:
            raise ValueError(f"tv_flavor must be one of {FLAVORS}, got {self.tv_flavor!r}")


@dataclass
class SolverState:
    """Final iterate of a reconstruction run.

    ``x`` is the unclamped estimate in pixel units (flattened, row-major).
    ``objective_trace`` holds ``TV(x) + lam/2 ||A x - y||^2`` on the [0, 1]
    scale after every outer iteration, and ``change_trace`` the relative
    change of the ADMM iterate.
    """

    x: np.ndarray
    w: np.ndarray
    mult_w: np.ndarray
    objective_trace: list = field(default_factory=list)
    change_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_change(self):
        return self.change_trace[-1] if self.change_trace else float("nan")


# -- difference operators ------------------------------------------------------


def _check_len(x, rows, cols):
    x = np.asarray(x, dtype=np.float64)
    if x.size != rows * cols:
        raise DimensionError(f"vector of length {x.size} is not a {rows}x{cols} image")
    return x.reshape(rows, cols)


def _grad2(u):
    g = np.zeros((2,) + u.shape)
    g[0, :, :-1] = u[:, 1:] - u[:, :-1]
    g[1, :-1, :] = u[1:, :] - u[:-1, :]
    return g


def _grad2_adj(g):
    gx, gy = g[0], g[1]
    out = np.zeros(gx.shape)
    out[:, :-1] -= gx[:, :-1]
    out[:, 1:] += gx[:, :-1]
    out[:-1, :] -= gy[:-1, :]
    out[1:, :] += gy[:-1, :]
    return out


def grad(x, rows, cols):
    """Horizontal and vertical forward differences with a replicate boundary."""
    g = _grad2(_check_len(x, rows, cols))
    return GradientField(g[0], g[1])


def grad_adjoint(g):
    """Adjoint of :func:`grad`, returned as a flat vector."""
    dx = np.asarray(g.dx, dtype=np.float64)
    dy = np.asarray(g.dy, dtype=np.float64)
    if dx.ndim != 2 or dx.shape != dy.shape:
        raise DimensionError(f"gradient components differ in shape: {dx.shape} vs {dy.shape}")
    return _grad2_adj(np.stack([dx, dy])).reshape(-1)


def _tv2(g, flavor):
    if flavor == "anisotropic":
        return float(np.abs(g).sum())
    if flavor == "isotropic":
        return float(np.sqrt(g[0] ** 2 + g[1] ** 2).sum())
    raise ValueError(f"unknown TV flavor {flavor!r}")


def tv(x, rows, cols, flavor="anisotropic"):
    """Total variation: ``sum |dx| + |dy|`` or ``sum sqrt(dx^2 + dy^2)``."""
    return _tv2(_grad2(_check_len(x, rows, cols)), flavor)


def shrink(v, threshold, flavor="anisotropic"):
    """Soft-thresholding.

    Anisotropic shrinkage acts on every entry.  Isotropic shrinkage treats the
    leading axis (length 2) as the ``(dx, dy)`` pair and shrinks its length.
    """
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    v = np.asarray(v, dtype=np.float64)
    if flavor == "anisotropic":
        return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)
    if flavor == "isotropic":
        if v.shape[:1] != (2,):
            raise DimensionError("isotropic shrinkage needs a leading axis of length 2")
        mag = np.sqrt(v[0] ** 2 + v[1] ** 2)
        scale = np.maximum(mag - threshold, 0.0) / np.where(mag > 0, mag, 1.0)
        return v * scale
    raise ValueError(f"unknown TV flavor {flavor!r}")


# -- measurement operator ------------------------------------------------------


class LineOperator:
    """The block-diagonal operator ``diag(Phi, ..., Phi)`` applied implicitly.

    Works on 2-D images of shape ``(rows, cols)``; ``forward`` returns the
    ``(num_lines, m)`` measurement array.
    """

    def __init__(self, phi, rows, cols):
        phi = np.asarray(phi, dtype=np.float64)
        line_len = phi.shape[1]
        if (rows * cols) % line_len:
            raise DimensionError(
                f"operator length {line_len} does not tile a {rows}x{cols} image"
            )
        self.phi = phi
        self.rows, self.cols = rows, cols
        self.line_len = line_len
        self.num_lines = rows * cols // line_len

    def forward(self, u):
        return u.reshape(self.num_lines, self.line_len) @ self.phi.T

    def adjoint(self, y):
        return (y @ self.phi).reshape(self.rows, self.cols)

    def project(self, u):
        """Orthogonal projection onto the row space of the operator."""
        return self.adjoint(self.forward(u))


def _operator(sample, matrix):
    if matrix is None:
        matrix = sample.matrix()
    phi = getattr(matrix, "entries", matrix)
    if phi.shape != (sample.m_per_line, sample.line_len):
        raise DimensionError(
            f"operator shape {phi.shape} does not match header "
            f"({sample.m_per_line}, {sample.line_len})"
        )
    return LineOperator(phi, sample.source_rows, sample.source_cols)


def initialize(sample, matrix=None):
    """Back-projection ``Phi^T Y_i`` of every line, as a flat image vector."""
    op = _operator(sample, matrix)
    return op.adjoint(sample.measurements).reshape(-1)


# -- objective and X-subproblem --------------------------------------------------


def objective(u, op, y, lam, flavor="anisotropic"):
    """``TV(u) + lam/2 ||A u - y||^2`` for a 2-D image ``u``."""
    r = op.forward(u) - y
    return _tv2(_grad2(u), flavor) + 0.5 * lam * float(np.vdot(r, r))


def al_x_value(u, op, y, target, lam, beta):
    """X-part of the augmented Lagrangian: ``beta/2 ||D u - target||^2 + lam/2 ||A u - y||^2``.

    ``target`` is ``w - nu/beta``; terms independent of ``u`` are dropped.
    """
    d = _grad2(u) - target
    r = op.forward(u) - y
    return 0.5 * beta * float(np.vdot(d, d)) + 0.5 * lam * float(np.vdot(r, r))


def al_x_gradient(u, op, y, target, lam, beta):
    return beta * _grad2_adj(_grad2(u) - target) + lam * op.adjoint(op.forward(u) - y)


def _x_update(u, op, y, target, lam, beta, steps):
    """Approximately minimise :func:`al_x_value` from warm start ``u``.

    Gradient descent in the metric ``M = (lam + 8 beta) P + 8 beta (I - P)``,
    ``P`` the projection onto the measured subspace, which removes the
    stiffness ``lam`` introduces.  Step lengths follow Barzilai-Borwein (for a
    quadratic, the previous exact step); a step that would not decrease the
    subproblem falls back to the exact line minimiser, so every step descends.
    """
    s_in = 1.0 / (lam + 8.0 * beta)
    s_out = 1.0 / (8.0 * beta)
    g = al_x_gradient(u, op, y, target, lam, beta)
    alpha_prev = None
    for _ in range(steps):
        pg = op.project(g)
        d = -(s_in * pg + s_out * (g - pg))
        gd = float(np.vdot(g, d))
        if gd >= 0.0:
            break
        hd = beta * _grad2_adj(_grad2(d)) + lam * op.project(d)
        dhd = float(np.vdot(d, hd))
        if dhd <= 0.0:
            break
        alpha_exact = -gd / dhd
        alpha = alpha_exact
        if alpha_prev is not None and alpha_prev < 2.0 * alpha_exact:
            alpha = alpha_prev
        u = u + alpha * d
        g = g + alpha * hd
        alpha_prev = alpha_exact
    return u


# -- driver ----------------------------------------------------------------------


def reconstruct(sample, config=None, matrix=None):
    """Recover an image from ``sample`` by TV minimisation.

    Parameters
    ----------
    sample : EncodedSample
        Line-based (or whole-image) measurements with their header.
    config : SolverConfig, optional
        Hyperparameters; defaults to ``SolverConfig()``.
    matrix : SamplingMatrix or ndarray, optional
        The operator, if already available; otherwise regenerated from the
        sample header.

    Returns
    -------
    (Image, SolverState)
        The reconstruction clamped to [0, 255], and the solver state.

    Raises
    ------
    DivergenceError
        If any iterate becomes non-finite.
    """
    cfg = config or SolverConfig()
    op = _operator(sample, matrix)
    y = sample.measurements / PEAK
    lam, beta, flavor = cfg.lam, cfg.beta, cfg.tv_flavor
    rows, cols = sample.source_rows, sample.source_cols

    x = op.adjoint(y)
    nu = np.zeros((2, rows, cols))
    w = np.zeros_like(nu)
    # The reported estimate only moves when the objective does not rise, so
    # the trace is monotone while the ADMM sequence itself runs unchanged.
    best = x
    best_f = math.inf
    state = SolverState(x=best.reshape(-1), w=w, mult_w=nu)

    # non-finite values are caught by the divergence check, not warned about
    with np.errstate(invalid="ignore", over="ignore"):
        for k in range(1, cfg.max_outer + 1):
            dx = _grad2(x)
            w = shrink(dx + nu / beta, 1.0 / beta, flavor)
            x_new = _x_update(x, op, y, w - nu / beta, lam, beta, cfg.max_inner)
            dx = _grad2(x_new)
            nu = nu - beta * (w - dx)
            if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(nu))):
                raise DivergenceError(k)
            f = objective(x_new, op, y, lam, flavor)
            if not math.isfinite(f):
                raise DivergenceError(k, "objective")
            change = float(np.linalg.norm(x_new - x)) / max(float(np.linalg.norm(x)), 1e-12)
            x = x_new
            if f <= best_f:
                best, best_f = x, f
            state.objective_trace.append(best_f)
            state.change_trace.append(change)
            state.iterations = k
            if change < cfg.tol:
                state.converged = True
                break

    state.x = (PEAK * best).reshape(-1)
    state.w = w
    state.mult_w = nu
    image = Image(np.clip(PEAK * best, 0.0, PEAK))
    return image, state
