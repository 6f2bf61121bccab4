"""Exact GP regression with ARD stationary kernels.

Hyperparameters live in log space: ``theta = [log l_1, ..., log l_D,
log signal_variance, log noise_variance]``. The log marginal likelihood and
its gradient are computed from one Cholesky factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

RBF = "RBF"
MATERN32 = "Matern32"
MATERN52 = "Matern52"
FAMILIES = (RBF, MATERN32, MATERN52)

LENGTH_BOUNDS = (1e-3, 1e3)
SIGNAL_BOUNDS = (1e-4, 1e2)
NOISE_BOUNDS = (1e-6, 1.0)
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2 * math.pi)


class NumericalError(ArithmeticError):
    """The kernel matrix stayed indefinite after jitter escalation."""


@dataclass(frozen=True)
class KernelSpec:
    family: str
    length_scales: tuple[float, ...]
    signal_variance: float = 1.0
    noise_variance: float = 1e-6

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        object.__setattr__(self, "length_scales", tuple(float(v) for v in np.atleast_1d(self.length_scales)))
        if min(self.length_scales, default=1.0) <= 0:
            raise ValueError("length scales must be positive")
        if not self.signal_variance > 0:
            raise ValueError("signal variance must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def dim(self) -> int:
        return len(self.length_scales)

    @property
    def theta(self) -> np.ndarray:
        return np.log([*self.length_scales, self.signal_variance, self.noise_variance])

    @classmethod
    def from_theta(cls, family: str, theta: np.ndarray) -> KernelSpec:
        e = np.exp(theta)
        return cls(family, tuple(e[:-2]), float(e[-2]), float(e[-1]))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "length_scales": list(self.length_scales),
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }


def _sq_diffs(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (D, n1, n2)."""
    return (x1.T[:, :, None] - x2.T[:, None, :]) ** 2


def _shape(family: str, r2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-variance kernel k(r) and the factor g with dk/dlog(l_d) = g * q_d."""
    if family == RBF:
        k = np.exp(-0.5 * r2)
        return k, k
    r = np.sqrt(r2)
    if family == MATERN32:
        e = np.exp(-_SQRT3 * r)
        return (1.0 + _SQRT3 * r) * e, 3.0 * e
    e = np.exp(-_SQRT5 * r)
    return (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * e, (5.0 / 3.0) * (1.0 + _SQRT5 * r) * e


def _check_dims(spec: KernelSpec, *arrays: np.ndarray) -> None:
    for a in arrays:
        if a.shape[-1] != spec.dim:
            raise ValueError(f"input dimension {a.shape[-1]} != number of length scales {spec.dim}")


def kernel_matrix(spec: KernelSpec, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    _check_dims(spec, x1, x2)
    ls = np.asarray(spec.length_scales)
    a, b = x1 / ls, x2 / ls
    r2 = np.maximum((a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T, 0.0)
    return spec.signal_variance * _shape(spec.family, r2)[0]


def kernel_eval(spec: KernelSpec, x: np.ndarray, x_prime: np.ndarray) -> float:
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()
    if x.shape != x_prime.shape or x.size != spec.dim:
        raise ValueError("dimension mismatch between points and length scales")
    r2 = float((((x - x_prime) / np.asarray(spec.length_scales)) ** 2).sum())
    return float(spec.signal_variance * _shape(spec.family, np.array(r2))[0])


def kernel_gradient(spec: KernelSpec, x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kernel matrix and its derivatives w.r.t. ``log l_d``, shape (D, n1, n2).

    The derivative w.r.t. ``log signal_variance`` is the kernel matrix itself.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    _check_dims(spec, x1, x2)
    q = _sq_diffs(x1, x2) / np.asarray(spec.length_scales)[:, None, None] ** 2
    k, g = _shape(spec.family, q.sum(0))
    s = spec.signal_variance
    return s * k, s * g[None] * q


def _cholesky(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    for jitter in JITTERS:
        try:
            return linalg.cholesky(a + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise NumericalError("kernel matrix is not positive definite even with jitter 1e-6")


def _lml_grad(theta: np.ndarray, family: str, sqd: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    n = y.shape[0]
    dims = sqd.shape[0]
    ls2 = np.exp(2.0 * theta[:dims])
    s = math.exp(theta[dims])
    noise = math.exp(theta[dims + 1])
    q = sqd / ls2[:, None, None]
    k, g = _shape(family, q.sum(0))
    kmat = s * k
    chol = _cholesky(kmat + noise * np.eye(n))
    alpha = linalg.cho_solve((chol, True), y, check_finite=False)
    lml = -0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * _LOG_2PI
    kinv = linalg.cho_solve((chol, True), np.eye(n), check_finite=False)
    w = np.outer(alpha, alpha) - kinv
    grad = np.empty_like(theta)
    grad[:dims] = 0.5 * np.einsum("ij,dij->d", w * (s * g), q)
    grad[dims] = 0.5 * np.sum(w * kmat)
    grad[dims + 1] = 0.5 * noise * np.trace(w)
    return float(lml), grad


def log_marginal_likelihood(spec: KernelSpec, train_x: np.ndarray, train_y: np.ndarray) -> float:
    """Gaussian log evidence of ``train_y`` under a zero-mean GP with ``spec``."""
    x = np.atleast_2d(np.asarray(train_x, dtype=float))
    y = np.asarray(train_y, dtype=float).ravel()
    _check_dims(spec, x)
    n = y.shape[0]
    kmat = kernel_matrix(spec, x, x) + spec.noise_variance * np.eye(n)
    chol = _cholesky(kmat)
    alpha = linalg.cho_solve((chol, True), y, check_finite=False)
    return float(-0.5 * y @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * _LOG_2PI)


def lml_gradient(spec: KernelSpec, train_x: np.ndarray, train_y: np.ndarray) -> np.ndarray:
    """Gradient of the log marginal likelihood w.r.t. ``spec.theta``."""
    x = np.atleast_2d(np.asarray(train_x, dtype=float))
    _check_dims(spec, x)
    return _lml_grad(spec.theta, spec.family, _sq_diffs(x, x), np.asarray(train_y, dtype=float).ravel())[1]


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


@dataclass(frozen=True)
class GpModel:
    kernel: KernelSpec
    train_x: np.ndarray
    train_y: np.ndarray
    y_mean: float
    y_std: float
    chol: np.ndarray
    alpha: np.ndarray
    lml: float
    degenerate: bool = False
    starts: tuple[tuple[np.ndarray, float], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {**self.kernel.to_dict(), "lml": self.lml, "degenerate": self.degenerate, "n_train": len(self.train_y)}


def _bounds(dims: int) -> list[tuple[float, float]]:
    return [tuple(np.log(LENGTH_BOUNDS))] * dims + [tuple(np.log(SIGNAL_BOUNDS)), tuple(np.log(NOISE_BOUNDS))]


def default_kernel(family: str, dims: int) -> KernelSpec:
    return KernelSpec(family, (0.5,) * dims, 1.0, 1e-3)


def _random_start(rng: np.random.Generator, dims: int) -> np.ndarray:
    return np.concatenate(
        [
            rng.uniform(np.log(0.05), np.log(5.0), size=dims),
            rng.uniform(np.log(0.1), np.log(10.0), size=1),
            rng.uniform(np.log(1e-6), np.log(1e-1), size=1),
        ]
    )


def _build(kernel: KernelSpec, x: np.ndarray, ys: np.ndarray, y_mean: float, y_std: float, degenerate: bool, starts=()) -> GpModel:
    n = len(ys)
    chol = _cholesky(kernel_matrix(kernel, x, x) + kernel.noise_variance * np.eye(n))
    alpha = linalg.cho_solve((chol, True), ys, check_finite=False)
    lml = float(-0.5 * ys @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * _LOG_2PI)
    return GpModel(kernel, x, ys, y_mean, y_std, chol, alpha, lml, degenerate, tuple(starts))


def fit_gp(
    train_x: np.ndarray,
    train_y: np.ndarray,
    family: str = MATERN52,
    seed: int | np.random.Generator = 0,
    n_starts: int = 8,
    init: KernelSpec | None = None,
    maxiter: int = 200,
) -> GpModel:
    """Fit ARD hyperparameters by multi-start L-BFGS-B on the log evidence.

    Start 0 is ``init`` (or a default kernel); the rest are drawn from a
    central log-box with ``seed``. The best optimum wins, ties going to the
    lowest start index. Targets are standardized first; a constant target
    yields a flagged model with flat length scales.
    """
    x = np.atleast_2d(np.asarray(train_x, dtype=float))
    y = np.asarray(train_y, dtype=float).ravel()
    n, dims = x.shape
    if n < 1 or n != y.shape[0]:
        raise ValueError("need at least one training point and matching x/y lengths")
    if family not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    y_mean = float(y.mean())
    y_std = float(y.std())
    if n >= 2 and y_std <= 1e-12 * max(1.0, abs(y_mean)):
        kernel = KernelSpec(family, (1.0,) * dims, SIGNAL_BOUNDS[0], NOISE_BOUNDS[0])
        return _build(kernel, x, np.zeros(n), y_mean, 1.0, degenerate=True)
    if n == 1:
        kernel = init if init is not None else default_kernel(family, dims)
        return _build(kernel, x, np.zeros(1), y_mean, 1.0, degenerate=False)

    ys = (y - y_mean) / y_std
    sqd = _sq_diffs(x, x)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    first = (init if init is not None and init.family == family and init.dim == dims else default_kernel(family, dims)).theta
    bounds = _bounds(dims)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    inits = [np.clip(first, lo, hi)] + [_random_start(rng, dims) for _ in range(n_starts - 1)]

    def objective(theta):
        try:
            lml, grad = _lml_grad(theta, family, sqd, ys)
        except NumericalError:
            return 1e25, np.zeros_like(theta)
        return -lml, -grad

    best_theta, best_lml = None, -np.inf
    starts = []
    for theta0 in inits:
        f0, _ = objective(theta0)
        starts.append((theta0, -f0))
        res = optimize.minimize(objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter})
        cand = [(res.x, -float(res.fun)), (theta0, -f0)]
        for theta, lml in cand:
            if np.isfinite(lml) and lml > best_lml:
                best_theta, best_lml = np.array(theta), lml
    if best_theta is None:
        raise NumericalError("no multi-start produced a finite log marginal likelihood")
    kernel = KernelSpec.from_theta(family, best_theta)
    return _build(kernel, x, ys, y_mean, y_std, degenerate=False, starts=starts)


def predict(model: GpModel, x: np.ndarray) -> Posterior:
    """Posterior of the latent function at the rows of ``x`` (original y units)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _check_dims(model.kernel, x)
    ks = kernel_matrix(model.kernel, model.train_x, x)
    mean = ks.T @ model.alpha
    v = linalg.solve_triangular(model.chol, ks, lower=True, check_finite=False)
    var = np.maximum(model.kernel.signal_variance - (v * v).sum(0), 0.0)
    return Posterior(model.y_mean + model.y_std * mean, var * model.y_std**2)
