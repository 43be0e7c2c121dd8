"""Potentials and Langevin models for Gibbs-distribution sampling.

A Gibbs distribution pi(dx) proportional to exp(-U(x)) dx is targeted through
the overdamped Langevin diffusion

    dX_t = -sigma0^2 grad U(X_t) dt + sqrt(2) sigma0 dB_t,

which admits pi as its unique invariant law for any sigma0 > 0.  This module
defines the potential interface (value, gradient, curvature constants), the
two built-in benchmark potentials (isotropic quadratic, and a quadratic
perturbed by a Bayesian logistic-regression likelihood), and the
``LangevinModel`` wrapper holding the induced drift and noise scale.

All value/gradient callables accept a single point of shape ``(d,)`` or a
batch of points of shape ``(..., d)`` and act along the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Potential",
    "QuadraticPotential",
    "LogisticPerturbedPotential",
    "LangevinModel",
    "make_langevin_model",
    "logistic_covariate",
    "ou_reference_value",
]


class Potential:
    """Strongly convex potential U with known curvature constants.

    Subclasses implement :meth:`eval` and :meth:`grad` and must set the
    attributes below.  Built-in potentials hard-code their constants; user
    potentials must supply constants explicitly (no automatic estimation is
    attempted).

    Attributes:
        dim: Dimension d of the state space.
        alpha_u: Strong-convexity constant (lower bound on the Hessian
            spectrum), stored already clipped at 1: ``alpha_u = min(lam_min, 1)``.
            Callers never re-clip.
        l_u: Lipschitz constant of ``grad`` (upper bound on the Hessian
            spectrum).
        third_deriv_ok: True when U is C^3 with third derivatives bounded
            compatibly with ``(alpha_u, l_u, dim)``; both built-ins qualify.
        grad_u1_sup: Sup-norm bound on the gradient of the non-quadratic part
            when U decomposes as ``U(x) = U1(x) + lam*|x|^2/2``, or None when
            no such decomposition is declared.  Consumed by the
            aggressive-step tuning rule.
    """

    dim: int
    alpha_u: float
    l_u: float
    third_deriv_ok: bool = False
    grad_u1_sup: float | None = None

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Return U(x); shape ``(..., d)`` maps to shape ``(...,)``."""
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Return grad U(x), same shape as ``x``."""
        raise NotImplementedError

    def _check_constants(self) -> None:
        if not (0.0 < self.alpha_u <= self.l_u):
            raise ValueError(
                f"potential constants must satisfy 0 < alpha_u <= l_u, "
                f"got alpha_u={self.alpha_u}, l_u={self.l_u}"
            )


class QuadraticPotential(Potential):
    """Isotropic quadratic potential U(x) = |x|^2 / 2.

    The induced diffusion (with sigma0 = 1) is the Ornstein-Uhlenbeck process
    dX_t = -X_t dt + sqrt(2) dB_t, whose invariant law is the standard
    d-dimensional Gaussian.  Both curvature constants equal 1, and the
    potential is trivially of the composite form U1 + |x|^2/2 with U1 = 0.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim}")
        self.dim = int(dim)
        self.alpha_u = 1.0
        self.l_u = 1.0
        self.third_deriv_ok = True
        self.grad_u1_sup = 0.0
        self._check_constants()

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float).copy()


class LogisticPerturbedPotential(Potential):
    """Bayesian logistic-regression posterior potential.

    U(beta) = log(1 + exp(x . beta)) + lam * |beta|^2 / 2 for a fixed
    covariate vector x and ridge weight lam > 0.  The log-likelihood part has
    Hessian ``x x^T / ((1+e^u)(1+e^{-u}))`` with u = x . beta, so the full
    Hessian spectrum lies in ``[lam, lam + |x|^2/5]`` using the envelope
    (1+e^u)(1+e^{-u}) >= 5, giving

        alpha_u = min(lam, 1),    l_u = lam + |x|^2 / 5.

    The non-quadratic part has ``|grad U1| <= |x|`` everywhere, recorded in
    ``grad_u1_sup`` for the aggressive-step tuning rule.
    """

    def __init__(self, dim: int, lam: float, covariate: np.ndarray):
        if dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim}")
        if lam <= 0:
            raise ValueError(f"lam must be positive, got {lam}")
        covariate = np.asarray(covariate, dtype=float)
        if covariate.shape != (dim,):
            raise ValueError(
                f"covariate must have shape ({dim},), got {covariate.shape}"
            )
        self.dim = int(dim)
        self.lam = float(lam)
        self.covariate = covariate
        norm_sq = float(np.dot(covariate, covariate))
        self.alpha_u = min(self.lam, 1.0)
        self.l_u = self.lam + norm_sq / 5.0
        self.third_deriv_ok = True
        self.grad_u1_sup = math.sqrt(norm_sq)
        self._check_constants()

    def eval(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.sum(x * self.covariate, axis=-1)
        return np.logaddexp(0.0, t) + 0.5 * self.lam * np.sum(x * x, axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.sum(x * self.covariate, axis=-1)
        # numerically stable sigmoid(t) = 1/(1+e^{-t})
        e = np.exp(-np.abs(t))
        sig = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return sig[..., None] * self.covariate + self.lam * x


@dataclass(frozen=True)
class LangevinModel:
    """Langevin diffusion model induced by a potential and a scale sigma0.

    The simulated dynamics are dX = -sigma0^2 grad U(X) dt + sqrt(2) sigma0 dB,
    i.e. drift ``b(x) = -sigma0^2 grad U(x)`` and additive noise with scale
    ``sqrt(2) sigma0``.  The effective curvature constants of the drift are
    ``alpha_eff = sigma0^2 alpha_u`` and ``l_eff = sigma0^2 l_u``.

    Immutable after construction; safe to share across concurrent workers.
    """

    potential: Potential
    sigma0: float
    noise_scale: float
    alpha_eff: float
    l_eff: float

    @property
    def dim(self) -> int:
        return self.potential.dim

    def drift(self, x: np.ndarray) -> np.ndarray:
        """Drift b(x) = -sigma0^2 grad U(x), acting along the last axis."""
        return (-self.sigma0 ** 2) * self.potential.grad(x)


def make_langevin_model(
    potential: Potential,
    sigma0_mode: str = "auto",
    sigma0: float | None = None,
) -> LangevinModel:
    """Build a LangevinModel, choosing sigma0 automatically or explicitly.

    In ``auto`` mode, sigma0 = sqrt(alpha_u) / l_u, which normalizes the
    effective constants so that alpha_eff / l_eff^2 = 1; this is the scaling
    under which the base step gamma0 = 1/2 is admissible for the tuned plans.
    In ``explicit`` mode the given sigma0 is used and the effective constants
    are recomputed accordingly.

    Args:
        potential: Potential with valid constants (0 < alpha_u <= l_u).
        sigma0_mode: Either ``"auto"`` or ``"explicit"``.
        sigma0: Required positive scale when mode is ``"explicit"``.

    Returns:
        The immutable LangevinModel.

    Raises:
        ValueError: On invalid constants, unknown mode, or nonpositive sigma0.
    """
    potential._check_constants()
    if sigma0_mode == "auto":
        if sigma0 is not None:
            raise ValueError("sigma0 must not be given in auto mode")
        s0 = math.sqrt(potential.alpha_u) / potential.l_u
    elif sigma0_mode == "explicit":
        if sigma0 is None:
            raise ValueError("explicit mode requires a sigma0 value")
        s0 = float(sigma0)
        if s0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {sigma0}")
    else:
        raise ValueError(f"unknown sigma0_mode: {sigma0_mode!r}")
    s0sq = s0 * s0
    return LangevinModel(
        potential=potential,
        sigma0=s0,
        noise_scale=math.sqrt(2.0) * s0,
        alpha_eff=s0sq * potential.alpha_u,
        l_eff=s0sq * potential.l_u,
    )


def logistic_covariate(d: int, a: float, rng_stream) -> np.ndarray:
    """Draw the normalized covariate x = sqrt(5a) Z / |Z|, Z ~ N(0, I_d).

    The renormalization makes |x|^2 = 5a exactly, so the logistic potential's
    smoothness constant is l_u = lam + a regardless of dimension.

    Args:
        d: Dimension (>= 1).
        a: Positive scale parameter; the covariate gets squared norm 5a.
        rng_stream: Any object with a ``standard_normal(shape)`` method
            (e.g. ``mlangevin.sde.NoiseStream`` or ``numpy.random.Generator``).

    Returns:
        Covariate vector of shape (d,).
    """
    if d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if a <= 0:
        raise ValueError(f"a must be positive, got {a}")
    z = np.asarray(rng_stream.standard_normal(d), dtype=float)
    norm = float(np.linalg.norm(z))
    while norm == 0.0:  # probability-zero degenerate draw: retry
        z = np.asarray(rng_stream.standard_normal(d), dtype=float)
        norm = float(np.linalg.norm(z))
    return math.sqrt(5.0 * a) / norm * z


def ou_reference_value(d: int) -> float:
    """Exact value of E|Z| for Z ~ N(0, I_d) with d = 2k even.

    Uses the closed form E|Z| = (2k)! sqrt(2 pi) / (2^{2k} k! (k-1)!),
    evaluated in log-gamma arithmetic to avoid overflow for large d.  This is
    the reference value of the norm observable under the standard Gaussian,
    the invariant law of the Ornstein-Uhlenbeck benchmark.

    Args:
        d: Even positive dimension.

    Returns:
        E|Z| as a float.

    Raises:
        ValueError: If d is odd or not positive (the closed form used here
            only covers even dimensions).
    """
    if d < 2 or d % 2 != 0:
        raise ValueError(f"d must be an even positive integer, got {d}")
    k = d // 2
    log_val = (
        math.lgamma(2 * k + 1)
        + 0.5 * math.log(2.0 * math.pi)
        - 2 * k * math.log(2.0)
        - math.lgamma(k + 1)
        - math.lgamma(k)
    )
    return math.exp(log_val)
