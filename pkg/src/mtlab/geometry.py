"""Model spaces, stationary measures, curvature operators and one-step kinematics.

All diffusions run on the half-speed clock: X has generator L/2 where
L = Laplacian - grad(phi).grad, so a flat chart moves by sqrt(dt)*noise and the
drift is -grad(phi)/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

TWO_PI = 2.0 * math.pi

KINDS = ("torus", "gauss", "quartic", "sphere")
SPACE_KEYS = ("torus1", "torus2", "gauss1", "gauss2", "quartic1", "sphere2")

# integer codes shared with the kernels
KIND_CODE = {"torus": 0, "gauss": 1, "quartic": 2, "sphere": 3}


class ConfigurationError(ValueError):
    """Invalid space key, parameter or experiment setting."""


class SimulationFault(RuntimeError):
    """A stepper produced a non-finite state, or a sampler ran out of retries."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class ModelSpace:
    kind: str
    dim: int
    alpha: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown space kind {self.kind!r}")
        if self.kind == "torus" and self.dim not in (1, 2):
            raise ConfigurationError("torus dimension must be 1 or 2")
        if self.kind == "gauss":
            if self.dim not in (1, 2):
                raise ConfigurationError("gaussian dimension must be 1 or 2")
            if len(self.alpha) != self.dim or min(self.alpha) <= 0:
                raise ConfigurationError(
                    f"gaussian rates must be {self.dim} positive numbers, got {self.alpha}")
        if self.kind == "quartic" and self.dim != 1:
            raise ConfigurationError("quartic space is one-dimensional")
        if self.kind == "sphere" and self.dim != 2:
            raise ConfigurationError("sphere space is two-dimensional")

    @property
    def key(self) -> str:
        return {"torus": "torus", "gauss": "gauss", "quartic": "quartic",
                "sphere": "sphere"}[self.kind] + str(self.dim)

    @property
    def ambient_dim(self) -> int:
        return 3 if self.kind == "sphere" else self.dim

    @property
    def code(self) -> int:
        return KIND_CODE[self.kind]

    @property
    def rates(self) -> np.ndarray:
        """Diagonal of A for the Ornstein-Uhlenbeck spaces, padded to length 2."""
        out = np.ones(2)
        if self.kind == "gauss":
            out[: self.dim] = self.alpha
        return out

    @cached_property
    def normalization(self) -> float:
        """Integral of exp(-phi) dv over the space (the constant that makes mu a probability)."""
        if self.kind == "torus":
            return TWO_PI ** self.dim
        if self.kind == "gauss":
            return float(np.prod([math.sqrt(TWO_PI / a) for a in self.alpha]))
        if self.kind == "quartic":
            val, _ = integrate.quad(lambda x: math.exp(-0.25 * x**4), -8.0, 8.0,
                                    epsabs=1e-14, epsrel=1e-13, limit=200)
            return val
        return 4.0 * math.pi

    @property
    def mixing_rate(self) -> float:
        """Lower bound on both the curvature term and the (half-clock) spectral gap.

        Zero for the flat torus, where nothing decays.
        """
        if self.kind == "torus":
            return 0.0
        if self.kind == "gauss":
            return 0.5 * min(self.alpha)
        if self.kind == "quartic":
            return 0.5
        return 0.5

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gauss":
            a = np.asarray(self.alpha)
            return 0.5 * np.sum(a * x**2, axis=-1)
        if self.kind == "quartic":
            return 0.25 * x[..., 0] ** 4
        return np.zeros(x.shape[:-1])

    def density(self, x):
        """Density of the normalized stationary measure w.r.t. the Riemannian volume."""
        return np.exp(-self.potential(x)) / self.normalization

    def drift_gradient(self, x):
        """grad(phi) at chart coordinates x (shape (..., dim))."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gauss":
            return np.asarray(self.alpha) * x
        if self.kind == "quartic":
            return x**3
        return np.zeros_like(x)


def parse_space(key: str, covariance: str | None = None) -> ModelSpace:
    """Build a space from its selection key.

    ``covariance`` is the comma-separated diagonal of A for the Gaussian spaces.
    """
    if key not in SPACE_KEYS:
        raise ConfigurationError(f"unknown space key {key!r}; expected one of {', '.join(SPACE_KEYS)}")
    kind, dim = key[:-1], int(key[-1])
    if kind == "gauss":
        if covariance is None:
            alpha = (1.0,) * dim
        else:
            try:
                alpha = tuple(float(v) for v in str(covariance).split(","))
            except ValueError as exc:
                raise ConfigurationError(f"bad covariance diagonal {covariance!r}") from exc
        return ModelSpace("gauss", dim, alpha)
    if covariance is not None:
        raise ConfigurationError(f"space {key} takes no covariance")
    return ModelSpace(kind, dim)


@dataclass
class PointFrame:
    """A point with an orthonormal tangent frame.

    ``frame`` has one row per tangent direction, in ambient coordinates.
    """

    position: np.ndarray
    frame: np.ndarray = field(default=None)

    def copy(self) -> "PointFrame":
        return PointFrame(self.position.copy(), self.frame.copy())


def reference_frame(space: ModelSpace, position) -> np.ndarray:
    if space.kind != "sphere":
        return np.eye(space.dim)
    p = np.asarray(position, dtype=float)
    # project the axis least aligned with p
    axis = np.eye(3)[int(np.argmin(np.abs(p)))]
    e1 = axis - p * (axis @ p)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return np.stack([e1, e2])


def sample_quartic(rng: np.random.Generator, max_tries: int = 10**6) -> float:
    # Gaussian proposal: exp(-x^4/4) <= exp(1/4) exp(-x^2/2)
    for _ in range(max_tries):
        x = rng.standard_normal()
        if rng.random() < math.exp(-0.25 * x**4 + 0.5 * x * x - 0.25):
            return x
    raise SimulationFault("quartic rejection sampler exceeded retry cap")


def sample_stationary(space: ModelSpace, rng: np.random.Generator) -> PointFrame:
    if space.kind == "torus":
        pos = rng.uniform(0.0, TWO_PI, size=space.dim)
    elif space.kind == "gauss":
        pos = rng.standard_normal(space.dim) / np.sqrt(space.alpha)
    elif space.kind == "quartic":
        pos = np.array([sample_quartic(rng)])
    else:
        v = rng.standard_normal(3)
        pos = v / np.linalg.norm(v)
    return PointFrame(pos, reference_frame(space, pos))


def curvature_action(space: ModelSpace, p: PointFrame) -> np.ndarray:
    """Ric + Hess(phi) at p, in the frame at p."""
    if space.kind == "torus":
        return np.zeros((space.dim, space.dim))
    if space.kind == "gauss":
        return np.diag(np.asarray(space.alpha, dtype=float))
    if space.kind == "quartic":
        return np.array([[3.0 * float(p.position[0]) ** 2]])
    return np.eye(2)


def rotate(v, axis, angle):
    """Rodrigues rotation of v about the unit vector ``axis``."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1.0 - c)


def gram_schmidt(p, frame):
    e1 = frame[0] - p * (p @ frame[0])
    e1 /= np.linalg.norm(e1)
    e2 = frame[1] - p * (p @ frame[1]) - e1 * (e1 @ frame[1])
    e2 /= np.linalg.norm(e2)
    return np.stack([e1, e2])


def step_diffusion(space: ModelSpace, state: PointFrame, dt: float, noise) -> PointFrame:
    """One Euler (flat charts) or geodesic (sphere) step of the half-speed diffusion."""
    noise = np.asarray(noise, dtype=float)
    if space.kind == "sphere":
        p = state.position
        v = state.frame.T @ noise * math.sqrt(dt)
        length = float(np.linalg.norm(v))
        if length == 0.0:
            out = state.copy()
        else:
            u = v / length
            axis = np.cross(p, u)
            newp = rotate(p, axis, length)
            newp /= np.linalg.norm(newp)
            frame = np.stack([rotate(e, axis, length) for e in state.frame])
            out = PointFrame(newp, gram_schmidt(newp, frame))
    else:
        x = state.position
        x = x + math.sqrt(dt) * noise - 0.5 * dt * space.drift_gradient(x)
        if space.kind == "torus":
            x = np.mod(x, TWO_PI)
            # mod of a tiny negative rounds up to exactly 2 pi
            x[x >= TWO_PI] = 0.0
        out = PointFrame(x, state.frame.copy())
    if not (np.all(np.isfinite(out.position)) and np.all(np.isfinite(out.frame))):
        raise SimulationFault("non-finite state after diffusion step", state=state)
    return out


def holonomy_angle(frame_before, frame_after, position) -> float:
    """Signed rotation angle taking frame_before[0] to frame_after[0] in the tangent plane at position."""
    e1, e2 = frame_before
    f1 = frame_after[0]
    return math.atan2(float(f1 @ e2), float(f1 @ e1))
