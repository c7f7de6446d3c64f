"""Analytic two-player zero-sum testbeds with exact gradient oracles.

Every problem here is affine in the joint variable: the joint vector field
v(omega) = (grad_theta of the min player's loss, grad_phi of the max player's
own loss) satisfies v(omega) = J (omega - omega*) with a constant Jacobian J.
That makes closed-form optima, exact operator Jacobians and spectral analysis
possible, which is the whole point of these testbeds.

Sign convention: the max player's "own loss" is -L, so both players are
written as descending their own loss. All optimizers build on that convention
and never flip signs themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Sentinel for "use all samples" in finite-sum problems. Non-finite-sum
# problems only accept FULL.
FULL = None


@dataclass
class JointPoint:
    """Concatenated iterate of both players."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(-1)
        self.phi = np.asarray(self.phi, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.phi))):
            raise ValueError("JointPoint entries must be finite")

    @property
    def concat(self) -> np.ndarray:
        return np.concatenate([self.theta, self.phi])

    @classmethod
    def from_concat(cls, omega: np.ndarray, d_theta: int) -> "JointPoint":
        omega = np.asarray(omega, dtype=np.float64).reshape(-1)
        return cls(omega[:d_theta].copy(), omega[d_theta:].copy())

    def copy(self) -> "JointPoint":
        return JointPoint(self.theta.copy(), self.phi.copy())


def _check_dims(problem, point: JointPoint):
    if point.theta.shape[0] != problem.d_theta or point.phi.shape[0] != problem.d_phi:
        raise ValueError(
            f"point dims ({point.theta.shape[0]}, {point.phi.shape[0]}) do not match "
            f"problem dims ({problem.d_theta}, {problem.d_phi})"
        )


class GameProblem:
    """Base class: per-player gradient oracles plus exact affine structure."""

    d_theta: int
    d_phi: int
    #: number of samples for finite-sum problems, None otherwise
    n_samples = None

    @property
    def is_finite_sum(self) -> bool:
        return self.n_samples is not None

    @property
    def dim(self) -> int:
        return self.d_theta + self.d_phi

    def player_gradients(self, point: JointPoint, batch=FULL):
        """Own-loss gradients (g_theta, g_phi) over a batch (FULL = all samples)."""
        raise NotImplementedError

    def jvf(self, point: JointPoint, batch=FULL) -> np.ndarray:
        """Joint vector field: concatenation of both own-loss gradients."""
        g_theta, g_phi = self.player_gradients(point, batch)
        return np.concatenate([g_theta, g_phi])

    def jvf_jacobian(self) -> np.ndarray:
        """Constant Jacobian of the (full-batch) joint vector field."""
        raise NotImplementedError

    def optimum(self) -> JointPoint:
        raise NotImplementedError

    def distance_to_opt(self, point: JointPoint) -> float:
        _check_dims(self, point)
        opt = self.optimum()
        return float(
            np.sqrt(
                np.sum((point.theta - opt.theta) ** 2)
                + np.sum((point.phi - opt.phi) ** 2)
            )
        )

    def _reject_batch(self, batch):
        if batch is not FULL:
            raise ValueError(f"{type(self).__name__} is not a finite-sum problem")


class Bilinear2D(GameProblem):
    """min_x max_y x*y. Optimum at the origin; pure rotation field."""

    d_theta = 1
    d_phi = 1

    def player_gradients(self, point, batch=FULL):
        self._reject_batch(batch)
        _check_dims(self, point)
        x, y = point.theta, point.phi
        return y.copy(), -x.copy()

    def jvf_jacobian(self):
        return np.array([[0.0, 1.0], [-1.0, 0.0]])

    def optimum(self):
        return JointPoint(np.zeros(1), np.zeros(1))


@dataclass
class Quadratic2D(GameProblem):
    """min_x max_y a*x^2 + b*x*y + c*y^2 with constant curvature."""

    a: float
    b: float
    c: float
    d_theta: int = field(default=1, init=False)
    d_phi: int = field(default=1, init=False)

    def player_gradients(self, point, batch=FULL):
        self._reject_batch(batch)
        _check_dims(self, point)
        x, y = point.theta, point.phi
        g_x = 2.0 * self.a * x + self.b * y
        g_y = -(self.b * x + 2.0 * self.c * y)
        return g_x, g_y

    def jvf_jacobian(self):
        return np.array(
            [[2.0 * self.a, self.b], [-self.b, -2.0 * self.c]]
        )

    def optimum(self):
        return JointPoint(np.zeros(1), np.zeros(1))


# The two quadratic saddle problems used throughout the test suite.
def quadratic_qp1() -> Quadratic2D:
    return Quadratic2D(-3.0, 4.0, -1.0)


def quadratic_qp2() -> Quadratic2D:
    return Quadratic2D(1.0, 5.0, -1.0)


class StochasticBilinear(GameProblem):
    """Finite-sum bilinear game with one-hot per-sample coupling.

    Sample i contributes b_i^T theta + theta^T A_i phi + c_i^T phi, where A_i
    has a single 1 at (i, i). The sample mean of the A_i is therefore
    (1/d) * Identity, and per-sample gradients deviate strongly from the mean:
    the problem is deliberately high-variance. Batch gradients are sample
    means. A_i is never materialized; batch coupling only ever touches the
    sampled coordinates.
    """

    def __init__(self, n: int, d: int, seed: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        if n != d:
            raise ValueError("the one-hot coupling only has full-rank mean when n = d")
        self.n = int(n)
        self.d = int(d)
        self.seed = int(seed)
        self.d_theta = self.d
        self.d_phi = self.d
        self.n_samples = self.n
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(self.seed)))
        scale = 1.0 / np.sqrt(d)
        self.b = rng.standard_normal((n, d)) * scale
        self.c = rng.standard_normal((n, d)) * scale
        self.b_mean = self.b.mean(axis=0)
        self.c_mean = self.c.mean(axis=0)

    def _validate_batch(self, batch) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.intp).reshape(-1)
        if batch.size == 0:
            raise ValueError("empty batch")
        if batch.min() < 0 or batch.max() >= self.n:
            raise ValueError("batch index out of range")
        return batch

    def player_gradients(self, point, batch=FULL):
        _check_dims(self, point)
        theta, phi = point.theta, point.phi
        if batch is FULL:
            g_theta = self.b_mean + phi / self.d
            g_phi = -(theta / self.d + self.c_mean)
            return g_theta, g_phi
        batch = self._validate_batch(batch)
        inv = 1.0 / batch.size
        g_theta = self.b[batch].mean(axis=0)
        g_theta[batch] += phi[batch] * inv
        g_phi = -self.c[batch].mean(axis=0)
        g_phi[batch] -= theta[batch] * inv
        return g_theta, g_phi

    def jvf_jacobian(self):
        d = self.d
        jac = np.zeros((2 * d, 2 * d))
        coupling = np.eye(d) / d
        jac[:d, d:] = coupling
        jac[d:, :d] = -coupling
        return jac

    def optimum(self):
        # Stationarity of the mean loss: b_mean + (1/d) phi = 0 and symmetric.
        return JointPoint(-self.d * self.c_mean, -self.d * self.b_mean)


def make_stochastic_bilinear(n: int, d: int, seed: int) -> StochasticBilinear:
    """Build the finite-sum bilinear testbed; regeneration from the same seed
    is bit-identical."""
    return StochasticBilinear(n, d, seed)


class EpochSampler:
    """Without-replacement minibatch stream.

    Indices are drawn from repeated random permutations of range(n). When the
    batch size divides n, each epoch covers every index exactly once. When it
    does not, batches may straddle permutation boundaries; indices are still
    unique within each batch (duplicates from the incoming permutation are
    deferred to later batches).
    """

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        if not (1 <= batch_size <= n):
            raise ValueError("batch size must be in [1, n]")
        self.n = int(n)
        self.batch_size = int(batch_size)
        self._rng = rng
        self._pending: list[int] = []

    def next_batch(self) -> np.ndarray:
        while len(self._pending) < self.batch_size:
            self._pending.extend(self._rng.permutation(self.n).tolist())
        batch: list[int] = []
        taken = set()
        pos = 0
        while len(batch) < self.batch_size:
            if pos >= len(self._pending):
                self._pending.extend(self._rng.permutation(self.n).tolist())
            idx = self._pending[pos]
            if idx in taken:
                pos += 1
                continue
            batch.append(idx)
            taken.add(idx)
            del self._pending[pos]
        return np.asarray(batch, dtype=np.intp)

    def stream(self, num_batches: int) -> np.ndarray:
        """Pre-draw num_batches batches as a (num_batches, batch_size) array."""
        out = np.empty((num_batches, self.batch_size), dtype=np.intp)
        for t in range(num_batches):
            out[t] = self.next_batch()
        return out
