"""State-space model definitions.

All five models share a scalar latent AR(1) chain.  For the trended
variants the deterministic trend is absorbed into the latent coordinate
(z = x + trend), which leaves the transition kernel trend-free and the
initial mean shifted; the observed process is unchanged.  Working in the
shifted coordinate is what makes a fixed-dimension sufficient-statistic
representation of the joint log-density possible for every model here.

Each model exposes:

* ``simulate`` -- draw a latent/observed path,
* ``init_stats`` / ``update_stats`` -- additive per-particle accumulators,
* ``log_joint`` / ``grad_log_joint`` -- closed-form evaluation of
  log p(x_{0:t}, y_{0:t}) and its parameter gradient from the accumulators,
* ``propose_initial`` / ``propose`` -- proposal draws with incremental
  log-weights (bootstrap everywhere; optimal for the linear-Gaussian models).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

LOG2PI = np.log(2.0 * np.pi)


class InvalidParameterError(ValueError):
    """Raised when a parameter vector violates the model's domain."""


@dataclass(frozen=True)
class Parameter:
    """Named real parameter vector."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or len(self.values) != len(self.names):
            raise ValueError("parameter values/names length mismatch")

    @property
    def p(self) -> int:
        return len(self.names)

    def replace(self, values) -> "Parameter":
        return Parameter(np.asarray(values, dtype=float), self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def __repr__(self):
        body = ", ".join(f"{n}={v:.6g}" for n, v in zip(self.names, self.values))
        return f"Parameter({body})"


@dataclass
class Series:
    """Observed series y_{0:T} with optional latent truth.

    For trended models the stored latent path is in the shifted coordinate
    that absorbs the deterministic trend.
    """

    y: np.ndarray
    x: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 1 or len(self.y) < 1:
            raise ValueError("series must hold at least one observation")
        if self.x is not None:
            self.x = np.asarray(self.x, dtype=float)
            if self.x.shape != self.y.shape:
                raise ValueError("latent/observed length mismatch")

    @property
    def T(self) -> int:
        """Last time index (length is T + 1)."""
        return len(self.y) - 1


def save_series(path, series: Series) -> None:
    """Write a series as CSV with header ``t,y[,x]``."""
    with open(path, "w") as fh:
        if series.x is None:
            fh.write("t,y\n")
            for t, y in enumerate(series.y):
                fh.write(f"{t},{float(y)!r}\n")
        else:
            fh.write("t,y,x\n")
            for t, (y, x) in enumerate(zip(series.y, series.x)):
                fh.write(f"{t},{float(y)!r},{float(x)!r}\n")


def load_series(path) -> Series:
    """Read a ``t,y[,x]`` CSV written by :func:`save_series` (or by hand)."""
    with open(path) as fh:
        header = fh.readline().strip().lower().split(",")
        if header[:2] != ["t", "y"]:
            raise ValueError(f"expected header 't,y[,x]', got {header}")
        has_x = len(header) > 2 and header[2] == "x"
        ys, xs = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            ys.append(float(parts[1]))
            if has_x:
                xs.append(float(parts[2]))
    return Series(np.array(ys), np.array(xs) if has_x else None)


class StateSpaceModel:
    """Common interface; subclasses fill in the density arithmetic."""

    model_id: str = ""
    param_names: tuple = ()
    stat_dim: int = 0
    linear_gaussian: bool = False

    def __init__(self, proposal: str = "bootstrap"):
        if proposal not in ("bootstrap", "optimal"):
            raise ValueError(f"unknown proposal kind {proposal!r}")
        if proposal == "optimal" and not self.linear_gaussian:
            raise InvalidParameterError(
                f"optimal proposal unavailable for model {self.model_id!r}"
            )
        self.proposal = proposal

    @property
    def p(self) -> int:
        return len(self.param_names)

    def parameter(self, values) -> Parameter:
        return Parameter(np.asarray(values, dtype=float), self.param_names)

    def is_valid(self, theta: Parameter) -> bool:
        try:
            self.validate(theta)
            return True
        except InvalidParameterError:
            return False

    def validate(self, theta: Parameter) -> None:
        raise NotImplementedError

    # -- simulation / densities ------------------------------------------

    def simulate(self, theta, T, rng) -> Series:
        raise NotImplementedError

    def init_stats(self, x0, y0) -> np.ndarray:
        raise NotImplementedError

    def update_stats(self, stats, x_prev, x_new, y_new) -> np.ndarray:
        raise NotImplementedError

    def log_joint(self, theta, stats) -> np.ndarray:
        raise NotImplementedError

    def grad_log_joint(self, theta, stats) -> np.ndarray:
        raise NotImplementedError

    def propose_initial(self, theta, y0, N, rng):
        raise NotImplementedError

    def propose(self, theta, x_prev, y_new, t, rng):
        raise NotImplementedError


class _ARLatentModel(StateSpaceModel):
    """Stationary scalar AR(1) latent chain with constant initial mean."""

    init_mean: float = 0.0

    def validate(self, theta: Parameter) -> None:
        phi, sx = theta["phi"], theta["sigma_x"]
        if not np.all(np.isfinite(theta.values)):
            raise InvalidParameterError(f"non-finite parameter: {theta}")
        if abs(phi) >= 1.0:
            raise InvalidParameterError(
                f"|phi| must be < 1 for stationary initialization, got {phi}"
            )
        if sx <= 0.0:
            raise InvalidParameterError(f"sigma_x must be > 0, got {sx}")
        if "sigma_y" in theta.names and theta["sigma_y"] <= 0.0:
            raise InvalidParameterError(
                f"sigma_y must be > 0, got {theta['sigma_y']}"
            )

    def _stationary_var(self, theta) -> float:
        phi, sx = theta["phi"], theta["sigma_x"]
        return sx * sx / (1.0 - phi * phi)

    def _simulate_latent(self, theta, T, rng) -> np.ndarray:
        self.validate(theta)
        phi, sx = theta["phi"], theta["sigma_x"]
        z = np.empty(T + 1)
        z[0] = self.init_mean + np.sqrt(self._stationary_var(theta)) * rng.standard_normal()
        for t in range(1, T + 1):
            z[t] = phi * z[t - 1] + sx * rng.standard_normal()
        return z

    def log_obs(self, theta, x, y) -> np.ndarray:
        raise NotImplementedError

    def sample_obs(self, theta, x, rng) -> np.ndarray:
        raise NotImplementedError

    def simulate(self, theta, T, rng) -> Series:
        if T < 0:
            raise ValueError("T must be >= 0")
        z = self._simulate_latent(theta, T, rng)
        y = self.sample_obs(theta, z, rng)
        return Series(y=y, x=z)

    # Latent part of the joint and its gradient, shared across subclasses.
    # Stats layout prefix: [n, z0, z0^2, S1, S2, S3, ...] where
    # S1 = sum z_{j-1}^2, S2 = sum z_{j-1} z_j, S3 = sum z_j^2 over the
    # n transitions.

    def _latent_log_joint(self, theta, stats):
        phi, sx = theta["phi"], theta["sigma_x"]
        n, z0, z02, S1, S2, S3 = (stats[..., i] for i in range(6))
        m = self.init_mean
        tau2 = self._stationary_var(theta)
        z0c2 = z02 - 2.0 * m * z0 + m * m
        Q = S3 - 2.0 * phi * S2 + phi * phi * S1
        return (
            -0.5 * (LOG2PI + np.log(tau2))
            - z0c2 / (2.0 * tau2)
            - 0.5 * n * (LOG2PI + 2.0 * np.log(sx))
            - Q / (2.0 * sx * sx)
        )

    def _latent_grad(self, theta, stats):
        phi, sx = theta["phi"], theta["sigma_x"]
        n, z0, z02, S1, S2, S3 = (stats[..., i] for i in range(6))
        m = self.init_mean
        z0c2 = z02 - 2.0 * m * z0 + m * m
        Q = S3 - 2.0 * phi * S2 + phi * phi * S1
        sx2 = sx * sx
        dphi = -phi / (1.0 - phi * phi) + z0c2 * phi / sx2 + (S2 - phi * S1) / sx2
        dsx = -(n + 1.0) / sx + (z0c2 * (1.0 - phi * phi) + Q) / sx**3
        return dphi, dsx

    def propose_initial(self, theta, y0, N, rng):
        self.validate(theta)
        tau2 = self._stationary_var(theta)
        z0 = self.init_mean + np.sqrt(tau2) * rng.standard_normal(N)
        return z0, self.log_obs(theta, z0, y0)

    def propose(self, theta, x_prev, y_new, t, rng):
        phi, sx = theta["phi"], theta["sigma_x"]
        x_prev = np.asarray(x_prev, dtype=float)
        x_new = phi * x_prev + sx * rng.standard_normal(x_prev.shape)
        return x_new, self.log_obs(theta, x_new, y_new)


def _log_normal_pdf(y, mean, var):
    return -0.5 * (LOG2PI + np.log(var)) - (y - mean) ** 2 / (2.0 * var)


class AR1Model(_ARLatentModel):
    """AR(1) latent chain observed with additive Gaussian noise."""

    model_id = "ar1"
    param_names = ("phi", "sigma_x", "sigma_y")
    stat_dim = 7
    linear_gaussian = True
    init_mean = 0.0

    def log_obs(self, theta, x, y):
        sy = theta["sigma_y"]
        return _log_normal_pdf(y, x, sy * sy)

    def sample_obs(self, theta, x, rng):
        return x + theta["sigma_y"] * rng.standard_normal(x.shape)

    def init_stats(self, x0, y0):
        x0 = np.asarray(x0, dtype=float)
        s = np.zeros(x0.shape + (self.stat_dim,))
        s[..., 1] = x0
        s[..., 2] = x0 * x0
        s[..., 6] = (y0 - x0) ** 2
        return s

    def update_stats(self, stats, x_prev, x_new, y_new):
        out = stats.copy()
        out[..., 0] += 1.0
        out[..., 3] += x_prev * x_prev
        out[..., 4] += x_prev * x_new
        out[..., 5] += x_new * x_new
        out[..., 6] += (y_new - x_new) ** 2
        return out

    def log_joint(self, theta, stats):
        self.validate(theta)
        sy = theta["sigma_y"]
        n, R = stats[..., 0], stats[..., 6]
        obs = -0.5 * (n + 1.0) * (LOG2PI + 2.0 * np.log(sy)) - R / (2.0 * sy * sy)
        return self._latent_log_joint(theta, stats) + obs

    def grad_log_joint(self, theta, stats):
        self.validate(theta)
        sy = theta["sigma_y"]
        n, R = stats[..., 0], stats[..., 6]
        dphi, dsx = self._latent_grad(theta, stats)
        dsy = -(n + 1.0) / sy + R / sy**3
        return np.stack(np.broadcast_arrays(dphi, dsx, dsy), axis=-1)

    # Fully adapted proposal; exact for this linear-Gaussian observation.

    def propose_initial(self, theta, y0, N, rng):
        self.validate(theta)
        tau2 = self._stationary_var(theta)
        if self.proposal == "bootstrap":
            return super().propose_initial(theta, y0, N, rng)
        sy2 = theta["sigma_y"] ** 2
        v = 1.0 / (1.0 / tau2 + 1.0 / sy2)
        m = v * (self.init_mean / tau2 + y0 / sy2)
        z0 = m + np.sqrt(v) * rng.standard_normal(N)
        log_u = np.full(N, _log_normal_pdf(y0, self.init_mean, tau2 + sy2))
        return z0, log_u

    def propose(self, theta, x_prev, y_new, t, rng):
        if self.proposal == "bootstrap":
            return super().propose(theta, x_prev, y_new, t, rng)
        phi, sx, sy = theta["phi"], theta["sigma_x"], theta["sigma_y"]
        x_prev = np.asarray(x_prev, dtype=float)
        sx2, sy2 = sx * sx, sy * sy
        v = 1.0 / (1.0 / sx2 + 1.0 / sy2)
        m = v * (phi * x_prev / sx2 + y_new / sy2)
        x_new = m + np.sqrt(v) * rng.standard_normal(x_prev.shape)
        log_u = _log_normal_pdf(y_new, phi * x_prev, sx2 + sy2)
        return x_new, log_u


class AR1TrendModel(AR1Model):
    """AR(1)-with-noise plus a decaying observation trend.

    In original coordinates y_t = 3 phi^t + x_t + noise; the shifted latent
    z_t = x_t + 3 phi^t follows the plain AR(1) recursion with initial mean
    3, so the model is AR1 with a shifted initialization.
    """

    model_id = "ar1-trend"
    init_mean = 3.0


class SVModel(_ARLatentModel):
    """Stochastic volatility: y_t = sigma_y * exp(x_t / 2) * noise."""

    model_id = "sv"
    param_names = ("phi", "sigma_x", "sigma_y")
    stat_dim = 8
    linear_gaussian = False
    init_mean = 0.0

    def log_obs(self, theta, x, y):
        sy = theta["sigma_y"]
        # y | x ~ N(0, sigma_y^2 e^x)
        return -0.5 * (LOG2PI + 2.0 * np.log(sy)) - x / 2.0 - (
            y * y * np.exp(-x)
        ) / (2.0 * sy * sy)

    def sample_obs(self, theta, x, rng):
        return theta["sigma_y"] * np.exp(x / 2.0) * rng.standard_normal(x.shape)

    def init_stats(self, x0, y0):
        x0 = np.asarray(x0, dtype=float)
        s = np.zeros(x0.shape + (self.stat_dim,))
        s[..., 1] = x0
        s[..., 2] = x0 * x0
        s[..., 6] = y0 * y0 * np.exp(-x0)
        s[..., 7] = x0
        return s

    def update_stats(self, stats, x_prev, x_new, y_new):
        out = stats.copy()
        out[..., 0] += 1.0
        out[..., 3] += x_prev * x_prev
        out[..., 4] += x_prev * x_new
        out[..., 5] += x_new * x_new
        out[..., 6] += y_new * y_new * np.exp(-x_new)
        out[..., 7] += x_new
        return out

    def log_joint(self, theta, stats):
        self.validate(theta)
        sy = theta["sigma_y"]
        n, E, Z = stats[..., 0], stats[..., 6], stats[..., 7]
        obs = (
            -0.5 * (n + 1.0) * (LOG2PI + 2.0 * np.log(sy))
            - Z / 2.0
            - E / (2.0 * sy * sy)
        )
        return self._latent_log_joint(theta, stats) + obs

    def grad_log_joint(self, theta, stats):
        self.validate(theta)
        sy = theta["sigma_y"]
        n, E = stats[..., 0], stats[..., 6]
        dphi, dsx = self._latent_grad(theta, stats)
        dsy = -(n + 1.0) / sy + E / sy**3
        return np.stack(np.broadcast_arrays(dphi, dsx, dsy), axis=-1)


class SVTrendModel(SVModel):
    """SV with a decaying trend 8 phi^t added to the log-volatility.

    Shifting z_t = x_t + 8 phi^t removes the trend from the transitions and
    sets the initial latent mean to 8.
    """

    model_id = "sv-trend"
    init_mean = 8.0


class PAR1Model(StateSpaceModel):
    """Poisson AR(1) with a log-linear deterministic trend.

    y_t ~ Poisson(exp(c_t . mu + x_t)) with the standard polio covariate set
    c_t = (1, t'/1000, cos(2 pi t'/12), sin(2 pi t'/12), cos(2 pi t'/6),
    sin(2 pi t'/6)), t' = t + 1, and a stationary AR(1) latent chain.  The
    shifted latent z_t = x_t + c_t . mu makes y_t ~ Poisson(exp(z_t)); the
    z-transitions acquire the deterministic drift (c_t - phi c_{t-1}) . mu,
    which stays quadratic in the parameters, so fixed-dimension sufficient
    statistics exist: covariate cross-sums against the latent path.
    """

    model_id = "par1"
    param_names = ("mu1", "mu2", "mu3", "mu4", "mu5", "mu6", "phi", "sigma_x")
    stat_dim = 33  # n, z0, z0^2, S1, S2, S3, Sez, Syz, L, then 4 x 6 cross-sums
    linear_gaussian = False

    _NCOV = 6

    def __init__(self, proposal: str = "bootstrap"):
        super().__init__(proposal)
        self._cov_cache = self._covariates(np.arange(512))
        self._cum_cache = None

    @staticmethod
    def _covariates(t):
        tp = np.asarray(t, dtype=float) + 1.0
        w1 = 2.0 * np.pi * tp / 12.0
        w2 = 2.0 * np.pi * tp / 6.0
        return np.stack(
            [
                np.ones_like(tp),
                tp / 1000.0,
                np.cos(w1),
                np.sin(w1),
                np.cos(w2),
                np.sin(w2),
            ],
            axis=-1,
        )

    def cov(self, t: int) -> np.ndarray:
        """Deterministic covariate vector c_t."""
        if t >= len(self._cov_cache):
            self._cov_cache = self._covariates(np.arange(2 * (t + 1)))
        return self._cov_cache[t]

    def _cum_mats(self, n: int):
        """Cumulative covariate product matrices over transitions 1..n.

        Returns (Maa, Mab, Mbb) with Maa = sum c_j c_j^T, Mab = sum
        c_j c_{j-1}^T, Mbb = sum c_{j-1} c_{j-1}^T for j = 1..n.
        """
        n = int(n)
        if self._cum_cache is None or len(self._cum_cache[0]) <= n:
            cap = max(2 * (n + 1), 512)
            c = self._covariates(np.arange(cap + 1))
            cj, cjm = c[1:], c[:-1]
            maa = np.cumsum(cj[:, :, None] * cj[:, None, :], axis=0)
            mab = np.cumsum(cj[:, :, None] * cjm[:, None, :], axis=0)
            mbb = np.cumsum(cjm[:, :, None] * cjm[:, None, :], axis=0)
            zero = np.zeros((1, self._NCOV, self._NCOV))
            self._cum_cache = (
                np.concatenate([zero, maa]),
                np.concatenate([zero, mab]),
                np.concatenate([zero, mbb]),
            )
        maa, mab, mbb = self._cum_cache
        return maa[n], mab[n], mbb[n]

    def _split(self, theta):
        mu = theta.values[:6]
        return mu, theta["phi"], theta["sigma_x"]

    def validate(self, theta: Parameter) -> None:
        if not np.all(np.isfinite(theta.values)):
            raise InvalidParameterError(f"non-finite parameter: {theta}")
        mu, phi, sx = self._split(theta)
        if abs(phi) >= 1.0:
            raise InvalidParameterError(
                f"|phi| must be < 1 for stationary initialization, got {phi}"
            )
        if sx <= 0.0:
            raise InvalidParameterError(f"sigma_x must be > 0, got {sx}")

    def _stationary_var(self, theta) -> float:
        _, phi, sx = self._split(theta)
        return sx * sx / (1.0 - phi * phi)

    def simulate(self, theta, T, rng) -> Series:
        self.validate(theta)
        if T < 0:
            raise ValueError("T must be >= 0")
        mu, phi, sx = self._split(theta)
        z = np.empty(T + 1)
        z[0] = self.cov(0) @ mu + np.sqrt(self._stationary_var(theta)) * rng.standard_normal()
        for t in range(1, T + 1):
            drift = (self.cov(t) - phi * self.cov(t - 1)) @ mu
            z[t] = phi * z[t - 1] + drift + sx * rng.standard_normal()
        y = rng.poisson(np.exp(z)).astype(float)
        return Series(y=y, x=z)

    def log_obs(self, theta, z, y):
        return -np.exp(z) + y * z - gammaln(y + 1.0)

    def init_stats(self, x0, y0):
        x0 = np.asarray(x0, dtype=float)
        s = np.zeros(x0.shape + (self.stat_dim,))
        s[..., 1] = x0
        s[..., 2] = x0 * x0
        s[..., 6] = np.exp(x0)
        s[..., 7] = y0 * x0
        s[..., 8] = gammaln(y0 + 1.0)
        return s

    def update_stats(self, stats, x_prev, x_new, y_new):
        out = stats.copy()
        t = int(round(stats.reshape(-1, self.stat_dim)[0, 0])) + 1
        cj, cjm = self.cov(t), self.cov(t - 1)
        out[..., 0] += 1.0
        out[..., 3] += x_prev * x_prev
        out[..., 4] += x_prev * x_new
        out[..., 5] += x_new * x_new
        out[..., 6] += np.exp(x_new)
        out[..., 7] += y_new * x_new
        out[..., 8] += gammaln(y_new + 1.0)
        xn = np.asarray(x_new)[..., None]
        xp = np.asarray(x_prev)[..., None]
        out[..., 9:15] += cj * xn    # C_a: c_j z_j
        out[..., 15:21] += cjm * xn  # C_b: c_{j-1} z_j
        out[..., 21:27] += cj * xp   # C_c: c_j z_{j-1}
        out[..., 27:33] += cjm * xp  # C_d: c_{j-1} z_{j-1}
        return out

    def _pieces(self, theta, stats):
        mu, phi, sx = self._split(theta)
        n = stats[..., 0]
        n0 = int(round(stats.reshape(-1, self.stat_dim)[0, 0]))
        z0, z02 = stats[..., 1], stats[..., 2]
        S1, S2, S3 = stats[..., 3], stats[..., 4], stats[..., 5]
        Ca = stats[..., 9:15] @ mu
        Cb = stats[..., 15:21] @ mu
        Cc = stats[..., 21:27] @ mu
        Cd = stats[..., 27:33] @ mu
        maa, mab, mbb = self._cum_mats(n0)
        msym = maa - phi * (mab + mab.T) + phi * phi * mbb
        quad = mu @ (msym @ mu)
        Q = (
            S3
            + phi * phi * S1
            - 2.0 * phi * S2
            - 2.0 * (Ca - phi * Cb)
            + 2.0 * phi * (Cc - phi * Cd)
            + quad
        )
        m0 = self.cov(0) @ mu
        z0c2 = z02 - 2.0 * m0 * z0 + m0 * m0
        return mu, phi, sx, n, z0, z0c2, S1, S2, S3, Ca, Cb, Cc, Cd, mab, mbb, msym, Q

    def log_joint(self, theta, stats):
        self.validate(theta)
        (mu, phi, sx, n, _, z0c2, *_rest, Q) = self._pieces(theta, stats)
        tau2 = self._stationary_var(theta)
        obs = stats[..., 7] - stats[..., 6] - stats[..., 8]  # Syz - Sez - L
        return (
            -0.5 * (LOG2PI + np.log(tau2))
            - z0c2 / (2.0 * tau2)
            - 0.5 * n * (LOG2PI + 2.0 * np.log(sx))
            - Q / (2.0 * sx * sx)
            + obs
        )

    def grad_log_joint(self, theta, stats):
        self.validate(theta)
        (
            mu, phi, sx, n, z0, z0c2, S1, S2, _S3,
            Ca, Cb, Cc, Cd, mab, mbb, msym, Q,
        ) = self._pieces(theta, stats)
        sx2 = sx * sx
        c0 = self.cov(0)
        m0 = c0 @ mu
        qab = mu @ ((mab + mab.T) @ mu)
        qbb = mu @ (mbb @ mu)
        dQdphi = (
            2.0 * phi * S1
            - 2.0 * S2
            + 2.0 * Cb
            + 2.0 * Cc
            - 4.0 * phi * Cd
            - qab
            + 2.0 * phi * qbb
        )
        dmu = (
            (stats[..., 9:15] - phi * stats[..., 15:21])
            - phi * (stats[..., 21:27] - phi * stats[..., 27:33])
            - msym @ mu
            + ((z0 - m0) * (1.0 - phi * phi))[..., None] * c0
        ) / sx2
        dphi = -phi / (1.0 - phi * phi) + z0c2 * phi / sx2 - dQdphi / (2.0 * sx2)
        dsx = -(n + 1.0) / sx + (z0c2 * (1.0 - phi * phi) + Q) / sx**3
        dphi, dsx = np.broadcast_arrays(dphi, dsx)
        return np.concatenate(
            [dmu, dphi[..., None], dsx[..., None]], axis=-1
        )

    def propose_initial(self, theta, y0, N, rng):
        self.validate(theta)
        mu, _, _ = self._split(theta)
        tau2 = self._stationary_var(theta)
        z0 = self.cov(0) @ mu + np.sqrt(tau2) * rng.standard_normal(N)
        return z0, self.log_obs(theta, z0, y0)

    def propose(self, theta, x_prev, y_new, t, rng):
        mu, phi, sx = self._split(theta)
        x_prev = np.asarray(x_prev, dtype=float)
        drift = (self.cov(t) - phi * self.cov(t - 1)) @ mu
        x_new = phi * x_prev + drift + sx * rng.standard_normal(x_prev.shape)
        return x_new, self.log_obs(theta, x_new, y_new)


_MODEL_CLASSES = {
    cls.model_id: cls
    for cls in (AR1Model, AR1TrendModel, SVModel, SVTrendModel, PAR1Model)
}

MODEL_IDS = tuple(_MODEL_CLASSES)


def get_model(model_id: str, proposal: str = "bootstrap") -> StateSpaceModel:
    """Construct a model by string id (``ar1``, ``ar1-trend``, ``sv``,
    ``sv-trend``, ``par1``)."""
    try:
        cls = _MODEL_CLASSES[model_id]
    except KeyError:
        raise ValueError(
            f"unknown model {model_id!r}; choose from {MODEL_IDS}"
        ) from None
    return cls(proposal=proposal)
