"""Seedable generators for the synthetic benchmark settings, plus a
power-study runner.

Every setting is driven by primitive samplers built on a pinned uniform
stream (numpy PCG64): Gaussians via Box-Muller, Cauchy via the tangent
transform, Pareto and exponentials via inverse CDF, gamma via the
Marsaglia-Tsang rejection method. Notational conventions: N(a, b) is
mean a and variance b; Pareto(a, b) is scale a and shape b;
Gamma(a, b) is shape a and rate b.

Independence settings (paired X, Y with n rows each):
  IND_V1..IND_V10, IND_IG(rho), IND_IGL(rho)
Two-sample settings (X with m rows, Y with n rows, d = 3):
  TS_V1..TS_V11, TS_TG(mu), TS_TGL(mu)

Scalar recipes are replicated over 3 independent coordinates (the
coordinate count is configurable for those settings); the remaining
settings are inherently three-dimensional.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nulldist, qmc, testing
from .errors import UsageError
from .ranks import PointCloud

GENERATOR_NAME = "pcg64"

FAMILY_INDEPENDENCE = "independence"
FAMILY_TWO_SAMPLE = "two-sample"


@dataclass(frozen=True)
class SimSetting:
    """One synthetic benchmark configuration."""

    id: str
    family: str
    n: int
    m: int | None = None
    dims: tuple[int, ...] = (3, 3)
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PowerResult:
    """Rejection-frequency estimate for one setting/test pair."""

    setting_id: str
    test_kind: str
    alpha: float
    replicates: int
    rejections: int
    rejection_fraction: float
    standard_error: float
    seed: int
    b: int
    generator: str
    runtime_s: float

    def to_dict(self) -> dict:
        return {
            "setting": self.setting_id,
            "test_kind": self.test_kind,
            "alpha": self.alpha,
            "replicates": self.replicates,
            "rejections": self.rejections,
            "rejection_fraction": self.rejection_fraction,
            "standard_error": self.standard_error,
            "seed": self.seed,
            "b": self.b,
            "generator": self.generator,
            "runtime_s": self.runtime_s,
        }


# ---------------------------------------------------------------------------
# primitive samplers (uniform stream -> documented transforms)

def _unif(rng, lo, hi, size):
    return lo + (hi - lo) * rng.random(size)


def _gauss(rng, size) -> np.ndarray:
    """Standard normals via Box-Muller on (0, 1] x [0, 1) uniforms."""
    size = int(np.prod(size)) if not np.isscalar(size) else int(size)
    pairs = (size + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # in (0, 1], keeps log finite
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:size]


def _gauss2(rng, rows, cols):
    return _gauss(rng, rows * cols).reshape(rows, cols)


def _cauchy(rng, loc, scale, size):
    return loc + scale * np.tan(np.pi * (rng.random(size) - 0.5))


def _pareto(rng, scale, shape, size):
    """Pareto via inverse survival: scale * U^(-1/shape), U in (0, 1]."""
    u = 1.0 - rng.random(size)
    return scale * u ** (-1.0 / shape)


def _bern(rng, p, size):
    return rng.random(size) < p


def _expo(rng, size):
    return -np.log1p(-rng.random(size))


def _gamma(rng, shape, rate, size):
    """Gamma(shape >= 1, rate) via Marsaglia-Tsang squeeze-rejection."""
    if shape < 1:
        raise UsageError(f"gamma sampler implemented for shape >= 1, got {shape}")
    size = int(size)
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(size)
    got = 0
    while got < size:
        todo = size - got
        x = _gauss(rng, todo)
        v = (1.0 + c * x) ** 3
        u = rng.random(todo)
        ok = (v > 0) & (np.log(np.maximum(u, 1e-300)) < 0.5 * x * x + d - d * v + d * np.log(np.maximum(v, 1e-300)))
        took = int(ok.sum())
        out[got : got + took] = d * v[ok]
        got += took
    return out / rate


def _mvn(rng, mean, cov, size):
    """Multivariate normal via Cholesky of the covariance."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    chol = np.linalg.cholesky(cov)
    z = _gauss2(rng, size, mean.size)
    return mean + z @ chol.T


def _corr_matrix(d, off):
    s = np.full((d, d), off)
    np.fill_diagonal(s, 1.0)
    return s


def _ar_matrix(d, rho):
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


# ---------------------------------------------------------------------------
# independence settings

def _ind_pairwise(recipe):
    """Lift a scalar (x, y) recipe to d independent coordinate pairs."""

    def build(rng, n, d):
        xs = np.empty((n, d))
        ys = np.empty((n, d))
        for j in range(d):
            xs[:, j], ys[:, j] = recipe(rng, n)
        return xs, ys

    return build


def _ind_v1(rng, n):
    a = _gauss(rng, n)
    return 0.2 * _cauchy(rng, 0.0, 1.0, n) + a, 0.2 * _cauchy(rng, 0.0, 1.0, n) + a


def _ind_v2(rng, n):
    x = _unif(rng, -1.0, 1.0, n)
    return x, (x * x + _unif(rng, 0.0, 1.0, n)) / 2.0


def _ind_v3(rng, n):
    x = np.sqrt(2.0) * _gauss(rng, n)
    e = _bern(rng, 0.04, n)
    v = np.sqrt(2.0) * _gauss(rng, n)
    return x, np.where(e, x, v)


def _ind_v4(rng, n):
    w = _unif(rng, -1.0, 1.0, n)
    w1 = _unif(rng, 0.0, 1.0, n)
    w2 = _unif(rng, 0.0, 1.0, n)
    v2 = 4.0 * (w * w - 0.5) ** 2 + w2
    a = _bern(rng, 0.5, n)
    return w + w1 / 3.0, np.where(a, 5.0 + _gauss(rng, n), v2)


def _ind_v6(rng, n):
    a = _gauss(rng, n)
    return _pareto(rng, 1.0, 2.0, n) + a, _pareto(rng, 1.0, 1.0, n) + a


def _ind_v7(rng, n):
    x = _unif(rng, 0.0, 1.0, n)
    return x, x**0.25 + np.sqrt(5.0) * _gauss(rng, n)


def _ind_v8(rng, n):
    x = _gauss(rng, n)
    y = np.log(4.0 * x * x)
    assert np.array_equal(y, np.log(4.0 * x * x)), "deterministic relation violated"
    return x, y


def _ind_v9(rng, n):
    a = _gauss(rng, n)
    x = np.abs(a + _pareto(rng, 1.0, 1.0, n)) ** 1.5
    y = np.abs(a + _pareto(rng, 1.0, 1.0, n)) ** 1.5
    return x, y


def _ind_mixture_cov():
    sigma = np.eye(6)
    sigma[:3, 3:] = 0.3
    sigma[3:, :3] = 0.3
    return sigma


def _ind_v5(rng, n, d, a2_prob=0.3):
    if d != 3:
        raise UsageError("this mixture setting is defined for 3 coordinates")
    sigma = _ind_mixture_cov()
    uv = _mvn(rng, np.zeros(6), sigma, n)
    wz = _mvn(rng, np.ones(6), sigma / 2.0, n)
    a1 = _bern(rng, 0.5, n)[:, None]
    a2 = _bern(rng, a2_prob, n)[:, None] if a2_prob > 0 else np.zeros((n, 1), bool)
    x = np.where(a1, wz[:, :3], uv[:, :3])
    y = np.where(a2, wz[:, 3:], uv[:, 3:])
    return x, y


def _ig_cov(rho, d=3):
    # Paired-coordinate cross correlation: corr(X_i, Y_i) = rho, all other
    # cross pairs independent. Keeps the covariance positive definite over
    # the full rho range.
    sigma = np.eye(2 * d)
    for i in range(d):
        sigma[i, d + i] = rho
        sigma[d + i, i] = rho
    return sigma


def _ind_ig(rng, n, d, rho, lognormal=False):
    z = _mvn(rng, np.zeros(2 * d), _ig_cov(rho, d), n)
    if lognormal:
        z = np.exp(z)
    return z[:, :d], z[:, d:]


# ---------------------------------------------------------------------------
# two-sample settings (d = 3)

def _ts_v1(rng, m, n):
    x = _cauchy(rng, 0.0, 1.0, (m, 3))
    y = np.empty((n, 3))
    y[:, 0] = _cauchy(rng, 0.0, 1.0, n)
    y[:, 1] = _cauchy(rng, 0.2, 1.0, n)
    y[:, 2] = _cauchy(rng, 0.2, 1.0, n)
    return x, y


def _ts_v2(rng, m, n):
    x = np.empty((m, 3))
    x[:, 0] = _unif(rng, 0.0, 1.0, m)
    for k in (1, 2):
        x[:, k] = 0.25 + 0.35 * x[:, k - 1] + _unif(rng, 0.0, 1.0, m)
    y = np.empty((n, 3))
    y[:, 0] = _unif(rng, 0.0, 1.0, n)
    for k in (1, 2):
        y[:, k] = 0.25 + 0.5 * y[:, k - 1] + _unif(rng, 0.0, 1.0, n)
    return x, y


def _ts_gauss(rng, m, n, cov1, cov2, mean1=None, mean2=None, lognormal=False):
    mean1 = np.zeros(3) if mean1 is None else np.asarray(mean1, dtype=np.float64)
    mean2 = np.zeros(3) if mean2 is None else np.asarray(mean2, dtype=np.float64)
    x = _mvn(rng, mean1, cov1, m)
    y = _mvn(rng, mean2, cov2, n)
    if lognormal:
        x, y = np.exp(x), np.exp(y)
    return x, y


def _ts_v9(rng, m, n):
    x = _gamma(rng, 2.0, 0.1, m * 3).reshape(m, 3)
    v = _gamma(rng, 2.0, 0.1, n * 3).reshape(n, 3)
    w = np.exp(np.exp(_gauss2(rng, n, 3)))
    return x, w * v


def _ts_contaminated(rng, m, n, noise):
    x = 1.0 + _gauss2(rng, m, 3)
    z2 = 1.0 + _gauss2(rng, n, 3)
    a = _bern(rng, 0.8, n)[:, None]
    return x, np.where(a, z2, noise(rng, n))


def _ts_v10(rng, m, n):
    return _ts_contaminated(rng, m, n, lambda r, k: _unif(r, 10.0, 11.0, (k, 3)))


def _ts_v11(rng, m, n):
    return _ts_contaminated(
        rng, m, n, lambda r, k: 10.0 + np.sqrt(0.1) * _gauss2(r, k, 3)
    )


_IND_SCALAR = {
    "IND_V1": _ind_v1,
    "IND_V2": _ind_v2,
    "IND_V3": _ind_v3,
    "IND_V4": _ind_v4,
    "IND_V6": _ind_v6,
    "IND_V7": _ind_v7,
    "IND_V8": _ind_v8,
    "IND_V9": _ind_v9,
}

_TS_IDS = (
    "TS_V1", "TS_V2", "TS_V3", "TS_V4", "TS_V5", "TS_V6",
    "TS_V7", "TS_V8", "TS_V9", "TS_V10", "TS_V11", "TS_TG", "TS_TGL",
)

SETTING_IDS = tuple(sorted(_IND_SCALAR)) + (
    "IND_V5", "IND_V10", "IND_IG", "IND_IGL",
) + _TS_IDS


def make_setting(
    setting_id: str,
    *,
    n: int = 200,
    m: int | None = None,
    d: int = 3,
    rho: float | None = None,
    mu: float | None = None,
) -> SimSetting:
    """Build a validated SimSetting; parameterized settings require their
    parameter (rho for IG/IGL, mu for TG/TGL)."""
    setting_id = setting_id.upper()
    if setting_id not in SETTING_IDS:
        raise UsageError(f"unknown setting {setting_id!r}; known: {', '.join(SETTING_IDS)}")
    params = {}
    if setting_id in ("IND_IG", "IND_IGL"):
        if rho is None:
            rho = 0.0
        if not -1.0 <= rho <= 1.0:
            raise UsageError(f"rho must lie in [-1, 1], got {rho}")
        params["rho"] = float(rho)
    if setting_id in ("TS_TG", "TS_TGL"):
        if mu is None:
            mu = 0.0
        params["mu"] = float(mu)
    if setting_id.startswith("IND_"):
        family = FAMILY_INDEPENDENCE
        if setting_id not in _IND_SCALAR:
            d = 3
        dims = (d, d)
        m = None
    else:
        family = FAMILY_TWO_SAMPLE
        dims = (3,)
        m = n if m is None else m
    return SimSetting(id=setting_id, family=family, n=n, m=m, dims=dims, params=params)


def generate(setting: SimSetting, seed) -> tuple[PointCloud, PointCloud]:
    """One draw of the full dataset for a setting.

    ``seed`` may be an integer or an already-derived numpy Generator.
    Returns the pair (X, Y): paired samples for independence settings,
    the two independent samples for two-sample settings.
    """
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    sid = setting.id
    n = setting.n
    if sid in _IND_SCALAR:
        x, y = _ind_pairwise(_IND_SCALAR[sid])(rng, n, setting.dims[0])
    elif sid == "IND_V5":
        x, y = _ind_v5(rng, n, setting.dims[0])
    elif sid == "IND_V10":
        x, y = _ind_v5(rng, n, setting.dims[0], a2_prob=0.0)
    elif sid in ("IND_IG", "IND_IGL"):
        x, y = _ind_ig(rng, n, setting.dims[0], setting.params["rho"], sid == "IND_IGL")
    else:
        m = setting.m
        if sid == "TS_V1":
            x, y = _ts_v1(rng, m, n)
        elif sid == "TS_V2":
            x, y = _ts_v2(rng, m, n)
        elif sid == "TS_V3":
            x, y = _ts_gauss(rng, m, n, _ar_matrix(3, 0.35), _ar_matrix(3, 0.65))
        elif sid == "TS_V4":
            x, y = _ts_gauss(rng, m, n, _corr_matrix(3, 0.2), _corr_matrix(3, 0.5))
        elif sid == "TS_V5":
            x, y = _ts_gauss(
                rng, m, n, _ar_matrix(3, 0.35), _ar_matrix(3, 0.75), lognormal=True
            )
        elif sid == "TS_V6":
            x, y = _ts_gauss(
                rng, m, n, _corr_matrix(3, 0.25), _corr_matrix(3, 0.75), lognormal=True
            )
        elif sid in ("TS_V7", "TS_V8"):
            x, y = _ts_gauss(
                rng,
                m,
                n,
                3.0 * np.eye(3),
                3.0 * np.eye(3),
                mean2=np.full(3, 0.25),
                lognormal=(sid == "TS_V8"),
            )
        elif sid == "TS_V9":
            x, y = _ts_v9(rng, m, n)
        elif sid == "TS_V10":
            x, y = _ts_v10(rng, m, n)
        elif sid == "TS_V11":
            x, y = _ts_v11(rng, m, n)
        elif sid in ("TS_TG", "TS_TGL"):
            mu = setting.params["mu"]
            x, y = _ts_gauss(
                rng,
                m,
                n,
                3.0 * np.eye(3),
                3.0 * np.eye(3),
                mean1=np.full(3, mu),
                lognormal=(sid == "TS_TGL"),
            )
        else:  # pragma: no cover
            raise UsageError(f"unhandled setting {sid!r}")
    return PointCloud.from_rows(x), PointCloud.from_rows(y)


_TEST_FOR_FAMILY = {
    FAMILY_INDEPENDENCE: testing.KIND_RDCOV,
    FAMILY_TWO_SAMPLE: testing.KIND_ENERGY,
}


def shared_null_table(
    setting: SimSetting, test_kind: str, b: int, seed: int
) -> nulldist.NullTable:
    """Precompute the single null table a power study reuses."""
    if test_kind == testing.KIND_RDCOV:
        d1, d2 = setting.dims
        g1 = qmc.default_grid(setting.n, d1)
        g2 = qmc.default_grid(setting.n, d2)
        return nulldist.null_sample_rdcov(setting.n, g1, g2, b, seed)
    if test_kind == testing.KIND_ENERGY:
        total = setting.m + setting.n
        grid = qmc.default_grid(total, setting.dims[0])
        return nulldist.null_sample_re(setting.m, setting.n, grid, b, seed)
    raise UsageError(f"no power-study support for test kind {test_kind!r}")


def power_study(
    setting: SimSetting,
    test_kind: str | None = None,
    *,
    replicates: int = 1000,
    alpha: float = nulldist.DEFAULT_ALPHA,
    seed: int = 0,
    null_table: nulldist.NullTable | None = None,
    b: int = nulldist.DEFAULT_B,
) -> PowerResult:
    """Estimate the rejection frequency of a test over R fresh datasets.

    One null table is generated up front (or supplied) and reused by all
    replicates; replicate r draws its data from a stream spawned from the
    root seed, so the aggregate is independent of execution order.
    """
    expected_kind = _TEST_FOR_FAMILY[setting.family]
    test_kind = expected_kind if test_kind is None else test_kind
    if test_kind != expected_kind:
        raise UsageError(
            f"setting {setting.id} is a {setting.family} setting; "
            f"use test kind {expected_kind!r}"
        )
    t0 = time.perf_counter()
    if null_table is None:
        null_table = shared_null_table(setting, test_kind, b, seed)
    streams = np.random.SeedSequence(seed).spawn(replicates)
    rejections = 0
    for r in range(replicates):
        rng = np.random.Generator(np.random.PCG64(streams[r]))
        x, y = generate(setting, rng)
        if test_kind == testing.KIND_RDCOV:
            report = testing.rdcov_test(
                x, y, alpha=alpha, seed=seed, null_table=null_table, b=null_table.b
            )
        else:
            report = testing.re_test(
                x, y, alpha=alpha, seed=seed, null_table=null_table, b=null_table.b
            )
        rejections += int(report.reject)
    frac = rejections / replicates
    return PowerResult(
        setting_id=setting.id,
        test_kind=test_kind,
        alpha=alpha,
        replicates=replicates,
        rejections=rejections,
        rejection_fraction=frac,
        standard_error=float(np.sqrt(frac * (1.0 - frac) / replicates)),
        seed=seed,
        b=null_table.b,
        generator=GENERATOR_NAME,
        runtime_s=time.perf_counter() - t0,
    )
