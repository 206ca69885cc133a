"""Linear cocycles over shifts and rotations.

A driving system produces a path of symbols (shift kinds) or points on the
circle (rotation); a :class:`CocycleSpec` turns the path into one matrix per
step.  ``A(x, n) = mats[n-1] @ ... @ mats[0]`` for the orbit starting at time 0.

Long products are carried on a log ledger (see :mod:`srl.kernels`).  The
splitting, recurrence and cone estimators are restricted to ``d = 2``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linalg import ValidationError, as_matrix

RENORM_PERIOD = 32
SPLIT_GAP_MIN = 0.1


class SplittingError(RuntimeError):
    """No usable dominated splitting at the requested point."""


@dataclass(frozen=True, eq=False)
class DrivingSystem:
    """``kind`` is ``full_shift`` (``p``), ``markov_shift`` (``P``, ``stationary``)
    or ``circle_rotation`` (``angle``)."""

    kind: str
    seed: int
    p: np.ndarray = None
    P: np.ndarray = None
    stationary: np.ndarray = None
    angle: float = 0.0

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an integer in [0, 2^64)")
        if self.kind == "full_shift":
            p = np.asarray(self.p, dtype=np.float64).reshape(-1)
            if p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValidationError("full_shift needs a probability vector summing to 1")
            object.__setattr__(self, "p", p)
        elif self.kind == "markov_shift":
            P = np.asarray(self.P, dtype=np.float64)
            pi = np.asarray(self.stationary, dtype=np.float64).reshape(-1)
            if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != pi.size:
                raise ValidationError("markov_shift needs a square stochastic matrix and matching stationary vector")
            if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
                raise ValidationError("transition matrix rows must be nonnegative and sum to 1")
            if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12 or np.max(np.abs(pi @ P - pi)) > 1e-10:
                raise ValidationError("stationary vector must be a probability vector fixed by P")
            object.__setattr__(self, "P", P)
            object.__setattr__(self, "stationary", pi)
        elif self.kind == "circle_rotation":
            object.__setattr__(self, "angle", float(self.angle) % 1.0)
        else:
            raise ValidationError(f"unknown driver kind {self.kind!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def bernoulli(cls, p, seed):
        return cls("full_shift", seed, p=p)

    @classmethod
    def markov(cls, P, stationary, seed):
        return cls("markov_shift", seed, P=P, stationary=stationary)

    @classmethod
    def rotation(cls, angle, seed):
        return cls("circle_rotation", seed, angle=angle)

    @property
    def n_symbols(self):
        if self.kind == "full_shift":
            return self.p.size
        if self.kind == "markov_shift":
            return self.stationary.size
        return 0

    def with_seed(self, seed):
        return DrivingSystem(self.kind, seed, self.p, self.P, self.stationary, self.angle)


def _markov_walk(x0, P, u):
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    out = np.empty(u.size, dtype=np.int64)
    x = x0
    for t in range(u.size):
        x = int(np.searchsorted(cum[x], u[t], side="right"))
        out[t] = x
    return out


def generate_orbit(sys, n, past=0):
    """Path of length ``past + n``; entry ``past + t`` is the state at time ``t``.

    Forward and past halves draw from independent child streams of the seed,
    so the forward path does not depend on ``past``.
    """
    if n < 1 or past < 0:
        raise ValidationError("need n >= 1 and past >= 0")
    fwd_ss, past_ss = np.random.SeedSequence(sys.seed).spawn(2)
    fwd, bwd = np.random.default_rng(fwd_ss), np.random.default_rng(past_ss)
    if sys.kind == "full_shift":
        k = sys.p.size
        ahead = fwd.choice(k, size=n, p=sys.p)
        behind = bwd.choice(k, size=past, p=sys.p)[::-1]
        return np.concatenate([behind, ahead]).astype(np.int64)
    if sys.kind == "markov_shift":
        P, pi = sys.P, sys.stationary
        x0 = int(fwd.choice(pi.size, p=pi))
        ahead = np.concatenate([[x0], _markov_walk(x0, P, fwd.random(n - 1))])
        if past == 0:
            return ahead.astype(np.int64)
        # time reversal of a stationary chain: R_ij = pi_j P_ji / pi_i
        with np.errstate(divide="ignore", invalid="ignore"):
            R = np.where(pi[:, None] > 0, pi[None, :] * P.T / pi[:, None], 0.0)
        behind = _markov_walk(x0, R, bwd.random(past))[::-1]
        return np.concatenate([behind, ahead]).astype(np.int64)
    x0 = fwd.random()
    t = np.arange(-past, n, dtype=np.float64)
    return np.mod(x0 + t * sys.angle, 1.0)


@dataclass(frozen=True, eq=False)
class CocycleSpec:
    """Either ``generators`` (symbol -> matrix) or a Fourier description
    ``{"const": C, "cos": [C_1, ...], "sin": [S_1, ...]}`` giving
    ``A(x) = C + sum_k C_k cos(2 pi k x) + S_k sin(2 pi k x)``."""

    dim: int
    generators: dict = None
    fourier: dict = None

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise ValidationError("dim must be positive")
        if (self.generators is None) == (self.fourier is None):
            raise ValidationError("give exactly one of generators or fourier")
        if self.generators is not None:
            if not self.generators:
                raise ValidationError("generator map is empty")
            gens = {}
            for key, m in self.generators.items():
                a = as_matrix(m, square=True)
                if a.shape[0] != d:
                    raise ValidationError(f"generator {key!r} has dimension {a.shape[0]}, expected {d}")
                gens[int(key)] = a
            object.__setattr__(self, "generators", gens)
        else:
            four = {"const": as_matrix(self.fourier.get("const", np.zeros((d, d))), square=True)}
            for part in ("cos", "sin"):
                four[part] = [as_matrix(m, square=True) for m in self.fourier.get(part, [])]
            for m in [four["const"], *four["cos"], *four["sin"]]:
                if m.shape[0] != d:
                    raise ValidationError("fourier coefficient has the wrong dimension")
            object.__setattr__(self, "fourier", four)
        object.__setattr__(self, "dim", d)

    @classmethod
    def from_matrices(cls, *mats):
        mats = [as_matrix(m, square=True) for m in mats]
        return cls(mats[0].shape[0], generators=dict(enumerate(mats)))

    def matrices(self, sys, path):
        if self.generators is not None:
            if sys.kind == "circle_rotation":
                raise ValidationError("symbolic generators need a shift driver")
            missing = set(range(sys.n_symbols)) - set(self.generators)
            if missing:
                raise ValidationError(f"no generator for symbols {sorted(missing)}")
            table = np.stack([self.generators[i] for i in range(sys.n_symbols)])
            return table[np.asarray(path, dtype=np.int64)]
        if sys.kind != "circle_rotation":
            raise ValidationError("a fourier cocycle needs a circle_rotation driver")
        x = np.asarray(path, dtype=np.float64)
        out = np.broadcast_to(self.fourier["const"], (x.size, self.dim, self.dim)).copy()
        for k, c in enumerate(self.fourier["cos"], start=1):
            out += np.cos(2 * np.pi * k * x)[:, None, None] * c
        for k, s in enumerate(self.fourier["sin"], start=1):
            out += np.sin(2 * np.pi * k * x)[:, None, None] * s
        return out


class Orbit:
    """A stored two-sided orbit segment: times ``-past .. steps-1``."""

    def __init__(self, sys, coc, steps, past=0, backend=None):
        self.sys, self.coc = sys, coc
        self.steps, self.past = int(steps), int(past)
        self.backend = backend
        self.path = generate_orbit(sys, self.steps, self.past)
        self.mats = np.ascontiguousarray(coc.matrices(sys, self.path))

    def forward(self, t=0, n=None, period=RENORM_PERIOD):
        """Normalised ``A(T^t x, k)`` for ``k = 1..n`` and their log scales."""
        i = self.past + t
        n = self.steps - t if n is None else n
        if i < 0 or i + n > self.mats.shape[0]:
            raise IndexError("orbit segment too short")
        return kernels.prefix_products(self.mats[i : i + n], period, backend=self.backend)

    def windows(self, times, n):
        """Normalised ``A(T^t x, n)`` for each ``t`` in ``times``, with log scales."""
        starts = self.past + np.asarray(times, dtype=np.int64)
        return kernels.window_products(self.mats, starts, n, RENORM_PERIOD, backend=self.backend)

    def product(self, t, n):
        """``A(T^t x, n)`` as ``(matrix, log_scale)``."""
        p, s = self.windows([t], n)
        return p[0], float(s[0])


@dataclass
class OrbitReport:
    n_steps: int
    seed: int
    lambda_track: np.ndarray
    lambda_top_hat: float
    lambda_spectrum_hat: np.ndarray
    rho_track: np.ndarray
    rho_limsup_hat: float = float("nan")
    gap: float = float("nan")
    gap_track: np.ndarray = None
    cone_returns: int = None
    cone_flags: np.ndarray = None
    recurrence_liminf: float = None
    recurrence_track: np.ndarray = None
    notes: dict = field(default_factory=dict)

    def columns(self):
        n = np.arange(1, self.n_steps + 1)
        empty = np.full(self.n_steps, np.nan)
        return {
            "n": n,
            "lambda_hat": self.lambda_track,
            "rho_over_n": self.rho_track,
            "gap": self.gap_track if self.gap_track is not None else empty,
            "cone_return_flag": self.cone_flags if self.cone_flags is not None else empty,
            "recurrence_min_so_far": self.recurrence_track if self.recurrence_track is not None else empty,
        }


def _orbit(sys, coc, n, orbit, backend, past=0):
    if orbit is not None:
        return orbit
    return Orbit(sys, coc, n, past=past, backend=backend)


def lyapunov_estimates(sys, coc, n, orbit=None, backend=None):
    """Running top exponent, spectral-radius track and QR exponent spectrum."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    orb = _orbit(sys, coc, n, orbit, backend)
    prods, logs = orb.forward(0, n)
    nrm, rho = kernels.stack_norm_rho(prods, backend=backend)
    steps = np.arange(1, n + 1)
    with np.errstate(divide="ignore"):
        lam = (np.log(nrm) + logs) / steps
        rt = (np.log(rho) + logs) / steps
    i0 = orb.past
    spec = kernels.qr_exponents(orb.mats[i0 : i0 + n], backend=backend) / n
    return OrbitReport(
        n_steps=n,
        seed=sys.seed,
        lambda_track=lam,
        lambda_top_hat=float(lam[-1]),
        lambda_spectrum_hat=np.sort(spec)[::-1],
        rho_track=rt,
    )


def _tail_max(track, n):
    lo = max(n // 2, 1)
    return float(np.max(track[lo - 1 : n]))


def cohen_gap(sys, coc, n, orbit=None, backend=None):
    """Top exponent versus the limsup of ``(1/n) log rho(A(x, n))``.

    The limsup is replaced by the maximum over the tail window ``[n/2, n]``;
    ``gap = lambda_hat - rho_limsup_hat`` should shrink towards 0.
    """
    rep = lyapunov_estimates(sys, coc, n, orbit=orbit, backend=backend)
    rep.rho_limsup_hat = _tail_max(rep.rho_track, n)
    rep.gap = rep.lambda_top_hat - rep.rho_limsup_hat
    # running maximum over the moving window [m/2, m] for the per-step column
    gt = np.empty(n)
    for m in range(1, n + 1):
        gt[m - 1] = rep.lambda_track[m - 1] - _tail_max(rep.rho_track, m)
    rep.gap_track = gt
    return rep


# ---------------------------------------------------------------------------
# two-dimensional splittings


@dataclass
class SplittingEstimate:
    time: int
    V: np.ndarray
    W: np.ndarray
    P: np.ndarray
    gap: float
    residuals: dict = field(default_factory=dict)


def _canon(v):
    # fix the sign: first component with magnitude above 1e-12 is positive
    idx = np.argmax(np.abs(v) > 1e-12, axis=-1)
    s = np.sign(np.take_along_axis(v, idx[..., None], axis=-1))
    s[s == 0] = 1.0
    return v * s


def splittings(orbit, times, horizon):
    """Fast direction ``V``, slow direction ``W`` and projection ``P`` at each time.

    ``V`` is the top left-singular vector of ``A(T^{t-H} x, H)`` and ``W`` the
    bottom right-singular vector of ``A(T^t x, H)``.  Rows where ``V`` and ``W``
    are (numerically) parallel come back as NaN.
    """
    if orbit.coc.dim != 2:
        raise ValidationError("splittings are implemented for d = 2 only")
    times = np.asarray(times, dtype=np.int64)
    back, _ = orbit.windows(times - horizon, horizon)
    ahead, _ = orbit.windows(times, horizon)
    u, _, _ = np.linalg.svd(back)
    _, _, vt = np.linalg.svd(ahead)
    V = _canon(u[:, :, 0])
    W = _canon(vt[:, 1, :])
    wperp = np.stack([-W[:, 1], W[:, 0]], axis=1)
    denom = np.sum(wperp * V, axis=1)
    bad = np.abs(denom) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        P = V[:, :, None] * wperp[:, None, :] / denom[:, None, None]
    P[bad] = np.nan
    return V, W, P


def _local_gap(orbit, t, horizon):
    i = orbit.past + t
    seg = orbit.mats[i - horizon : i + horizon]
    ex = np.sort(kernels.qr_exponents(seg, backend=orbit.backend))[::-1] / seg.shape[0]
    return float(ex[0] - ex[1])


def _needed_orbit(sys, coc, point, forward, horizon, backend):
    past = max(horizon - point, 0)
    return Orbit(sys, coc, point + forward + horizon, past=past, backend=backend)


def oseledets_splitting_2d(sys, coc, point=0, horizon=50, test_n=(1, 5, 10), orbit=None, backend=None):
    """Finite-horizon splitting at time ``point`` plus equivariance residuals.

    Raises :class:`SplittingError` when the exponent gap estimated over
    ``[point - H, point + H)`` is below ``SPLIT_GAP_MIN``.
    """
    if coc.dim != 2:
        raise ValidationError("splitting needs d = 2")
    test_n = tuple(int(n) for n in test_n)
    orb = orbit or _needed_orbit(sys, coc, point, max(test_n, default=0), horizon, backend)
    gap = _local_gap(orb, point, horizon)
    if not gap >= SPLIT_GAP_MIN:
        raise SplittingError(f"exponent gap {gap:.3g} below {SPLIT_GAP_MIN}: splitting ill-conditioned")
    times = np.array([point] + [point + n for n in test_n])
    V, W, P = splittings(orb, times, horizon)
    if np.isnan(P[0]).any():
        raise SplittingError("fast and slow directions coincide")
    res = {}
    for j, n in enumerate(test_n, start=1):
        a, _ = orb.product(point, n)
        res[n] = float(np.linalg.norm(P[j] @ a - a @ P[0], 2) / np.linalg.norm(a, 2))
    return SplittingEstimate(point, V[0], W[0], P[0], gap, res)


@dataclass
class RecurrenceResult:
    value: float
    n_at: int
    track: np.ndarray
    flagged: int


def recurrence_liminf(sys, coc, point=0, n_max=10_000, horizon=50, orbit=None, backend=None):
    """``min_{1<=n<=n_max} ||P(x) - P(T^n x)||`` and where it is attained."""
    orb = orbit or _needed_orbit(sys, coc, point, n_max, horizon, backend)
    gap = _local_gap(orb, point, horizon)
    if not gap >= SPLIT_GAP_MIN:
        raise SplittingError(f"exponent gap {gap:.3g} below {SPLIT_GAP_MIN}")
    times = point + np.arange(0, n_max + 1)
    _, _, P = splittings(orb, times, horizon)
    diff = P[1:] - P[0]
    dist, _ = kernels.stack_norm_rho(np.nan_to_num(diff, nan=0.0), backend=backend)
    flagged = np.isnan(diff).any(axis=(1, 2))
    dist[flagged] = np.inf
    track = np.minimum.accumulate(dist)
    i = int(np.argmin(dist))
    return RecurrenceResult(float(dist[i]), i + 1, track, int(flagged.sum()))


@dataclass
class ConeResult:
    returns: int
    return_times: np.ndarray
    flags: np.ndarray
    log_growth: np.ndarray
    growth_inf: float
    growth_exponent: float


def cone_check(sys, coc, point=0, delta=1.0, n_max=10_000, horizon=50, orbit=None, backend=None):
    """Count ``n <= n_max`` with ``A(x, n) K(x, 1)`` inside ``K(x, delta)``.

    ``K(x, delta) = {u : ||P u|| >= ||Q u|| / delta}``.  In the plane the cone
    ``K(x, 1)`` is spanned by the rays ``V +- W``; its image lies in the target
    cone exactly when both ray images do and they sit in the same half.  The
    growth certificate is the smallest of ``||A(x, n) u|| / ||u||`` over the two
    rays and the axis ``V``.  ``growth_exponent`` is the minimum of
    ``log_growth / n`` over return times in ``[n_max/2, n_max]`` (the last
    return if none fall there).
    """
    if not 0 < delta <= 1:
        raise ValidationError("delta must lie in (0, 1]")
    orb = orbit or _needed_orbit(sys, coc, point, n_max, horizon, backend)
    est = oseledets_splitting_2d(sys, coc, point, horizon, test_n=(), orbit=orb)
    V, W = est.V, est.W
    basis_inv = np.linalg.inv(np.column_stack([V, W]))
    rays = np.column_stack([V + W, V - W, V])
    prods, logs = orb.forward(point, n_max)
    images = prods @ rays  # (n, 2, 3)
    coords = np.einsum("ij,njk->nik", basis_inv, images)
    a, b = coords[:, 0, :2], coords[:, 1, :2]
    inside = np.abs(a) >= np.abs(b) / delta
    flags = inside.all(axis=1) & (np.sign(a[:, 0]) == np.sign(a[:, 1])) & (a[:, 0] != 0)
    with np.errstate(divide="ignore"):
        ratios = np.log(np.linalg.norm(images, axis=1)) - np.log(np.linalg.norm(rays, axis=0))
    log_growth = ratios.min(axis=1) + logs
    n = np.arange(1, n_max + 1)
    times = n[flags]
    if times.size:
        tail = times[times >= n_max / 2]
        pick = tail if tail.size else times[-1:]
        exponent = float(np.min(log_growth[pick - 1] / pick))
    else:
        exponent = float("nan")
    growth_inf = float(np.min(log_growth))
    return ConeResult(int(flags.sum()), times, flags, log_growth, growth_inf, exponent)
