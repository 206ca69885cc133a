"""Injective extension of operators onto a sup-normed sequence space.

``E(L)`` acts on sequences ``(v_1, v_2, ...)`` by ``(v_1, v_2, ...) ->
(L v_1, a_1 v_1, a_2 v_2, ...)``, where ``a_i`` is a strictly decreasing
sequence in ``(0, 1]``.  ``E(L)`` is injective even when ``L`` is not, and
the norm of a product collapses to a one-dimensional maximisation::

    ||E(L_n) ... E(L_1)|| = max_{0<=k<=n} ||L_{n-k} ... L_1|| * exp(s_k)

with ``s_k = log a_1 + ... + log a_k`` (``s_0 = 0``) and the empty product
counted with norm 1.  Here ``a_i = exp(-beta (i + 1))``, so ``s_k`` is
quadratic in ``k``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, opshift
from .jsr import DEFAULT_NODE_BUDGET, InvariantViolation, MatrixSet, RadiiReport, bw_report, check_word
from .linalg import ValidationError, as_matrix, leq


@dataclass(frozen=True)
class AlphaSequence:
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta must be positive")

    def log_values(self, k):
        """``log a_1, ..., log a_k``."""
        i = np.arange(1, k + 1)
        return -self.beta * (i + 1.0)

    def values(self, k):
        return np.exp(self.log_values(k))

    def partial_log_sums(self, k):
        """``s_0, ..., s_k`` from the closed form ``-beta k (k + 3) / 2``."""
        j = np.arange(k + 1, dtype=np.float64)
        return -self.beta * j * (j + 3.0) / 2.0


# ---------------------------------------------------------------------------
# subadditive test sequences


@dataclass(frozen=True)
class SubadditiveSequence:
    """A sequence ``a_n`` with ``a_{n+m} <= a_n + a_m``; ``a_0`` is taken as 0.

    Built-ins are concave with nonnegative intercept, which makes them
    subadditive: ``linear(lam, c)``, ``neg_square()`` and
    ``min_linear(l1, c1, l2, c2)``.  ``custom`` wraps any vectorised callable
    and relies on :meth:`validate`.
    """

    kind: str
    params: tuple = ()
    func: object = field(default=None, compare=False)

    @classmethod
    def linear(cls, lam, c=0.0):
        if c < 0:
            raise ValidationError("linear generator needs a nonnegative intercept")
        return cls("linear", (float(lam), float(c)))

    @classmethod
    def neg_square(cls):
        return cls("neg_square")

    @classmethod
    def min_linear(cls, l1, c1, l2, c2):
        if c1 < 0 or c2 < 0:
            raise ValidationError("min_linear generator needs nonnegative intercepts")
        return cls("min_linear", (float(l1), float(c1), float(l2), float(c2)))

    @classmethod
    def custom(cls, func, name="custom"):
        return cls(name, (), func)

    def __call__(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.kind == "linear":
            lam, c = self.params
            out = lam * n + c
        elif self.kind == "neg_square":
            out = -n * n
        elif self.kind == "min_linear":
            l1, c1, l2, c2 = self.params
            out = np.minimum(l1 * n + c1, l2 * n + c2)
        elif self.func is not None:
            out = np.asarray(self.func(n), dtype=np.float64)
        else:
            raise ValidationError(f"unknown sequence kind {self.kind!r}")
        return np.where(n == 0, 0.0, out)

    def validate(self, n_range=10_000, pairs=10_000, seed=0):
        rng = np.random.default_rng(seed)
        n = rng.integers(1, n_range + 1, size=pairs)
        m = rng.integers(1, n_range + 1, size=pairs)
        lhs, rhs = self(n + m), self(n) + self(m)
        slack = 1e-12 + 1e-10 * np.maximum(np.abs(lhs), np.abs(rhs))
        bad = np.nonzero(lhs > rhs + slack)[0]
        if bad.size:
            i = bad[0]
            raise ValidationError(f"sequence {self.kind} is not subadditive: a({n[i] + m[i]}) > a({n[i]}) + a({m[i]})")

    def label(self):
        return self.kind + ("(" + ",".join(f"{p:g}" for p in self.params) + ")" if self.params else "")


@dataclass
class AlphaCheck:
    sequence: str
    n: int
    direct: float
    alpha_formula: float
    difference: float
    divergent: bool
    passed: bool
    argmax_k: int


def verify_alpha_property(seq, n_max, alpha=AlphaSequence(), tol=0.01, divergence_threshold=-1e3):
    """Compare ``a_n / n`` with ``max_k (a_{n-k} + s_k) / n`` at ``n = n_max``.

    Passes when the two differ by at most ``tol``, or when both fall below
    ``divergence_threshold`` (the rate is minus infinity).
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    seq.validate()
    a = seq(np.arange(n_max + 1))
    s = alpha.partial_log_sums(n_max)
    terms = a[::-1] + s  # k-th entry: a_{n-k} + s_k
    k = int(np.argmax(terms))
    direct = float(a[n_max] / n_max)
    formula = float(terms[k] / n_max)
    divergent = direct <= divergence_threshold and formula <= divergence_threshold
    diff = formula - direct
    return AlphaCheck(seq.label(), n_max, direct, formula, diff, divergent, bool(abs(diff) <= tol or divergent), k)


# ---------------------------------------------------------------------------
# extended products


@dataclass(frozen=True)
class ExtendedWord:
    base: object
    word: tuple
    alpha: AlphaSequence = AlphaSequence()

    def __post_init__(self):
        if isinstance(self.base, MatrixSet):
            word = check_word(self.base, self.word)
        elif isinstance(self.base, opshift.OperatorFamily):
            word = tuple(int(i) for i in self.word)
            if not word or any(i < 0 or i >= len(self.base) for i in word):
                raise ValidationError(f"invalid word {word} for a family of size {len(self.base)}")
        else:
            raise ValidationError("base must be a MatrixSet or OperatorFamily")
        object.__setattr__(self, "word", word)

    def __len__(self):
        return len(self.word)


def _prefix_log_norms(ew, seminorm=False):
    """``log ||L_j ... L_1||`` for ``j = 1..n`` (seminorm ``||.||_f`` if asked)."""
    n = len(ew)
    if isinstance(ew.base, MatrixSet):
        if seminorm:
            return np.full(n, -np.inf)
        mats = np.stack([ew.base.members[i] for i in ew.word])
        prods, logs = kernels.prefix_products(mats, period=1)
        nrm, _ = kernels.stack_norm_rho(prods)
        with np.errstate(divide="ignore"):
            return np.log(nrm) + logs
    out = np.empty(n)
    fn = opshift.seminorm_f if seminorm else opshift.op_norm
    p = None
    for j, i in enumerate(ew.word):
        m = ew.base.members[i]
        p = m if p is None else opshift.compose(m, p)
        with np.errstate(divide="ignore"):
            out[j] = np.log(fn(p))
    return out


def _max_formula(prefix_logs, alpha):
    n = prefix_logs.size
    s = alpha.partial_log_sums(n)
    # k = 0..n uses prefix length n-k; length 0 is the empty product with log-norm 0
    full = np.concatenate([[0.0], prefix_logs])
    terms = full[::-1] + s
    return float(np.max(terms))


def extended_log_norm(ew):
    return _max_formula(_prefix_log_norms(ew), ew.alpha)


def extended_norm(ew):
    """Norm of ``E(L_n) ... E(L_1)`` from the max formula."""
    return float(np.exp(extended_log_norm(ew)))


def extended_seminorm_f(ew):
    """Same max formula with ``||.||_f`` of the prefixes.

    The ambient space of the extension is infinite-dimensional, so the
    empty-product term keeps weight 1 while every matrix prefix contributes 0;
    for matrices the result is ``prod_{i<=n} a_i``.
    """
    return float(np.exp(_max_formula(_prefix_log_norms(ew, seminorm=True), ew.alpha)))


def truncated_extension(mat, alpha, levels):
    """Dense ``levels``-block truncation of ``E(mat)``."""
    mat = as_matrix(mat, square=True)
    d = mat.shape[0]
    e = np.zeros((d * levels, d * levels))
    e[:d, :d] = mat
    a = alpha.values(levels - 1)
    for i in range(1, levels):
        e[i * d : (i + 1) * d, (i - 1) * d : i * d] = a[i - 1] * np.eye(d)
    return e


def block_sup_norm(op, d, levels):
    """Norm from ``(X^levels, sup)`` to itself of an operator with one block per row."""
    best = 0.0
    for r in range(levels):
        row = op[r * d : (r + 1) * d]
        blocks = [row[:, c * d : (c + 1) * d] for c in range(levels)]
        nonzero = [b for b in blocks if np.any(b != 0.0)]
        if len(nonzero) > 1:
            raise ValidationError(f"block row {r} has {len(nonzero)} nonzero blocks")
        if nonzero:
            best = max(best, float(np.linalg.norm(nonzero[0], 2)))
    return best


def truncated_extension_norm(ew, levels):
    """Independent check of :func:`extended_norm` via explicit block matrices."""
    if not isinstance(ew.base, MatrixSet):
        raise ValidationError("the truncation oracle is only built for matrix sets")
    n = len(ew)
    if levels < n + 1:
        raise ValidationError(f"need at least {n + 1} levels for a word of length {n}")
    d = ew.base.dim
    prod = np.eye(d * levels)
    for i in ew.word:
        prod = truncated_extension(ew.base.members[i], ew.alpha, levels) @ prod
    return block_sup_norm(prod, d, levels)


def extended_power_rate(mat, n, alpha=AlphaSequence()):
    """``(1/n) log ||E(L)^n||`` for a single matrix, evaluated on a log scale."""
    mat = as_matrix(mat, square=True)
    ew = ExtendedWord(MatrixSet.of(mat), (0,) * n, alpha)
    return extended_log_norm(ew) / n


def extended_radii(base, n_max, alpha=AlphaSequence(), budget=DEFAULT_NODE_BUDGET, backend=None):
    """Radii columns of ``E(base)`` next to those of ``base``.

    Returns ``(base_report, extended_report)``.  The spectral-radius column is
    shared: ``rho`` of an extended product equals ``rho`` of the product.
    """
    rep = bw_report(base, n_max, budget=budget, backend=backend)
    n = rep.n
    if n.size == 0:
        return rep, rep
    with np.errstate(divide="ignore"):
        log_sup = n * np.log(rep.norm_sup)  # log sup ||A^j||, j = 1..N
    s = alpha.partial_log_sums(int(n[-1]))
    ext_log = np.empty(n.size)
    for idx, nn in enumerate(n):
        full = np.concatenate([[0.0], log_sup[:nn]])
        ext_log[idx] = np.max(full[::-1] + s[: nn + 1])
    ext_norm = np.exp(ext_log / n)
    ext_upper = np.minimum.accumulate(ext_norm)
    ext = RadiiReport(
        n=n,
        norm_sup=ext_norm,
        gelfand_max=rep.gelfand_max.copy(),
        upper=ext_upper,
        lower=rep.lower.copy(),
        complete=rep.complete,
        label=f"E({base.label})",
        rho_chi=rep.rho_chi,
        rho_f=rep.rho_f,
    )
    for i in range(n.size):
        if not leq(ext.lower[i], ext.upper[i]):
            raise InvariantViolation(f"extended lower exceeds extended upper at n={n[i]}")
    ext.notes["rho_columns_equal"] = bool(np.array_equal(ext.gelfand_max, rep.gelfand_max))
    ext.notes["norm_limit_gap"] = float(abs(ext.upper[-1] - rep.upper[-1]))
    return rep, ext
