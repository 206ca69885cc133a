"""Joint spectral radius bounds for finite sets of matrices.

Words are index tuples ``(i_1, ..., i_n)`` and denote the product
``A[i_n] @ ... @ A[i_1]``: the leftmost index acts first.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linalg import ValidationError, as_matrix, leq

DEFAULT_NODE_BUDGET = 4_000_000


class InvariantViolation(RuntimeError):
    """A computed report contradicts an inequality that must hold."""


@dataclass(frozen=True)
class MatrixSet:
    members: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValidationError("matrix set must be nonempty")
        mats = tuple(as_matrix(m, square=True) for m in self.members)
        dims = {m.shape[0] for m in mats}
        if len(dims) != 1:
            raise ValidationError(f"members have differing dimensions {sorted(dims)}")
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "members", mats)

    @classmethod
    def of(cls, *mats, label=""):
        return cls(tuple(mats), label)

    @property
    def dim(self):
        return self.members[0].shape[0]

    def __len__(self):
        return len(self.members)

    def stack(self):
        return np.stack(self.members)

    def scaled(self, c):
        return MatrixSet(tuple(c * m for m in self.members), self.label)


def check_word(mset, word):
    word = tuple(int(i) for i in word)
    if len(word) == 0:
        raise ValidationError("word must have length >= 1")
    if any(i < 0 or i >= len(mset) for i in word):
        raise ValidationError(f"word {word} has an index outside [0, {len(mset)})")
    return word


def product_of_word(mset, word):
    """``A[i_n] @ ... @ A[i_1]`` for ``word = (i_1, ..., i_n)``."""
    word = check_word(mset, word)
    p = mset.members[word[0]].copy()
    for i in word[1:]:
        p = mset.members[i] @ p
    return p


def word_power_set(mset, k):
    """The set of all length-``k`` products, in lexicographic word order."""
    prods = [product_of_word(mset, w) for w in itertools.product(range(len(mset)), repeat=k)]
    return MatrixSet(tuple(prods), f"{mset.label}^{k}")


def rescale_by_norm(mset):
    """Divide every member by the largest member norm; returns ``(set, factor)``."""
    factor = max(float(np.linalg.norm(m, 2)) for m in mset.members)
    if factor == 0.0:
        return mset, 1.0
    return mset.scaled(1.0 / factor), factor


@dataclass
class BoundSequence:
    """Per-length values ``sup ||P||^{1/n}`` (or ``max rho(P)^{1/n}``) and their running bound."""

    n: np.ndarray
    values: np.ndarray
    running: np.ndarray
    words: list
    complete: bool


@dataclass
class RadiiReport:
    n: np.ndarray
    norm_sup: np.ndarray
    gelfand_max: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    complete: bool = True
    label: str = ""
    f_sup: np.ndarray = None
    chi_sup: np.ndarray = None
    rho_chi: float = 0.0
    rho_f: float = 0.0
    norm_words: list = field(default_factory=list)
    gelfand_words: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def gap(self):
        return self.upper - self.lower

    @property
    def rho_hat(self):
        return float(self.upper[-1]) if self.upper.size else float("nan")

    @property
    def rho_r(self):
        return float(self.lower[-1]) if self.lower.size else float("nan")

    def columns(self):
        cols = {
            "n": self.n,
            "norm_sup": self.norm_sup,
            "gelfand_max": self.gelfand_max,
            "upper": self.upper,
            "lower": self.lower,
            "gap": self.gap,
        }
        if self.f_sup is not None:
            cols["f_sup"] = self.f_sup
        if self.chi_sup is not None:
            cols["chi_sup"] = self.chi_sup
        return cols


def affordable_levels(k, n_max, budget):
    """Largest ``L <= n_max`` with ``k + k^2 + ... + k^L <= budget``."""
    total, levels = 0, 0
    for n in range(1, n_max + 1):
        total += k**n
        if total > budget:
            break
        levels = n
    return levels


def _enumerate(mset, n_max, budget, backend):
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    levels = affordable_levels(len(mset), n_max, budget)
    if levels == 0:
        empty = np.empty(0)
        return np.arange(1, 1), empty, empty, [], [], False
    norm_raw, rho_raw, nw, rw = kernels.enumerate_words(mset.stack(), levels, backend=backend)
    n = np.arange(1, levels + 1)
    with np.errstate(divide="ignore"):
        norm_root = norm_raw ** (1.0 / n)
        rho_root = rho_raw ** (1.0 / n)
    norm_words = [tuple(int(v) for v in nw[i, : i + 1]) for i in range(levels)]
    rho_words = [tuple(int(v) for v in rw[i, : i + 1]) for i in range(levels)]
    return n, norm_root, rho_root, norm_words, rho_words, levels == n_max


def norm_upper_bound(mset, n_max, budget=DEFAULT_NODE_BUDGET, backend=None):
    """Exhaustive ``sup ||P||^{1/n}`` over words of each length, with its running infimum.

    The running infimum bounds the joint spectral radius from above.  When the
    node budget cannot cover every length up to ``n_max`` the sequence stops
    early and ``complete`` is False.
    """
    n, vals, _, words, _, complete = _enumerate(mset, n_max, budget, backend)
    return BoundSequence(n, vals, np.minimum.accumulate(vals) if vals.size else vals, words, complete)


def gelfand_lower_bound(mset, n_max, budget=DEFAULT_NODE_BUDGET, backend=None):
    """Exhaustive ``max rho(P)^{1/n}`` per length, with its running maximum (a lower bound).

    For a periodic orbit of the full shift the value ``rho(P)^{1/n}`` is also the
    exponential growth rate that orbit's invariant measure assigns to the
    cocycle, so the running maximum is a search over periodic measures.
    """
    n, _, vals, _, words, complete = _enumerate(mset, n_max, budget, backend)
    return BoundSequence(n, vals, np.maximum.accumulate(vals) if vals.size else vals, words, complete)


def bw_report(mset, n_max, budget=DEFAULT_NODE_BUDGET, backend=None):
    """Both exhaustive bounds side by side, with the gap sequence.

    Raises :class:`InvariantViolation` if ``lower > upper`` at any length.  The
    compactness radii are zero: every operator on a finite-dimensional space
    is compact.
    """
    n, norm_root, rho_root, nwords, rwords, complete = _enumerate(mset, n_max, budget, backend)
    upper = np.minimum.accumulate(norm_root) if n.size else norm_root
    lower = np.maximum.accumulate(rho_root) if n.size else rho_root
    for i in range(n.size):
        if not leq(lower[i], upper[i]):
            raise InvariantViolation(f"lower {lower[i]!r} exceeds upper {upper[i]!r} at n={n[i]}")
    return RadiiReport(
        n=n,
        norm_sup=norm_root,
        gelfand_max=rho_root,
        upper=upper,
        lower=lower,
        complete=complete,
        label=mset.label,
        rho_chi=0.0,
        rho_f=0.0,
        norm_words=nwords,
        gelfand_words=rwords,
    )


@dataclass
class GripenbergResult:
    lower: float
    upper: float
    complete: bool
    depth: int
    evaluated: int
    lower_word: tuple

    @property
    def width(self):
        return self.upper - self.lower


def gripenberg_bounds(mset, delta, budget=1_000_000, max_depth=None, backend=None):
    """Branch-and-bound enclosure of the joint spectral radius.

    Products are explored level by level.  A word is dropped once its prefix
    bound ``min_k ||P_k||^{1/k}`` falls to ``lower + delta``; every word of
    length ``n`` then has a prefix segment whose normalised norm is at most
    ``max(frontier bounds, dropped bounds)``, which is therefore an upper
    bound.  ``budget`` caps the number of products evaluated.
    """
    if not delta > 0:
        raise ValidationError("delta must be positive")
    mats = mset.stack()
    k, dim = mats.shape[0], mats.shape[1]
    if k > budget:
        raise ValidationError("budget smaller than the alphabet")

    nrm, rho = kernels.stack_norm_rho(mats, backend=backend)
    evaluated = k
    j = int(np.argmax(rho))
    lower, lower_word = float(rho[j]), (j,)
    bound = nrm.copy()
    prods = mats
    logs = np.zeros(k)
    words = np.arange(k)[:, None]
    keep = bound > lower + delta
    pruned_max = float(bound[~keep].max()) if (~keep).any() else -np.inf
    frontier_max = float(bound[keep].max()) if keep.any() else -np.inf
    upper = max(pruned_max, frontier_max)
    prods, bound, words, logs = prods[keep], bound[keep], words[keep], logs[keep]
    depth = 1
    complete = True

    while upper - lower > delta and prods.shape[0] > 0:
        if max_depth is not None and depth >= max_depth:
            complete = False
            break
        m = prods.shape[0]
        if evaluated + m * k > budget:
            complete = False
            break
        depth += 1
        prods = np.matmul(mats[None, :], prods[:, None]).reshape(-1, dim, dim)
        words = np.concatenate([np.repeat(words, k, axis=0), np.tile(np.arange(k), m)[:, None]], axis=1)
        bound = np.repeat(bound, k)
        logs = np.repeat(logs, k)
        evaluated += m * k
        nrm, rho = kernels.stack_norm_rho(prods, backend=backend)
        with np.errstate(divide="ignore"):
            nrm_root = np.exp((np.log(nrm) + logs) / depth)
            rho_root = np.exp((np.log(rho) + logs) / depth)
        j = int(np.argmax(rho_root))
        if rho_root[j] > lower:
            lower, lower_word = float(rho_root[j]), tuple(int(v) for v in words[j])
        bound = np.minimum(bound, nrm_root)
        keep = bound > lower + delta
        if (~keep).any():
            pruned_max = max(pruned_max, float(bound[~keep].max()))
        frontier_max = float(bound[keep].max()) if keep.any() else -np.inf
        upper = min(upper, max(pruned_max, frontier_max))
        prods, bound, words, logs = prods[keep], bound[keep], words[keep], logs[keep]
        # survivors have nonzero norm (bound > lower + delta > 0); keep them O(1)
        scale = np.sqrt(np.sum(prods * prods, axis=(1, 2)))
        prods = prods / scale[:, None, None]
        logs = logs + np.log(scale)

    return GripenbergResult(lower, upper, complete, depth, evaluated, lower_word)
