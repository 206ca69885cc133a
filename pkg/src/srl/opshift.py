"""Operators ``L = F + D S^m`` on l^2(N) with exact norms and seminorms.

``F`` is a finite matrix acting on the first basis vectors, ``S`` is the
forward shift ``S e_i = e_{i+1}`` and ``(D S^m) e_i = d_i e_{i+m}`` with
``d_i`` given by ``diag_prefix`` and equal to ``tail_weight`` afterwards.
Indices are 0-based.

The class is closed under composition, and everything interesting about an
element reduces to a finite corner:

* Let ``N >= max(cols F, len prefix, rows F - m)``.  Columns ``j >= N`` map to
  ``w e_{j+m}``, mutually orthogonal and orthogonal to the images of the first
  ``N`` columns, so ``||L|| = max(||corner||, |w|)`` where the corner is the
  ``(N+m) x N`` block.
* ``L`` differs from ``w S^m`` by a finite-rank operator, and ``S^m`` is an
  isometry, so the distance from ``L`` to the finite-rank operators is ``|w|``.
  On a Hilbert space this is also the Hausdorff measure of noncompactness.
* With ``N >= max(cols F, len prefix)`` the span of ``e_j, j >= N`` is invariant
  and ``L`` is block lower triangular, hence ``sigma(L)`` is the union of the
  spectrum of the ``N x N`` corner and that of ``w S^m`` (the closed disc of
  radius ``|w|``, or ``{w}`` when ``m = 0``).

``tail_weight`` may be negative so that differences stay in the class; only
``|w|`` enters the formulas.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .jsr import DEFAULT_NODE_BUDGET, InvariantViolation, RadiiReport, affordable_levels
from .linalg import ValidationError, close, leq

TRUNCATION_CAP = 4096


def _trim(f):
    nz = np.nonzero(f)
    if nz[0].size == 0:
        return np.zeros((0, 0))
    return np.ascontiguousarray(f[: nz[0].max() + 1, : nz[1].max() + 1])


def _pad(f, rows, cols):
    out = np.zeros((rows, cols))
    out[: f.shape[0], : f.shape[1]] = f
    return out


@dataclass(frozen=True, eq=False)
class ShiftFinRankOperator:
    finite: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    diag_prefix: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tail_weight: float = 0.0
    shift_power: int = 0

    def __post_init__(self):
        f = np.asarray(self.finite, dtype=np.float64)
        if f.size == 0:
            f = np.zeros((0, 0))
        if f.ndim != 2:
            raise ValidationError("finite part must be a 2-D array")
        d = np.asarray(self.diag_prefix, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(d)) and np.isfinite(self.tail_weight)):
            raise ValidationError("operator has non-finite data")
        if int(self.shift_power) != self.shift_power or self.shift_power < 0:
            raise ValidationError("shift power must be a nonnegative integer")
        f = _trim(f)
        f.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "finite", f)
        object.__setattr__(self, "diag_prefix", d)
        object.__setattr__(self, "tail_weight", float(self.tail_weight))
        object.__setattr__(self, "shift_power", int(self.shift_power))

    @classmethod
    def from_entries(cls, entries=(), diag_prefix=(), tail_weight=0.0, shift_power=0):
        entries = list(entries)
        for e in entries:
            if len(e) != 3 or int(e[0]) != e[0] or int(e[1]) != e[1] or e[0] < 0 or e[1] < 0:
                raise ValidationError(f"bad finite-part entry {e!r}; expected [row, col, value]")
        rows = max((int(e[0]) + 1 for e in entries), default=0)
        cols = max((int(e[1]) + 1 for e in entries), default=0)
        f = np.zeros((rows, cols))
        for r, c, v in entries:
            f[int(r), int(c)] += v
        return cls(f, diag_prefix, tail_weight, shift_power)

    @classmethod
    def shift(cls, m=1, weight=1.0):
        return cls(tail_weight=weight, shift_power=m)

    def entries(self):
        r, c = np.nonzero(self.finite)
        return [(int(i), int(j), float(self.finite[i, j])) for i, j in zip(r, c)]

    @property
    def prefix_len(self):
        return self.diag_prefix.size

    def weights(self, n):
        """``d_0, ..., d_{n-1}``."""
        w = np.full(n, self.tail_weight)
        k = min(n, self.prefix_len)
        w[:k] = self.diag_prefix[:k]
        return w

    def norm_size(self):
        f = self.finite
        return max(f.shape[1], self.prefix_len, f.shape[0] - self.shift_power, 0)

    def invariant_size(self):
        return max(self.finite.shape[1], self.prefix_len)

    def support_bound(self):
        """Every nonzero entry of the finite part and prefix lies below this index."""
        return max(self.finite.shape[0], self.finite.shape[1], self.prefix_len)

    def block(self, rows, cols):
        """Dense ``rows x cols`` top-left block of the infinite matrix."""
        out = np.zeros((rows, cols))
        f = self.finite
        r, c = min(rows, f.shape[0]), min(cols, f.shape[1])
        out[:r, :c] = f[:r, :c]
        m = self.shift_power
        j = np.arange(max(0, min(cols, rows - m)))
        out[j + m, j] += self.weights(j.size)
        return out

    def truncation(self, n):
        return self.block(n, n)

    def apply(self, v):
        """Image of a finitely supported vector (zero-padded as needed)."""
        v = np.asarray(v, dtype=np.float64)
        out = np.zeros(max(v.size + self.shift_power, self.finite.shape[0]))
        c = min(v.size, self.finite.shape[1])
        out[: self.finite.shape[0]] += self.finite[:, :c] @ v[:c]
        out[self.shift_power : self.shift_power + v.size] += self.weights(v.size) * v
        return out


def compose(l1, l2):
    """Exact representation of ``l1 @ l2`` (``l2`` acts first)."""
    m1, m2 = l1.shift_power, l2.shift_power
    f1, f2 = l1.finite, l2.finite
    # weighted shift part: (D1 S^m1)(D2 S^m2) e_i = d2_i d1_{i+m2} e_{i+m1+m2}
    t = max(l2.prefix_len, l1.prefix_len - m2, 0)
    prefix = l2.weights(t) * l1.weights(t + m2)[m2:]
    rows = max(f1.shape[0], f2.shape[0] + m1)
    cols = max(f2.shape[1], f1.shape[1] - m2, 0)
    f = np.zeros((rows, cols))
    if f1.size:
        # F1 D2 S^m2: column i picks F1 column i+m2 scaled by d2_i
        n = f1.shape[1] - m2
        if n > 0:
            f[: f1.shape[0], :n] += f1[:, m2:] * l2.weights(n)[None, :]
        if f2.size:
            inner = max(f1.shape[1], f2.shape[0])
            f[: f1.shape[0], : f2.shape[1]] += _pad(f1, f1.shape[0], inner) @ _pad(f2, inner, f2.shape[1])
    if f2.size:
        # D1 S^m1 F2: row r of F2 moves to row r+m1, scaled by d1_r
        f[m1 : m1 + f2.shape[0], : f2.shape[1]] += l1.weights(f2.shape[0])[:, None] * f2
    return ShiftFinRankOperator(f, prefix, l1.tail_weight * l2.tail_weight, m1 + m2)


def add(l1, l2):
    if l1.shift_power != l2.shift_power:
        raise ValidationError("sum of operators with different shift powers leaves the class")
    rows = max(l1.finite.shape[0], l2.finite.shape[0])
    cols = max(l1.finite.shape[1], l2.finite.shape[1])
    t = max(l1.prefix_len, l2.prefix_len)
    return ShiftFinRankOperator(
        _pad(l1.finite, rows, cols) + _pad(l2.finite, rows, cols),
        l1.weights(t) + l2.weights(t),
        l1.tail_weight + l2.tail_weight,
        l1.shift_power,
    )


def scale(l, c):
    return ShiftFinRankOperator(c * l.finite, c * l.diag_prefix, c * l.tail_weight, l.shift_power)


def identity():
    return ShiftFinRankOperator(tail_weight=1.0)


def op_norm(l):
    """Exact operator 2-norm via the finite corner (see module docstring)."""
    n = l.norm_size()
    w = abs(l.tail_weight)
    if n == 0:
        return w
    corner = l.block(n + l.shift_power, n)
    return max(float(np.linalg.norm(corner, 2)), w)


def seminorm_f(l):
    """Distance to the finite-rank operators: the tail weight in absolute value."""
    return abs(l.tail_weight)


def seminorm_chi(l):
    """Hausdorff measure of noncompactness; equals :func:`seminorm_f` on Hilbert space."""
    return seminorm_f(l)


@dataclass
class RadiusEstimate:
    value: float
    stable: bool
    essential: float
    candidates: tuple


def spectral_radius_estimate(l, tol=1e-9):
    """``max(|w|, rho_disc)`` with a stability check under truncation doubling.

    ``rho_disc`` is the largest eigenvalue modulus of the ``N x N`` truncation
    that exceeds ``|w|(1 + tol)``, taken at ``N, 2N, 4N`` (capped).  The value is
    stable when the three candidates agree to ``tol``.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    w = abs(l.tail_weight)
    n0 = l.invariant_size()
    if n0 == 0:
        return RadiusEstimate(w, True, w, ())
    threshold = w * (1.0 + tol)
    sizes = sorted({min(s, TRUNCATION_CAP) for s in (n0, 2 * n0, 4 * n0)})
    cands = []
    for s in sizes:
        ev = np.abs(np.linalg.eigvals(l.truncation(s)))
        ev = ev[ev > threshold]
        cands.append(float(ev.max()) if ev.size else None)
    found = [c for c in cands if c is not None]
    if not found:
        return RadiusEstimate(w, True, w, tuple(cands))
    stable = len(found) == len(cands) and max(found) - min(found) <= tol * max(1.0, max(found))
    return RadiusEstimate(max(w, cands[0] if cands[0] is not None else max(found)), stable, w, tuple(cands))


def op_spectral_radius(l, tol=1e-9):
    est = spectral_radius_estimate(l, tol)
    if not est.stable:
        warnings.warn(f"discrete spectrum did not stabilise under truncation doubling: {est.candidates}")
    return est.value


@dataclass(frozen=True)
class OperatorFamily:
    members: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValidationError("operator family must be nonempty")
        for m in self.members:
            if not isinstance(m, ShiftFinRankOperator):
                raise ValidationError(f"family member {m!r} is not a ShiftFinRankOperator")
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self):
        return len(self.members)


def product_of_word(fam, word):
    word = tuple(int(i) for i in word)
    if not word or any(i < 0 or i >= len(fam) for i in word):
        raise ValidationError(f"invalid word {word} for a family of size {len(fam)}")
    p = fam.members[word[0]]
    for i in word[1:]:
        p = compose(fam.members[i], p)
    return p


def family_radii(fam, n_max, budget=DEFAULT_NODE_BUDGET, tol=1e-9):
    """Per-length radii columns for a family, by exhaustive word enumeration.

    Adds ``f_sup``/``chi_sup`` columns to the usual report.  ``notes`` carries
    the residuals of ``rho_hat = max(rho_chi, rho_r)`` and ``rho_chi = rho_f``
    plus the number of words whose spectral radius did not stabilise.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    k = len(fam)
    levels = affordable_levels(k, n_max, budget)
    norm_sup = np.full(levels, -1.0)
    f_sup = np.full(levels, -1.0)
    rho_max = np.full(levels, -1.0)
    norm_words = [()] * levels
    rho_words = [()] * levels
    unstable = 0

    def visit(prefix_op, word):
        nonlocal unstable
        depth = len(word) - 1
        nrm = op_norm(prefix_op)
        fval = seminorm_f(prefix_op)
        est = spectral_radius_estimate(prefix_op, tol)
        unstable += not est.stable
        if nrm > norm_sup[depth]:
            norm_sup[depth] = nrm
            norm_words[depth] = tuple(word)
        if fval > f_sup[depth]:
            f_sup[depth] = fval
        if est.value > rho_max[depth]:
            rho_max[depth] = est.value
            rho_words[depth] = tuple(word)
        if depth + 1 < levels:
            for i, member in enumerate(fam.members):
                visit(compose(member, prefix_op), word + [i])

    for i, member in enumerate(fam.members):
        if levels:
            visit(member, [i])

    n = np.arange(1, levels + 1)
    with np.errstate(divide="ignore"):
        norm_root = norm_sup ** (1.0 / n)
        f_root = f_sup ** (1.0 / n)
        rho_root = rho_max ** (1.0 / n)
    upper = np.minimum.accumulate(norm_root) if levels else norm_root
    lower = np.maximum.accumulate(rho_root) if levels else rho_root
    f_run = np.minimum.accumulate(f_root) if levels else f_root
    for i in range(levels):
        if not leq(lower[i], upper[i]):
            raise InvariantViolation(f"lower {lower[i]!r} exceeds upper {upper[i]!r} at n={n[i]}")
    rho_f = float(f_run[-1]) if levels else float("nan")
    rep = RadiiReport(
        n=n,
        norm_sup=norm_root,
        gelfand_max=rho_root,
        upper=upper,
        lower=lower,
        complete=levels == n_max,
        label=fam.label,
        f_sup=f_root,
        chi_sup=f_root.copy(),
        rho_chi=rho_f,
        rho_f=rho_f,
        norm_words=norm_words,
        gelfand_words=rho_words,
    )
    if levels:
        rep.notes["gbwf_residual"] = abs(rep.rho_hat - max(rep.rho_chi, rep.rho_r))
        rep.notes["he_residual"] = abs(rep.rho_chi - rep.rho_f)
        rep.notes["gbwf_holds"] = close(rep.rho_hat, max(rep.rho_chi, rep.rho_r))
    rep.notes["unstable_words"] = unstable
    return rep


def random_operator(rng, max_support=4, max_prefix=4, max_shift=3, scale_=1.0):
    """A random class member, for property tests and benchmarks."""
    rows, cols = rng.integers(0, max_support + 1, size=2)
    f = rng.normal(size=(rows, cols)) * scale_ if rows and cols else np.zeros((0, 0))
    prefix = rng.normal(size=rng.integers(0, max_prefix + 1)) * scale_
    w = abs(rng.normal()) * scale_
    return ShiftFinRankOperator(f, prefix, w, int(rng.integers(0, max_shift + 1)))
