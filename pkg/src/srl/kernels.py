"""Hot numeric loops, each in two flavours.

Every public kernel takes a ``backend`` argument (``"numba"``, ``"numpy"`` or
``None`` for the default).  The numba variants are explicit loops without
temporaries (word enumeration also splits the tree into disjoint subtrees
run under ``prange``); the numpy variants batch over the independent axis
instead.  Both must agree to
rounding, see ``tests/test_kernels.py``.
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit, prange, set_threads

__all__ = [
    "HAVE_NUMBA",
    "default_backend",
    "enumerate_words",
    "prefix_products",
    "window_products",
    "qr_exponents",
    "stack_norm_rho",
]


def default_backend():
    return "numba" if HAVE_NUMBA else "numpy"


def _resolve(backend):
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend


# ---------------------------------------------------------------------------
# scalar helpers (compiled when numba is present, plain python otherwise)


@njit(cache=True, nogil=True)
def _norm_rho_2x2(a, b, c, d):
    # largest singular value and spectral radius of [[a, b], [c, d]]
    # sigma_1 = (|(a+d, b-c)| + |(a-d, b+c)|) / 2 avoids the fro^2 - 4 det^2 cancellation
    s1 = 0.5 * (np.hypot(a + d, b - c) + np.hypot(a - d, b + c))
    tr = a + d
    edisc = (a - d) * (a - d) + 4.0 * b * c
    if edisc >= 0.0:
        rho = 0.5 * (abs(tr) + np.sqrt(edisc))
    else:
        rho = 0.5 * np.sqrt(tr * tr - edisc)
    return s1, rho


@njit(cache=True, nogil=True)
def _norm_rho(p):
    n = p.shape[0]
    if n == 2:
        return _norm_rho_2x2(p[0, 0], p[0, 1], p[1, 0], p[1, 1])
    s = np.linalg.svd(p)[1]
    ev = np.linalg.eigvals(p.astype(np.complex128))
    return s[0], np.max(np.abs(ev))


@njit(cache=True, nogil=True)
def _mul_into(a, b, out):
    # out = a @ b for small square blocks, no temporaries
    d = a.shape[0]
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for l in range(d):
                acc += a[i, l] * b[l, j]
            out[i, j] = acc


@njit(cache=True, nogil=True)
def _renorm(cur):
    s = np.sqrt(np.sum(cur * cur))
    if s > 0.0:
        cur /= s
        return np.log(s)
    return 0.0


# ---------------------------------------------------------------------------
# word enumeration


@njit(cache=True, nogil=True)
def _enumerate_subtree(mats, n_levels, root, norm_sup, rho_max, norm_word, rho_word):
    # depth-first over words whose first len(root) letters equal root, in
    # lexicographic order; the first strict maximum found is the least word
    k = mats.shape[0]
    dim = mats.shape[1]
    p = root.shape[0]
    prods = np.empty((n_levels + 1, dim, dim))
    prods[0] = np.eye(dim)
    word = np.full(n_levels, -1, dtype=np.int64)
    if p > 0:
        word[0] = root[0] - 1
    depth = 0
    while depth >= 0:
        word[depth] += 1
        if word[depth] >= k or (depth < p and word[depth] != root[depth]):
            word[depth] = -1
            depth -= 1
            continue
        _mul_into(mats[word[depth]], prods[depth], prods[depth + 1])
        nrm, rho = _norm_rho(prods[depth + 1])
        if nrm > norm_sup[depth]:
            norm_sup[depth] = nrm
            norm_word[depth, : depth + 1] = word[: depth + 1]
        if rho > rho_max[depth]:
            rho_max[depth] = rho
            rho_word[depth, : depth + 1] = word[: depth + 1]
        if depth + 1 < n_levels:
            if nrm == 0.0:
                # every extension of a zero product is zero: record the least
                # extension inside this subtree and skip it
                for lev in range(depth + 1, n_levels):
                    if norm_sup[lev] < 0.0 or rho_max[lev] < 0.0:
                        ext = np.zeros(lev + 1, dtype=np.int64)
                        ext[: depth + 1] = word[: depth + 1]
                        for q in range(depth + 1, min(p, lev + 1)):
                            ext[q] = root[q]
                        if norm_sup[lev] < 0.0:
                            norm_sup[lev] = 0.0
                            norm_word[lev, : lev + 1] = ext
                        if rho_max[lev] < 0.0:
                            rho_max[lev] = 0.0
                            rho_word[lev, : lev + 1] = ext
                continue
            depth += 1
            if depth < p:
                word[depth] = root[depth] - 1
    return


@njit(cache=True, parallel=True)
def _enumerate_words_jit(mats, n_levels, split):
    k = mats.shape[0]
    ntask = k**split
    ns = np.full((ntask, n_levels), -1.0)
    rs = np.full((ntask, n_levels), -1.0)
    nw = np.zeros((ntask, n_levels, n_levels), dtype=np.int64)
    rw = np.zeros((ntask, n_levels, n_levels), dtype=np.int64)
    for t in prange(ntask):
        root = np.empty(split, dtype=np.int64)
        for q in range(split):
            root[q] = (t // k ** (split - 1 - q)) % k
        _enumerate_subtree(mats, n_levels, root, ns[t], rs[t], nw[t], rw[t])
    # reduce in task (= lexicographic) order with strict comparisons
    norm_sup = ns[0].copy()
    rho_max = rs[0].copy()
    norm_word = nw[0].copy()
    rho_word = rw[0].copy()
    for t in range(1, ntask):
        for lev in range(n_levels):
            if ns[t, lev] > norm_sup[lev]:
                norm_sup[lev] = ns[t, lev]
                norm_word[lev] = nw[t, lev]
            if rs[t, lev] > rho_max[lev]:
                rho_max[lev] = rs[t, lev]
                rho_word[lev] = rw[t, lev]
    return norm_sup, rho_max, norm_word, rho_word


def _split_depth(k, n_levels, threads):
    # enough subtrees to balance the threads, never deeper than the tree
    if k < 2 or threads < 2:
        return 0
    split = 0
    while k**split < 4 * threads and split < n_levels - 1:
        split += 1
    return split


def _batch_norm_rho(stack):
    if stack.shape[0] == 0:
        return np.empty(0), np.empty(0)
    if stack.shape[1] == 2:
        a, b = stack[:, 0, 0], stack[:, 0, 1]
        c, d = stack[:, 1, 0], stack[:, 1, 1]
        s1 = 0.5 * (np.hypot(a + d, b - c) + np.hypot(a - d, b + c))
        tr = a + d
        edisc = (a - d) * (a - d) + 4.0 * b * c
        real = edisc >= 0.0
        rho = 0.5 * np.where(real, np.abs(tr) + np.sqrt(np.abs(edisc)), np.sqrt(tr * tr + np.abs(edisc)))
        return s1, rho
    s1 = np.linalg.svd(stack, compute_uv=False)[:, 0]
    rho = np.abs(np.linalg.eigvals(stack)).max(axis=1)
    return s1, rho


def _enumerate_words_np(mats, n_levels):
    k, dim = mats.shape[0], mats.shape[1]
    norm_sup = np.full(n_levels, -1.0)
    rho_max = np.full(n_levels, -1.0)
    norm_word = np.zeros((n_levels, n_levels), dtype=np.int64)
    rho_word = np.zeros((n_levels, n_levels), dtype=np.int64)
    prods = np.eye(dim)[None]
    words = np.zeros((1, 0), dtype=np.int64)
    for lev in range(n_levels):
        # level lev+1 in lexicographic order: parent-major, letter-minor
        prods = np.matmul(mats[None, :], prods[:, None]).reshape(-1, dim, dim)
        words = np.concatenate(
            [np.repeat(words, k, axis=0), np.tile(np.arange(k), words.shape[0])[:, None]], axis=1
        )
        nrm, rho = _batch_norm_rho(prods)
        i = int(np.argmax(nrm))
        norm_sup[lev] = nrm[i]
        norm_word[lev, : lev + 1] = words[i]
        j = int(np.argmax(rho))
        rho_max[lev] = rho[j]
        rho_word[lev, : lev + 1] = words[j]
    return norm_sup, rho_max, norm_word, rho_word


def enumerate_words(mats, n_levels, backend=None):
    """Exhaustive sup of ``||P||`` and max of ``rho(P)`` over words of each length.

    ``mats`` has shape ``(k, d, d)``; a word ``(i_1, ..., i_n)`` stands for
    ``mats[i_n] @ ... @ mats[i_1]``.  Returns ``(norm_sup, rho_max, norm_word,
    rho_word)`` where row ``n-1`` of the word arrays holds the lexicographically
    least maximiser of length ``n`` (padded with zeros).
    """
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    # above 2x2 the per-node LAPACK calls in the DFS cost more than batching them
    if _resolve(backend) == "numba" and mats.shape[1] == 2:
        threads = set_threads()
        return _enumerate_words_jit(mats, int(n_levels), _split_depth(mats.shape[0], int(n_levels), threads))
    return _enumerate_words_np(mats, int(n_levels))


# ---------------------------------------------------------------------------
# orbit products


@njit(cache=True, nogil=True)
def _prefix_products_jit(mats, period):
    n, dim = mats.shape[0], mats.shape[1]
    out = np.empty((n, dim, dim))
    logs = np.empty(n)
    prev = np.eye(dim)
    ledger = 0.0
    for t in range(n):
        _mul_into(mats[t], prev, out[t])
        if (t + 1) % period == 0:
            ledger += _renorm(out[t])
        logs[t] = ledger
        prev = out[t]
    return out, logs


def _prefix_products_np(mats, period):
    n, dim = mats.shape[0], mats.shape[1]
    out = np.empty((n, dim, dim))
    logs = np.empty(n)
    cur = np.eye(dim)
    ledger = 0.0
    for t in range(n):
        cur = mats[t] @ cur
        if (t + 1) % period == 0:
            s = np.sqrt(np.sum(cur * cur))
            if s > 0.0:
                cur = cur / s
                ledger += np.log(s)
        out[t] = cur
        logs[t] = ledger
    return out, logs


def prefix_products(mats, period=32, backend=None):
    """Running products ``A(x, t+1) = mats[t] @ ... @ mats[0]`` on a log ledger.

    The true product at step ``t`` is ``out[t] * exp(logs[t])``.  The scale is
    pulled out every ``period`` steps.
    """
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    if _resolve(backend) == "numba":
        return _prefix_products_jit(mats, int(period))
    return _prefix_products_np(mats, int(period))


@njit(cache=True, nogil=True)
def _window_products_jit(mats, starts, horizon, period):
    m, dim = starts.shape[0], mats.shape[1]
    out = np.empty((m, dim, dim))
    logs = np.zeros(m)
    cur = np.empty((dim, dim))
    nxt = np.empty((dim, dim))
    for j in range(m):
        cur[:] = 0.0
        for i in range(dim):
            cur[i, i] = 1.0
        ledger = 0.0
        s0 = starts[j]
        for h in range(horizon):
            _mul_into(mats[s0 + h], cur, nxt)
            cur, nxt = nxt, cur
            if (h + 1) % period == 0:
                ledger += _renorm(cur)
        out[j] = cur
        logs[j] = ledger
    return out, logs


def _window_products_np(mats, starts, horizon, period):
    m, dim = starts.shape[0], mats.shape[1]
    cur = np.broadcast_to(np.eye(dim), (m, dim, dim)).copy()
    logs = np.zeros(m)
    for h in range(horizon):
        cur = np.matmul(mats[starts + h], cur)
        if (h + 1) % period == 0:
            s = np.sqrt(np.sum(cur * cur, axis=(1, 2)))
            ok = s > 0.0
            cur[ok] /= s[ok, None, None]
            logs[ok] += np.log(s[ok])
    return cur, logs


def window_products(mats, starts, horizon, period=32, backend=None):
    """Products ``mats[s+H-1] @ ... @ mats[s]`` for every ``s`` in ``starts``."""
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    if starts.size and (starts.min() < 0 or starts.max() + horizon > mats.shape[0]):
        raise IndexError("window runs past the stored orbit")
    if _resolve(backend) == "numba":
        return _window_products_jit(mats, starts, int(horizon), int(period))
    return _window_products_np(mats, starts, int(horizon), int(period))


@njit(cache=True, nogil=True)
def _qr_exponents_jit(mats):
    n, dim = mats.shape[0], mats.shape[1]
    frame = np.eye(dim)
    sums = np.zeros(dim)
    for t in range(n):
        q, r = np.linalg.qr(mats[t] @ frame)
        for i in range(dim):
            v = abs(r[i, i])
            if v == 0.0:
                sums[i] = -np.inf
            else:
                sums[i] += np.log(v)
        frame = np.ascontiguousarray(q)
    return sums


def _qr_exponents_np(mats):
    dim = mats.shape[1]
    frame = np.eye(dim)
    sums = np.zeros(dim)
    with np.errstate(divide="ignore"):
        for a in mats:
            q, r = np.linalg.qr(a @ frame)
            sums += np.log(np.abs(np.diag(r)))
            frame = q
    return sums


def qr_exponents(mats, backend=None):
    """Sum over steps of ``log|diag R|`` from re-orthonormalising a frame."""
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    if _resolve(backend) == "numba":
        return _qr_exponents_jit(mats)
    return _qr_exponents_np(mats)


@njit(cache=True, nogil=True)
def _stack_norm_rho_jit(stack):
    m = stack.shape[0]
    nrm = np.empty(m)
    rho = np.empty(m)
    for i in range(m):
        nrm[i], rho[i] = _norm_rho(np.ascontiguousarray(stack[i]))
    return nrm, rho


def stack_norm_rho(stack, backend=None):
    """Operator 2-norm and spectral radius of each matrix in a stack."""
    stack = np.ascontiguousarray(stack, dtype=np.float64)
    if _resolve(backend) == "numba":
        return _stack_norm_rho_jit(stack)
    return _batch_norm_rho(stack)
