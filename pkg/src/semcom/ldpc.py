"""Rate-1/2 regular (3,6) LDPC code: construction, encoding, min-sum decoding.

Construction is a progressive greedy placement with 4-cycle avoidance:
every variable node connects to 3 distinct check nodes chosen so that no
pair of its checks was already bridged by an earlier variable (a bridged
pair is exactly a length-4 cycle). Check degrees are capped at 6, so the
finished graph is (3,6)-regular. For very short codes (n < 64) the pair
budget is combinatorially too small and some 4-cycles are unavoidable;
placement then minimizes the number of reused pairs instead.

Encoding is systematic. After construction, columns are permuted so the
last n/2 columns form an invertible square block B; the stored
parity_check is this permuted matrix and parity bits solve
B p = A u over GF(2) via a precomputed dense solution matrix.

Decoding is normalized min-sum belief propagation (scale 0.75), channel
LLRs clamped to +/-20, early exit as soon as all parity checks pass.
The batch decoder vectorizes over frames; the regular structure lets all
message arrays keep fixed shape (frames, n/2, 6).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidLength, LengthMismatch

__all__ = ["LdpcCode", "ldpc_construct", "ldpc_encode", "ldpc_encode_batch",
           "ldpc_decode", "ldpc_decode_batch", "clear_cache",
           "VAR_DEGREE", "CHK_DEGREE", "MINSUM_SCALE", "LLR_CLAMP"]

VAR_DEGREE = 3
CHK_DEGREE = 6
MINSUM_SCALE = 0.75
LLR_CLAMP = 20.0
# n below this, (3,6) pair-disjointness is infeasible and 4-cycles remain
GIRTH_GUARANTEE_MIN_N = 64

_MAX_ATTEMPTS = 64


def _placement_order(capacity: np.ndarray, tiebreak: np.ndarray) -> np.ndarray:
    """Non-full checks ranked lowest-degree first, random tie-break."""
    avail = np.nonzero(capacity > 0)[0]
    keys = (CHK_DEGREE - capacity[avail]) + tiebreak[avail]
    return avail[np.argsort(keys, kind="stable")]


def _choose_checks(ranked: np.ndarray, used_pairs: set[tuple[int, int]]) -> list[int] | None:
    """First VAR_DEGREE checks from `ranked` with no previously bridged pair."""
    chosen: list[int] = []
    for c in ranked:
        c = int(c)
        if all((min(c, d), max(c, d)) not in used_pairs for d in chosen):
            chosen.append(c)
            if len(chosen) == VAR_DEGREE:
                return chosen
    return None


def _choose_checks_min_reuse(ranked: np.ndarray, used_pairs: set[tuple[int, int]]) -> list[int]:
    """Fallback for tiny codes: pick the lowest-rank triple reusing fewest pairs."""
    from itertools import combinations

    best: list[int] | None = None
    best_reuse = VAR_DEGREE * (VAR_DEGREE - 1) // 2 + 1
    for combo in combinations([int(c) for c in ranked], VAR_DEGREE):
        reuse = sum(
            1
            for a, b in combinations(combo, 2)
            if (min(a, b), max(a, b)) in used_pairs
        )
        if reuse < best_reuse:
            best, best_reuse = list(combo), reuse
            if reuse == 0:
                break
    assert best is not None
    return best


def _build_graph(n: int, seed: int, attempt: int) -> np.ndarray | None:
    """One construction attempt; returns H (m x n uint8) or None on dead end."""
    m = n // 2
    rng = np.random.default_rng([0x1D9C, n, seed, attempt])
    capacity = np.full(m, CHK_DEGREE, dtype=np.int64)
    used_pairs: set[tuple[int, int]] = set()
    h = np.zeros((m, n), dtype=np.uint8)

    for v in range(n):
        ranked = _placement_order(capacity, rng.random(m))
        if len(ranked) < VAR_DEGREE:
            return None
        chosen = _choose_checks(ranked, used_pairs)
        if chosen is None:
            if n >= GIRTH_GUARANTEE_MIN_N:
                return None
            chosen = _choose_checks_min_reuse(ranked, used_pairs)
        for i, a in enumerate(chosen):
            for b in chosen[i + 1 :]:
                used_pairs.add((min(a, b), max(a, b)))
            capacity[a] -= 1
            h[a, v] = 1
    return h


def _has_4cycle(h: np.ndarray) -> bool:
    gram = h.astype(np.float32).T @ h.astype(np.float32)
    np.fill_diagonal(gram, 0.0)
    return bool(gram.max() > 1.0)


def _gf2_pivot_columns(h: np.ndarray) -> list[int]:
    """Column indices of an invertible m x m submatrix (row-reduction pivots)."""
    r = h.copy()
    m, n = r.shape
    pivots: list[int] = []
    row = 0
    for col in range(n):
        hits = np.nonzero(r[row:, col])[0]
        if hits.size == 0:
            continue
        pivot_row = row + int(hits[0])
        if pivot_row != row:
            r[[row, pivot_row]] = r[[pivot_row, row]]
        mask = r[:, col].astype(bool)
        mask[row] = False
        r[mask] ^= r[row]
        pivots.append(col)
        row += 1
        if row == m:
            break
    return pivots


def _gf2_solve(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Solve B X = A over GF(2) for invertible B; returns X."""
    m = b.shape[0]
    aug = np.concatenate([b.copy(), a.copy()], axis=1)
    for col in range(m):
        hits = np.nonzero(aug[col:, col])[0]
        pivot_row = col + int(hits[0])
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        mask = aug[:, col].astype(bool)
        mask[col] = False
        aug[mask] ^= aug[col]
    return aug[:, m:]


@dataclass(eq=False)
class LdpcCode:
    """A constructed rate-1/2 (3,6) code plus cached encode/decode structures."""

    n: int
    k: int
    parity_check: np.ndarray
    seed: int
    # parity = _parity_solve @ info (mod 2); shape (m, k)
    _parity_solve: np.ndarray = field(repr=False)
    # variable indices per check row, shape (m, CHK_DEGREE)
    _check_nbrs: np.ndarray = field(repr=False)
    # for each variable, the (check row, slot) of its VAR_DEGREE edges
    _var_checks: np.ndarray = field(repr=False)
    _var_slots: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.n - self.k


def _finalize(h: np.ndarray, n: int, seed: int) -> LdpcCode | None:
    m = n // 2
    pivots = _gf2_pivot_columns(h)
    if len(pivots) < m:
        return None  # rank-deficient draw; retry
    piv_set = set(pivots)
    info_cols = [c for c in range(n) if c not in piv_set]
    perm = info_cols + pivots
    hp = np.ascontiguousarray(h[:, perm])
    a = hp[:, : n - m]
    b = hp[:, n - m :]
    parity_solve = _gf2_solve(b, a)

    check_nbrs = np.zeros((m, CHK_DEGREE), dtype=np.int64)
    for row in range(m):
        check_nbrs[row] = np.nonzero(hp[row])[0]
    var_checks = np.zeros((n, VAR_DEGREE), dtype=np.int64)
    var_slots = np.zeros((n, VAR_DEGREE), dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for row in range(m):
        for slot in range(CHK_DEGREE):
            v = check_nbrs[row, slot]
            var_checks[v, fill[v]] = row
            var_slots[v, fill[v]] = slot
            fill[v] += 1
    assert np.all(fill == VAR_DEGREE)

    return LdpcCode(n=n, k=n - m, parity_check=hp, seed=seed,
                    _parity_solve=parity_solve, _check_nbrs=check_nbrs,
                    _var_checks=var_checks, _var_slots=var_slots)


_CACHE: dict[tuple[int, int], LdpcCode] = {}


def clear_cache() -> None:
    _CACHE.clear()


def ldpc_construct(n: int, seed: int) -> LdpcCode:
    """Deterministically construct the rate-1/2 (3,6) code for (n, seed)."""
    if n < 8 or n % 2 != 0:
        raise InvalidLength(f"n={n}: need even n >= 8 for a rate-1/2 (3,6) code")
    key = (n, seed)
    if key in _CACHE:
        return _CACHE[key]
    for attempt in range(_MAX_ATTEMPTS):
        h = _build_graph(n, seed, attempt)
        if h is None:
            continue
        if n >= GIRTH_GUARANTEE_MIN_N and _has_4cycle(h):
            continue
        code = _finalize(h, n, seed)
        if code is not None:
            _CACHE[key] = code
            return code
    raise InvalidLength(f"construction failed for n={n}, seed={seed}")


def ldpc_encode(code: LdpcCode, info: np.ndarray) -> np.ndarray:
    """Systematic encoding: codeword = [info, parity], H @ codeword = 0 mod 2."""
    info = np.asarray(info, dtype=np.uint8)
    if info.ndim != 1 or info.shape[0] != code.k:
        raise LengthMismatch(f"info length {info.shape} != k={code.k}")
    parity = (code._parity_solve.astype(np.int64) @ info.astype(np.int64)) % 2
    return np.concatenate([info, parity.astype(np.uint8)])


def ldpc_encode_batch(code: LdpcCode, info: np.ndarray) -> np.ndarray:
    """Encode rows of a (frames, k) bit matrix."""
    info = np.asarray(info, dtype=np.uint8)
    if info.ndim != 2 or info.shape[1] != code.k:
        raise LengthMismatch(f"info shape {info.shape} incompatible with k={code.k}")
    # float32 matmul is exact here: row sums are bounded by k < 2**24
    parity = (info.astype(np.float32) @ code._parity_solve.T.astype(np.float32)) % 2
    return np.concatenate([info, parity.astype(np.uint8)], axis=1)


def ldpc_decode_batch(
    code: LdpcCode, llrs: np.ndarray, max_iters: int = 50
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min-sum decode of a (frames, n) LLR matrix.

    Returns (info bits (frames, k), converged flags, iterations used). The
    iteration counter includes the initial parity test, so noiseless input
    reports 1. Sign convention: positive LLR means bit 0.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim != 2 or llrs.shape[1] != code.n:
        raise LengthMismatch(f"llr shape {llrs.shape} != (frames, {code.n})")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    frames = llrs.shape[0]
    chan = np.clip(llrs, -LLR_CLAMP, LLR_CLAMP)
    cn = code._check_nbrs
    vc, vs = code._var_checks, code._var_slots

    hard = np.zeros((frames, code.n), dtype=np.uint8)
    converged = np.zeros(frames, dtype=bool)
    iterations = np.full(frames, max_iters, dtype=np.int64)

    # working arrays stay in active-local order; `active` maps back to frames
    active = np.arange(frames)
    chan_act = chan
    total = chan.copy()
    c2v = np.zeros((frames, code.m, CHK_DEGREE), dtype=np.float64)
    v2c = chan[:, cn].copy()
    slot_index = np.arange(CHK_DEGREE)

    for it in range(1, max_iters + 1):
        bits = (total < 0).astype(np.uint8)
        hard[active] = bits
        ok = ~np.any(bits[:, cn].sum(axis=2) % 2, axis=1)
        if np.any(ok):
            done = active[ok]
            converged[done] = True
            iterations[done] = it
            keep = ~ok
            active = active[keep]
            if active.size == 0:
                break
            chan_act = chan_act[keep]
            total = total[keep]
            c2v = c2v[keep]
            v2c = v2c[keep]
        if it == max_iters:
            break

        # check node update: normalized min-sum with self-exclusion
        signs = np.where(v2c >= 0, 1.0, -1.0)
        prod_sign = signs.prod(axis=2, keepdims=True)
        mags = np.abs(v2c)
        two_smallest = np.partition(mags, 1, axis=2)
        min1 = two_smallest[:, :, 0:1]
        min2 = two_smallest[:, :, 1:2]
        argmin = np.argmin(mags, axis=2)[..., None]
        excl_min = np.where(slot_index == argmin, min2, min1)
        c2v = MINSUM_SCALE * prod_sign * signs * excl_min

        # variable node update
        ext = c2v[:, vc, vs]  # (frames, n, VAR_DEGREE)
        total = chan_act + ext.sum(axis=2)
        v2c = total[:, cn] - c2v

    infos = hard[:, : code.k]
    return infos, converged, iterations


def ldpc_decode(
    code: LdpcCode, llrs: np.ndarray, max_iters: int = 50
) -> tuple[np.ndarray, bool, int]:
    """Decode one frame; see ldpc_decode_batch."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.ndim != 1 or llrs.shape[0] != code.n:
        raise LengthMismatch(f"llr length {llrs.shape} != n={code.n}")
    infos, converged, iterations = ldpc_decode_batch(code, llrs[None, :], max_iters)
    return infos[0], bool(converged[0]), int(iterations[0])
