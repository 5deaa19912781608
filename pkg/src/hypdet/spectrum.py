"""Length spectrum enumeration for cocompact Fuchsian groups.

The enumerator performs a breadth-first walk over group *elements* (not
words): products that agree as matrices are merged immediately, which keeps
the search tree polynomial in the ball radius instead of exponential in the
word length.  Elements are pruned by displacement of the basepoint i, with a
prune radius chosen so that every conjugacy class of translation length at
most the cutoff keeps at least one representative inside the ball.

Conjugacy classes are then formed in three steps: candidates are filtered to
representatives whose axis passes near the basepoint, each representative is
conjugated down to a displacement-minimal position, and the survivors are
matched exactly.  Classes always appear in inverse pairs (a torsion-free
orientation-preserving group never conjugates an element to its inverse), so
unoriented multiplicities are exact halves of oriented counts; this evenness
is asserted rather than assumed.

Matrices are compared up to sign throughout (the group lives in PSL(2,R)).
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, DomainError, IncompleteSpectrum, NotHyperbolic
from .fuchsian import MobiusMatrix, SurfaceGroup, trace_to_length
from .report import CheckResult, format_float, write_json_atomic, write_text_atomic

DEFAULT_BUDGET_MB = 8192.0

# bytes charged per stored group element in the budget model: matrix,
# hash pair, parent pointer, letter, and transient workspace
_BYTES_PER_ELEMENT = 64.0

_LENGTH_QUANTUM = 1e-7   # lengths closer than this are one spectral line
_MATCH_TOL = 1e-6        # matrix tolerance when matching group elements


@dataclass
class SearchParams:
    """Tunables for the enumeration.

    rho_hat is the assumed covering radius: every closed geodesic of length
    l <= cutoff is assumed to pass within rho_hat of some orbit point of the
    basepoint, giving a representative of displacement at most
    2 asinh(cosh(rho_hat) sinh(l/2)).  slack widens the prune radius to
    absorb word-metric detours.  Both defaults were validated empirically on
    reference surfaces; they are inputs to the completeness claim, not
    theorems.
    """

    rho_hat: float = 1.75
    slack: float = 1.6
    keep_pad: float = 0.8      # retention pad over rho_hat for class reps
    link_pad: float = 0.7      # safety pad on the linking base radius
    quantum: float = 1e-6      # matrix rounding quantum for element identity
    budget_mb: float = None
    chunk: int = 131072

    def __post_init__(self):
        if self.budget_mb is None:
            env = os.environ.get("HYPDET_BUDGET_MB", "")
            self.budget_mb = float(env) if env else DEFAULT_BUDGET_MB
        if not (self.rho_hat > 0 and self.slack >= 0):
            raise DomainError("rho_hat must be positive and slack nonnegative")

    def prune_radius(self, cutoff):
        return orbit_radius(cutoff, self.rho_hat) + self.slack

    def descent_radius(self):
        return 2.0 * (self.rho_hat + self.keep_pad) + self.link_pad

    def link_radius(self):
        # two displacement-minimal representatives of one class sit within
        # keep_pad-padded covering distance of the axis, and consecutive
        # orbit footpoints along the axis are at most 2*rho_hat apart, so
        # one linking step never needs more than this
        return 2.0 * (self.rho_hat + self.keep_pad) + 2.0 * self.rho_hat + self.link_pad


def orbit_radius(cutoff, rho_hat):
    """Displacement bound for one representative of every class of length
    <= cutoff whose axis passes within rho_hat of the basepoint."""
    return 2.0 * math.asinh(math.cosh(rho_hat) * math.sinh(0.5 * cutoff))


@dataclass
class GeodesicEntry:
    """One spectral line: all unoriented closed geodesics sharing a length.

    Iterates are genuine closed geodesics and get their own entries; power
    is the iterate order and primitive_length = length / power the length of
    the underlying primitive.  witness_word is a word in the group
    generators (signed one-based letters) whose matrix lies in one of the
    entry's conjugacy classes.
    """

    length: float
    multiplicity: int
    witness_word: tuple
    primitive_length: float
    power: int


@dataclass
class LengthSpectrum:
    cutoff: float
    genus: int
    entries: list
    complete: bool
    n_searched: int
    prune_radius: float
    relator_residual: float
    meta: dict = field(default_factory=dict)

    def systole(self):
        if not self.entries:
            raise DomainError("empty spectrum has no systole")
        return self.entries[0].length

    def oriented_count(self, upto=None):
        upto = self.cutoff if upto is None else upto
        return int(sum(2 * e.multiplicity for e in self.entries if e.length <= upto))

    def primitive_count(self, upto=None):
        upto = self.cutoff if upto is None else upto
        return int(
            sum(e.multiplicity for e in self.entries if e.power == 1 and e.length <= upto)
        )


# ---------------------------------------------------------------------------
# element hashing


def _canonicalize_signs(mats):
    """Flip matrix signs in place so the largest-|entry| is positive."""
    flat = mats.reshape(len(mats), 4)
    idx = np.argmax(np.abs(flat), axis=1)
    lead = flat[np.arange(len(flat)), idx]
    flat[lead < 0.0] *= -1.0
    return mats


_MIX_A = np.uint64(0x9E3779B97F4A7C15)
_MIX_B = np.uint64(0xC2B2AE3D27D4EB4F)
_MIX_C = np.uint64(0xFF51AFD7ED558CCD)
_MIX_D = np.uint64(0xC4CEB9FE1A85EC53)


def _mix_columns(cols, m1, m2, seed):
    h = np.full(cols[0].shape, seed, dtype=np.uint64)
    for c in cols:
        h ^= c * m1
        h *= m2
        h ^= h >> np.uint64(31)
    h *= m1
    h ^= h >> np.uint64(33)
    return h


def _pair_hash(mats, quantum):
    """Two independent 64-bit hashes of the sign-canonical rounded matrix."""
    flat = mats.reshape(len(mats), 4)
    r = np.round(flat / quantum).astype(np.int64)
    cols = [r[:, k].view(np.uint64) for k in range(4)]
    h1 = _mix_columns(cols, _MIX_A, _MIX_B, np.uint64(0x243F6A8885A308D3))
    h2 = _mix_columns(cols, _MIX_C, _MIX_D, np.uint64(0x13198A2E03707344))
    return h1, h2


class _PairSet:
    """A set of uint64 pairs with vectorized membership, kept lex-sorted."""

    def __init__(self):
        self.h1 = np.empty(0, dtype=np.uint64)
        self.h2 = np.empty(0, dtype=np.uint64)

    def __len__(self):
        return len(self.h1)

    def contains(self, a1, a2):
        if len(self.h1) == 0:
            return np.zeros(len(a1), dtype=bool)
        left = np.searchsorted(self.h1, a1, side="left")
        right = np.searchsorted(self.h1, a1, side="right")
        out = np.zeros(len(a1), dtype=bool)
        single = right - left == 1
        idx = left[single]
        out[single] = self.h2[idx] == a2[single]
        multi = np.nonzero(right - left > 1)[0]
        for k in multi:
            seg = self.h2[left[k]:right[k]]
            out[k] = bool(np.any(seg == a2[k]))
        return out

    def add(self, a1, a2):
        h1 = np.concatenate([self.h1, a1])
        h2 = np.concatenate([self.h2, a2])
        order = np.lexsort((h2, h1))
        self.h1 = np.ascontiguousarray(h1[order])
        self.h2 = np.ascontiguousarray(h2[order])


def _dedup_batch(h1, h2):
    """Indices of the first occurrence of each distinct hash pair, in input
    order of first appearance."""
    order = np.lexsort((h2, h1))
    s1, s2 = h1[order], h2[order]
    new_run = np.empty(len(order), dtype=bool)
    if len(order):
        new_run[0] = True
        new_run[1:] = (s1[1:] != s1[:-1]) | (s2[1:] != s2[:-1])
    starts = order[new_run]
    # keep the earliest input row of each run, not an arbitrary one
    run_id = np.cumsum(new_run) - 1
    best = np.full(run_id[-1] + 1 if len(order) else 0, len(h1), dtype=np.int64)
    np.minimum.at(best, run_id, order)
    return np.sort(best)


# ---------------------------------------------------------------------------
# BFS over group elements


class _Ball:
    """Element ball of a group: matrices plus BFS parent/letter trails."""

    def __init__(self, alphabet):
        self.alphabet = alphabet
        self.mats = [np.eye(2)[None, :, :]]
        self.parents = [np.array([-1], dtype=np.int64)]
        self.letters = [np.array([-1], dtype=np.int16)]
        self.sizes = [1]
        self.seen = _PairSet()

    def total(self):
        return int(sum(self.sizes))

    def all_mats(self):
        return np.concatenate(self.mats, axis=0)

    def word(self, idx):
        """Alphabet letters from the identity to element idx."""
        parents = np.concatenate(self.parents)
        letters = np.concatenate(self.letters)
        out = []
        while idx > 0:
            out.append(int(letters[idx]))
            idx = int(parents[idx])
        return tuple(reversed(out))


def _signed_word(letters, n_gens):
    """Alphabet indices -> signed one-based generator letters."""
    return tuple(
        (a + 1) if a < n_gens else -(a - n_gens + 1) for a in letters
    )


def _enumerate_ball(alphabet, prune_cosh, max_elements, chunk, quantum):
    """Breadth-first closure of the alphabet under multiplication, pruned by
    basepoint displacement."""
    ball = _Ball(alphabet)
    h1, h2 = _pair_hash(ball.mats[0], quantum)
    ball.seen.add(h1, h2)
    frontier = ball.mats[0]
    frontier_offset = 0
    n_alpha = len(alphabet)
    while len(frontier):
        new_mats = []
        new_parents = []
        new_letters = []
        level_seen = _PairSet()
        for lo in range(0, len(frontier), max(1, chunk // n_alpha)):
            hi = min(len(frontier), lo + max(1, chunk // n_alpha))
            prod = np.einsum("fij,ajk->faik", frontier[lo:hi], alphabet)
            prod = prod.reshape(-1, 2, 2)
            disp = 0.5 * np.einsum("mij,mij->m", prod, prod)
            keep = disp <= prune_cosh
            prod = np.ascontiguousarray(prod[keep])
            if not len(prod):
                continue
            kept_rows = np.nonzero(keep)[0]
            parents = frontier_offset + lo + kept_rows // n_alpha
            letters = (kept_rows % n_alpha).astype(np.int16)
            _canonicalize_signs(prod)
            p1, p2 = _pair_hash(prod, quantum)
            fresh = ~ball.seen.contains(p1, p2)
            fresh &= ~level_seen.contains(p1, p2)
            prod, p1, p2 = prod[fresh], p1[fresh], p2[fresh]
            parents, letters = parents[fresh], letters[fresh]
            if not len(prod):
                continue
            first = _dedup_batch(p1, p2)
            prod, p1, p2 = prod[first], p1[first], p2[first]
            parents, letters = parents[first], letters[first]
            level_seen.add(p1, p2)
            new_mats.append(prod)
            new_parents.append(parents.astype(np.int64))
            new_letters.append(letters)
        if not new_mats:
            break
        level = np.concatenate(new_mats)
        ball.seen.add(level_seen.h1, level_seen.h2)
        frontier_offset = ball.total()
        ball.mats.append(level)
        ball.parents.append(np.concatenate(new_parents))
        ball.letters.append(np.concatenate(new_letters))
        ball.sizes.append(len(level))
        if ball.total() > max_elements:
            raise IncompleteSpectrum(
                "element ball exceeded the memory budget mid-search "
                "(%d elements stored); raise HYPDET_BUDGET_MB or lower the cutoff"
                % ball.total()
            )
        frontier = level
    return ball

# ---------------------------------------------------------------------------
# conjugacy-class reduction


def _displacement_cosh(mats):
    return 0.5 * np.einsum("mij,mij->m", mats, mats)


def _axis_cosh2(mats, lengths):
    """cosh^2 of the distance from the basepoint i to each element's axis."""
    q = _displacement_cosh(mats)
    s2 = np.sinh(0.5 * lengths) ** 2
    return np.maximum((q - 1.0) / (2.0 * s2), 1.0)


def _invert_stack(mats):
    out = np.empty_like(mats)
    out[:, 0, 0] = mats[:, 1, 1]
    out[:, 0, 1] = -mats[:, 0, 1]
    out[:, 1, 0] = -mats[:, 1, 0]
    out[:, 1, 1] = mats[:, 0, 0]
    return out


def _descend(mats, conjugators, conj_inv, chunk=4096, max_iter=80):
    """Greedily conjugate each element to minimal basepoint displacement.

    Returns sign-canonical matrices.  The translation length is a conjugacy
    invariant, so minimizing cosh of the displacement minimizes the axis
    distance; descent stops at the first position no conjugator improves.
    """
    cur = np.array(mats, dtype=float)
    active = np.arange(len(cur))
    for _ in range(max_iter):
        if not len(active):
            break
        still = []
        for lo in range(0, len(active), chunk):
            rows = active[lo:lo + chunk]
            sub = cur[rows]
            conj = np.einsum("uij,rjk,ukl->ruil", conjugators, sub, conj_inv)
            q = np.einsum("ruij,ruij->ru", conj, conj)
            q0 = np.einsum("rij,rij->r", sub, sub)
            best = np.argmin(q, axis=1)
            bq = q[np.arange(len(rows)), best]
            # relative threshold: float noise from conjugating by large
            # matrices can shave ~1e-8 off q and, accepted repeatedly,
            # ratchets the element off the discrete orbit entirely
            moved = bq < q0 * (1.0 - 1e-6)
            if np.any(moved):
                cur[rows[moved]] = conj[np.nonzero(moved)[0], best[moved]]
                still.extend(rows[moved].tolist())
        active = np.array(still, dtype=np.int64)
    _canonicalize_signs(cur)
    return cur


class _ElementIndex:
    """Tolerant lookup of group elements keyed by translation length."""

    def __init__(self, lengths, mats, tol=_MATCH_TOL):
        self.order = np.argsort(lengths, kind="stable")
        self.lengths = np.asarray(lengths)[self.order]
        self.mats = np.asarray(mats)[self.order]
        self.tol = tol

    def find(self, length, mat):
        lo = int(np.searchsorted(self.lengths, length - 1e-5))
        hi = int(np.searchsorted(self.lengths, length + 1e-5))
        for j in range(lo, hi):
            d = self.mats[j] - mat
            if np.max(np.abs(d)) < self.tol:
                return int(self.order[j])
            d = self.mats[j] + mat
            if np.max(np.abs(d)) < self.tol:
                return int(self.order[j])
        return -1


def _mats_close(a, b, tol=_MATCH_TOL):
    return (
        float(np.max(np.abs(a - b))) < tol or float(np.max(np.abs(a + b))) < tol
    )


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

def _canon_one(mat):
    m = np.array(mat, dtype=float)
    flat = m.reshape(-1)
    k = int(np.argmax(np.abs(flat)))
    if flat[k] < 0.0:
        m = -m
    return m


def enumerate_geodesics(group, cutoff, params=None):
    """Enumerate all closed geodesics of length <= cutoff, with
    multiplicities, for a surface group or a plain generator list.

    Returns a LengthSpectrum whose entries are unoriented conjugacy classes
    grouped by (length, iterate order).  When `group` is a SurfaceGroup the
    pants-curve elements and their iterates are injected explicitly, which
    covers deep-collar core geodesics that a displacement-pruned ball search
    cannot afford to reach on pinched surfaces.
    """
    if params is None:
        params = SearchParams()
    cutoff = float(cutoff)
    if not (0.0 < cutoff <= 60.0) or not math.isfinite(cutoff):
        raise DomainError("cutoff must lie in (0, 60], got %r" % (cutoff,))

    if isinstance(group, SurfaceGroup):
        gens = group.generators
        genus = group.genus
        residual = group.relator_residual
        curve_data = [
            (group.curve_elements[e], group.curve_words[e], group.fn.lengths[e])
            for e in range(len(group.fn.lengths))
        ]
    else:
        gens = [m if isinstance(m, MobiusMatrix) else MobiusMatrix.from_array(m)
                for m in group]
        genus = 0
        residual = None
        curve_data = []
    if not gens:
        raise DomainError("need at least one generator")

    g_eff = genus if genus >= 2 else 2
    predicted = (g_eff - 1) * math.exp(cutoff + 6.0)
    max_count = params.budget_mb * (2.0 ** 20) / _BYTES_PER_ELEMENT
    if predicted > max_count:
        raise BudgetExceeded(
            "conjugacy-class bound %.3g exceeds budget capacity %.3g elements "
            "(HYPDET_BUDGET_MB=%g); lower the cutoff or raise the budget"
            % (predicted, max_count, params.budget_mb),
            predicted=predicted,
            budget=max_count,
        )

    n_gens = len(gens)
    alphabet = np.empty((2 * n_gens, 2, 2), dtype=float)
    for k, m in enumerate(gens):
        alphabet[k] = m.mat
        alphabet[n_gens + k] = m.inverse().mat
    _canonicalize_signs(alphabet)

    prune_r = params.prune_radius(cutoff)
    ball = _enumerate_ball(
        alphabet, math.cosh(prune_r), max_count, params.chunk, params.quantum
    )
    mats = ball.all_mats()
    n_searched = len(mats)

    tr = np.abs(mats[:, 0, 0] + mats[:, 1, 1])
    max_tr = 2.0 * math.cosh(0.5 * cutoff)
    cand_rows = np.nonzero((tr > 2.0 + 1e-9) & (tr <= max_tr + 1e-9))[0]
    cand_mats = np.ascontiguousarray(mats[cand_rows])
    cand_len = 2.0 * np.arccosh(np.clip(tr[cand_rows] / 2.0, 1.0, None))

    meta = {
        "rho_hat": params.rho_hat,
        "slack": params.slack,
        "orbit_radius": orbit_radius(cutoff, params.rho_hat),
        "n_candidates": int(len(cand_rows)),
        "mark_conflicts": 0,
        "injected_new": 0,
        "injected_matched": 0,
        "link_max_radius": 0.0,
        "link_extra_merges": 0,
        "link_saturated": 0,
    }

    if len(cand_rows) == 0 and not curve_data:
        return LengthSpectrum(
            cutoff, genus, [], True, n_searched, prune_r, residual, meta
        )

    # retain class representatives whose axis passes near the basepoint
    rho_keep = params.rho_hat + params.keep_pad
    keep = _axis_cosh2(cand_mats, cand_len) <= math.cosh(rho_keep) ** 2 + 1e-12

    # inject pants curves and their iterates; force-keep matched candidates.
    # Both orientations go in so inverse pairing stays exhaustive.
    forced_marks = {}
    inj_mats, inj_lens, inj_words, inj_marks = [], [], [], []
    if curve_data:
        index_all = _ElementIndex(cand_len, cand_mats)
        for (melem, word, l_e) in curve_data:
            if l_e > cutoff + 1e-9:
                continue
            base = _canon_one(melem.mat)
            word_inv = tuple(-a for a in reversed(word))
            cur = np.array(base)
            k = 1
            while True:
                l_k = trace_to_length(np.trace(cur))
                for c, w in ((_canon_one(cur), tuple(word) * k),
                             (_canon_one(np.linalg.inv(cur)), word_inv * k)):
                    j = index_all.find(l_k, c)
                    if j >= 0:
                        keep[j] = True
                        forced_marks[j] = (k, float(l_e))
                        meta["injected_matched"] += 1
                    else:
                        inj_mats.append(c)
                        inj_lens.append(l_k)
                        inj_words.append(w)
                        inj_marks.append((k, float(l_e)))
                        meta["injected_new"] += 1
                k += 1
                if k * l_e > cutoff + 1e-9:
                    break
                cur = cur @ base

    kept_rows = np.nonzero(keep)[0]
    rep_mats = np.concatenate(
        [cand_mats[kept_rows]] + ([np.array(inj_mats)] if inj_mats else [])
    )
    rep_len = np.concatenate(
        [cand_len[kept_rows], np.array(inj_lens, dtype=float)]
    )
    # witness source: global BFS index, or -(injection id + 1)
    rep_src = np.concatenate(
        [
            cand_rows[kept_rows],
            -np.arange(1, len(inj_mats) + 1, dtype=np.int64),
        ]
    )
    meta["n_retained"] = int(len(rep_mats))

    # iterate marks: (iterate order, primitive length) per retained row
    marks = {}
    for j, mk in forced_marks.items():
        pos = int(np.searchsorted(kept_rows, j))
        marks[pos] = mk
    for i, mk in enumerate(inj_marks):
        marks[len(kept_rows) + i] = mk

    index_ret = _ElementIndex(rep_len, rep_mats)
    for r in np.argsort(rep_len, kind="stable"):
        r = int(r)
        if r in marks:
            continue
        l0 = float(rep_len[r])
        if 2.0 * l0 > cutoff + 1e-9:
            break
        cur = np.array(rep_mats[r])
        k = 1
        while (k + 1) * l0 <= cutoff + 1e-9:
            k += 1
            cur = cur @ rep_mats[r]
            c = _canon_one(cur)
            j = index_ret.find(k * l0, c)
            if j >= 0 and j != r:
                if j not in marks:
                    marks[j] = (k, l0)
                elif marks[j][0] != k:
                    meta["mark_conflicts"] += 1

    # conjugator ball for descent; linking pulls wider shells on demand
    disp_all = _displacement_cosh(mats)
    u_rows = np.nonzero(disp_all <= math.cosh(params.descent_radius()))[0]
    u_rows = u_rows[u_rows != 0]
    conjugators = (
        np.concatenate([mats[u_rows], alphabet]) if len(u_rows) else np.array(alphabet)
    )
    conj_inv = _invert_stack(conjugators)

    rep_desc = _descend(rep_mats, conjugators, conj_inv, chunk=params.chunk // 64)

    shell_cache = {}

    def link_shells(lo, hi):
        key = (lo, hi)
        if key not in shell_cache:
            sel = np.nonzero(
                (disp_all > math.cosh(lo)) & (disp_all <= math.cosh(hi))
            )[0]
            sel = sel[sel != 0]
            if lo == 0.0:
                cj = (
                    np.concatenate([mats[sel], alphabet])
                    if len(sel)
                    else np.array(alphabet)
                )
            else:
                cj = mats[sel]
            shell_cache[key] = (cj, _invert_stack(cj) if len(cj) else cj)
        return shell_cache[key]

    entries = _assemble_entries(
        ball, rep_desc, rep_len, rep_src, marks, link_shells,
        params.link_radius(), prune_r, inj_words, n_gens, meta,
    )
    return LengthSpectrum(
        cutoff, genus, entries, True, n_searched, prune_r, residual, meta
    )

def _link_pass(uf, reps, cj, cji):
    """One linking sweep: union representatives conjugate by an element of
    cj.  Matching is tolerance-based, prefiltered on one matrix entry;
    descended representatives carry too much float drift for quantized
    hash joins."""
    n_c = len(reps)
    if len(cj) == 0 or n_c < 2:
        return False
    both = np.concatenate([reps, -reps]).reshape(2 * n_c, 4)
    order = np.argsort(both[:, 0], kind="stable")
    ta = np.ascontiguousarray(both[order, 0])
    tmats = both[order]
    merged = False
    chunk = max(1, (1 << 19) // n_c)
    for lo in range(0, len(cj), chunk):
        cs, csi = cj[lo:lo + chunk], cji[lo:lo + chunk]
        nu = len(cs)
        conj = np.einsum("uij,rjk,ukl->ruil", cs, reps, csi)
        flat = conj.reshape(-1, 4)
        a = flat[:, 0]
        los = np.searchsorted(ta, a - _MATCH_TOL)
        his = np.searchsorted(ta, a + _MATCH_TOL)
        for k in np.nonzero(his > los)[0]:
            i = int(k // nu)
            for pos in range(int(los[k]), int(his[k])):
                j = int(order[pos]) % n_c
                if j == i or uf.find(i) == uf.find(j):
                    continue
                if float(np.max(np.abs(flat[k] - tmats[pos]))) < _MATCH_TOL:
                    uf.union(i, j)
                    merged = True
    return merged


def _link_cluster(reps, link_shells, r_base, r_cap, meta):
    """Union-find over one length cluster, expanding the conjugator shell
    until two consecutive rounds produce no new merges.  A single fixed
    radius is not safe: the conjugator joining two minima of a long class
    can sit arbitrarily deep in the chain of axis footpoints, and a missed
    link double-counts the class."""
    n_c = len(reps)
    uf = _UnionFind(n_c)
    radius = min(r_base, r_cap)
    prev = 0.0
    silent = 0
    base_done = False
    while True:
        cj, cji = link_shells(prev, radius)
        merged = _link_pass(uf, reps, cj, cji)
        if base_done and merged:
            meta["link_extra_merges"] += 1
        base_done = True
        meta["link_max_radius"] = max(meta["link_max_radius"], radius)
        roots = {uf.find(i) for i in range(n_c)}
        if len(roots) == 1:
            break
        silent = 0 if merged else silent + 1
        if silent >= 2:
            break
        if radius >= r_cap:
            meta["link_saturated"] += 1
            break
        prev, radius = radius, min(radius + 1.0, r_cap)
    return uf


def _assemble_entries(
    ball, rep_desc, rep_len, rep_src, marks, link_shells, link_base,
    link_cap, inj_words, n_gens, meta,
):
    order = np.argsort(rep_len, kind="stable")
    slen = rep_len[order]
    bounds = [0]
    for i in range(1, len(slen)):
        if slen[i] - slen[i - 1] > _LENGTH_QUANTUM:
            bounds.append(i)
    bounds.append(len(slen))

    classes = []
    unpaired = 0
    for cid, (a, b) in enumerate(zip(bounds, bounds[1:])):
        rows = [int(r) for r in order[a:b]]
        # oriented classes: exact match of displacement-minimal matrices
        cls_rows = []
        for r in rows:
            m = rep_desc[r]
            hit = -1
            for ci, lst in enumerate(cls_rows):
                if _mats_close(rep_desc[lst[0]], m):
                    hit = ci
                    break
            if hit >= 0:
                cls_rows[hit].append(r)
            else:
                cls_rows.append([r])
        # conjugation steps link distinct local minima of one class
        n_c = len(cls_rows)
        if n_c > 1:
            reps = np.array([rep_desc[lst[0]] for lst in cls_rows])
            uf = _link_cluster(reps, link_shells, link_base, link_cap, meta)
        else:
            uf = _UnionFind(n_c)
        merged = {}
        for ci in range(n_c):
            merged.setdefault(uf.find(ci), []).extend(cls_rows[ci])
        oriented = list(merged.values())

        # inverse pairing: classes of gamma and gamma^{-1} are always
        # distinct in a torsion-free orientation-preserving group
        n_o = len(oriented)
        partner = [-1] * n_o
        for i in range(n_o):
            if partner[i] >= 0:
                continue
            inv_m = _canon_one(_invert_stack(rep_desc[oriented[i][0]][None])[0])
            found = -1
            for j in range(n_o):
                if j != i and partner[j] >= 0:
                    continue
                for r in oriented[j]:
                    if _mats_close(rep_desc[r], inv_m):
                        found = j
                        break
                if found >= 0:
                    break
            if found < 0 or found == i:
                unpaired += 1
                partner[i] = i
            else:
                partner[i] = found
                partner[found] = i

        for i in range(n_o):
            j = partner[i]
            if j < i:
                continue
            members = oriented[i] + (oriented[j] if j != i else [])
            mlen = min(float(rep_len[r]) for r in members)
            mark_ks = {marks[r][0] for r in members if r in marks}
            if len(mark_ks) > 1:
                meta["mark_conflicts"] += 1
            k_iter = min(mark_ks) if mark_ks else 1
            src_key = min(
                ((0, int(rep_src[r])) if rep_src[r] >= 0 else (1, int(-rep_src[r])), r)
                for r in members
            )
            classes.append(
                {
                    "cluster": cid,
                    "length": mlen,
                    "k": int(k_iter),
                    "src": src_key,
                }
            )
    meta["unpaired"] = unpaired

    groups = {}
    for cls in classes:
        groups.setdefault((cls["cluster"], cls["k"]), []).append(cls)
    entries = []
    for (cid, k), lst in sorted(groups.items()):
        length = min(c["length"] for c in lst)
        winner = min(lst, key=lambda c: c["src"])
        (kind, idx), row = winner["src"]
        if kind == 0:
            word = _signed_word(ball.word(idx), n_gens)
        else:
            word = tuple(inj_words[idx - 1])
        entries.append(
            GeodesicEntry(
                length=length,
                multiplicity=len(lst),
                witness_word=word,
                primitive_length=length / k,
                power=k,
            )
        )
    entries.sort(key=lambda e: (e.length, e.power))
    return entries


# ---------------------------------------------------------------------------
# checks and serialization


def _free_cyclic_reduce(word):
    """Free reduction followed by cyclic reduction of a signed-letter word."""
    out = []
    for letter in word:
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(int(letter))
    while len(out) >= 2 and out[0] == -out[-1]:
        out = out[1:-1]
    return tuple(out)


def word_matrix(word, group):
    """Matrix of a signed one-based letter word over the group generators."""
    gens = group.generators
    m = np.eye(2)
    for letter in word:
        if letter == 0 or abs(letter) > len(gens):
            raise DomainError("letter %r outside the generator alphabet" % (letter,))
        gmat = gens[abs(letter) - 1].mat
        m = m @ (gmat if letter > 0 else np.linalg.inv(gmat))
    return m


def primitive_decompose(word, group):
    """Split a hyperbolic word into (primitive root word, iterate power).

    Conjugation is quotiented away by cyclic reduction, so the root of
    "b a a b^-1" is "a" up to rotation.  The syntactic period is then
    verified numerically: the translation length must be exactly power
    times the root's, which guards against relator accidents the free
    reduction cannot see.
    """
    mat = word_matrix(word, group)
    tr = abs(mat[0, 0] + mat[1, 1])
    if tr <= 2.0 + 1e-9:
        raise NotHyperbolic(
            "word %r has |trace| %.6f <= 2; no translation length" % (word, tr)
        )
    reduced = _free_cyclic_reduce(word)
    n = len(reduced)
    root, power = reduced, 1
    for p in range(1, n):
        if n % p:
            continue
        if all(reduced[i] == reduced[i % p] for i in range(n)):
            root, power = reduced[:p], n // p
            break
    full_len = trace_to_length(tr)
    root_mat = word_matrix(root, group)
    root_len = trace_to_length(abs(root_mat[0, 0] + root_mat[1, 1]))
    if abs(full_len - power * root_len) > 1e-8:
        raise DomainError(
            "syntactic power %d of %r fails the length check (%.3g off)"
            % (power, root, abs(full_len - power * root_len))
        )
    return root, power


def counting_check(spectrum, short_threshold=2.0 * math.asinh(1.0)):
    """Buser-style counting bound on the enumerated spectrum.

    Oriented closed geodesics of length <= L that are not iterates of a
    closed geodesic of length <= short_threshold must number at most
    (g-1) e^{L+6}.  Also reports the number of distinct lengths <= 1,
    which caps the count of short simple closed geodesics at 3g-3 only
    when all short geodesics are simple, so it is reported, not asserted.
    """
    if not spectrum.complete:
        raise IncompleteSpectrum("counting bound needs a complete spectrum")
    L = spectrum.cutoff
    g = spectrum.genus
    count = 0
    for e in spectrum.entries:
        if e.length <= L and e.primitive_length > short_threshold:
            count += 2 * e.multiplicity
    bound = (g - 1.0) * math.exp(L + 6.0)
    short_lengths = sorted(
        {round(e.length, 7) for e in spectrum.entries if e.length <= 1.0}
    )
    return CheckResult(
        name="buser-counting-bound",
        passed=bool(count <= bound),
        value=float(count),
        lower=0.0,
        upper=float(bound),
        details={
            "cutoff": L,
            "short_threshold": short_threshold,
            "n_distinct_short_lengths": len(short_lengths),
            "simple_cap_3g_minus_3": 3 * g - 3,
            "oriented_total": spectrum.oriented_count(),
            "complete": spectrum.complete,
        },
    )


def write_spectrum(spectrum, out_dir):
    """Write spectrum.csv plus a JSON sidecar that round-trips the spectrum."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "spectrum.csv")
    json_path = os.path.join(out_dir, "spectrum.json")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["length", "multiplicity", "witness_word"])
    for e in spectrum.entries:
        writer.writerow(
            [format_float(e.length), e.multiplicity, " ".join(str(w) for w in e.witness_word)]
        )
    write_text_atomic(csv_path, buf.getvalue())
    payload = {
        "format": "hypdet-spectrum/1",
        "cutoff": spectrum.cutoff,
        "genus": spectrum.genus,
        "complete": spectrum.complete,
        "n_searched": spectrum.n_searched,
        "prune_radius": spectrum.prune_radius,
        "relator_residual": spectrum.relator_residual,
        "meta": spectrum.meta,
        "entries": [
            {
                "length": e.length,
                "multiplicity": e.multiplicity,
                "witness_word": list(e.witness_word),
                "primitive_length": e.primitive_length,
                "power": e.power,
            }
            for e in spectrum.entries
        ],
    }
    write_json_atomic(json_path, payload)
    return {"csv": csv_path, "json": json_path}


def load_spectrum(path):
    """Load a spectrum written by write_spectrum (directory or json path)."""
    import json as _json

    if os.path.isdir(path):
        path = os.path.join(path, "spectrum.json")
    with open(path) as fh:
        obj = _json.load(fh)
    if obj.get("format") != "hypdet-spectrum/1":
        raise DomainError("unrecognized spectrum file format in %s" % path)
    entries = [
        GeodesicEntry(
            length=float(e["length"]),
            multiplicity=int(e["multiplicity"]),
            witness_word=tuple(int(w) for w in e["witness_word"]),
            primitive_length=float(e["primitive_length"]),
            power=int(e["power"]),
        )
        for e in obj["entries"]
    ]
    return LengthSpectrum(
        cutoff=float(obj["cutoff"]),
        genus=int(obj["genus"]),
        entries=entries,
        complete=bool(obj["complete"]),
        n_searched=int(obj["n_searched"]),
        prune_radius=float(obj["prune_radius"]),
        relator_residual=obj.get("relator_residual"),
        meta=obj.get("meta", {}),
    )
