"""Compiled inner loops for population evaluation and exhaustive search.

Chromosome layout: presence bit of employee ``i`` on day ``d`` sits at
``i * D + d``; for Model 1 the test bits follow at ``n * D + i * D + d``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _day_step(pi, nxt, out, x_col, t_col, use_plan, pr_test, fn, indptr, indices, wbeta, linear):
    """One two-step update. ``pi`` is overwritten with the new state.

    ``wbeta`` holds ``p_ij * beta_i`` in CSR order (row ``i``).

    ``nxt`` and ``out`` are scratch arrays of size n.
    """
    n = pi.shape[0]
    keep = 1.0 - pr_test + pr_test * fn
    for i in range(n):
        if use_plan:
            if t_col[i]:
                pi[i] = pi[i] * fn
        else:
            pi[i] = pi[i] * keep
    # y[j] = x_j * PI'_j; present flag folded in to avoid a branch per edge
    y = nxt
    for j in range(n):
        y[j] = pi[j] if x_col[j] else 0.0
    for i in range(n):
        if not x_col[i]:
            continue
        a = pi[i]
        if linear:
            # same pairing as the exact branch so that linearized >= exact
            # holds after rounding too
            lo = indptr[i]
            hi = indptr[i + 1]
            sa = 0.0
            sb = 0.0
            k = lo
            while k + 1 < hi:
                sa += wbeta[k] * y[indices[k]]
                sb += wbeta[k + 1] * y[indices[k + 1]]
                k += 2
            if k < hi:
                sa += wbeta[k] * y[indices[k]]
            v = a + (1.0 - a) * (sa + sb)
            if v > 1.0:
                v = 1.0
            out[i] = v
        else:
            # q = 1 - prod(1 - r_j) accumulated as q += r (1 - q): every term
            # is nonnegative, so small risks keep full relative precision.
            # Two interleaved accumulators shorten the dependency chain.
            lo = indptr[i]
            hi = indptr[i + 1]
            qa = 0.0
            qb = 0.0
            k = lo
            while k + 1 < hi:
                qa += wbeta[k] * y[indices[k]] * (1.0 - qa)
                qb += wbeta[k + 1] * y[indices[k + 1]] * (1.0 - qb)
                k += 2
            if k < hi:
                qa += wbeta[k] * y[indices[k]] * (1.0 - qa)
            q = qa + qb * (1.0 - qa)
            out[i] = a + (1.0 - a) * q
    for i in range(n):
        if x_col[i]:
            pi[i] = out[i]


@njit(cache=True)
def _group_violations(col, ptr, idx, bound, upper):
    v = 0
    for g in range(bound.shape[0]):
        s = 0
        for k in range(ptr[g], ptr[g + 1]):
            s += col[idx[k]]
        if upper:
            if s > bound[g]:
                v += 1
        elif s < bound[g]:
            v += 1
    return v


@njit(cache=True)
def evaluate_population(
    genes, n, D, with_tests, score_risk,
    pi0, fn, pr_test, indptr, indices, wbeta, linear,
    lo_ptr, lo_idx, lo_bound, up_ptr, up_idx, up_bound, min_days, caps,
    out_obj, out_viol,
):
    """Fill ``out_obj`` (mean risk) and ``out_viol`` for every row of ``genes``.

    With ``score_risk`` false only violations are computed.
    ``caps[i] < 0`` means no test capacity limit.
    """
    P = genes.shape[0]
    nd = n * D
    pi = np.empty(n)
    nxt = np.empty(n)
    out = np.empty(n)
    x_col = np.empty(n, dtype=np.uint8)
    t_col = np.zeros(n, dtype=np.uint8)
    for p in range(P):
        g = genes[p]
        viol = 0
        for d in range(D):
            for i in range(n):
                x_col[i] = g[i * D + d]
            viol += _group_violations(x_col, lo_ptr, lo_idx, lo_bound, False)
            viol += _group_violations(x_col, up_ptr, up_idx, up_bound, True)
        for i in range(n):
            days = 0
            for d in range(D):
                days += g[i * D + d]
            if days < min_days[i]:
                viol += 1
            if with_tests and caps[i] >= 0:
                used = 0
                for d in range(D):
                    used += g[nd + i * D + d]
                if used > caps[i]:
                    viol += 1
        out_viol[p] = viol
        if not score_risk:
            out_obj[p] = 0.0
            continue
        for i in range(n):
            pi[i] = pi0[i]
        total = 0.0
        for d in range(D):
            for i in range(n):
                x_col[i] = g[i * D + d]
                if with_tests:
                    t_col[i] = g[nd + i * D + d]
            _day_step(pi, nxt, out, x_col, t_col, with_tests, pr_test, fn, indptr, indices, wbeta, linear)
            for i in range(n):
                total += pi[i]
        out_obj[p] = total / (n * D)


@njit(cache=True)
def swap_mutate(genes, triggers, partners, block_starts, block_len):
    """Apply swaps in place.

    ``triggers[p, k]`` marks gene ``k`` of row ``p`` for a swap; ``partners``
    holds one offset per triggered gene (row-major order of the triggers),
    interpreted within the gene's block.
    """
    P, L = genes.shape
    c = 0
    for p in range(P):
        for k in range(L):
            if triggers[p, k]:
                b = k // block_len
                other = block_starts[b] + partners[c]
                c += 1
                tmp = genes[p, k]
                genes[p, k] = genes[p, other]
                genes[p, other] = tmp


@njit(cache=True)
def search_optimum(
    n, D, with_tests, cols_x, cols_t,
    pi0, fn, pr_test, indptr, indices, wbeta, linear,
    min_days, caps, max_states, slack,
):
    """Depth-first search over one (presence, test) column pair per day.

    Branches are cut when their risk lower bound exceeds the incumbent by
    more than a relative ``slack``. The bound uses the fact that contacts
    never lower a probability and that each remaining test can at best
    multiply it by ``fn``.

    Returns ``(best_total, best_choice, ties, visited, status)``: the
    column indices per day of the first optimum found, any later leaves
    with exactly the same total, the number of nodes expanded, and status
    0 = done, 1 = budget exceeded, 2 = nothing feasible.
    """
    KX = cols_x.shape[0]
    KT = cols_t.shape[0]
    pis = np.empty((D + 1, n))
    nxt = np.empty(n)
    out = np.empty(n)
    days = np.zeros((D + 1, n), dtype=np.int64)
    used = np.zeros((D + 1, n), dtype=np.int64)
    partial = np.zeros(D + 1)
    choice = np.zeros((D, 2), dtype=np.int64)
    best_choice = np.full((D, 2), -1, dtype=np.int64)
    # all optimal leaves, as choice rows; filled only for exact ties
    ties = np.zeros((0, D, 2), dtype=np.int64)
    best = np.inf
    visited = 0
    keep = 1.0 - pr_test + pr_test * fn
    for i in range(n):
        pis[0, i] = pi0[i]

    # per-level iterator: flattened index over KX * KT
    it = np.zeros(D + 1, dtype=np.int64)
    level = 0
    it[0] = 0
    while level >= 0:
        if it[level] >= KX * KT:
            level -= 1
            if level >= 0:
                it[level] += 1
            continue
        a = it[level] // KT
        b = it[level] % KT
        xc = cols_x[a]
        tc = cols_t[b]
        ok = True
        remaining = D - level - 1
        for i in range(n):
            dd = days[level, i] + xc[i]
            uu = used[level, i] + (tc[i] if with_tests else 0)
            if dd + remaining < min_days[i]:
                ok = False
                break
            if with_tests and caps[i] >= 0 and uu > caps[i]:
                ok = False
                break
            days[level + 1, i] = dd
            used[level + 1, i] = uu
        if not ok:
            it[level] += 1
            continue
        visited += 1
        if visited > max_states:
            return best, best_choice, ties, visited, 1
        for i in range(n):
            pis[level + 1, i] = pis[level, i]
        row = pis[level + 1]
        _day_step(row, nxt, out, xc, tc, with_tests, pr_test, fn, indptr, indices, wbeta, linear)
        day_sum = 0.0
        for i in range(n):
            day_sum += row[i]
        partial[level + 1] = partial[level] + day_sum
        choice[level, 0] = a
        choice[level, 1] = b
        # lower bound on days level+2..D
        bound = partial[level + 1]
        for i in range(n):
            left = caps[i] - used[level + 1, i] if (with_tests and caps[i] >= 0) else D
            f = 1.0
            for r in range(1, remaining + 1):
                if with_tests:
                    if r <= left:
                        f *= fn
                else:
                    f *= keep
                bound += row[i] * f
        if bound > best * (1.0 + slack):
            it[level] += 1
            continue
        if level + 1 == D:
            total = partial[D]
            if total < best:
                best = total
                best_choice[:, :] = choice
                ties = np.zeros((0, D, 2), dtype=np.int64)
            elif total == best:
                grow = np.empty((ties.shape[0] + 1, D, 2), dtype=np.int64)
                grow[: ties.shape[0]] = ties
                grow[ties.shape[0]] = choice
                ties = grow
            it[level] += 1
            continue
        level += 1
        it[level] = 0
    if best == np.inf:
        return best, best_choice, ties, visited, 2
    return best, best_choice, ties, visited, 0
