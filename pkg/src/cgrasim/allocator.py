"""Budgeted cache-way allocation: exact DP solver plus a brute-force oracle.

The profit matrix H has one row per L1 cache and T_max+1 columns; H[i][k] is
the profit of giving cache i exactly k ways (log of its best modeled time hit
rate at that size).  The solver maximizes sum(H[i][S_i]) subject to
sum(S_i) <= T_max, S_i >= 0 integer.
"""


def max_profit(profits, t_max):
    """Exact DP over (cache, budget) with O(n * t_max^2) time.

    Returns (best_objective, allocations).  Backtrace scans candidate way
    counts in ascending order and takes the first match, so ties hand the
    smallest count to later-indexed caches.
    """
    n = len(profits)
    for row in profits:
        if len(row) < t_max + 1:
            raise ValueError("profit matrix narrower than t_max+1")

    dp = [[0.0] * (t_max + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        # Base: no allocation anywhere.
        dp[i][0] = dp[i - 1][0] + profits[i - 1][0]
    for i in range(1, n + 1):
        row = profits[i - 1]
        prev = dp[i - 1]
        cur = dp[i]
        for j in range(1, t_max + 1):
            best = prev[j] + row[0]
            for k in range(1, j + 1):
                cand = prev[j - k] + row[k]
                if cand > best:
                    best = cand
            cur[j] = best

    allocations = [0] * n
    j = t_max
    for i in range(n, 0, -1):
        for k in range(j + 1):
            if dp[i][j] == dp[i - 1][j - k] + profits[i - 1][k]:
                allocations[i - 1] = k
                j -= k
                break
    return dp[n][t_max], allocations


def brute_force_alloc(profits, t_max):
    """Exhaustive reference for max_profit. Only usable for small problems."""
    n = len(profits)
    if n * (t_max + 1) > 6 * 13:
        raise ValueError("search space too large for brute force")

    best = None
    best_alloc = None

    def rec(i, budget, acc, alloc):
        nonlocal best, best_alloc
        if i == n:
            if best is None or acc > best:
                best = acc
                best_alloc = list(alloc)
            return
        for k in range(budget + 1):
            alloc.append(k)
            rec(i + 1, budget - k, acc + profits[i][k], alloc)
            alloc.pop()

    rec(0, t_max, 0.0, [])
    return best, best_alloc
