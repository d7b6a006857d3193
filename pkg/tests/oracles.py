"""Independent reference computations used to freeze expected values.

Nothing here imports the package's algorithms; each oracle is the most
literal form of its definition (bitmask enumeration, linear scans, exact
piecewise-linear duals).
"""

import math


def chi_bruteforce(M, P, sigma2, rho, s, N):
    """Sum over bitmasks of active users: (prod M_j^s_j)^rho * exp(-N E_S)."""
    act = [j for j in range(len(s)) if s[j] > 0]
    total = 0.0
    for mask in range(1, 1 << len(act)):
        S = [act[b] for b in range(len(act)) if mask >> b & 1]
        size = 1
        for j in S:
            size *= M[j] ** s[j]
        E = rho * math.log(1 + sum(P[j] for j in S) / ((1 + rho) * sigma2))
        total += size ** rho * math.exp(-N * E)
    return total


def length_linear_scan(M, P, sigma2, rho, pe, s, cap=100_000):
    for n in range(1, cap + 1):
        if chi_bruteforce(M, P, sigma2, rho, s, n) <= pe:
            return n
    raise RuntimeError("scan cap reached")


def outer_margin_2d(beta, vectors):
    """LP margin for J=2 via its dual: min over w in the simplex of
    max_s w.v(s) - w.beta, evaluated at all breakpoints (exact)."""
    pts = list(vectors) + [(0.0, 0.0)]
    cands = {0.0, 1.0}
    for i in range(len(pts)):
        for k in range(i + 1, len(pts)):
            (a1, b1), (a2, b2) = pts[i], pts[k]
            # a*a1 + (1-a)*b1 == a*a2 + (1-a)*b2
            den = (a1 - b1) - (a2 - b2)
            if den != 0:
                a = (b2 - b1) / den
                if 0 <= a <= 1:
                    cands.add(a)
    best = math.inf
    for a in cands:
        support = max(a * v1 + (1 - a) * v2 for v1, v2 in pts)
        best = min(best, support - (a * beta[0] + (1 - a) * beta[1]))
    return best


def capacity_ok_2d(r, P, sigma2):
    return (r[0] < math.log(1 + P[0] / sigma2) and r[1] < math.log(1 + P[1] / sigma2)
            and r[0] + r[1] < math.log(1 + (P[0] + P[1]) / sigma2))
