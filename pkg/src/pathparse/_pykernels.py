"""Pure-Python kernels, selected when the compiled extension is unavailable.

Every function mirrors ``_ckernels.pyx`` operation for operation so that both
backends make identical decisions on identical inputs. ``direct_pair_sum`` is
the one exception (vectorized numpy plus an exactly rounded sum).
"""
import math

import numpy as np

BACKEND = "python"

TWO_PI = 2.0 * math.pi


def neumaier_sum(values):
    s = 0.0
    c = 0.0
    for x in values:
        x = float(x)
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


def phase_sums(cos, sin):
    return neumaier_sum(cos), neumaier_sum(sin)


def _block_sums(cos, sin, labels, nblocks):
    sx = [0.0] * nblocks
    cx = [0.0] * nblocks
    sy = [0.0] * nblocks
    cy = [0.0] * nblocks
    for i in range(len(labels)):
        b = labels[i]
        x = cos[i]
        t = sx[b] + x
        if abs(sx[b]) >= abs(x):
            cx[b] += (sx[b] - t) + x
        else:
            cx[b] += (x - t) + sx[b]
        sx[b] = t
        y = sin[i]
        t = sy[b] + y
        if abs(sy[b]) >= abs(y):
            cy[b] += (sy[b] - t) + y
        else:
            cy[b] += (y - t) + sy[b]
        sy[b] = t
    return [sx[b] + cx[b] for b in range(nblocks)], [sy[b] + cy[b] for b in range(nblocks)]


def block_sums(cos, sin, labels, nblocks):
    X, Y = _block_sums(
        [float(v) for v in cos], [float(v) for v in sin], [int(v) for v in labels], int(nblocks)
    )
    return np.array(X), np.array(Y)


def _worst(X, Y, C, D, eps_x, relaxed):
    """Largest residual, or inf when a strict candidate fails conservation."""
    total = C * C + D * D
    f = 0.0
    for b in range(len(X)):
        f += X[b] * X[b] + Y[b] * Y[b]
    if relaxed:
        return abs(total - f)
    if abs(total - f) > max(1e-8 * total, eps_x):
        return math.inf
    worst = 0.0
    for b in range(len(X)):
        r = X[b] * (C - X[b]) + Y[b] * (D - Y[b])
        if abs(r) > worst:
            worst = abs(r)
    return worst


def direct_pair_sum(phases):
    theta = np.asarray(phases, dtype=np.float64)
    return math.fsum(np.cos(theta[:, None] - theta[None, :]).ravel())


def scan_partitions(cos, sin, C, D, eps_x, relaxed):
    """Walk every restricted growth string; keep those passing the constraint.

    Returns ``(labels, scanned)`` with one valid labelling per row.
    """
    cos = [float(v) for v in cos]
    sin = [float(v) for v in sin]
    n = len(cos)
    a = [0] * n
    pm = [0] * n
    out = []
    scanned = 0
    while True:
        scanned += 1
        X, Y = _block_sums(cos, sin, a, pm[n - 1] + 1)
        if _worst(X, Y, C, D, eps_x, relaxed) <= eps_x:
            out.append(list(a))
        i = n - 1
        while i >= 1 and a[i] > pm[i - 1]:
            i -= 1
        if i < 1:
            break
        a[i] += 1
        pm[i] = max(pm[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            pm[j] = pm[i]
    return np.array(out, dtype=np.int64).reshape(len(out), n), scanned


def _energy(X, Y, size, n, C, D, weight, relaxed):
    k = 0
    acc = 0.0
    f = 0.0
    worst = 0.0
    for b in range(n):
        if size[b]:
            k += 1
            if relaxed:
                f += X[b] * X[b] + Y[b] * Y[b]
            else:
                r = X[b] * (C - X[b]) + Y[b] * (D - Y[b])
                acc += r * r
                if abs(r) > worst:
                    worst = abs(r)
    if relaxed:
        g = (C * C + D * D) - f
        acc = g * g
        worst = abs(g)
    return acc / (n * n) - weight * k, k, worst


def _compact(labels, n):
    remap = [-1] * n
    out = [0] * n
    nb = 0
    for i in range(n):
        b = labels[i]
        if remap[b] < 0:
            remap[b] = nb
            nb += 1
        out[i] = remap[b]
    return out, nb


def anneal(cos, sin, angles, C, D, labels0, uniforms, t0, cooling, eps_x, weight, relaxed):
    """One annealing chain over set labels.

    Each row of ``uniforms`` drives one proposal: move type, two choices and
    the Metropolis draw. Returns ``(best_labels or None, tried, accepted)``
    where best is the finest exactly re-verified valid state seen.
    """
    cos = [float(v) for v in cos]
    sin = [float(v) for v in sin]
    angles = [float(v) for v in angles]
    n = len(cos)
    labels = [int(v) for v in labels0]
    X = [0.0] * n
    Y = [0.0] * n
    size = [0] * n
    for i in range(n):
        b = labels[i]
        X[b] += cos[i]
        Y[b] += sin[i]
        size[b] += 1

    best = None
    best_k = 0
    best_worst = math.inf

    def consider():
        nonlocal best, best_k, best_worst
        compact, nb = _compact(labels, n)
        EX, EY = _block_sums(cos, sin, compact, nb)
        w = _worst(EX, EY, C, D, eps_x, relaxed)
        if w <= eps_x and (nb > best_k or (nb == best_k and w < best_worst)):
            best, best_k, best_worst = compact, nb, w

    E, k, worst = _energy(X, Y, size, n, C, D, weight, relaxed)
    if worst <= eps_x:
        consider()
    temp = t0
    tried = 0
    accepted = 0
    for step in range(len(uniforms)):
        u0, u1, u2, u3 = (float(v) for v in uniforms[step])
        temp *= cooling
        ne = [b for b in range(n) if size[b]]
        K = len(ne)
        free = -1
        for b in range(n):
            if size[b] == 0:
                free = b
                break
        if u0 < 0.6:
            i = int(u1 * n)
            src = labels[i]
            c = int(u2 * (K + 1))
            if c >= K:
                if size[src] == 1 or free < 0:
                    continue
                dst = free
            else:
                dst = ne[c]
            if dst == src:
                continue
            moved = [i]
        elif u0 < 0.8:
            if K < 2:
                continue
            ia = int(u1 * K)
            ib = int(u2 * (K - 1))
            if ib >= ia:
                ib += 1
            dst = ne[ia]
            src = ne[ib]
            moved = [i for i in range(n) if labels[i] == src]
        else:
            src = ne[int(u1 * K)]
            if size[src] < 2 or free < 0:
                continue
            alpha = u2 * TWO_PI
            moved = []
            for i in range(n):
                if labels[i] == src:
                    d = angles[i] - alpha
                    d = d - TWO_PI * math.floor(d / TWO_PI)
                    if d < math.pi:
                        moved.append(i)
            if not moved or len(moved) == size[src]:
                continue
            dst = free
        tried += 1
        sX, sY, dX, dY = X[src], Y[src], X[dst], Y[dst]
        for i in moved:
            labels[i] = dst
            X[src] -= cos[i]
            Y[src] -= sin[i]
            X[dst] += cos[i]
            Y[dst] += sin[i]
        size[src] -= len(moved)
        size[dst] += len(moved)
        if size[src] == 0:
            X[src] = 0.0
            Y[src] = 0.0
        E2, k2, worst2 = _energy(X, Y, size, n, C, D, weight, relaxed)
        dE = E2 - E
        if dE <= 0.0 or (temp > 0.0 and u3 < math.exp(-dE / temp)):
            accepted += 1
            E, k, worst = E2, k2, worst2
            if worst <= eps_x:
                consider()
        else:
            for i in moved:
                labels[i] = src
            size[src] += len(moved)
            size[dst] -= len(moved)
            X[src], Y[src], X[dst], Y[dst] = sX, sY, dX, dY
    if best is None:
        return None, tried, accepted
    return np.array(best, dtype=np.int64), tried, accepted
