"""Pure-Python record-sweep kernels, used when the extension is not built.

Same signatures and the same floating-point operation order as
``_kernels.pyx``.
"""
from math import exp, sqrt

import numpy as np


def laplace_dense_sweep(s_dp, total, scale, current, proposed, log_u, order, accepted, acc_prob):
    s = s_dp.tolist()
    t = total.tolist()
    lu = log_u.tolist()
    d = len(t)
    n_acc = 0
    for r, i in enumerate(order.tolist()):
        cur = current[i].tolist()
        prop = proposed[i].tolist()
        cand = [0.0] * d
        delta = 0.0
        for j in range(d):
            tn = t[j] - cur[j] + prop[j]
            cand[j] = tn
            delta += abs(s[j] - t[j]) - abs(s[j] - tn)
        delta = delta / scale
        acc_prob[i] = 1.0 if delta >= 0.0 else exp(delta)
        if lu[r] < delta:
            accepted[i] = 1
            n_acc += 1
            t = cand
            current[i] = proposed[i]
        else:
            accepted[i] = 0
    total[:] = t
    return n_acc


def laplace_cells_sweep(s_dp, total, scale, current, proposed, log_u, order, accepted, acc_prob):
    s = s_dp.tolist()
    t = total.tolist()
    lu = log_u.tolist()
    n_acc = 0
    for r, i in enumerate(order.tolist()):
        pairs = [(o, w) for o, w in zip(current[i].tolist(), proposed[i].tolist()) if o != w]
        delta = 0.0
        for o, w in pairs:
            delta += abs(s[o] - t[o]) - abs(s[o] - (t[o] - 1.0))
            delta += abs(s[w] - t[w]) - abs(s[w] - (t[w] + 1.0))
        delta = delta / scale
        acc_prob[i] = 1.0 if delta >= 0.0 else exp(delta)
        if lu[r] < delta:
            accepted[i] = 1
            n_acc += 1
            for o, w in pairs:
                t[o] = t[o] - 1.0
                t[w] = t[w] + 1.0
            current[i] = proposed[i]
        else:
            accepted[i] = 0
    total[:] = t
    return n_acc


def regression_contributions(records, lower, upper, out):
    w = records.shape[1]
    c = np.minimum(np.maximum(records, lower), upper)
    z = 2.0 * (c - lower) / (upper - lower) - 1.0
    x = np.empty_like(z)
    x[:, 0] = 1.0
    x[:, 1:] = z[:, :-1]
    yt = z[:, -1]
    rows, cols = np.triu_indices(w)
    out[:, :w] = x * yt[:, None]
    out[:, w] = yt * yt
    out[:, w + 1:] = (x[:, rows] * x[:, cols])[:, 1:]


def regression_propose(z, mean, chol, beta, sigma, out):
    p = z.shape[1] - 1
    m = mean.tolist()
    L = chol.tolist()
    b = beta.tolist()
    rows = []
    for zi in z.tolist():
        row = []
        for j in range(p):
            acc = m[j]
            for k in range(j + 1):
                acc = acc + L[j][k] * zi[k]
            row.append(acc)
        acc = b[0]
        for j in range(p):
            acc = acc + row[j] * b[j + 1]
        row.append(acc + sigma * zi[p])
        rows.append(row)
    if rows:
        out[:] = rows


def regression_gram(records, xtx, xty):
    q = records.shape[1]
    p = q - 1
    g = [[0.0] * q for _ in range(q)]
    v = [0.0] * q
    for rec in records.tolist():
        y = rec[p]
        x = [1.0] + rec[:p]
        for a in range(q):
            xa = x[a]
            v[a] = v[a] + xa * y
            ga = g[a]
            for b in range(a, q):
                ga[b] = ga[b] + xa * x[b]
    for a in range(q):
        for b in range(a):
            g[a][b] = g[b][a]
    xtx[:] = g
    xty[:] = v


def normal_precision_draw(precision, shift, z, out):
    q = precision.shape[0]
    P = precision.tolist()
    s = shift.tolist()
    zz = z.tolist()
    v = [0.0] * q
    for j in range(q):
        acc = P[j][j]
        for k in range(j):
            acc = acc - P[j][k] * P[j][k]
        if not acc > 0.0:
            return False
        P[j][j] = sqrt(acc)
        for i in range(j + 1, q):
            acc = P[i][j]
            for k in range(j):
                acc = acc - P[i][k] * P[j][k]
            P[i][j] = acc / P[j][j]
    for i in range(q):
        acc = s[i]
        for k in range(i):
            acc = acc - P[i][k] * s[k]
        s[i] = acc / P[i][i]
    for i in range(q - 1, -1, -1):
        acc = s[i]
        for k in range(i + 1, q):
            acc = acc - P[k][i] * s[k]
        s[i] = acc / P[i][i]
    for i in range(q - 1, -1, -1):
        acc = zz[i]
        for k in range(i + 1, q):
            acc = acc - P[k][i] * v[k]
        v[i] = acc / P[i][i]
    precision[:] = P
    shift[:] = s
    out[:] = [s[i] + v[i] for i in range(q)]
    return True
