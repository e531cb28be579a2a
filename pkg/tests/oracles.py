"""Independent reference computations used as test oracles.

Plain Python loops and scalar math only, so they share no code path with
the vectorised implementations they check.
"""

import math
from collections import Counter


def brute_conv(x, weight, bias):
    """x: n rows of d floats; weight: m x d x l; returns (n-l+1) x m."""
    n, d = len(x), len(x[0])
    m, l = len(weight), len(weight[0][0])
    out = []
    for i in range(n - l + 1):
        row = []
        for j in range(m):
            acc = bias[j]
            for k in range(l):
                for c in range(d):
                    acc += weight[j][c][k] * x[i + k][c]
            row.append(acc)
        out.append(row)
    return out


def brute_max_pool(rows):
    return [max(r[j] for r in rows) for j in range(len(rows[0]))]


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def scalar_lstm_step(W, b, h_prev, c_prev, x):
    """W, b: dicts keyed by gate 'f','i','c','o' of nested lists; returns (c, h, gates)."""
    hx = list(h_prev) + list(x)
    H = len(h_prev)

    def affine(g, r):
        return sum(W[g][r][k] * hx[k] for k in range(len(hx))) + b[g][r]

    f = [_sig(affine("f", r)) for r in range(H)]
    i = [_sig(affine("i", r)) for r in range(H)]
    ct = [math.tanh(affine("c", r)) for r in range(H)]
    c = [f[r] * c_prev[r] + i[r] * ct[r] for r in range(H)]
    o = [_sig(affine("o", r)) for r in range(H)]
    h = [o[r] * math.tanh(c[r]) for r in range(H)]
    return c, h, {"f": f, "i": i, "c": ct, "o": o}


def pair_auc(positive, scores):
    """Fraction of (positive, negative) pairs ranked correctly, ties counted half."""
    pos = [s for y, s in zip(positive, scores) if y]
    neg = [s for y, s in zip(positive, scores) if not y]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def tally(truth, pred):
    """truth/pred: booleans (True = abusive)."""
    counts = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for t, p in zip(truth, pred):
        key = ("t" if t == p else "f") + ("p" if p else "n")
        counts[key] += 1
    return counts


def brute_tfidf(docs, norm=True):
    """docs: token lists; returns (vocab sorted, list of {token: weight})."""
    n = len(docs)
    df = Counter(t for d in docs for t in set(d))
    idf = {t: math.log((1 + n) / (1 + df[t])) + 1 for t in df}
    out = []
    for d in docs:
        tf = Counter(d)
        w = {t: tf[t] * idf[t] for t in tf}
        if norm:
            z = math.sqrt(sum(v * v for v in w.values()))
            w = {t: v / z for t, v in w.items()}
        out.append(w)
    return sorted(df), out


def multinomial_nb_posterior(count_rows, labels, query, alpha=1.0):
    """Closed-form multinomial NB with Laplace smoothing; returns P(class=1 | query)."""
    V = len(query)
    log_post = {}
    for c in (0, 1):
        rows = [r for r, y in zip(count_rows, labels) if y == c]
        prior = len(rows) / len(labels)
        totals = [sum(r[v] for r in rows) for v in range(V)]
        denom = sum(totals) + alpha * V
        lp = math.log(prior)
        for v in range(V):
            lp += query[v] * math.log((totals[v] + alpha) / denom)
        log_post[c] = lp
    m = max(log_post.values())
    z = sum(math.exp(v - m) for v in log_post.values())
    return math.exp(log_post[1] - m) / z
