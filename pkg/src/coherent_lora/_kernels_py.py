"""Pure numpy implementations of the compiled kernels.

Used when the extension is unavailable or ``COHERENT_LORA_PURE=1`` is set.
"""

import numpy as np
from scipy.special import log_ndtr, ndtr

INV_SQRT_2PI = 0.3989422804014327


def _q(x):
    return ndtr(-x)


def _top_two(values, mask):
    vals = np.where(mask, values, -np.inf)
    arg1 = np.argmax(vals, axis=1)
    rows = np.arange(vals.shape[0])
    top1 = vals[rows, arg1]
    vals[rows, arg1] = -np.inf
    top2 = vals.max(axis=1)
    return top1, top2, arg1


def pairwise_q_sums(v, valid, N, scales, out):
    valid = valid.astype(bool)
    top1, top2, arg1 = _top_two(v, valid)
    cols = np.arange(v.shape[1])
    vmax = np.where(cols[None, :] == arg1[:, None], top2[:, None], top1[:, None])
    nd = valid.sum(axis=1)
    for si, sc in enumerate(scales):
        terms = np.where(valid, _q((N + v - vmax) * sc), 0.0)
        acc = terms.sum(axis=1) + (N - nd) * _q((N - top1) * sc)
        out[si] += np.sum(acc / N)


def max_projection_sums(proj, eligible, scales, out):
    N = proj.shape[1]
    top1, top2, arg1 = _top_two(proj, eligible.astype(bool))
    cols = np.arange(N)
    vmax = np.where(cols[None, :] == arg1[:, None], top2[:, None], top1[:, None])
    for si, sc in enumerate(scales):
        with np.errstate(invalid="ignore"):
            terms = _q((N + proj - vmax) * sc)
        terms = np.where(np.isneginf(vmax), 0.0, terms)
        out[si] += np.sum(terms.sum(axis=1) / N)


def _lattice_segments(a, e):
    """Merge integer windows [a_s, e_s]; return starts, ends, offsets, segment per window."""
    order = np.argsort(a, kind="stable")
    starts, ends, seg_of = [], [], np.empty(a.size, dtype=np.int64)
    for s in order:
        if starts and a[s] <= ends[-1] + 1:
            ends[-1] = max(ends[-1], e[s])
        else:
            starts.append(a[s])
            ends.append(e[s])
        seg_of[s] = len(starts) - 1
    starts = np.array(starts, dtype=np.int64)
    ends = np.array(ends, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(ends - starts + 1)))
    return starts, ends, offsets, seg_of


def exact_error_probs(mu, sigma, width, ny, out):
    B, N = mu.shape
    h = 2.0 * width * sigma / (ny - 1)
    half = width * sigma
    for b in range(B):
        row = mu[b]
        centers = N + row
        a = np.ceil((centers - half) / h - 1e-9).astype(np.int64)
        e = np.floor((centers + half) / h + 1e-9).astype(np.int64)
        starts, ends, offsets, seg_of = _lattice_segments(a, e)
        idx = np.concatenate([np.arange(s0, s1 + 1) for s0, s1 in zip(starts, ends)])
        y = idx * h
        total = np.zeros(y.size)
        for k in range(N):
            total += log_ndtr((y - row[k]) / sigma)
        for s in range(N):
            g = seg_of[s]
            nodes = np.arange(a[s], e[s] + 1)
            pos = offsets[g] + nodes - starts[g]
            yy = nodes * h
            u = (yy - centers[s]) / sigma
            ls = log_ndtr((yy - row[s]) / sigma)
            vals = np.exp(-0.5 * u * u) * -np.expm1(total[pos] - ls)
            out[b, s] = vals.sum() * h * INV_SQRT_2PI / sigma
