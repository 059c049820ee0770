"""Pure-Python reference versions of the compiled kernels in ``_kernels.pyx``.

Selected automatically when the extension is not built, or forced with
``ACTIVEMAP_PURE_PYTHON=1``.
"""

import math

import numpy as np

BACKEND = "python"

MOMENT_FLOOR = 1e-200  # keeps Adam moments out of the slow subnormal range

_INV_LN2 = 1.0 / math.log(2.0)


def _prob(l):
    return 1.0 - 1.0 / (1.0 + math.exp(l))


def _h(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log(1.0 - p))


def _cell_gain(p, acc):
    pz1 = p * acc + (1.0 - p) * (1.0 - acc)
    pz0 = 1.0 - pz1
    post1 = p * acc / pz1
    post0 = p * (1.0 - acc) / pz0
    return _h(p) - (pz1 * _h(post1) + pz0 * _h(post0))


def apply_readings(logodds, rows, cols, readings, step, lmax):
    for r, c, z in zip(rows.tolist(), cols.tolist(), readings.tolist()):
        v = logodds[r, c] + step if z else logodds[r, c] - step
        logodds[r, c] = min(lmax, max(-lmax, v))


def _gain_at(logodds, r, c, offsets, acc):
    n = logodds.shape[0]
    total = 0.0
    for dr, dc in offsets.tolist():
        rr, cc = r + dr, c + dc
        if 0 <= rr < n and 0 <= cc < n:
            total += _cell_gain(_prob(float(logodds[rr, cc])), acc)
    return total


def neighborhood_gain(logodds, r, c, offsets, accuracy):
    return _gain_at(logodds, r, c, offsets, accuracy)


def myopic_scores(logodds, r, c, sense_offsets, move_offsets, accuracy, optimistic):
    n = logodds.shape[0]
    stay = _gain_at(logodds, r, c, sense_offsets, accuracy)
    scores = np.empty(move_offsets.shape[0])
    for a, (dr, dc) in enumerate(move_offsets.tolist()):
        rr, cc = r + dr, c + dc
        if not (0 <= rr < n and 0 <= cc < n):
            scores[a] = stay
        elif optimistic:
            scores[a] = _gain_at(logodds, rr, cc, sense_offsets, accuracy)
        else:
            q = _prob(float(logodds[rr, cc]))
            scores[a] = (1.0 - q) * _gain_at(logodds, rr, cc, sense_offsets, accuracy) + q * stay
    return scores


def centered_features(logodds, r, c, out):
    n = logodds.shape[0]
    out[0].fill(1.0)
    out[1].fill(-1.0)
    p = 1.0 - 1.0 / (1.0 + np.exp(logodds))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1.0 - p) * np.log(1.0 - p))
    h[(p <= 0.0) | (p >= 1.0)] = 0.0
    r0, c0 = n - 1 - r, n - 1 - c
    out[0, r0:r0 + n, c0:c0 + n] = 2.0 * p - 1.0
    out[1, r0:r0 + n, c0:c0 + n] = 2.0 * h * _INV_LN2 - 1.0


def bfs_plan(passable, targets, r, c, move_offsets):
    """Action sequence of a shortest passable path to the nearest target."""
    n = passable.shape[0]
    moves = move_offsets.tolist()
    start = (r, c)
    parent = {start: None}
    queue = [start]
    head = 0
    goal = None
    while head < len(queue):
        cur = queue[head]
        head += 1
        if cur != start and targets[cur]:
            goal = cur
            break
        for a, (dr, dc) in enumerate(moves):
            nxt = (cur[0] + dr, cur[1] + dc)
            if not (0 <= nxt[0] < n and 0 <= nxt[1] < n):
                continue
            if nxt in parent or not passable[nxt]:
                continue
            parent[nxt] = (cur, a)
            queue.append(nxt)
    if goal is None:
        return []
    path = []
    cur = goal
    while cur != start:
        cur, a = parent[cur]
        path.append(a)
    path.reverse()
    return path


def adam_update(params, m, v, grads, lr, beta1, beta2, eps, t):
    """Bias-corrected Adam step over flat arrays, in place."""
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    m[np.abs(m) < MOMENT_FLOOR] = 0.0
    v[v < MOMENT_FLOOR] = 0.0
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)
