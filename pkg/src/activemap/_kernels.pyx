# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for belief updates, information gain, features and BFS.

Every function here has a line-for-line counterpart in ``_kernels_py`` and
both must agree to floating-point tolerance (see tests/test_kernels.py).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()

BACKEND = "cython"

# Adam moments below this are flushed to zero.  Without it the first moment of
# a parameter with zero gradient decays into the subnormal range after a few
# thousand steps and every update gets tens of times slower.
cdef double MOMENT_FLOOR = 1e-200


cdef inline double _prob(double l) nogil:
    return 1.0 - 1.0 / (1.0 + exp(l))


cdef inline double _h(double p) nogil:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * log(p) + (1.0 - p) * log(1.0 - p))


cdef inline double _cell_gain(double p, double acc) nogil:
    cdef double pz1, pz0, post1, post0
    pz1 = p * acc + (1.0 - p) * (1.0 - acc)
    pz0 = 1.0 - pz1
    post1 = p * acc / pz1
    post0 = p * (1.0 - acc) / pz0
    return _h(p) - (pz1 * _h(post1) + pz0 * _h(post0))


def apply_readings(double[:, ::1] logodds, const long[::1] rows,
                   const long[::1] cols, const signed char[::1] readings,
                   double step, double lmax):
    cdef Py_ssize_t k, n = rows.shape[0]
    cdef double v
    for k in range(n):
        if readings[k]:
            v = logodds[rows[k], cols[k]] + step
        else:
            v = logodds[rows[k], cols[k]] - step
        if v > lmax:
            v = lmax
        elif v < -lmax:
            v = -lmax
        logodds[rows[k], cols[k]] = v


cdef double _gain_at(double[:, ::1] logodds, long r, long c,
                     const long[:, ::1] offsets, double acc) nogil:
    cdef Py_ssize_t k, n = logodds.shape[0]
    cdef long rr, cc
    cdef double total = 0.0
    for k in range(offsets.shape[0]):
        rr = r + offsets[k, 0]
        cc = c + offsets[k, 1]
        if rr < 0 or cc < 0 or rr >= n or cc >= n:
            continue
        total += _cell_gain(_prob(logodds[rr, cc]), acc)
    return total


def neighborhood_gain(double[:, ::1] logodds, long r, long c,
                      const long[:, ::1] offsets, double accuracy):
    return _gain_at(logodds, r, c, offsets, accuracy)


def myopic_scores(double[:, ::1] logodds, long r, long c,
                  const long[:, ::1] sense_offsets,
                  const long[:, ::1] move_offsets,
                  double accuracy, bint optimistic):
    cdef Py_ssize_t a, n = logodds.shape[0]
    cdef long rr, cc
    cdef double q, stay
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scores = np.empty(move_offsets.shape[0])
    stay = _gain_at(logodds, r, c, sense_offsets, accuracy)
    for a in range(move_offsets.shape[0]):
        rr = r + move_offsets[a, 0]
        cc = c + move_offsets[a, 1]
        if rr < 0 or cc < 0 or rr >= n or cc >= n:
            scores[a] = stay
            continue
        if optimistic:
            scores[a] = _gain_at(logodds, rr, cc, sense_offsets, accuracy)
        else:
            q = _prob(logodds[rr, cc])
            scores[a] = (1.0 - q) * _gain_at(logodds, rr, cc, sense_offsets, accuracy) + q * stay
    return scores


def centered_features(double[:, ::1] logodds, long r, long c,
                      double[:, :, ::1] out):
    cdef Py_ssize_t n = logodds.shape[0]
    cdef Py_ssize_t m = 2 * n - 1
    cdef Py_ssize_t i, j
    cdef long br, bc
    cdef double p
    cdef double inv_ln2 = 1.0 / log(2.0)
    for i in range(m):
        br = r - (n - 1) + i
        for j in range(m):
            bc = c - (n - 1) + j
            if br < 0 or bc < 0 or br >= n or bc >= n:
                out[0, i, j] = 1.0
                out[1, i, j] = -1.0
            else:
                p = _prob(logodds[br, bc])
                out[0, i, j] = 2.0 * p - 1.0
                out[1, i, j] = 2.0 * _h(p) * inv_ln2 - 1.0


def bfs_plan(const unsigned char[:, ::1] passable,
             const unsigned char[:, ::1] targets,
             long r, long c, const long[:, ::1] move_offsets):
    """Action sequence of a shortest passable path to the nearest target."""
    cdef Py_ssize_t n = passable.shape[0]
    cdef Py_ssize_t head = 0, tail = 0, a
    cdef long cur, cr, cc, nr, nc, nxt, goal = -1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent = np.full(n * n, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] via = np.full(n * n, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue = np.empty(n * n, dtype=np.int64)
    cdef long start = r * n + c
    parent[start] = start
    queue[tail] = start
    tail += 1
    while head < tail:
        cur = queue[head]
        head += 1
        cr = cur // n
        cc = cur % n
        if cur != start and targets[cr, cc]:
            goal = cur
            break
        for a in range(move_offsets.shape[0]):
            nr = cr + move_offsets[a, 0]
            nc = cc + move_offsets[a, 1]
            if nr < 0 or nc < 0 or nr >= n or nc >= n:
                continue
            nxt = nr * n + nc
            if parent[nxt] != -1 or not passable[nr, nc]:
                continue
            parent[nxt] = cur
            via[nxt] = a
            queue[tail] = nxt
            tail += 1
    if goal < 0:
        return []
    path = []
    cur = goal
    while cur != start:
        path.append(int(via[cur]))
        cur = parent[cur]
    path.reverse()
    return path


def adam_update(double[::1] params, double[::1] m, double[::1] v,
                const double[::1] grads, double lr, double beta1, double beta2,
                double eps, long t):
    """Fused bias-corrected Adam step over flat arrays, in place."""
    cdef Py_ssize_t i, n = params.shape[0]
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double g, mi, vi
    with nogil:
        for i in range(n):
            g = grads[i]
            mi = beta1 * m[i] + (1.0 - beta1) * g
            vi = beta2 * v[i] + (1.0 - beta2) * g * g
            if -MOMENT_FLOOR < mi < MOMENT_FLOOR:
                mi = 0.0
            if vi < MOMENT_FLOOR:
                vi = 0.0
            m[i] = mi
            v[i] = vi
            params[i] -= lr * (mi / c1) / (sqrt(vi / c2) + eps)
