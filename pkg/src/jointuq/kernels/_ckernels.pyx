# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels.

Same contracts as ``_pykernels``; see that module for the semantics. Dense
products below ``_BLAS_THRESHOLD`` multiply-adds run as plain C loops, which
for the small layers and minibatches used in training beats the call
overhead of a BLAS dispatch. Larger products go through numpy, as do tanh
activations on large blocks. Buffers are reached through raw pointers to keep
per-call overhead low at batch size 1.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, tanh, fabs

cnp.import_array()

cdef enum:
    LINEAR = 0
    TANH = 1
    RELU = 2
    SIGMOID = 3
    SOFTPLUS = 4

cdef Py_ssize_t _BLAS_THRESHOLD = 200000
cdef Py_ssize_t _UFUNC_THRESHOLD = 512


cdef inline double _softplus(double x) noexcept nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline double _act(double z, int act) noexcept nogil:
    if act == TANH:
        return tanh(z)
    if act == RELU:
        return z if z > 0 else 0.0
    if act == SIGMOID:
        return _sigmoid(z)
    if act == SOFTPLUS:
        return _softplus(z)
    return z


cdef inline double _act_grad(double z, int act) noexcept nogil:
    cdef double t
    if act == TANH:
        t = tanh(z)
        return 1.0 - t * t
    if act == RELU:
        return 1.0 if z > 0 else 0.0
    if act == SIGMOID:
        t = _sigmoid(z)
        return t * (1.0 - t)
    if act == SOFTPLUS:
        return _sigmoid(z)
    return 1.0


cdef inline double* _data(cnp.ndarray a):
    return <double*> cnp.PyArray_DATA(a)


cdef inline cnp.ndarray _c64(obj):
    return np.ascontiguousarray(obj, dtype=np.float64)


cdef void _dense_forward(const double* a, const double* w, const double* b, double* z,
                         Py_ssize_t n, Py_ssize_t k, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j, p
    cdef const double* ai
    cdef const double* wj
    cdef double s
    for i in range(n):
        ai = a + i * k
        for j in range(m):
            wj = w + j * k
            s = b[j]
            for p in range(k):
                s += ai[p] * wj[p]
            z[i * m + j] = s


cdef void _activate(const double* z, const double* mask, double* h, Py_ssize_t size, int act) noexcept nogil:
    cdef Py_ssize_t i
    if mask == NULL:
        for i in range(size):
            h[i] = _act(z[i], act)
    else:
        for i in range(size):
            h[i] = _act(z[i], act) * mask[i] if mask[i] != 0.0 else 0.0


cdef void _delta(const double* g, const double* z, const double* h, const double* mask,
                 double* dz, Py_ssize_t size, int act) noexcept nogil:
    # tanh and sigmoid derivatives come from the stored outputs (mask divided
    # back out) so the backward pass makes no transcendental calls for them
    cdef Py_ssize_t i
    cdef double m, t
    for i in range(size):
        m = 1.0 if mask == NULL else mask[i]
        if m == 0.0:
            dz[i] = 0.0
            continue
        if act == TANH:
            t = h[i] if mask == NULL else h[i] / m
            dz[i] = g[i] * m * (1.0 - t * t)
        elif act == SIGMOID:
            t = h[i] if mask == NULL else h[i] / m
            dz[i] = g[i] * m * (t * (1.0 - t))
        elif act == RELU:
            dz[i] = g[i] * m if z[i] > 0 else 0.0
        elif act == SOFTPLUS:
            dz[i] = g[i] * m * _sigmoid(z[i])
        else:
            dz[i] = g[i] * m


cdef void _dense_backward(const double* dz, const double* a, const double* w,
                          double* dw, double* db, double* ga,
                          Py_ssize_t n, Py_ssize_t k, Py_ssize_t m) noexcept nogil:
    # ga may be NULL for the first layer
    cdef Py_ssize_t i, j, p
    cdef const double* ai
    cdef double* dwj
    cdef const double* wj
    cdef double* gi
    cdef double s
    for i in range(n):
        ai = a + i * k
        gi = ga + i * k if ga != NULL else NULL
        for j in range(m):
            s = dz[i * m + j]
            db[j] += s
            if s == 0.0:
                continue
            dwj = dw + j * k
            for p in range(k):
                dwj[p] += s * ai[p]
            if gi != NULL:
                wj = w + j * k
                for p in range(k):
                    gi[p] += s * wj[p]


def forward_pass(list weights, list biases, acts, x, list masks):
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t layer, n, m, k
    cdef int act
    cdef cnp.ndarray a, w, b, z, h, mk
    cdef const double* mp
    a = _c64(x)
    n = a.shape[0]
    pres = []
    posts = [a]
    for layer in range(n_layers):
        w = _c64(weights[layer])
        m = w.shape[0]
        k = w.shape[1]
        act = acts[layer]
        if n * m * k > _BLAS_THRESHOLD:
            z = _c64(a @ w.T + biases[layer])
        else:
            b = _c64(biases[layer])
            z = np.empty((n, m), dtype=np.float64)
            _dense_forward(_data(a), _data(w), _data(b), _data(z), n, k, m)
        if act == TANH and n * m >= _UFUNC_THRESHOLD:
            # numpy's vectorised tanh beats scalar libm calls on big blocks
            h = np.tanh(z)
            if masks[layer] is not None:
                h *= masks[layer]
        else:
            h = np.empty((n, m), dtype=np.float64)
            mp = NULL
            if masks[layer] is not None:
                mk = _c64(masks[layer])
                mp = _data(mk)
            _activate(_data(z), mp, _data(h), n * m, act)
        pres.append(z)
        posts.append(h)
        a = h
    return pres, posts


def backward_pass(list weights, acts, list pres, list posts, list masks,
                  grad_out, bint at_preactivation):
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t layer, n, m, k
    cdef int act
    cdef cnp.ndarray g, w, z, h, a, dz, dw, db, ga, mk
    cdef const double* mp
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    g = _c64(grad_out)
    for layer in range(n_layers - 1, -1, -1):
        w = _c64(weights[layer])
        z = _c64(pres[layer])
        h = _c64(posts[layer + 1])
        a = _c64(posts[layer])
        n = z.shape[0]
        m = z.shape[1]
        k = a.shape[1]
        if layer == n_layers - 1 and at_preactivation:
            dz = g
        else:
            act = acts[layer]
            mp = NULL
            if masks[layer] is not None:
                mk = _c64(masks[layer])
                mp = _data(mk)
            dz = np.empty((n, m), dtype=np.float64)
            _delta(_data(g), _data(z), _data(h), mp, _data(dz), n * m, act)
        if n * m * k > _BLAS_THRESHOLD:
            d_weights[layer] = _c64(dz.T @ a)
            d_biases[layer] = dz.sum(axis=0)
            if layer > 0:
                g = _c64(dz @ w)
            continue
        dw = np.zeros((m, k), dtype=np.float64)
        db = np.zeros(m, dtype=np.float64)
        if layer > 0:
            ga = np.zeros((n, k), dtype=np.float64)
            _dense_backward(_data(dz), _data(a), _data(w), _data(dw), _data(db), _data(ga), n, k, m)
            g = ga
        else:
            _dense_backward(_data(dz), _data(a), _data(w), _data(dw), _data(db), NULL, n, k, m)
        d_weights[layer] = dw
        d_biases[layer] = db
    return d_weights, d_biases


def nesterov_update(list params, list grads, list velocities, double lr, double momentum):
    cdef Py_ssize_t idx, i, size
    cdef double[::1] pv, vv
    cdef const double[::1] gv
    cdef double gi
    for idx in range(len(params)):
        pv = params[idx].reshape(-1)
        gv = np.ascontiguousarray(grads[idx]).reshape(-1)
        vv = velocities[idx].reshape(-1)
        size = pv.shape[0]
        with nogil:
            for i in range(size):
                gi = gv[i]
                vv[i] = momentum * vv[i] - lr * gi
                pv[i] += momentum * vv[i] - lr * gi


def joint_loss_batch(int head, int loss_kind, y, y_r, xi, double lam):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] yrv = np.ascontiguousarray(y_r, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    value = np.empty(n, dtype=np.float64)
    d_yr = np.empty(n, dtype=np.float64)
    d_xi = np.empty(n, dtype=np.float64)
    f_out = np.empty(n, dtype=np.float64)
    cdef double[::1] vv = value, dyv = d_yr, dxv = d_xi, fv = f_out
    cdef double r, big_l, dl, f, g, df, dg, x
    with nogil:
        for i in range(n):
            r = yv[i] - yrv[i]
            if loss_kind == 0:
                big_l = r * r
                dl = -2.0 * r
            else:
                big_l = fabs(r)
                dl = -1.0 if r > 0 else (1.0 if r < 0 else 0.0)
            x = xv[i]
            if head == 0:
                f = _softplus(x)
                g = _softplus(-x)
                df = _sigmoid(x)
                dg = -_sigmoid(-x)
            else:
                f = _softplus(x)
                g = -log(f)
                df = _sigmoid(x)
                dg = -df / f
            vv[i] = big_l * f + lam * g
            dyv[i] = dl * f
            dxv[i] = big_l * df + lam * dg
            fv[i] = f
    return value, d_yr, d_xi, f_out


def regressor_loss_batch(int loss_kind, y, y_r):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] yrv = np.ascontiguousarray(y_r, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], i
    value = np.empty(n, dtype=np.float64)
    grad = np.empty(n, dtype=np.float64)
    cdef double[::1] vv = value, gv = grad
    cdef double r
    with nogil:
        for i in range(n):
            r = yv[i] - yrv[i]
            if loss_kind == 0:
                vv[i] = r * r
                gv[i] = -2.0 * r
            else:
                vv[i] = fabs(r)
                gv[i] = -1.0 if r > 0 else (1.0 if r < 0 else 0.0)
    return value, grad
