# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython MLP forward/backward kernels.

Mirrors python_backend exactly: same parameter layout (W0, b0, W1, b1, ...),
same stable-softmax cross-entropy, same accumulation order. Matrix products
go through BLAS dgemm; bias, ReLU and softmax/cross-entropy stay fused in C
loops, avoiding the temporaries the numpy path allocates per call.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND_NAME = "cython"


def param_count(sizes):
    return int(sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1)))


cdef void _matmul(char ta, char tb, int m, int n, int k,
                  const double *a, int lda, const double *b, int ldb,
                  double *c, int ldc) noexcept nogil:
    # row-major products expressed through Fortran dgemm on transposed views
    cdef double one = 1.0, zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, <double *> a, &lda,
          <double *> b, &ldb, &zero, c, &ldc)


cdef void _affine(const double[:, ::1] a, const double[::1] theta,
                  Py_ssize_t off, int fan_in, int fan_out,
                  double[:, ::1] out) noexcept nogil:
    # out(n, fan_out) = a(n, fan_in) @ W(fan_in, fan_out) + b
    cdef int n = <int> a.shape[0]
    cdef Py_ssize_t i, j
    cdef Py_ssize_t boff = off + fan_in * fan_out
    _matmul(b'N', b'N', fan_out, n, fan_in,
            &theta[off], fan_out, &a[0, 0], fan_in, &out[0, 0], fan_out)
    for i in range(n):
        for j in range(fan_out):
            out[i, j] += theta[boff + j]


cdef double _softmax_xent(const double[:, ::1] logits, const long[::1] y,
                          double[:, ::1] probs) noexcept nogil:
    cdef Py_ssize_t n = logits.shape[0], c = logits.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, s, loss = 0.0
    for i in range(n):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        s = 0.0
        for j in range(c):
            probs[i, j] = exp(logits[i, j] - m)
            s += probs[i, j]
        for j in range(c):
            probs[i, j] /= s
        loss += log(s) + m - logits[i, y[i]]
    return loss / n


def mlp_loss_grad(double[::1] theta, sizes, double[:, ::1] x, long[::1] y):
    cdef Py_ssize_t nl = len(sizes) - 1
    cdef int n = <int> x.shape[0]
    cdef Py_ssize_t i, j, k, li
    cdef Py_ssize_t off, boff
    cdef int fan_in, fan_out

    offsets = []
    off = 0
    for li in range(nl):
        offsets.append(off)
        off += (int(sizes[li]) + 1) * int(sizes[li + 1])

    # forward, keeping pre-activations for the backward ReLU masks
    acts = [np.asarray(x)]
    pre = []
    cdef double[:, ::1] a = x
    cdef double[:, ::1] z
    for li in range(nl):
        fan_in = int(sizes[li]); fan_out = int(sizes[li + 1])
        znp = np.empty((n, fan_out))
        z = znp
        _affine(a, theta, offsets[li], fan_in, fan_out, z)
        pre.append(znp)
        if li < nl - 1:
            anp = np.maximum(znp, 0.0)
        else:
            anp = znp
        acts.append(anp)
        a = anp

    probs_np = np.empty((n, int(sizes[nl])))
    cdef double[:, ::1] probs = probs_np
    cdef double[:, ::1] logits = pre[nl - 1]
    cdef double loss = _softmax_xent(logits, y, probs)

    grad_np = np.zeros(param_count(sizes))
    cdef double[::1] grad = grad_np

    # dz for the output layer: (softmax - onehot) / n
    dz_np = probs_np.copy()
    cdef double[:, ::1] dz = dz_np
    for i in range(n):
        dz[i, y[i]] -= 1.0
    for i in range(n):
        for j in range(dz.shape[1]):
            dz[i, j] /= n

    cdef double[:, ::1] ain, zprev, dzp
    cdef double acc
    for li in range(nl - 1, -1, -1):
        fan_in = int(sizes[li]); fan_out = int(sizes[li + 1])
        off = offsets[li]
        boff = off + fan_in * fan_out
        ain = acts[li]
        with nogil:
            # gW(fan_in, fan_out) = ain.T @ dz
            _matmul(b'N', b'T', fan_out, fan_in, n,
                    &dz[0, 0], fan_out, &ain[0, 0], fan_in, &grad[off], fan_out)
            for j in range(fan_out):
                acc = 0.0
                for i in range(n):
                    acc += dz[i, j]
                grad[boff + j] = acc
        if li > 0:
            dzp_np = np.empty((n, fan_in))
            dzp = dzp_np
            zprev = pre[li - 1]
            with nogil:
                # dA(n, fan_in) = dz @ W.T, then the ReLU mask
                _matmul(b'T', b'N', fan_in, n, fan_out,
                        &theta[off], fan_out, &dz[0, 0], fan_out,
                        &dzp[0, 0], fan_in)
                for i in range(n):
                    for k in range(fan_in):
                        if zprev[i, k] <= 0.0:
                            dzp[i, k] = 0.0
            dz_np = dzp_np
            dz = dz_np
    return float(loss), grad_np


def mlp_loss(double[::1] theta, sizes, double[:, ::1] x, long[::1] y):
    cdef Py_ssize_t nl = len(sizes) - 1
    cdef int n = <int> x.shape[0]
    cdef Py_ssize_t li, off = 0
    cdef int fan_in, fan_out
    offsets = []
    for li in range(nl):
        offsets.append(off)
        off += (int(sizes[li]) + 1) * int(sizes[li + 1])
    cdef double[:, ::1] a = x
    cdef double[:, ::1] z
    for li in range(nl):
        fan_in = int(sizes[li]); fan_out = int(sizes[li + 1])
        znp = np.empty((n, fan_out))
        z = znp
        _affine(a, theta, offsets[li], fan_in, fan_out, z)
        if li < nl - 1:
            anp = np.maximum(znp, 0.0)
            a = anp
        else:
            a = znp
    probs_np = np.empty((n, int(sizes[nl])))
    cdef double[:, ::1] probs = probs_np
    cdef double loss = _softmax_xent(a, y, probs)
    return float(loss)
