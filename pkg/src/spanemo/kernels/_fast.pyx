# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled loss kernels: fused per-example value + gradient loops."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def bce_batch(object y_obj, object y_hat_obj, double eps):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y = np.ascontiguousarray(y_obj, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y_hat = np.ascontiguousarray(y_hat_obj, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0], c = y.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] values = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((n, c), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double p, clamped, acc
    for i in range(n):
        acc = 0.0
        for j in range(c):
            p = y_hat[i, j]
            clamped = p
            if clamped < eps:
                clamped = eps
            elif clamped > 1.0 - eps:
                clamped = 1.0 - eps
            acc += -(y[i, j] * log(clamped) + (1.0 - y[i, j]) * log(1.0 - clamped))
            if eps <= p <= 1.0 - eps:
                grad[i, j] = (-y[i, j] / clamped + (1.0 - y[i, j]) / (1.0 - clamped)) / c
        values[i] = acc / c
    return values, grad


def lca_batch(object y_obj, object y_hat_obj):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y = np.ascontiguousarray(y_obj, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y_hat = np.ascontiguousarray(y_hat_obj, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0], c = y.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] values = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((n, c), dtype=np.float64)
    cdef Py_ssize_t i, p, q, n_pos, n_neg
    cdef double term, scale, acc
    for i in range(n):
        n_pos = 0
        for q in range(c):
            if y[i, q] == 1.0:
                n_pos += 1
        n_neg = c - n_pos
        if n_pos == 0 or n_neg == 0:
            continue
        scale = 1.0 / (n_neg * n_pos)
        acc = 0.0
        for p in range(c):
            if y[i, p] != 0.0:
                continue
            for q in range(c):
                if y[i, q] != 1.0:
                    continue
                term = exp(y_hat[i, p] - y_hat[i, q])
                acc += term
                grad[i, p] += term * scale
                grad[i, q] -= term * scale
        values[i] = acc * scale
    return values, grad
