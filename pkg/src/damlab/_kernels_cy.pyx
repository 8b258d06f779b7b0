# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: per-matrix Pade-13 matrix exponentials and trace kernels.

Same algorithm and coefficients as the numpy backend (_kernels_py), written
out per matrix so a (p, p') grid of small coupled generators is exponentiated
without temporaries or per-matrix Python dispatch. Squaring counts are chosen
per matrix; both backends therefore agree to rounding error regardless of
batch composition.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, ldexp, log2, sqrt
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

ctypedef double complex zdouble

# Hand-rolled matmul wins below this order (BLAS call overhead dominates
# for the 4x4 qubit superoperators that make up most workloads).
DEF BLAS_MIN_ORDER = 8

cdef double _THETA13 = 5.371920351148152
cdef double[14] _B
_B[0] = 64764752532480000.0
_B[1] = 32382376266240000.0
_B[2] = 7771770303897600.0
_B[3] = 1187353796428800.0
_B[4] = 129060195264000.0
_B[5] = 10559470521600.0
_B[6] = 670442572800.0
_B[7] = 33522128640.0
_B[8] = 1323241920.0
_B[9] = 40840800.0
_B[10] = 960960.0
_B[11] = 16380.0
_B[12] = 182.0
_B[13] = 1.0


cdef inline double _zmod(zdouble z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef void _zmatmul(zdouble* a, zdouble* b, zdouble* c, int m) nogil:
    # c = a @ b, row-major, c distinct from a and b. Large orders go through
    # zgemm: swapping the operands makes the column-major BLAS convention
    # compute the row-major product.
    cdef int i, j, k
    cdef zdouble aik
    cdef zdouble one = 1, zero = 0
    cdef char trans = b'N'
    if m >= BLAS_MIN_ORDER:
        zgemm(&trans, &trans, &m, &m, &m, &one, b, &m, a, &m, &zero, c, &m)
        return
    for i in range(m * m):
        c[i] = 0
    for i in range(m):
        for k in range(m):
            aik = a[i * m + k]
            for j in range(m):
                c[i * m + j] = c[i * m + j] + aik * b[k * m + j]


cdef int _zsolve(zdouble* a, zdouble* b, int m) nogil:
    # Solve a @ x = b for an m x m right-hand side, in place (x lands in b).
    # Gaussian elimination with partial pivoting; returns -1 when singular.
    cdef int i, j, k, piv
    cdef double best, mag
    cdef zdouble f, tmp
    for k in range(m):
        piv = k
        best = a[k * m + k].real * a[k * m + k].real + a[k * m + k].imag * a[k * m + k].imag
        for i in range(k + 1, m):
            mag = a[i * m + k].real * a[i * m + k].real + a[i * m + k].imag * a[i * m + k].imag
            if mag > best:
                best = mag
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(m):
                tmp = a[k * m + j]
                a[k * m + j] = a[piv * m + j]
                a[piv * m + j] = tmp
                tmp = b[k * m + j]
                b[k * m + j] = b[piv * m + j]
                b[piv * m + j] = tmp
        for i in range(k + 1, m):
            f = a[i * m + k] / a[k * m + k]
            if f != 0:
                for j in range(k, m):
                    a[i * m + j] = a[i * m + j] - f * a[k * m + j]
                for j in range(m):
                    b[i * m + j] = b[i * m + j] - f * b[k * m + j]
    for k in range(m - 1, -1, -1):
        for j in range(m):
            f = b[k * m + j]
            for i in range(k + 1, m):
                f = f - a[k * m + i] * b[i * m + j]
            b[k * m + j] = f / a[k * m + k]
    return 0


cdef int _expm_one(zdouble* a_in, zdouble* out, zdouble* work, int m) nogil:
    # out = exp(a_in); work holds 8 m*m scratch blocks.
    cdef zdouble* a = work
    cdef zdouble* a2 = work + m * m
    cdef zdouble* a4 = work + 2 * m * m
    cdef zdouble* a6 = work + 3 * m * m
    cdef zdouble* t1 = work + 4 * m * m
    cdef zdouble* t2 = work + 5 * m * m
    cdef zdouble* u = work + 6 * m * m
    cdef zdouble* v = work + 7 * m * m
    cdef int i, j, s
    cdef double norm, colsum, scale

    norm = 0.0
    for j in range(m):
        colsum = 0.0
        for i in range(m):
            colsum += _zmod(a_in[i * m + j])
        if colsum > norm:
            norm = colsum
    s = 0
    if norm > _THETA13:
        s = <int>ceil(log2(norm / _THETA13))
    scale = ldexp(1.0, -s)
    for i in range(m * m):
        a[i] = a_in[i] * scale

    _zmatmul(a, a, a2, m)
    _zmatmul(a2, a2, a4, m)
    _zmatmul(a2, a4, a6, m)

    for i in range(m * m):
        t1[i] = _B[13] * a6[i] + _B[11] * a4[i] + _B[9] * a2[i]
    _zmatmul(a6, t1, t2, m)
    for i in range(m * m):
        t2[i] = t2[i] + _B[7] * a6[i] + _B[5] * a4[i] + _B[3] * a2[i]
    for i in range(m):
        t2[i * m + i] = t2[i * m + i] + _B[1]
    _zmatmul(a, t2, u, m)

    for i in range(m * m):
        t1[i] = _B[12] * a6[i] + _B[10] * a4[i] + _B[8] * a2[i]
    _zmatmul(a6, t1, v, m)
    for i in range(m * m):
        v[i] = v[i] + _B[6] * a6[i] + _B[4] * a4[i] + _B[2] * a2[i]
    for i in range(m):
        v[i * m + i] = v[i * m + i] + _B[0]

    # (v - u) out = (v + u)
    for i in range(m * m):
        t1[i] = v[i] - u[i]
        out[i] = v[i] + u[i]
    if _zsolve(t1, out, m) != 0:
        return -1

    for j in range(s):
        _zmatmul(out, out, t2, m)
        memcpy(out, t2, m * m * sizeof(zdouble))
    return 0


def expm_batch(a):
    """exp(A_j) for a stack of square complex matrices, shape (n, m, m)."""
    cdef cnp.ndarray[zdouble, ndim=3, mode="c"] arr = np.ascontiguousarray(
        a, dtype=np.complex128
    )
    if arr.shape[1] != arr.shape[2]:
        raise ValueError("expected a stack of square matrices")
    cdef int n = <int>arr.shape[0]
    cdef int m = <int>arr.shape[1]
    cdef cnp.ndarray[zdouble, ndim=3, mode="c"] out = np.empty_like(arr)
    cdef zdouble* work = <zdouble*>malloc(8 * m * m * sizeof(zdouble))
    if work == NULL:
        raise MemoryError()
    cdef int j, status = 0
    with nogil:
        for j in range(n):
            if _expm_one(&arr[j, 0, 0], &out[j, 0, 0], work, m) != 0:
                status = -1
                break
    free(work)
    if status != 0:
        raise ArithmeticError("matrix exponential failed (singular Pade denominator)")
    return out


def trace_kernels(base, lin_p, lin_pp, p, pp, w, v):
    """w . exp(base + p_j lin_p + pp_j lin_pp) . v for every pair (p_j, pp_j)."""
    cdef cnp.ndarray[zdouble, ndim=2, mode="c"] b0 = np.ascontiguousarray(base, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=2, mode="c"] b1 = np.ascontiguousarray(lin_p, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=2, mode="c"] b2 = np.ascontiguousarray(lin_pp, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1, mode="c"] pa = np.ascontiguousarray(p, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] pb = np.ascontiguousarray(pp, dtype=np.float64)
    cdef cnp.ndarray[zdouble, ndim=1, mode="c"] wv = np.ascontiguousarray(w, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=1, mode="c"] vv = np.ascontiguousarray(v, dtype=np.complex128)
    cdef int m = <int>b0.shape[0]
    if b0.shape[1] != m or b1.shape[0] != m or b1.shape[1] != m or b2.shape[0] != m or b2.shape[1] != m:
        raise ValueError("generator blocks must be square and same shape")
    if pa.shape[0] != pb.shape[0]:
        raise ValueError("p and pp must have equal length")
    if wv.shape[0] != m or vv.shape[0] != m:
        raise ValueError("vector length mismatch")
    cdef int n = <int>pa.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1, mode="c"] out = np.empty(n, dtype=np.complex128)
    cdef zdouble* work = <zdouble*>malloc(10 * m * m * sizeof(zdouble))
    if work == NULL:
        raise MemoryError()
    cdef zdouble* g = work + 8 * m * m
    cdef zdouble* e = work + 9 * m * m
    cdef zdouble* f0 = &b0[0, 0]
    cdef zdouble* f1 = &b1[0, 0]
    cdef zdouble* f2 = &b2[0, 0]
    cdef int i, j, k, status = 0
    cdef zdouble acc, row
    with nogil:
        for j in range(n):
            for i in range(m * m):
                g[i] = f0[i] + pa[j] * f1[i] + pb[j] * f2[i]
            if _expm_one(g, e, work, m) != 0:
                status = -1
                break
            acc = 0
            for i in range(m):
                row = 0
                for k in range(m):
                    row = row + e[i * m + k] * vv[k]
                acc = acc + wv[i] * row
            out[j] = acc
    free(work)
    if status != 0:
        raise ArithmeticError("matrix exponential failed (singular Pade denominator)")
    return out
