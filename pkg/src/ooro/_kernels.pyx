# cython: language_level=3
"""Compiled mask kernels. Signatures mirror ooro._fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, floor
from libc.string cimport memset
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

IMPLEMENTATION = "cython"


def rle_string_to_counts(bytes s):
    cdef Py_ssize_t n = len(s), p = 0, m = 0, k
    cdef const unsigned char[:] buf = s
    cdef long long x, c
    cdef int more
    out = np.empty(n, dtype=np.int64)
    cdef long long[:] cnt = out
    while p < n:
        x = 0
        k = 0
        more = 1
        while more:
            if p >= n:
                raise ValueError("truncated RLE string")
            c = <long long>buf[p] - 48
            x |= (c & 0x1f) << (5 * k)
            more = c & 0x20
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= (-1) << (5 * k)
        if m > 2:
            x += cnt[m - 2]
        cnt[m] = x
        m += 1
    return out[:m].copy()


def rle_to_mask(cnp.int64_t[:] counts, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t total = h * w, pos = 0, i, run
    cdef unsigned char val = 0
    # fill runs in column-major order, then lay out row-major
    flat = np.zeros(total, dtype=np.uint8)
    cdef unsigned char[::1] mv = flat
    for i in range(counts.shape[0]):
        run = counts[i]
        if run < 0 or pos + run > total:
            raise ValueError("RLE runs overflow the mask")
        if val and run:
            memset(&mv[pos], 1, run)
        pos += run
        val ^= 1
    if pos != total:
        raise ValueError("RLE runs do not cover the mask")
    return np.ascontiguousarray(flat.reshape((w, h)).T).view(np.bool_)


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    return (x > y) - (x < y)


def rasterize_polygon(cnp.float64_t[:] pts, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t nv = pts.shape[0] // 2
    cdef Py_ssize_t r, c, e, k, cnt, p, r0, r1, c0, c1
    cdef double y, cx, xi, yi, xj, yj, ymin = 1e300, ymax = -1e300, xmin = 1e300, xmax = -1e300
    out = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] mv = out
    if nv < 3 or h == 0 or w == 0:
        return out.view(np.bool_)
    for e in range(nv):
        xi = pts[2 * e]
        yi = pts[2 * e + 1]
        if yi < ymin: ymin = yi
        if yi > ymax: ymax = yi
        if xi < xmin: xmin = xi
        if xi > xmax: xmax = xi
    r0 = <Py_ssize_t>max(0.0, floor(ymin - 0.5))
    r1 = <Py_ssize_t>min(<double>h, ceil(ymax + 0.5))
    c0 = <Py_ssize_t>max(0.0, floor(xmin - 0.5))
    c1 = <Py_ssize_t>min(<double>w, ceil(xmax + 0.5))
    cdef double* xs = <double*>malloc(nv * sizeof(double))
    if xs == NULL:
        raise MemoryError()
    try:
        for r in range(r0, r1):
            y = r + 0.5
            cnt = 0
            for e in range(nv):
                k = e - 1 if e > 0 else nv - 1
                xi = pts[2 * e]
                yi = pts[2 * e + 1]
                xj = pts[2 * k]
                yj = pts[2 * k + 1]
                if (yi > y) != (yj > y):
                    xs[cnt] = (xj - xi) * (y - yi) / (yj - yi) + xi
                    cnt += 1
            if cnt == 0:
                continue
            qsort(xs, cnt, sizeof(double), _cmp_double)
            # inside iff an odd number of crossings lie strictly right of the center
            p = 0
            for c in range(c0, c1):
                cx = c + 0.5
                while p < cnt and xs[p] <= cx:
                    p += 1
                if (cnt - p) & 1:
                    mv[r, c] = 1
    finally:
        free(xs)
    return out.view(np.bool_)


cdef Py_ssize_t _count_rows(const unsigned char[:, ::1] mv, Py_ssize_t r0, Py_ssize_t r1,
                            Py_ssize_t c0, Py_ssize_t c1) noexcept nogil:
    cdef Py_ssize_t r, c, total = 0
    cdef unsigned int row
    cdef const unsigned char* p
    for r in range(r0, r1):
        p = &mv[r, 0]
        row = 0
        for c in range(c0, c1):
            row += p[c]
        total += row
    return total


def count_in_rect(mask, Py_ssize_t r0, Py_ssize_t r1, Py_ssize_t c0, Py_ssize_t c1):
    arr = np.asarray(mask)
    if r1 <= r0 or c1 <= c0:
        return 0
    if not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr[r0:r1, c0:c1])
        r1, c1, r0, c0 = r1 - r0, c1 - c0, 0, 0
    return _count_rows(arr.view(np.uint8), r0, r1, c0, c1)
