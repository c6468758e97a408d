# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations.

Bit-for-bit equivalent to :mod:`shapeseg.kernels.fallback`; see there for the
pinned evaluation order. Keep -ffp-contract=off when compiling, otherwise FMA
contraction breaks the equivalence.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def correlate1d_replicate(img, taps, int axis):
    """1-D correlation along ``axis`` with replicated borders."""
    cdef const double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(taps, dtype=np.float64)
    cdef int radius = (w.shape[0] - 1) // 2
    cdef int h = src.shape[0]
    cdef int wid = src.shape[1]
    out_arr = np.empty((h, wid), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef int y, x, k, p
    cdef double acc
    if axis == 1:
        for y in range(h):
            for x in range(wid):
                acc = 0.0
                for k in range(-radius, radius + 1):
                    p = x + k
                    if p < 0:
                        p = 0
                    elif p >= wid:
                        p = wid - 1
                    acc += w[k + radius] * src[y, p]
                out[y, x] = acc
    else:
        for y in range(h):
            for x in range(wid):
                acc = 0.0
                for k in range(-radius, radius + 1):
                    p = y + k
                    if p < 0:
                        p = 0
                    elif p >= h:
                        p = h - 1
                    acc += w[k + radius] * src[p, x]
                out[y, x] = acc
    return out_arr


def correlate2d_replicate(img, kernel):
    """2-D correlation with replicated borders; zero taps are skipped."""
    cdef const double[:, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[:, ::1] ker = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef int ry = (ker.shape[0] - 1) // 2
    cdef int rx = (ker.shape[1] - 1) // 2
    cdef int h = src.shape[0]
    cdef int wid = src.shape[1]
    out_arr = np.empty((h, wid), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef int y, x, dy, dx, py, px
    cdef double acc, weight
    for y in range(h):
        for x in range(wid):
            acc = 0.0
            for dy in range(-ry, ry + 1):
                for dx in range(-rx, rx + 1):
                    weight = ker[dy + ry, dx + rx]
                    if weight == 0.0:
                        continue
                    py = y + dy
                    if py < 0:
                        py = 0
                    elif py >= h:
                        py = h - 1
                    px = x + dx
                    if px < 0:
                        px = 0
                    elif px >= wid:
                        px = wid - 1
                    acc += weight * src[py, px]
            out[y, x] = acc
    return out_arr


def clahe_apply(img, maps, row_lo, row_hi, row_w, col_lo, col_hi, col_w):
    """Bilinear interpolation of per-tile mappings (see fallback docstring)."""
    cdef const unsigned char[:, ::1] src = np.ascontiguousarray(img, dtype=np.uint8)
    cdef const double[:, :, ::1] m = np.ascontiguousarray(maps, dtype=np.float64)
    cdef const cnp.intp_t[::1] rlo = np.ascontiguousarray(row_lo, dtype=np.intp)
    cdef const cnp.intp_t[::1] rhi = np.ascontiguousarray(row_hi, dtype=np.intp)
    cdef const double[::1] rw = np.ascontiguousarray(row_w, dtype=np.float64)
    cdef const cnp.intp_t[::1] clo = np.ascontiguousarray(col_lo, dtype=np.intp)
    cdef const cnp.intp_t[::1] chi = np.ascontiguousarray(col_hi, dtype=np.intp)
    cdef const double[::1] cw = np.ascontiguousarray(col_w, dtype=np.float64)
    cdef int h = src.shape[0]
    cdef int wid = src.shape[1]
    out_arr = np.empty((h, wid), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef int y, x
    cdef cnp.intp_t r0, r1
    cdef unsigned char v
    cdef double wy, wx, wx1, a, b, c, d, top, bot, val
    for y in range(h):
        r0 = rlo[y]
        r1 = rhi[y]
        wy = rw[y]
        for x in range(wid):
            wx = cw[x]
            wx1 = 1.0 - wx
            v = src[y, x]
            a = m[r0, clo[x], v]
            b = m[r0, chi[x], v]
            c = m[r1, clo[x], v]
            d = m[r1, chi[x], v]
            top = wx1 * a + wx * b
            bot = wx1 * c + wx * d
            val = (1.0 - wy) * top + wy * bot
            out[y, x] = <unsigned char> floor(val + 0.5)
    return out_arr
