# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly kernels; signatures mirror fallback.py exactly.

Fused loops avoid the O(N^2) temporaries of the broadcasting versions;
the segment test short-circuits on the bounding-box check.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log, sin, sqrt

cnp.import_array()

DEF TWO_PI = 6.283185307179586


def np_kernel_matrix(double[:, ::1] nodes, double[:, ::1] normals,
                     double[::1] curvatures, double[::1] weights):
    cdef Py_ssize_t n = nodes.shape[0]
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, r2
    for i in range(n):
        for j in range(n):
            if i == j:
                out[i, i] = curvatures[i] / (2.0 * TWO_PI) * weights[i]
            else:
                dx = nodes[i, 0] - nodes[j, 0]
                dy = nodes[i, 1] - nodes[j, 1]
                r2 = dx * dx + dy * dy
                out[i, j] = (dx * normals[i, 0] + dy * normals[i, 1]) \
                    / (TWO_PI * r2) * weights[j]
    return out_arr


def log_remainder_matrix(double[:, ::1] nodes, double[::1] speed, double[::1] theta):
    cdef Py_ssize_t n = nodes.shape[0]
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, r2, s, s2
    for i in range(n):
        out[i, i] = log(speed[i])
        for j in range(i + 1, n):
            dx = nodes[i, 0] - nodes[j, 0]
            dy = nodes[i, 1] - nodes[j, 1]
            r2 = dx * dx + dy * dy
            s = sin(0.5 * (theta[i] - theta[j]))
            s2 = 4.0 * s * s
            out[i, j] = 0.5 * log(r2 / s2)
            out[j, i] = out[i, j]
    return out_arr


def first_variation_matrix(double[:, ::1] nodes, double[:, ::1] tangents,
                           double[:, ::1] normals, double[::1] curvatures,
                           double[::1] weights, double[::1] h,
                           double[::1] dh, double[::1] d2h):
    cdef Py_ssize_t n = nodes.shape[0]
    out_arr = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, inv_r2, hnx_i, hny_i, hnx_j, hny_j
    cdef double dot_nu, dot_t, dot_hnu_x, dot_hnu_nu, k0, fh, fh1, k1, tau_i, tau_j
    for i in range(n):
        tau_i = -curvatures[i]
        hnx_i = h[i] * normals[i, 0]
        hny_i = h[i] * normals[i, 1]
        for j in range(n):
            if i == j:
                out[i, i] = -0.5 * d2h[i] * weights[i] / TWO_PI
                continue
            tau_j = -curvatures[j]
            dx = nodes[i, 0] - nodes[j, 0]
            dy = nodes[i, 1] - nodes[j, 1]
            inv_r2 = 1.0 / (dx * dx + dy * dy)
            hnx_j = h[j] * normals[j, 0]
            hny_j = h[j] * normals[j, 1]
            dot_nu = dx * normals[i, 0] + dy * normals[i, 1]
            dot_t = dx * tangents[i, 0] + dy * tangents[i, 1]
            dot_hnu_x = dx * (hnx_i - hnx_j) + dy * (hny_i - hny_j)
            dot_hnu_nu = (hnx_i - hnx_j) * normals[i, 0] + (hny_i - hny_j) * normals[i, 1]
            k0 = dot_nu * inv_r2
            fh = dot_hnu_x * inv_r2
            fh1 = -2.0 * fh + tau_i * h[i] - tau_j * h[j]
            k1 = (dot_hnu_nu - tau_i * h[i] * dot_nu - dh[i] * dot_t) * inv_r2
            out[i, j] = (k0 * fh1 + k1) * weights[j] / TWO_PI
    return out_arr


def cross_block_matrices(double[:, ::1] nodes_a, double[:, ::1] normals_a,
                         double[::1] weights_a, double[:, ::1] nodes_b,
                         double[:, ::1] normals_b, double[::1] weights_b):
    cdef Py_ssize_t na = nodes_a.shape[0]
    cdef Py_ssize_t nb = nodes_b.shape[0]
    ka_arr = np.empty((na, nb), dtype=np.float64)
    kb_arr = np.empty((nb, na), dtype=np.float64)
    cdef double[:, ::1] ka = ka_arr
    cdef double[:, ::1] kb = kb_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, inv_r2
    for i in range(na):
        for j in range(nb):
            dx = nodes_a[i, 0] - nodes_b[j, 0]
            dy = nodes_a[i, 1] - nodes_b[j, 1]
            inv_r2 = 1.0 / (dx * dx + dy * dy)
            ka[i, j] = (dx * normals_a[i, 0] + dy * normals_a[i, 1]) \
                * inv_r2 / TWO_PI * weights_b[j]
            kb[j, i] = -(dx * normals_b[j, 0] + dy * normals_b[j, 1]) \
                * inv_r2 / TWO_PI * weights_a[i]
    return ka_arr, kb_arr


def cross_log_matrix(double[:, ::1] nodes_a, double[:, ::1] nodes_b,
                     double[::1] weights_b):
    cdef Py_ssize_t na = nodes_a.shape[0]
    cdef Py_ssize_t nb = nodes_b.shape[0]
    out_arr = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy
    for i in range(na):
        for j in range(nb):
            dx = nodes_a[i, 0] - nodes_b[j, 0]
            dy = nodes_a[i, 1] - nodes_b[j, 1]
            out[i, j] = -log(dx * dx + dy * dy) / (2.0 * TWO_PI) * weights_b[j]
    return out_arr


def segment_intersections(double[:, ::1] nodes):
    cdef Py_ssize_t n = nodes.shape[0]
    cdef list hits = []
    cdef Py_ssize_t i, j
    cdef double pix, piy, qix, qiy, pjx, pjy, qjx, qjy
    cdef double d1, d2, d3, d4
    cdef double ix_lo, ix_hi, iy_lo, iy_hi, jx_lo, jx_hi, jy_lo, jy_hi
    for i in range(n):
        pix = nodes[i, 0]
        piy = nodes[i, 1]
        qix = nodes[(i + 1) % n, 0]
        qiy = nodes[(i + 1) % n, 1]
        ix_lo = min(pix, qix); ix_hi = max(pix, qix)
        iy_lo = min(piy, qiy); iy_hi = max(piy, qiy)
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            pjx = nodes[j, 0]
            pjy = nodes[j, 1]
            qjx = nodes[(j + 1) % n, 0]
            qjy = nodes[(j + 1) % n, 1]
            jx_lo = min(pjx, qjx); jx_hi = max(pjx, qjx)
            if ix_hi < jx_lo or jx_hi < ix_lo:
                continue
            jy_lo = min(pjy, qjy); jy_hi = max(pjy, qjy)
            if iy_hi < jy_lo or jy_hi < iy_lo:
                continue
            d1 = (qix - pix) * (pjy - piy) - (qiy - piy) * (pjx - pix)
            d2 = (qix - pix) * (qjy - piy) - (qiy - piy) * (qjx - pix)
            d3 = (qjx - pjx) * (piy - pjy) - (qjy - pjy) * (pix - pjx)
            d4 = (qjx - pjx) * (qiy - pjy) - (qjy - pjy) * (qix - pjx)
            if d1 * d2 < 0 and d3 * d4 < 0:
                hits.append((i, j))
    return hits
