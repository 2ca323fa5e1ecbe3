# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled versions of the hot loops in :mod:`xmrange._kernels_py`."""

from cpython.list cimport PyList_GET_ITEM, PyList_GET_SIZE
from cpython.tuple cimport PyTuple_GET_ITEM


cdef inline bint _inside(object r, long long x0, long long x1, long long y0,
                         long long y1, long long z0, long long z1):
    cdef long long v
    v = <object>PyTuple_GET_ITEM(r, 0)
    if v < x0 or v > x1:
        return False
    v = <object>PyTuple_GET_ITEM(r, 1)
    if v < y0 or v > y1:
        return False
    v = <object>PyTuple_GET_ITEM(r, 2)
    return z0 <= v <= z1


def filter_bounds(recs, b):
    cdef long long x0 = b[0], x1 = b[1], y0 = b[2], y1 = b[3], z0 = b[4], z1 = b[5]
    cdef list out = []
    cdef object r
    for r in recs:
        if _inside(r, x0, x1, y0, y1, z0, z1):
            out.append(r)
    return out


def filter_bounds_into(list out, recs, b):
    cdef long long x0 = b[0], x1 = b[1], y0 = b[2], y1 = b[3], z0 = b[4], z1 = b[5]
    cdef object r
    for r in recs:
        if _inside(r, x0, x1, y0, y1, z0, z1):
            out.append(r)


def count_bounds(recs, b):
    cdef long long x0 = b[0], x1 = b[1], y0 = b[2], y1 = b[3], z0 = b[4], z1 = b[5]
    cdef Py_ssize_t n = 0
    cdef object r
    for r in recs:
        if _inside(r, x0, x1, y0, y1, z0, z1):
            n += 1
    return n


def filter_dominating(recs, q):
    cdef long long qx = q[0], qy = q[1], qz = q[2]
    cdef long long big = 0x7FFFFFFFFFFFFFFF
    cdef list out = []
    cdef object r
    for r in recs:
        if _inside(r, qx, big, qy, big, qz, big):
            out.append(r)
    return out


def batch_pairs(chunk, boxes):
    cdef list out = []
    cdef long long x0, x1, y0, y1, z0, z1
    cdef Py_ssize_t j = 0
    cdef object r
    for b in boxes:
        x0, x1, y0, y1, z0, z1 = b
        for r in chunk:
            if _inside(r, x0, x1, y0, y1, z0, z1):
                out.append((j,) + r)
        j += 1
    return out
