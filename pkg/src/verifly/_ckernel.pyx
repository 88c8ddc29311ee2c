# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernel. Same contract as ``_pykernel``; see that module for the encoding."""

from libc.stdint cimport uint64_t

cdef enum:
    G = 0x10
    TMASK = 0x0F
    ANY = 15
    EQ = 0
    BIND = 1


cdef inline unsigned char _tglb(unsigned char a, unsigned char b) nogil:
    if a == b or b == ANY:
        return a
    if a == ANY:
        return b
    return 0


def run_eqs(unsigned char[::1] state, const int[::1] code, int flags):
    cdef bint use_g = flags & 1
    cdef bint use_t = flags & 2
    cdef Py_ssize_t n = code.shape[0]
    cdef Py_ssize_t i, j, start, stop
    cdef int op, x, y, k
    cdef unsigned char sx, sy, nx, ny, t, shape
    cdef bint changed = True, allg
    while changed:
        changed = False
        i = 0
        while i < n:
            op = code[i]
            x = code[i + 1]
            sx = state[x]
            if op == EQ:
                y = code[i + 2]
                i += 3
                if x == y:
                    continue
                sy = state[y]
                nx = sx
                ny = sy
                if use_g and (sx | sy) & G:
                    nx |= G
                    ny |= G
                if use_t:
                    t = _tglb(sx & TMASK, sy & TMASK)
                    if t == 0:
                        return False
                    nx = (nx & G) | t
                    ny = (ny & G) | t
                if nx != sx:
                    state[x] = nx
                    changed = True
                if ny != sy:
                    state[y] = ny
                    changed = True
                continue
            shape = <unsigned char>code[i + 2]
            k = code[i + 3]
            start = i + 4
            stop = start + k
            i = stop
            nx = sx
            if use_g:
                if not (sx & G):
                    allg = True
                    for j in range(start, stop):
                        if not (state[code[j]] & G):
                            allg = False
                            break
                    if allg:
                        nx |= G
                elif op == BIND:
                    for j in range(start, stop):
                        if not (state[code[j]] & G):
                            state[code[j]] |= G
                            changed = True
            if use_t:
                t = _tglb(sx & TMASK, shape)
                if t == 0:
                    return False
                nx = (nx & G) | t
            if nx != sx:
                state[x] = nx
                changed = True
    return True


def project(const unsigned char[::1] state, const int[::1] idx):
    cdef Py_ssize_t n = idx.shape[0], p
    cdef bytearray out = bytearray(n)
    cdef unsigned char[::1] o = out
    for p in range(n):
        o[p] = state[idx[p]]
    return bytes(out)


def meet_at(unsigned char[::1] state, const int[::1] idx, const unsigned char[::1] values):
    cdef Py_ssize_t n = idx.shape[0], p
    cdef unsigned char a, b, t
    cdef int v
    for p in range(n):
        v = idx[p]
        a = state[v]
        b = values[p]
        t = _tglb(a & TMASK, b & TMASK)
        if t == 0:
            return False
        state[v] = ((a | b) & G) | t
    return True


def lub(bytes a, bytes b):
    if a == b:
        return a
    cdef Py_ssize_t n = len(a), i
    cdef const unsigned char[::1] x = a
    cdef const unsigned char[::1] y = b
    cdef bytearray out = bytearray(n)
    cdef unsigned char[::1] o = out
    cdef unsigned char tx
    for i in range(n):
        tx = x[i] & TMASK
        o[i] = (x[i] & y[i] & G) | (tx if tx == (y[i] & TMASK) else ANY)
    return bytes(out)


def glb(bytes a, bytes b):
    if a == b:
        return a
    cdef Py_ssize_t n = len(a), i
    cdef const unsigned char[::1] x = a
    cdef const unsigned char[::1] y = b
    cdef bytearray out = bytearray(n)
    cdef unsigned char[::1] o = out
    cdef unsigned char t
    for i in range(n):
        t = _tglb(x[i] & TMASK, y[i] & TMASK)
        if t == 0:
            return None
        o[i] = ((x[i] | y[i]) & G) | t
    return bytes(out)


def leq(bytes a, bytes b):
    cdef Py_ssize_t n = len(a), i
    cdef const unsigned char[::1] x = a
    cdef const unsigned char[::1] y = b
    cdef unsigned char ty
    for i in range(n):
        if (y[i] & G) and not (x[i] & G):
            return False
        ty = y[i] & TMASK
        if ty != ANY and ty != (x[i] & TMASK):
            return False
    return True


def fnv1a64(bytes data):
    cdef uint64_t h = 0xCBF29CE484222325ULL
    cdef const unsigned char[::1] d = data
    cdef Py_ssize_t i
    for i in range(d.shape[0]):
        h = (h ^ d[i]) * 0x100000001B3ULL
    return h
