"""Pure-Python kernel. Reference semantics for ``_ckernel.pyx``.

Abstract values are byte strings, one byte per variable position::

    bit 4 (0x10)   definitely ground
    bits 0-3       principal shape: INT=1 ATM=2 LST=4 STRUCT=8 ANY=15

A stored shape is never 0; a meet that would produce 0 means the whole
substitution is bottom, which the callers represent as ``None``.

Equation code is a flat int sequence of instructions:

    EQ x y                 x = y
    BIND x shape k v1..vk  x = term with principal ``shape`` and vars v1..vk
    IS x shape k v1..vk    x is expr over v1..vk (shape is INT)
"""

G = 0x10
TMASK = 0x0F
INT, ATM, LST, STRUCT, ANY = 1, 2, 4, 8, 15

EQ, BIND, IS = 0, 1, 2
USE_GROUND, USE_TYPES = 1, 2


def _tglb(a: int, b: int) -> int:
    if a == b or b == ANY:
        return a
    if a == ANY:
        return b
    return 0


def run_eqs(state: bytearray, code, flags: int) -> bool:
    use_g = flags & USE_GROUND
    use_t = flags & USE_TYPES
    n = len(code)
    changed = True
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
                nx, ny = sx, sy
                if use_g and (sx | sy) & G:
                    nx |= G
                    ny |= G
                if use_t:
                    t = _tglb(sx & TMASK, sy & TMASK)
                    if not t:
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
            shape = code[i + 2]
            k = code[i + 3]
            start = i + 4
            i = start + k
            nx = sx
            if use_g:
                if not sx & G:
                    for j in range(start, i):
                        if not state[code[j]] & G:
                            break
                    else:
                        nx |= G
                elif op == BIND:
                    for j in range(start, i):
                        v = code[j]
                        if not state[v] & G:
                            state[v] |= G
                            changed = True
            if use_t:
                t = _tglb(sx & TMASK, shape)
                if not t:
                    return False
                nx = (nx & G) | t
            if nx != sx:
                state[x] = nx
                changed = True
    return True


def project(state, idx) -> bytes:
    return bytes([state[i] for i in idx])


def meet_at(state: bytearray, idx, values) -> bool:
    for pos, var in enumerate(idx):
        a = state[var]
        b = values[pos]
        t = _tglb(a & TMASK, b & TMASK)
        if not t:
            return False
        state[var] = ((a | b) & G) | t
    return True


def lub(a: bytes, b: bytes) -> bytes:
    if a == b:
        return a
    out = bytearray(len(a))
    for i in range(len(a)):
        x = a[i]
        y = b[i]
        tx = x & TMASK
        out[i] = (x & y & G) | (tx if tx == y & TMASK else ANY)
    return bytes(out)


def glb(a: bytes, b: bytes):
    if a == b:
        return a
    out = bytearray(len(a))
    for i in range(len(a)):
        x = a[i]
        y = b[i]
        t = _tglb(x & TMASK, y & TMASK)
        if not t:
            return None
        out[i] = ((x | y) & G) | t
    return bytes(out)


def leq(a: bytes, b: bytes) -> bool:
    for i in range(len(a)):
        x = a[i]
        y = b[i]
        if y & G and not x & G:
            return False
        ty = y & TMASK
        if ty != ANY and ty != x & TMASK:
            return False
    return True


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h
