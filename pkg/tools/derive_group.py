"""One-shot derivation of the fixed group parameters (see keyforge.group)."""
import hashlib
import gmpy2

SEED = b"keyforge-group-v1"
Q_BITS = 256
P_BITS = 2048

def _stream(tag: bytes, counter: int, nbytes: int) -> int:
    out = b""
    block = 0
    while len(out) < nbytes:
        out += hashlib.sha512(SEED + b"/" + tag + b"/" + counter.to_bytes(8, "big")
                              + b"/" + block.to_bytes(8, "big")).digest()
        block += 1
    return int.from_bytes(out[:nbytes], "big")

def derive():
    # q: first 256-bit prime from the counter stream (top bit forced, odd)
    i = 0
    while True:
        cand = _stream(b"q", i, Q_BITS // 8)
        cand |= (1 << (Q_BITS - 1)) | 1
        if gmpy2.is_prime(cand, 50):
            q = cand
            break
        i += 1
    # p: 2048-bit prime with p = 1 (mod 2q)
    j = 0
    while True:
        x = _stream(b"p", j, P_BITS // 8)
        x |= 1 << (P_BITS - 1)
        cand = x - (x % (2 * q)) + 1
        if cand.bit_length() == P_BITS and gmpy2.is_prime(cand, 50):
            p = cand
            break
        j += 1
    # g: first h^((p-1)/q) != 1
    k = 0
    while True:
        h = _stream(b"g", k, P_BITS // 8) % p
        g = int(gmpy2.powmod(h, (p - 1) // q, p))
        if g > 1:
            break
        k += 1
    return q, p, g, i, j, k

if __name__ == "__main__":
    q, p, g, i, j, k = derive()
    print(f"q_counter={i} p_counter={j} g_counter={k}")
    print(f"Q = 0x{q:064x}")
    print(f"P = 0x{p:0512x}")
    print(f"G = 0x{g:0512x}")
    import gmpy2 as _g
    assert _g.is_prime(q) and _g.is_prime(p)
    assert (p - 1) % q == 0
    assert _g.powmod(g, q, p) == 1 and g != 1
    print("checks ok")
