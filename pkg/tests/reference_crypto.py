"""Independent reference implementations used as test oracles.

Everything here is written from the public algorithm specifications
(FIPS 180-4, FIPS 197, RFC 2104, SP 800-38A, RFC 5652 padding) using
only integer arithmetic — deliberately sharing no code with the package
under test, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

_M32 = 0xFFFFFFFF


def _rotl(x: int, n: int) -> int:
    return ((x << n) | (x >> (32 - n))) & _M32


def _rotr(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & _M32


# ----------------------------------------------------------------- SHA-1
def sha1(message: bytes) -> bytes:
    h = [0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0]
    ml = len(message) * 8
    message = message + b"\x80"
    message += b"\x00" * ((56 - len(message) % 64) % 64)
    message += ml.to_bytes(8, "big")

    for off in range(0, len(message), 64):
        w = [int.from_bytes(message[off + 4 * i : off + 4 * i + 4], "big")
             for i in range(16)]
        for i in range(16, 80):
            w.append(_rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1))
        a, b, c, d, e = h
        for i in range(80):
            if i < 20:
                f, k = (b & c) | (~b & d), 0x5A827999
            elif i < 40:
                f, k = b ^ c ^ d, 0x6ED9EBA1
            elif i < 60:
                f, k = (b & c) | (b & d) | (c & d), 0x8F1BBCDC
            else:
                f, k = b ^ c ^ d, 0xCA62C1D6
            a, b, c, d, e = ((_rotl(a, 5) + f + e + k + w[i]) & _M32,
                             a, _rotl(b, 30), c, d)
        h = [(x + y) & _M32 for x, y in zip(h, (a, b, c, d, e))]
    return b"".join(x.to_bytes(4, "big") for x in h)


# --------------------------------------------------------------- SHA-256
_SHA256_K = [
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1,
    0x923F82A4, 0xAB1C5ED5, 0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3,
    0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174, 0xE49B69C1, 0xEFBE4786,
    0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147,
    0x06CA6351, 0x14292967, 0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13,
    0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85, 0xA2BFE8A1, 0xA81A664B,
    0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A,
    0x5B9CCA4F, 0x682E6FF3, 0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208,
    0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
]


def sha256(message: bytes) -> bytes:
    h = [0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A,
         0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19]
    ml = len(message) * 8
    message = message + b"\x80"
    message += b"\x00" * ((56 - len(message) % 64) % 64)
    message += ml.to_bytes(8, "big")

    for off in range(0, len(message), 64):
        w = [int.from_bytes(message[off + 4 * i : off + 4 * i + 4], "big")
             for i in range(16)]
        for i in range(16, 64):
            s0 = _rotr(w[i - 15], 7) ^ _rotr(w[i - 15], 18) ^ (w[i - 15] >> 3)
            s1 = _rotr(w[i - 2], 17) ^ _rotr(w[i - 2], 19) ^ (w[i - 2] >> 10)
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & _M32)
        a, b, c, d, e, f, g, hh = h
        for i in range(64):
            s1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
            ch = (e & f) ^ (~e & g)
            t1 = (hh + s1 + ch + _SHA256_K[i] + w[i]) & _M32
            s0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
            maj = (a & b) ^ (a & c) ^ (b & c)
            t2 = (s0 + maj) & _M32
            hh, g, f, e, d, c, b, a = (g, f, e, (d + t1) & _M32,
                                       c, b, a, (t1 + t2) & _M32)
        h = [(x + y) & _M32 for x, y in zip(h, (a, b, c, d, e, f, g, hh))]
    return b"".join(x.to_bytes(4, "big") for x in h)


# ------------------------------------------------------------------ HMAC
def hmac_sha256(key: bytes, message: bytes) -> bytes:
    block = 64
    if len(key) > block:
        key = sha256(key)
    key = key + b"\x00" * (block - len(key))
    ipad = bytes(k ^ 0x36 for k in key)
    opad = bytes(k ^ 0x5C for k in key)
    return sha256(opad + sha256(ipad + message))


# ------------------------------------------------------------------- AES
_SBOX = None
_INV_SBOX = None


def _build_sboxes():
    global _SBOX, _INV_SBOX
    # Multiplicative inverse in GF(2^8) followed by the affine transform.
    def gmul(a, b):
        p = 0
        for _ in range(8):
            if b & 1:
                p ^= a
            hi = a & 0x80
            a = (a << 1) & 0xFF
            if hi:
                a ^= 0x1B
            b >>= 1
        return p

    inv = [0] * 256
    for i in range(1, 256):
        for j in range(1, 256):
            if gmul(i, j) == 1:
                inv[i] = j
                break
    sbox = [0] * 256
    for i in range(256):
        x = inv[i]
        y = x
        for _ in range(4):
            y = ((y << 1) | (y >> 7)) & 0xFF
            x ^= y
        sbox[i] = x ^ 0x63
    _SBOX = bytes(sbox)
    _INV_SBOX = bytes(_SBOX.index(i) for i in range(256))


_build_sboxes()


def _xtime(a: int) -> int:
    a <<= 1
    return (a ^ 0x1B) & 0xFF if a & 0x100 else a


def _mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a = _xtime(a)
        b >>= 1
    return out


def _expand_key(key: bytes) -> list[bytes]:
    nk = len(key) // 4
    nr = {4: 10, 8: 14}[nk]
    words = [key[4 * i : 4 * i + 4] for i in range(nk)]
    rcon = 1
    for i in range(nk, 4 * (nr + 1)):
        temp = words[i - 1]
        if i % nk == 0:
            temp = bytes(_SBOX[b] for b in temp[1:] + temp[:1])
            temp = bytes([temp[0] ^ rcon]) + temp[1:]
            rcon = _xtime(rcon)
        elif nk == 8 and i % nk == 4:
            temp = bytes(_SBOX[b] for b in temp)
        words.append(bytes(a ^ b for a, b in zip(words[i - nk], temp)))
    return [b"".join(words[4 * r : 4 * r + 4]) for r in range(nr + 1)]


def _add_round_key(state: bytearray, rk: bytes) -> None:
    for i in range(16):
        state[i] ^= rk[i]


def _shift_rows(s: bytearray) -> None:
    for r in range(1, 4):
        row = [s[r + 4 * c] for c in range(4)]
        row = row[r:] + row[:r]
        for c in range(4):
            s[r + 4 * c] = row[c]


def _inv_shift_rows(s: bytearray) -> None:
    for r in range(1, 4):
        row = [s[r + 4 * c] for c in range(4)]
        row = row[-r:] + row[:-r]
        for c in range(4):
            s[r + 4 * c] = row[c]


def _mix_columns(s: bytearray) -> None:
    for c in range(4):
        col = s[4 * c : 4 * c + 4]
        s[4 * c + 0] = _mul(col[0], 2) ^ _mul(col[1], 3) ^ col[2] ^ col[3]
        s[4 * c + 1] = col[0] ^ _mul(col[1], 2) ^ _mul(col[2], 3) ^ col[3]
        s[4 * c + 2] = col[0] ^ col[1] ^ _mul(col[2], 2) ^ _mul(col[3], 3)
        s[4 * c + 3] = _mul(col[0], 3) ^ col[1] ^ col[2] ^ _mul(col[3], 2)


def _inv_mix_columns(s: bytearray) -> None:
    for c in range(4):
        col = s[4 * c : 4 * c + 4]
        s[4 * c + 0] = (_mul(col[0], 14) ^ _mul(col[1], 11)
                        ^ _mul(col[2], 13) ^ _mul(col[3], 9))
        s[4 * c + 1] = (_mul(col[0], 9) ^ _mul(col[1], 14)
                        ^ _mul(col[2], 11) ^ _mul(col[3], 13))
        s[4 * c + 2] = (_mul(col[0], 13) ^ _mul(col[1], 9)
                        ^ _mul(col[2], 14) ^ _mul(col[3], 11))
        s[4 * c + 3] = (_mul(col[0], 11) ^ _mul(col[1], 13)
                        ^ _mul(col[2], 9) ^ _mul(col[3], 14))


def aes_encrypt_block(key: bytes, block: bytes) -> bytes:
    rks = _expand_key(key)
    s = bytearray(block)
    _add_round_key(s, rks[0])
    for rnd in range(1, len(rks) - 1):
        for i in range(16):
            s[i] = _SBOX[s[i]]
        _shift_rows(s)
        _mix_columns(s)
        _add_round_key(s, rks[rnd])
    for i in range(16):
        s[i] = _SBOX[s[i]]
    _shift_rows(s)
    _add_round_key(s, rks[-1])
    return bytes(s)


def aes_decrypt_block(key: bytes, block: bytes) -> bytes:
    rks = _expand_key(key)
    s = bytearray(block)
    _add_round_key(s, rks[-1])
    for rnd in range(len(rks) - 2, 0, -1):
        _inv_shift_rows(s)
        for i in range(16):
            s[i] = _INV_SBOX[s[i]]
        _add_round_key(s, rks[rnd])
        _inv_mix_columns(s)
    _inv_shift_rows(s)
    for i in range(16):
        s[i] = _INV_SBOX[s[i]]
    _add_round_key(s, rks[0])
    return bytes(s)


# ------------------------------------------------------------ cipher modes
def pkcs7_pad(data: bytes, block: int = 16) -> bytes:
    n = block - len(data) % block
    return data + bytes([n]) * n


def pkcs7_unpad(data: bytes, block: int = 16) -> bytes:
    if not data or len(data) % block:
        raise ValueError("bad padded length")
    n = data[-1]
    if not 1 <= n <= block or data[-n:] != bytes([n]) * n:
        raise ValueError("bad padding")
    return data[:-n]


def aes_cbc_encrypt(key: bytes, iv: bytes, plaintext: bytes) -> bytes:
    assert len(plaintext) % 16 == 0
    out = bytearray()
    prev = iv
    for off in range(0, len(plaintext), 16):
        block = bytes(a ^ b for a, b in zip(plaintext[off : off + 16], prev))
        prev = aes_encrypt_block(key, block)
        out += prev
    return bytes(out)


def aes_cbc_decrypt(key: bytes, iv: bytes, ciphertext: bytes) -> bytes:
    assert len(ciphertext) % 16 == 0
    out = bytearray()
    prev = iv
    for off in range(0, len(ciphertext), 16):
        block = ciphertext[off : off + 16]
        out += bytes(a ^ b for a, b in zip(aes_decrypt_block(key, block), prev))
        prev = block
    return bytes(out)


def aes_ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    counter = int.from_bytes(iv, "big")
    out = bytearray()
    for off in range(0, len(data), 16):
        keystream = aes_encrypt_block(
            key, (counter % (1 << 128)).to_bytes(16, "big"))
        chunk = data[off : off + 16]
        out += bytes(a ^ b for a, b in zip(chunk, keystream))
        counter += 1
    return bytes(out)
