"""Reference routines written independently of the package code paths."""
import struct


def gf_mul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
        b >>= 1
    return r


def aes_sbox_from_field():
    """FIPS-197 S-box: multiplicative inverse in GF(2^8) then the affine map."""
    inverse = [0] * 256
    for x in range(1, 256):
        for y in range(1, 256):
            if gf_mul(x, y) == 1:
                inverse[x] = y
                break
    box = []
    for x in range(256):
        b = inverse[x]
        s = 0x63
        for i in range(8):
            bit = ((b >> i) ^ (b >> ((i + 4) % 8)) ^ (b >> ((i + 5) % 8))
                   ^ (b >> ((i + 6) % 8)) ^ (b >> ((i + 7) % 8))) & 1
            s ^= bit << i
        box.append(s)
    return bytes(box)


def to_bits(x, n):
    """Bit list, index 0 = least significant."""
    return [(x >> i) & 1 for i in range(n)]


def from_bits(bits):
    return sum(b << i for i, b in enumerate(bits))


def spn_round(x, n, sbox, pbox):
    """Substitute big-endian bytes, then move source bit i to pbox[i]."""
    byte_vals = [(x >> (n - 8 * (k + 1))) & 0xFF for k in range(n // 8)]
    sub = 0
    for k, b in enumerate(byte_vals):
        sub |= sbox[b] << (n - 8 * (k + 1))
    src = to_bits(sub, n)
    dst = [0] * n
    for i in range(n):
        dst[pbox[i]] = src[i]
    return from_bits(dst)


def even_mansour(m, k0, k1, k2, n, sbox, pbox1, pbox2):
    """Straight-line E(M) = P2(P1(M ^ k0) ^ k1) ^ k2."""
    return spn_round(spn_round(m ^ k0, n, sbox, pbox1) ^ k1, n, sbox, pbox2) ^ k2


def ones_complement_sum(data):
    if len(data) % 2:
        data = data + b"\x00"
    total = 0
    for (word,) in struct.iter_unpack("!H", data):
        total += word
        total = (total & 0xFFFF) + (total >> 16)
    return total


def checksum_ok(data):
    """A buffer whose checksum field is filled in sums to 0xFFFF."""
    return ones_complement_sum(data) == 0xFFFF


def ipv4_header_ok(packet):
    ihl = (packet[0] & 0x0F) * 4
    return checksum_ok(packet[:ihl])


def udp4_ok(packet):
    ihl = (packet[0] & 0x0F) * 4
    udp = packet[ihl:]
    if udp[6:8] == b"\x00\x00":
        return False
    pseudo = packet[12:20] + bytes([0, 17]) + struct.pack("!H", len(udp))
    return checksum_ok(pseudo + udp)


def udp6_ok(packet):
    udp = packet[40:]
    if udp[6:8] == b"\x00\x00":
        return False
    pseudo = packet[8:40] + struct.pack("!I", len(udp)) + bytes([0, 0, 0, 17])
    return checksum_ok(pseudo + udp)
