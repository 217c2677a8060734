#!/usr/bin/env python3
"""Reference implementation of the line keystream recipe.

Regenerates otp_golden.hex: the 128-byte pad for key (lo=1, hi=0),
address 0, counter 0, one 32-hex-char line per 16-byte block.
"""

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB


def mix64(z):
    z &= MASK
    z ^= z >> 30
    z = (z * M1) & MASK
    z ^= z >> 27
    z = (z * M2) & MASK
    z ^= z >> 31
    return z


def otp(key_lo, key_hi, address, counter):
    pad = bytearray()
    for block in range(8):
        h = mix64((key_lo + GOLDEN) & MASK)
        h = mix64(h ^ key_hi)
        h = mix64(h ^ address)
        h = mix64(h ^ counter)
        h = mix64(h ^ block)
        w0 = mix64((h + GOLDEN) & MASK)
        w1 = mix64((w0 + GOLDEN) & MASK)
        pad += w0.to_bytes(8, "little") + w1.to_bytes(8, "little")
    return bytes(pad)


if __name__ == "__main__":
    pad = otp(1, 0, 0, 0)
    lines = [pad[i : i + 16].hex() for i in range(0, 128, 16)]
    with open("otp_golden.hex", "w") as f:
        f.write("\n".join(lines) + "\n")
    print("\n".join(lines))
