#!/usr/bin/env python3
# Copyright 2026 The otaro Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the golden .sefp files with exact rational arithmetic.

Independent of the C++ encoder: exponents come from Fraction comparisons and
mantissas from floor division, so the test suite can diff the two.
"""
import struct
import sys
from fractions import Fraction
from pathlib import Path


def exponent(x):
    x = abs(x)
    k = 0
    while x >= 2:
        x /= 2
        k += 1
    while x < 1:
        x *= 2
        k -= 1
    return k


def encode(values, e, m, group):
    bias = 2 ** (e - 1) - 1
    exps, signs, mants = [], [], []
    for g0 in range(0, len(values), group):
        grp = values[g0:g0 + group]
        nz = [v for v in grp if v != 0]
        if not nz:
            exps.append(0)
            shared = None
        else:
            shared = max(max(exponent(v) for v in nz), 1 - bias)
            exps.append(shared + bias)
        for v in grp:
            signs.append(1 if v < 0 else 0)
            if shared is None or v == 0:
                mants.append(0)
            else:
                mants.append(int(abs(v) * Fraction(2) ** (m - 1 - shared) // 1))
    return exps, signs, mants


def pack(values, width):
    bits = "".join(format(v, "0%db" % width) for v in values)
    bits += "0" * (-len(bits) % 8)
    return bytes(int(bits[i:i + 8], 2) for i in range(0, len(bits), 8))


def container(e, m, group, tensors):
    out = b"SEFP" + struct.pack("<BBBII", 1, e, m, group, len(tensors))
    for name, shape, values in tensors:
        exps, signs, mants = encode(values, e, m, group)
        raw = name.encode()
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<B", len(shape))
        out += b"".join(struct.pack("<Q", d) for d in shape)
        out += bytes(exps) + pack(signs, 1) + pack(mants, m)
    return out


F = Fraction
GOLDEN = {
    "empty.sefp": (5, 8, 64, []),
    "small_e5m3.sefp": (5, 3, 64, [("w", [4], [F(3, 2), F(3, 8), F(-1, 4), F(0)])]),
    "two_tensors_e5m4.sefp": (5, 4, 4, [
        ("layer0", [3, 5], [F(k - 7, 8) * (1 if k % 3 else F(1, 16)) for k in range(15)]),
        ("bias", [2], [F(-3, 1), F(1, 1024)]),
    ]),
}

if __name__ == "__main__":
    here = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent
    for name, spec in GOLDEN.items():
        (here / name).write_bytes(container(*spec))
