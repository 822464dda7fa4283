#!/usr/bin/env python3
"""Emit the simple (1:1) Unicode lowercase mapping as a sorted C++ table.

Usage: python3 tools/gen_lower_table.py > src/unicode_lower_table.inc
"""
import sys
import unicodedata

pairs = []
for cp in range(0x110000):
    ch = chr(cp)
    low = ch.lower()
    if len(low) == 1 and low != ch:
        pairs.append((cp, ord(low)))
# Full lowercase of U+0130 is two code points; the simple mapping is U+0069.
pairs.append((0x0130, 0x0069))
pairs.sort()

out = sys.stdout
out.write("// Generated by tools/gen_lower_table.py (Unicode %s). Do not edit.\n"
          % unicodedata.unidata_version)
out.write("// {code point, simple lowercase}\n")
for i in range(0, len(pairs), 4):
    row = ", ".join("{0x%04X, 0x%04X}" % p for p in pairs[i:i + 4])
    out.write(row + ",\n")
