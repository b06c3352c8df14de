#!/usr/bin/env python3
# Copyright (c) 2026, The llf Authors
# SPDX-License-Identifier: Apache-2.0
#
# Regenerates src/unicode_tables.cpp: code point ranges for \p{L}, \p{N} and \s
# as understood by the `regex` module (the engine the GPT-2 reference splitter uses).

import sys

import regex

CLASSES = [("kLetterRanges", r"\p{L}"), ("kNumberRanges", r"\p{N}"), ("kSpaceRanges", r"\s")]


def ranges(pattern):
    rx = regex.compile(pattern)
    out = []
    start = None
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            hit = False
        else:
            hit = rx.match(chr(cp)) is not None
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def main(path):
    lines = [
        "// Copyright (c) 2026, The llf Authors",
        "// SPDX-License-Identifier: Apache-2.0",
        "//",
        "// Generated by tools/gen_unicode_tables.py. Do not edit.",
        "",
        '#include "unicode_tables.h"',
        "",
        "#include <algorithm>",
        "#include <array>",
        "",
        "namespace llf::unicode {",
        "namespace {",
        "",
        "struct CodeRange {",
        "    char32_t lo;",
        "    char32_t hi;",
        "};",
        "",
    ]
    for name, pattern in CLASSES:
        rs = ranges(pattern)
        lines.append(f"constexpr std::array<CodeRange, {len(rs)}> {name} = {{{{")
        for lo, hi in rs:
            lines.append(f"    {{0x{lo:X}, 0x{hi:X}}},")
        lines.append("}};")
        lines.append("")
    lines += [
        "template <std::size_t N>",
        "bool in_table(const std::array<CodeRange, N>& table, char32_t cp) {",
        "    auto it = std::upper_bound(table.begin(), table.end(), cp,",
        "                               [](char32_t c, const CodeRange& r) { return c < r.lo; });",
        "    if (it == table.begin()) return false;",
        "    --it;",
        "    return cp <= it->hi;",
        "}",
        "",
        "}  // namespace",
        "",
        "bool is_letter(char32_t cp) { return in_table(kLetterRanges, cp); }",
        "bool is_number(char32_t cp) { return in_table(kNumberRanges, cp); }",
        "bool is_space(char32_t cp) { return in_table(kSpaceRanges, cp); }",
        "",
        "}  // namespace llf::unicode",
    ]
    lines.append("")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
    for name, pattern in CLASSES:
        print(name, len(ranges(pattern)), file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/unicode_tables.cpp")
