#!/usr/bin/env python3
# Copyright (c) 2026, The llf Authors
# SPDX-License-Identifier: Apache-2.0
#
# Freezes reference GPT-2 encodings into tests/fixtures/tokenizer_golden.json. Encodings come
# from the original encoder.py algorithm over data/gpt2/{vocab.json,merges.txt} and are
# cross-checked against the `tokenizers` ByteLevelBPE implementation when it is installed.

import json
import random
import sys

import gpt2_reference_encoder

CASES = [
    "",
    "ASSISTANT:",
    "ASSISTANT: ",
    " Berlin",
    "ASSISTANT: Berlin was founded in the 13th century.",
    "Hello world",
    "Hello  world",
    "Hello   world  ",
    "  leading spaces",
    "trailing newline\n",
    "a\n\nb",
    "tabs\tand\t\tmore\t",
    "I'm sure you'll see they've done it, haven't they? It's 'quoted'.",
    "DON'T SHOUT'S",
    "Numbers 1234567 and 3.14159, 2,000,000!",
    "Edge: 1e-5 rms eps; rope theta = 500000",
    "Über café naïve résumé",
    "日本語のテキストと中文字符",
    "Emoji 😀👍🏽 and flags 🇨🇦",
    "math ∑ ∫ √ ≤ ≥ ≠",
    "control\x01\x02\x7f bytes",
    "mixed\r\nline endings\r\n",
    "<|endoftext|>",
    "before<|endoftext|>after",
    "A chat between a curious user and an artificial intelligence assistant. The assistant gives helpful, "
    "detailed, and polite answers to the user's questions.\nUSER: Who invented the first practical light bulb?"
    "\nASSISTANT:",
    "The Pyramids of Giza in Egypt are some of the oldest man-made structures in the world. Visitors often note",
    "    def f(x):\n        return x ** 2\n",
    "https://example.com/path?q=1&r=two#frag",
    " non-breaking em-space　ideographic",
    "x ",
    "x",
    " ",
    "  ",
    "\n",
    "'",
    "''s",
]


def random_strings(n, seed=1234):
    rng = random.Random(seed)
    pools = [
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ",
        "0123456789",
        " \t\n\r",
        ".,;:!?'\"()[]{}<>-_=+*/\\|@#$%^&~`",
        "éàüßñçøåÆŒ",
        "日本語中文한국어",
        "😀🎉🚀🌍❤️",
        "\x00\x01\x1b\x7f",
    ]
    out = []
    for _ in range(n):
        length = rng.randint(1, 40)
        s = "".join(rng.choice(rng.choice(pools)) for _ in range(length))
        out.append(s)
    return out


def main(path):
    enc = gpt2_reference_encoder.load()
    decoder = {v: k for k, v in enc.encoder.items()}
    try:
        from tokenizers import ByteLevelBPETokenizer

        cross = ByteLevelBPETokenizer("data/gpt2/vocab.json", "data/gpt2/merges.txt")
    except ImportError:
        cross = None
    cases = CASES + random_strings(200)
    rows = []
    for text in cases:
        ids = enc.encode(text)
        if cross is not None:
            eot = enc.encoder["<|endoftext|>"]
            other = []
            for k, part in enumerate(text.split("<|endoftext|>")):
                if k:
                    other.append(eot)
                other.extend(cross.encode(part).ids)
            assert other == ids, (text, ids, other)
        rows.append({"text": text, "ids": ids, "pieces": [decoder[i] for i in ids]})
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rows, f, ensure_ascii=False, indent=0)
        f.write("\n")
    print(f"wrote {len(rows)} cases", file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/tokenizer_golden.json")
