# Copyright (c) 2026, The llf Authors
# SPDX-License-Identifier: Apache-2.0
#
# Reference GPT-2 byte-level BPE encoder (the original encoder.py algorithm), used only to
# produce golden fixtures. The literal <|endoftext|> is mapped to its id.

import json, regex
from functools import lru_cache
def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~")+1))+list(range(ord("¡"), ord("¬")+1))+list(range(ord("®"), ord("ÿ")+1))
    cs = bs[:]; n = 0
    for b in range(2**8):
        if b not in bs:
            bs.append(b); cs.append(2**8+n); n += 1
    return dict(zip(bs, map(chr, cs)))
def get_pairs(word):
    return set(zip(word, word[1:]))
class Encoder:
    def __init__(self, encoder, bpe_merges):
        self.encoder = encoder
        self.byte_encoder = bytes_to_unicode()
        self.bpe_ranks = dict(zip(bpe_merges, range(len(bpe_merges))))
        self.pat = regex.compile(r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+""")
    def bpe(self, token):
        word = tuple(token); pairs = get_pairs(word)
        if not pairs: return token
        while True:
            bigram = min(pairs, key=lambda pair: self.bpe_ranks.get(pair, float('inf')))
            if bigram not in self.bpe_ranks: break
            first, second = bigram; new_word = []; i = 0
            while i < len(word):
                try:
                    j = word.index(first, i); new_word.extend(word[i:j]); i = j
                except ValueError:
                    new_word.extend(word[i:]); break
                if word[i] == first and i < len(word)-1 and word[i+1] == second:
                    new_word.append(first+second); i += 2
                else:
                    new_word.append(word[i]); i += 1
            word = tuple(new_word)
            if len(word) == 1: break
            pairs = get_pairs(word)
        return ' '.join(word)
    def encode(self, text):
        out = []
        parts = text.split('<|endoftext|>')
        for k, part in enumerate(parts):
            if k: out.append(self.encoder['<|endoftext|>'])
            for token in regex.findall(self.pat, part):
                token = ''.join(self.byte_encoder[b] for b in token.encode('utf-8'))
                out.extend(self.encoder[t] for t in self.bpe(token).split(' '))
        return out
def load(vocab='data/gpt2/vocab.json', merges='data/gpt2/merges.txt'):
    enc = json.load(open(vocab, encoding='utf-8'))
    lines = open(merges, encoding='utf-8').read().split('\n')[1:-1]
    return Encoder(enc, [tuple(l.split()) for l in lines])
