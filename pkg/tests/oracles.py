"""Brute-force reference implementations used only by the tests.

They deliberately share no code with the package: intervals are handled as
boolean character masks and ranks are computed by pairwise counting.
"""

from __future__ import annotations

import math


def mask(spans, length):
    covered = [False] * length
    for start, end in spans:
        for i in range(start, end):
            covered[i] = True
    return covered


def runs(covered):
    out = []
    i = 0
    while i < len(covered):
        if covered[i]:
            j = i
            while j < len(covered) and covered[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def merge_oracle(responses, length):
    """Maximal runs of covered characters (touching spans form one run)."""
    return runs(mask([s for r in responses for s in r], length))


def overlap_oracle(merged, spans):
    start, end = merged
    return sum(1 for s, e in spans for i in range(s, e) if start <= i < end)


def uniform_oracle(merged, responses, n):
    start, end = merged
    return sum(overlap_oracle(merged, r) / (end - start) for r in responses) / n


def weighted_oracle(merged, scored_responses, exponent=1.2):
    """``scored_responses``: list of lists of ``(start, end, prob)``."""
    num = 0.0
    den = 0
    for r in scored_responses:
        for s, e, p in r:
            ov = overlap_oracle(merged, [(s, e)])
            num += ov * p
            den += ov
    return (num / den) ** exponent


def average_ranks(values):
    """Rank = 1 + #smaller + (#equal - 1) / 2, computed pairwise."""
    ranks = []
    for v in values:
        smaller = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        ranks.append(1 + smaller + (equal - 1) / 2)
    return ranks


def pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def spearman_oracle(x, y):
    if len(set(x)) == 1 or len(set(y)) == 1:
        return 1.0 if list(x) == list(y) else 0.0
    return pearson(average_ranks(x), average_ranks(y))


def iou_oracle(pred, gold):
    p = {i for s, e in pred for i in range(s, e)}
    g = {i for s, e in gold for i in range(s, e)}
    if not p | g:
        return 1.0
    return len(p & g) / len(p | g)
