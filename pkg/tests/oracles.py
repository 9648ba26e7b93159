"""Independent brute-force reference implementations used as test oracles.

These are deliberately naive loops with no shared code with the package.
"""
import itertools
import math


def accuracy(t, p):
    return sum(1 for a, b in zip(t, p) if a == b) / len(t)


def precision_recall_f1(t, p, level):
    tp = sum(1 for a, b in zip(t, p) if a == level and b == level)
    pred_pos = sum(1 for b in p if b == level)
    true_pos = sum(1 for a in t if a == level)
    precision = tp / pred_pos if pred_pos else 0.0
    recall = tp / true_pos if true_pos else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def pairwise_auc(indicator, score):
    pos = [s for s, i in zip(score, indicator) if i]
    neg = [s for s, i in zip(score, indicator) if not i]
    if not pos or not neg:
        return float("nan")
    total = 0.0
    for a, b in itertools.product(pos, neg):
        total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def rmse(y, yhat):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(y, yhat)) / len(y))


def mae(y, yhat):
    return sum(abs(a - b) for a, b in zip(y, yhat)) / len(y)


def r2(y, yhat):
    mean = sum(y) / len(y)
    ss_res = sum((a - b) ** 2 for a, b in zip(y, yhat))
    ss_tot = sum((a - mean) ** 2 for a in y)
    return 1 - ss_res / ss_tot


def plcc(y, yhat):
    my, mp = sum(y) / len(y), sum(yhat) / len(yhat)
    cov = sum((a - my) * (b - mp) for a, b in zip(y, yhat))
    vy = sum((a - my) ** 2 for a in y)
    vp = sum((b - mp) ** 2 for b in yhat)
    return cov / math.sqrt(vy * vp)
