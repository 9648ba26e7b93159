"""Collects one result line per acceptance criterion for the terminal summary."""
import sys
import time
from contextlib import contextmanager

LINES: list[str] = []


@contextmanager
def criterion(number: int, title: str):
    """Record PASS or FAIL for the enclosed block; ``detail`` collects the
    measured values shown on the line."""
    detail: dict = {}
    t0 = time.perf_counter()
    try:
        yield detail
    except BaseException:
        _record("FAIL", number, title, detail, time.perf_counter() - t0)
        raise
    _record("PASS", number, title, detail, time.perf_counter() - t0)


def _record(status, number, title, detail, elapsed):
    values = ", ".join(f"{k}={_fmt(v)}" for k, v in detail.items())
    line = f"[{status}] criterion {number:2d}: {title} ({values}{', ' if values else ''}" \
           f"{elapsed:.1f}s)"
    LINES.append(line)
    print(line, file=sys.stderr)


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)
