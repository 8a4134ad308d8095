"""Shared fixtures-as-functions for the test modules."""
from fairplace.instances import NormParam, RandomParams, gen_random

P1, P2, PINF = NormParam(1.0), NormParam(0.5), NormParam(0.0)
NORMS = (P1, P2, PINF)


def small_random(seed, metric="line", nf=5, nc=6, r=2, cost_range=(1.0, 10.0)):
    return gen_random(RandomParams(nf, nc, r, metric=metric, cost_range=cost_range), seed)


def close(a, b, rtol=1e-9, atol=1e-12):
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b))


# acceptance criteria outcomes, printed by the terminal-summary hook in conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


class criterion:
    """Context manager recording PASS/FAIL for one acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        note = self.detail if ok else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}  [{note}]"
        ACCEPTANCE[self.number] = (ok, line)
        print(line)
        return False
