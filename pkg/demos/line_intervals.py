"""Interval expansion on a four-facility line, phase by phase.

Facilities sit at 0, 1, 2 and 4; level 2 keeps {0, 4} and level 3 keeps
{0}.  The run starts from base intervals with alpha = 1/4, merges
intersecting lower intervals upward, moves nodes that skip a level under
the nearest child one level down, and finally stretches children to
partition their parent.

Run: python3 demos/line_intervals.py
"""
from fractions import Fraction

from fairplace.line import expand_intervals
from fairplace.verify import check_interval_tree


def show(iv):
    return "[" + ", ".join(str(v) if isinstance(v, Fraction) else ("-inf" if v < 0 else "inf") for v in iv) + "]"


def main():
    res = expand_intervals([[0, 1, 2, 4], [0, 4], [0]], alpha=Fraction(1, 4))
    for phase in ("init", "step1", "step2", "final"):
        A, parent = res.snapshots[phase]
        print(f"-- {phase}")
        for node in sorted(A, key=lambda n: (-n[0], n[1])):
            k, x = node
            up = parent.get(node)
            link = f"  parent (level {up[0]}, x={up[1]})" if up else ""
            print(f"  level {k} x={x}: {show(A[node])}{link}")
    print("violations in final state:", check_interval_tree(res))
    for x in (Fraction(1, 2), Fraction(5, 2), 3):
        print(f"point {x} served at levels 1..3 by {[str(v) for v in res.assign(x)]}")


if __name__ == "__main__":
    main()
