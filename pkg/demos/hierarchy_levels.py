"""Hierarchical facility location on the same clients under four metrics.

Each level has its own uniform opening cost.  Levels are solved
independently, their open sets are united from the top down, and a strong
refinement makes every level's client blocks nest inside the next level's.
The per-level ratios come from exhaustive enumeration.

Run: python3 demos/hierarchy_levels.py
"""
from fairplace import HierarchicalInstance, NormParam, RandomParams, gen_random, solve_hierarchical


def main():
    costs = (1.0, 4.0, 16.0)
    for metric in ("line", "tree", "euclidean", "explicit"):
        base = gen_random(RandomParams(6, 8, 3, metric=metric), seed=11)
        res = solve_hierarchical(HierarchicalInstance(base, costs, NormParam.from_p(2)))
        sizes = [len(s.open) for s in res.solutions]
        ratios = ", ".join(f"{r:.3f}" for r in res.report.ratios)
        print(f"{metric:>9}: backend {res.backend:<7} open sizes {sizes}  ratios [{ratios}]  bound {res.ratio_bound:.1f}")


if __name__ == "__main__":
    main()
