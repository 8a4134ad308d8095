"""Why one solution cannot serve every norm, and how a small portfolio does.

On the star instance the cheap far leaf is best for large p, the expensive
near leaf is best for p = 1, and no single open set is within a factor 8 of
both.  A portfolio built on a grid of norms keeps one solution per halving
of the optimum and covers every grid norm.

Run: python3 demos/star_portfolio.py
"""
from fairplace import NormParam, brute_force_opt, build_portfolio, gen_star_lower_bound, nearest_assignment, total_cost
from fairplace.portfolio import cover_lookup, norm_grid


def main():
    inst = gen_star_lower_bound(256, 2)
    p1, p2 = NormParam.from_p(1), NormParam.from_p(2)
    opt1, opt2 = brute_force_opt(inst, p1)[1], brute_force_opt(inst, p2)[1]
    print(f"star(256, 2): {inst.n_clients} singleton groups, OPT_1 = {opt1:g}, OPT_2 = {opt2:g}")
    for S in (["f1"], ["f2"], ["f1", "f2"]):
        sol = nearest_assignment(inst, S)
        r1 = total_cost(inst, sol, p1).total / opt1
        r2 = total_cost(inst, sol, p2).total / opt2
        print(f"  open {S!s:14} ratio at p=1 {r1:8.4f}   at p=2 {r2:8.4f}")

    small = gen_star_lower_bound(4, 2)
    port = build_portfolio(small, grid_size=17, mode="oracle")
    print(f"\nstar(4, 2) portfolio: {len(port)} entries")
    for e in port.entries:
        lo, hi = NormParam(e.cover[1]).label(), NormParam(e.cover[0]).label()
        print(f"  q = {e.q.label():>5}  covers p in [{lo}, {hi}]  opens {list(e.solution.open)}")
    worst = max(
        total_cost(small, cover_lookup(port, q), q).total / brute_force_opt(small, q)[1] for q in norm_grid(33)
    )
    print(f"  worst ratio over a 33-point norm grid: {worst:.4f}")


if __name__ == "__main__":
    main()
