"""Greedy reassignment versus discounted lookahead on the doubling line.

The client at 0 is always nearest to a facility at distance about 1, but
greedy reassignment follows each level's nearest facility to the right and
ends at 2^l - 1.  Looking ahead with discount gamma commits the client to
the facility at -(1 + eps), which stays open at every level.

Run: python3 demos/adversarial_refinement.py
"""
import numpy as np

from fairplace import discounted_lookahead, gen_greedy_adversarial, greedy_strong_refine, recurrence_bound
from fairplace.refine import chain_from_sets, default_gamma


def chain_for(inst):
    fi = inst.facility_index
    sets = [sorted(fi[f] for f in g) for g in inst.meta["chain"]]
    return chain_from_sets(inst, sets, [str(k + 1) for k in range(len(sets))])


def main():
    print(f"{'l':>3} {'greedy':>10} {'lookahead':>10} {'recurrence max':>15}")
    for l in range(1, 9):
        inst = gen_greedy_adversarial(l, 0.01)
        chain = chain_for(inst)
        g = float(np.max(greedy_strong_refine(inst, chain).blowup_table))
        d = float(np.max(discounted_lookahead(inst, chain).blowup_table))
        u = recurrence_bound(l, default_gamma(l)).max
        print(f"{l:>3} {g:>10.2f} {d:>10.2f} {u:>15.2f}")


if __name__ == "__main__":
    main()
