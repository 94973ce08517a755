"""
Two boxes, one closed claim
===========================

A small instance where the best searcher sometimes takes a box without
looking inside.  Box A is cheap and modest, box B is pricey with a rare
jackpot.
"""

from fractions import Fraction as F

from pandora import parse_instance, solve, weitz_value
from pandora.exact import threshold_of_set
from pandora.weitzman import reservation_index

inst = parse_instance(
    '{"boxes":[{"cost":"1/10","values":[["0","1/2"],["2","1/2"]]},'
    '{"cost":"1/2","values":[["0","9/10"],["10","1/10"]]}]}'
)

# reservation values and capped prizes
for i, box in enumerate(inst.boxes):
    ri = reservation_index(box)
    print(f"box {i}: sigma = {ri.sigma}, capped prize {ri.kappa.atoms}")

# the index rule has to open everything it wants to keep
print("index policy value:", weitz_value(inst, inst.full_mask, F(0)))

# the exact table over (closed set, best seen)
table = solve(inst)
print("optimal value:", table.opt)
print("first move:", table.action(0b11, F(0)))
print("after A shows 0:", table.action(0b10, F(0)))
print("after A shows 2:", table.action(0b10, F(2)))

# below the threshold the searcher still plans to claim B unopened
print("threshold for {B}:", threshold_of_set(inst, table, 0b10))
