"""
Channel tensor dump for debugging: CSV with columns m,l,z,gain.
LoS entries use z = -1; only non-zero gains are written.
"""

import csv
from pathlib import Path

import numpy as np

from simulation.channel import ChannelTensor
from utils import format_float


def dump_tensor(tensor: ChannelTensor, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["m", "l", "z", "gain"])
        for m, l in zip(*np.nonzero(tensor.los)):
            writer.writerow([int(m), int(l), -1, format_float(tensor.los[m, l])])
        order = np.lexsort((tensor.nlos_cell, tensor.nlos_node, tensor.nlos_led))
        for i in order:
            writer.writerow(
                [int(tensor.nlos_led[i]), int(tensor.nlos_node[i]), int(tensor.nlos_cell[i]),
                 format_float(tensor.nlos_gain[i])]
            )
    return path
