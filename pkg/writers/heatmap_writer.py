"""
Mirror placement heatmaps: one grid_y x grid_x block of 0/1 per wall as plain text, and an
optional PNG with the four walls side by side.

Text layout: walls in index order (XZ, YZ, XZ+rs, YZ+rs), each wall as grid_y lines from the
top row down to the floor row, grid_x space-separated integers per line.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from simulation.geometry import WALL_NAMES, Room  # noqa: E402


def wall_matrices(xi, room: Room) -> np.ndarray:
    """(4, grid_y, grid_x) array, row 0 at the floor. Accepts a mirror vector or a design."""
    xi = np.asarray(getattr(xi, "xi", xi), dtype=int).reshape(-1)
    if xi.shape[0] != room.num_cells:
        raise ValueError(f"Mirror vector has length {xi.shape[0]}, expected {room.num_cells}")
    return xi.reshape(4, room.grid_y, room.grid_x)


def emit_heatmap(xi, room: Room, path) -> Path:
    path = Path(path)
    lines = []
    for wall in wall_matrices(xi, room):
        for row in wall[::-1]:
            lines.append(" ".join(str(int(v)) for v in row))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise OSError(f"Cannot write heatmap to {path}: {e}") from e
    return path


def read_heatmap(path, room: Room) -> np.ndarray:
    """Mirror vector back from a text heatmap."""
    lines = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if len(lines) != 4 * room.grid_y or any(len(line) != room.grid_x for line in lines):
        raise ValueError(f"{path}: expected {4 * room.grid_y} lines of {room.grid_x} values")
    blocks = np.array(lines, dtype=int).reshape(4, room.grid_y, room.grid_x)[:, ::-1, :]
    return blocks.reshape(-1)


def render_heatmap_png(xi, room: Room, path, title: str = "") -> Path:
    path = Path(path)
    walls = wall_matrices(xi, room)
    fig, axes = plt.subplots(1, 4, figsize=(14, 3.2))
    for wall, ax in enumerate(axes):
        ax.imshow(walls[wall], origin="lower", cmap="Greys", vmin=0, vmax=1, aspect="equal")
        ax.set_title(WALL_NAMES[wall])
        ax.set_xticks(range(room.grid_x))
        ax.set_yticks(range(room.grid_y))
        ax.tick_params(labelsize=6)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
