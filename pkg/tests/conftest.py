import textwrap

import numpy as np

from choral.gridmap import ClassConfig, EnvironmentClass, SemanticGrid, compute_edf

DEFAULT_CONFIG = ClassConfig(
    task_classes=("animal",),
    environment_classes=(
        EnvironmentClass("pebbles", impedes_traversal=True),
        EnvironmentClass("grass", impedes_traversal=False),
    ),
)

CHAR_TO_NAME = {".": "free", "#": "obstacle", "A": "animal", "p": "pebbles", "g": "grass"}


def grid_from_ascii(art: str, resolution: float = 0.1, config: ClassConfig = DEFAULT_CONFIG,
                    with_edf: bool = True, chars: dict | None = None) -> SemanticGrid:
    """Build a grid from character art. The FIRST text line is the TOP of the
    map (maximum y), matching how the art reads on screen."""
    table = dict(CHAR_TO_NAME)
    if chars:
        table.update(chars)
    rows = textwrap.dedent(art).strip("\n").splitlines()
    width = max(len(r) for r in rows)
    rows = [r.ljust(width, ".") for r in rows]
    names = (config.free_class, "obstacle") + config.task_classes + tuple(
        e.name for e in config.environment_classes
    )
    labels = np.zeros((len(rows), width), dtype=np.int16)
    for iy, row in enumerate(reversed(rows)):
        for ix, ch in enumerate(row):
            labels[iy, ix] = names.index(table[ch])
    grid = SemanticGrid(resolution=resolution, labels=labels, config=config)
    return compute_edf(grid) if with_edf else grid
