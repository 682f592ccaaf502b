"""Deterministic fixture files for the CLI and the test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import serialize as sz
from .assemblages import product_assemblage, random_lhs_assemblage, werner_assemblage
from .behaviors import bipartite_scenario, pr_box, product, uniform_box
from .polytopes import lrns_vertices_222, local_vertices_222, random_mixture


def generate(directory, seed: int = 2024) -> list[str]:
    """Write the standard fixture files into a directory; returns the names."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    written = []

    def save(name, data):
        sz.save_json(data, out / name)
        written.append(name)

    pr = pr_box()
    save("pr_box.json", sz.behavior_to_dict(pr))
    save("uniform_box.json", sz.behavior_to_dict(uniform_box(bipartite_scenario())))
    save("product_pr_pr.json", sz.behavior_to_dict(product(pr, pr)))

    local_mix, _ = random_mixture(local_vertices_222(), rng, k=6)
    save("local_mixture.json", sz.behavior_to_dict(local_mix))
    lrns_mix, _ = random_mixture(lrns_vertices_222(), rng, k=10)
    save("lrns_mixture.json", sz.behavior_to_dict(lrns_mix))

    save("werner_030.json", sz.assemblage_to_dict(werner_assemblage(0.3)))
    save("werner_090.json", sz.assemblage_to_dict(werner_assemblage(0.9)))
    save(
        "broadcast_werner_090.json",
        sz.assemblage_to_dict(product_assemblage(werner_assemblage(0.9), werner_assemblage(0.9))),
    )
    save("lhs_mixture.json", sz.assemblage_to_dict(random_lhs_assemblage(rng)))
    return written
