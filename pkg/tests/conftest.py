from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402

from coarse_decomp.spaces import (  # noqa: E402
    build_binary_tree,
    build_cayley_ball,
    build_cycle,
    build_grid_box,
    build_path,
)


def _corpus():
    g1 = build_grid_box(1, 64)
    g2 = build_grid_box(2, 64)
    g2s = build_grid_box(2, 16)
    cyc = build_cycle(16)
    tree = build_binary_tree(6)
    free = build_cayley_ball("free:2", 4)
    dih = build_cayley_ball("dihedral:8", 8)
    path = build_path(64)
    return {
        "grid1d-64": (g1, lambda: oracles.grid_sq(g1.labels, "l1")),
        "grid2d-16": (g2s, lambda: oracles.grid_sq(g2s.labels, "l1")),
        "grid2d-64": (g2, None),  # 4096 points: checked by the package verifier only
        "path-64": (path, lambda: oracles.path_sq(64)),
        "cycle-16": (cyc, lambda: oracles.cycle_sq(16)),
        "tree-6": (tree, lambda: oracles.tree_sq(6)),
        "free2-r4": (free, lambda: oracles.free_word_sq(free.labels)),
        "dihedral8": (dih, lambda: oracles.dihedral_sq(8, dih.labels)),
    }


_CORPUS = None


def corpus():
    global _CORPUS
    if _CORPUS is None:
        _CORPUS = _corpus()
    return _CORPUS


@pytest.fixture(scope="session")
def spaces():
    return {k: v[0] for k, v in corpus().items()}


@pytest.fixture(scope="session")
def oracle_tables():
    cache = {}

    def get(name):
        if name not in cache:
            fn = corpus()[name][1]
            cache[name] = None if fn is None else fn()
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
