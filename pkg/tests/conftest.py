from __future__ import annotations

import pytest

from gameval import build_path_tree, load_example


@pytest.fixture(scope="session")
def table1():
    spec = load_example("table1")
    tree = build_path_tree(spec)
    return spec, tree, tree.id_of(("s0",))


@pytest.fixture(scope="session")
def table2_left():
    spec = load_example("table2_left")
    tree = build_path_tree(spec)
    return spec, tree, tree.id_of(("s0",))


@pytest.fixture(scope="session")
def table2_right():
    spec = load_example("table2_right")
    tree = build_path_tree(spec)
    return spec, tree, tree.id_of(("s0",))


@pytest.fixture(scope="session")
def path_game():
    spec = load_example("path")
    tree = build_path_tree(spec)
    return spec, tree, tree.id_of(("s0",))


@pytest.fixture(scope="session")
def state_game():
    spec = load_example("state")
    tree = build_path_tree(spec)
    return spec, tree, tree.id_of(("s0",))
