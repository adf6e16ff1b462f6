"""Shared fixtures: the standard deck and a few prebuilt systems.

Session scope keeps the repeatedly used meshes and assembled pencils to
one construction each; everything here is immutable, so sharing is safe.
"""

import numpy as np
import pytest

from critifem.assembly import assemble
from critifem.fem_space import build_dofmap
from critifem.materials import builtin_deck
from critifem.mesh import generate_unit_square


@pytest.fixture(scope="session")
def table1_deck():
    return builtin_deck("paper-table1")


@pytest.fixture(scope="session")
def table1_gc(table1_deck):
    return table1_deck[1][0]


@pytest.fixture(scope="session")
def square16_system(table1_deck):
    """Unit square N=16, degree 1, Dirichlet: (mesh, dofmap, system)."""
    mesh = generate_unit_square(16)
    dofmap = build_dofmap(mesh, 1)
    return mesh, dofmap, assemble(mesh, dofmap, table1_deck, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
