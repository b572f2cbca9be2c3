import warnings

import numpy as np
import pytest

from topolig.elasticity import LoadSpec
from topolig.material import LevelSet, ersatz_field
from topolig.mesh import BoundaryTag, box_predicate, build_structured, tag_boundary

warnings.filterwarnings("ignore", message=".*TBB.*")

# filled by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def cantilever_mesh(nx=32, ny=16, band=(0.4375, 0.5625)):
    m = build_structured(2.0, 1.0, nx, ny)
    return tag_boundary(m, [(box_predicate(0, 0, 0, 1), BoundaryTag.GAMMA_D),
                            (box_predicate(2, 2, band[0], band[1]), BoundaryTag.GAMMA_N)])


@pytest.fixture
def cmesh():
    return cantilever_mesh()


@pytest.fixture
def tip_load():
    return LoadSpec(traction=(0.0, -1.0))


def hole_level_set(mesh, center=(1.0, 0.5), radius=0.25):
    x = mesh.vertices
    return LevelSet(radius - np.hypot(x[:, 0] - center[0], x[:, 1] - center[1]), mesh)


@pytest.fixture
def holed(cmesh):
    """Cantilever mesh with a circular void in the middle and its ersatz field."""
    phi = hole_level_set(cmesh)
    return phi, ersatz_field(phi, (1.0, 1.0), 1e-3)
