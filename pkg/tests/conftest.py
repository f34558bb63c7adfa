import pytest

from adaptive_qec.codes import (
    ClassicalCode,
    assign_iceberg_blocks,
    concatenate,
    hgp,
    make_lacross,
    make_reference_expander,
)
from adaptive_qec.gf2 import BinMatrix

# [6,2,4] demo code (4x6 checks); equals the z=2 truncated circulant at n=6
DEMO_624 = ClassicalCode(
    BinMatrix.from_rows([(0, 1, 2), (1, 2, 3), (2, 3, 4), (3, 4, 5)], 6), 6, 2, 4
)


@pytest.fixture(scope="session")
def css52():
    css, layout = hgp(DEMO_624)
    return css, layout


@pytest.fixture(scope="session")
def expander100():
    css, layout = hgp(make_reference_expander(8))
    return css, layout


@pytest.fixture(scope="session")
def concat200(expander100):
    css, layout = expander100
    assignment = assign_iceberg_blocks(layout)
    return concatenate(css, layout, assignment)


@pytest.fixture(scope="session")
def lacross208():
    css, layout = hgp(make_lacross(12, 4))
    return css, layout


@pytest.fixture(scope="session")
def concat416(lacross208):
    css, layout = lacross208
    assignment = assign_iceberg_blocks(layout)
    return concatenate(css, layout, assignment)
