import pytest

from msebarrier.cli import bundled_config_path, load_config, run
from msebarrier.criterion import GeometrySummary, constants, data_stats
from msebarrier.domain2d import Domain2D, classify_boundary, exterior_radius
from msebarrier.exprcalc import parse

from oracle import PAPER_PHI, PAPER_RADIAL


@pytest.fixture(scope="session")
def paper_domain():
    return Domain2D.from_radial(PAPER_RADIAL)


@pytest.fixture(scope="session")
def paper_phi():
    return parse(PAPER_PHI, ("x", "y"))


@pytest.fixture(scope="session")
def paper_classification(paper_domain):
    return classify_boundary(paper_domain, 1024)


@pytest.fixture(scope="session")
def paper_exterior(paper_domain, paper_classification):
    return exterior_radius(paper_domain, paper_classification)


@pytest.fixture(scope="session")
def paper_stats(paper_phi, paper_domain):
    return data_stats(paper_phi, paper_domain, 96)


@pytest.fixture(scope="session")
def paper_geometry(paper_exterior):
    return GeometrySummary.euclidean(paper_exterior.r)


@pytest.fixture(scope="session")
def paper_constants(paper_stats, paper_geometry):
    return constants(paper_stats, paper_geometry)


@pytest.fixture(scope="session")
def paper_report():
    """Full pipeline on the bundled example config."""
    return run(load_config(bundled_config_path()), "report")


@pytest.fixture(scope="session")
def unit_disk():
    return Domain2D.from_radial("1")
