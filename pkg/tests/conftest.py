import pytest

from qlmm import config
from qlmm.reference import ballistic_scheme, spring_mass_scheme
from qlmm.scenarios import ballistic, spring_mass_damper
from qlmm.stepper import run


@pytest.fixture(scope="session")
def spring():
    return spring_mass_damper()


@pytest.fixture(scope="session")
def projectile():
    return ballistic()


@pytest.fixture(scope="session")
def spring_published(spring):
    return spring_mass_scheme(spring[0])


@pytest.fixture(scope="session")
def projectile_published(projectile):
    return ballistic_scheme(projectile[0])


@pytest.fixture(scope="session")
def spring_records(spring, spring_published):
    ivp, cands = spring
    return [run(spring_published, ivp, p) for p in cands]


@pytest.fixture(scope="session")
def projectile_records(projectile, projectile_published):
    ivp, cands = projectile
    return [run(projectile_published, ivp, p) for p in cands]


@pytest.fixture(scope="session")
def spring_config():
    return config.load(config.bundled("spring_mass"))


@pytest.fixture(scope="session")
def projectile_config():
    return config.load(config.bundled("ballistic"))


@pytest.fixture(scope="session")
def spring_problem(spring_config, spring):
    return spring_config.problem(*spring)


@pytest.fixture(scope="session")
def projectile_problem(projectile_config, projectile):
    return projectile_config.problem(*projectile)
