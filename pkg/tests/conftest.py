import pytest

from lpwa_plan import config
from lpwa_plan.scenario import reference_scenario


@pytest.fixture
def reference():
    return reference_scenario()


@pytest.fixture
def focus(reference):
    return reference.types[0]


@pytest.fixture(scope="session")
def builtin():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = config.load_document(config.builtin_path(name))
        return cache[name]

    return get
