import pytest

from panelot import fixtures
from panelot.adversary import apply_misreport, make_lb_instance


@pytest.fixture
def t1():
    return fixtures.two_group_instance()


@pytest.fixture
def e1():
    return fixtures.small_group_instance()


@pytest.fixture
def e2():
    return fixtures.linked_fate_instance()


@pytest.fixture
def instance_b():
    """The constructed two-panel-type family at k=6, n_min=12, c=6, n=72,
    after the coalition misreports."""
    truthful, misreport = make_lb_instance("thm43", n=72, k=6, n_min=12, c=6)
    return truthful, misreport, apply_misreport(truthful, misreport)


def write_instance_csvs(tmp_path, instance, stem="inst"):
    from panelot.model import save_instance

    agents = tmp_path / f"{stem}_agents.csv"
    quotas = tmp_path / f"{stem}_quotas.csv"
    save_instance(instance, agents, quotas)
    return agents, quotas
