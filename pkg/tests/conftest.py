import pytest

from xafund.fixtures import fixture_wallet, seed_demo
from xafund.harness import PLATFORM_USER, Deployment
from xafund.ledger.network import NetworkConfig
from xafund.scenarios import ScenarioRunner


@pytest.fixture
def deployment(tmp_path):
    return Deployment.create(str(tmp_path / "data"))


@pytest.fixture
def seeded(tmp_path):
    d = Deployment.create(str(tmp_path / "data"))
    seed_demo(d)
    return d


@pytest.fixture
def runner(seeded):
    return ScenarioRunner(seeded)


@pytest.fixture
def wallet():
    return fixture_wallet()


def make_org_tx(deployment, org_id, name="Test Org", role="Supplier", admin="t-admin"):
    """Platform-signed OrgRegistered envelope for low-level ledger tests."""
    from xafund import events as ev
    from xafund.ledger.chain import build_tx

    payload = ev.org_registered(deployment.clock.tick(), org_id, name, role, admin)
    return build_tx(payload, PLATFORM_USER, deployment.platform_signer)
