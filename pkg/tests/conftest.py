import socket
from pathlib import Path

import pytest

from shopsim import load_catalog, load_personas

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def catalog_path() -> Path:
    return FIXTURES / "catalog.json"


@pytest.fixture(scope="session")
def personas_path() -> Path:
    return FIXTURES / "personas.json"


@pytest.fixture(scope="session")
def human_corpus_path() -> Path:
    return FIXTURES / "human_corpus.jsonl"


@pytest.fixture(scope="session")
def catalog(catalog_path):
    return load_catalog(catalog_path)


@pytest.fixture(scope="session")
def personas(catalog_path, personas_path):
    return load_personas(personas_path, load_catalog(catalog_path))


@pytest.fixture(scope="session")
def personas_by_name(personas):
    return {p.name: p for p in personas}


@pytest.fixture
def no_network(monkeypatch):
    """Fail the test if anything tries to open a network connection."""

    def _blocked(self, *args, **kwargs):
        raise AssertionError("network dial attempted during an offline test")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
    monkeypatch.setattr(socket, "create_connection",
                        lambda *a, **k: (_ for _ in ()).throw(
                            AssertionError("network dial attempted")))
