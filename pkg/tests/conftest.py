from __future__ import annotations

import pytest

from kginject import demo
from kginject.store import infer_schema


@pytest.fixture(scope="session")
def scholarly_graph():
    return demo.scholarly_graph()


@pytest.fixture(scope="session")
def scholarly_schema(scholarly_graph):
    return infer_schema(scholarly_graph)


@pytest.fixture(scope="session")
def scholarly_graphlet():
    return demo.SCHOLARLY_GRAPHLET


@pytest.fixture(scope="session")
def taxonomy():
    return demo.demo_taxonomy()


@pytest.fixture(scope="session")
def paper1_instance():
    return demo.paper1_instance()


@pytest.fixture()
def records():
    return demo.demo_records(10)
