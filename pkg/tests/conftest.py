import pytest

from workmine.annotator import Annotator, StubBackend


@pytest.fixture
def stub_annotator() -> Annotator:
    return Annotator(backend=StubBackend())
