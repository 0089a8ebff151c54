from __future__ import annotations

import pytest

from ewfe.protocol import build_protocol


@pytest.fixture(scope="session")
def spec():
    return build_protocol()
