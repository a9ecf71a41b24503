import os
import tempfile

import pytest

# TAR constants are simulated once per session into a private cache
os.environ.setdefault("LRVLAB_CACHE", tempfile.mkdtemp(prefix="lrvlab-cache-"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
