import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--long",
        action="store_true",
        default=False,
        help="run the long pattern-formation reproduction tests",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--long"):
        return
    skip_long = pytest.mark.skip(reason="pass --long to run")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip_long)
