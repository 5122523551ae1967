"""
Test that the package has a version attribute.
"""


def test_package_has_version():
    """Test that the wak_converse package has a __version__ attribute."""
    import wak_converse

    assert hasattr(wak_converse, "__version__")
    assert isinstance(wak_converse.__version__, str)
    assert len(wak_converse.__version__) > 0


def test_version_format():
    """Test that the version follows semantic versioning pattern."""
    import re

    import wak_converse

    # MAJOR.MINOR.PATCH with optional pre-release/build metadata
    version_pattern = r"^\d+\.\d+\.\d+(?:[-+].*)?$"
    assert re.match(
        version_pattern, wak_converse.__version__
    ), f"Version '{wak_converse.__version__}' is not semantic"
