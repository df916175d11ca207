import numpy as np
import pytest

from tel import backend


@pytest.fixture(params=["compiled", "python"])
def backend_name(request):
    """Run a test under each kernel backend."""
    name = request.param
    if name == "compiled" and not backend.HAVE_COMPILED:
        pytest.skip("compiled kernels unavailable")
    previous = backend.set_backend(name)
    yield name
    backend.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
