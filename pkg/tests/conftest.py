import pytest
import torch


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    # keep tests independent of each other's RNG consumption
    torch.manual_seed(0)
    yield
