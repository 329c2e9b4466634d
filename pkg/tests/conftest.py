import numpy as np
import pytest
import torch

from tablestruct.config import Config


@pytest.fixture(autouse=True)
def _fixed_torch_seed():
    torch.manual_seed(0)
    yield


@pytest.fixture
def tiny_config():
    """Small model + short schedule so harness tests stay fast."""
    return Config(
        backbone_depth=1,
        p2_channels=16,
        high_res_channels=32,
        heads=4,
        ffn_dim=64,
        decoder_layers=2,
        stage_epochs=1,
        stages=3,
        batch_size=2,
        epoch_iters=1,
        rescale_shorter_side=(96,),
        pixels_per_class=128,
        infer_size=96,
        resize_mode="shorter",
    )


def rng(seed=0):
    return np.random.default_rng(seed)
