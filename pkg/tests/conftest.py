import numpy as np
import pytest
import torch

from makeuptransfer import synthetic
from makeuptransfer.nets import ArchitectureSpec, MakeupTransferNet

# 48 is the smallest square the six-layer discriminator accepts, so most
# model-level tests run at 48x48 with narrow widths.
TINY_SIZE = 48


@pytest.fixture(scope="session")
def tiny_arch():
    return ArchitectureSpec(
        image_size=TINY_SIZE,
        base_channels=8,
        identity_res_blocks=2,
        decoder_res_blocks=2,
        mlp_hidden=32,
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_arch):
    torch.manual_seed(1234)
    model = MakeupTransferNet(tiny_arch)
    model.eval()
    return model


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    synthetic.write_dataset(root, n_makeup=10, n_nonmakeup=10, size=TINY_SIZE, seed=0)
    return root


def make_face(seed=0, size=TINY_SIZE, makeup=False):
    rng = np.random.default_rng(seed)
    return synthetic.synthesize_face(rng, size=size, makeup=makeup)


@pytest.fixture()
def face_pair():
    x, labels_x = make_face(seed=1, makeup=False)
    y, labels_y = make_face(seed=2, makeup=True)
    return x, y, labels_x, labels_y
