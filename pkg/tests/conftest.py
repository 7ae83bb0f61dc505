import numpy as np
import pytest
import torch

# Bit-identical reruns require a fixed thread count.
torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def adult_feature_names():
    return [
        "age",
        "workclass",
        "fnlwgt",
        "education",
        "education-num",
        "marital status",
        "occupation",
        "relationship",
        "race",
        "sex",
        "capital gain",
        "capital loss",
        "hours-per-week",
        "native-country",
    ]
