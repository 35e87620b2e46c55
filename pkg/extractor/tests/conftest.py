import pytest

torch = pytest.importorskip("torch")
pytest.importorskip("featex")

from featex.backbones import ViTFeatures, _tiny_vit  # noqa: E402

from imagegen import ImageSet  # noqa: E402


@pytest.fixture
def image_set():
    return ImageSet(n=60, K=4, seed=1)


@pytest.fixture
def tiny_model():
    torch.manual_seed(0)
    return ViTFeatures(_tiny_vit())
