import pytest

from gramcl.synth import SynthSpec, synth_generate


@pytest.fixture
def isotropic_store(tmp_path):
    """Well-separated Gaussian clusters: everything should classify these."""
    path = tmp_path / "iso"
    synth_generate(
        SynthSpec(K=4, L=16, per_class=50, val_per_class=20, seed=1,
                  mean_scale=6.0, noise_scale=1.0),
        path,
    )
    return path


@pytest.fixture
def anisotropic_store(tmp_path):
    """Correlated class prototypes (rho=0.95): NCM struggles, the
    decorrelated head does not."""
    path = tmp_path / "aniso"
    synth_generate(
        SynthSpec(K=10, L=64, per_class=100, val_per_class=40, seed=7,
                  covariance="anisotropic", rho=0.95,
                  mean_scale=1.0, noise_scale=1.0),
        path,
    )
    return path
