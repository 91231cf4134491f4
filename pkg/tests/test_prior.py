import numpy as np
import pytest

from splatsr.errors import DataError, UsageError
from splatsr.image_ops import upsample_bicubic, write_png
from splatsr.prior import PriorProvider, generate_prior


def test_bicubic_prior_matches_operator(rng):
    lr = rng.uniform(0, 1, size=(8, 8, 3))
    provider = PriorProvider("bicubic", 4)
    out = provider.generate(0, lr)
    np.testing.assert_array_equal(out, upsample_bicubic(lr, 4))
    assert out.shape == (32, 32, 3)


def test_oracle_prior_returns_stored_hr(rng):
    hr = rng.uniform(0, 1, size=(32, 32, 3))
    provider = PriorProvider("oracle", 4, {3: hr})
    lr = rng.uniform(0, 1, size=(8, 8, 3))
    np.testing.assert_array_equal(provider.generate(3, lr), hr)
    with pytest.raises(DataError):
        provider.generate(4, lr)


def test_oracle_prior_dimension_contract(rng):
    hr_wrong = rng.uniform(0, 1, size=(30, 32, 3))
    provider = PriorProvider("oracle", 4, {0: hr_wrong})
    with pytest.raises(DataError, match="shape"):
        provider.generate(0, rng.uniform(size=(8, 8, 3)))


def test_file_prior_naming_and_loading(tmp_path, rng):
    provider = PriorProvider("file", 4, tmp_path)
    assert provider.file_path(7).name == "00007_x4.png"
    hr = rng.uniform(0, 1, size=(32, 32, 3))
    write_png(tmp_path / "00007_x4.png", hr, bit_depth=16)
    lr = rng.uniform(0, 1, size=(8, 8, 3))
    out = provider.generate(7, lr)
    assert out.shape == (32, 32, 3)
    assert np.abs(out - hr).max() <= 0.5 / 65535 + 1e-12


def test_file_prior_missing_file(tmp_path, rng):
    provider = PriorProvider("file", 4, tmp_path)
    with pytest.raises(DataError, match="missing"):
        provider.generate(0, rng.uniform(size=(8, 8, 3)))


def test_prior_cache_returns_same_object(rng):
    provider = PriorProvider("bicubic", 2)
    lr = rng.uniform(size=(8, 8, 3))
    first = provider.generate(0, lr)
    assert provider.generate(0, lr) is first


def test_generate_prior_wrapper(rng):
    provider = PriorProvider("bicubic", 2)
    lr = rng.uniform(size=(8, 8, 3))
    np.testing.assert_array_equal(generate_prior(provider, 0, lr),
                                  provider.generate(0, lr))


def test_provider_validation():
    with pytest.raises(UsageError):
        PriorProvider("swinir", 4)
    with pytest.raises(UsageError):
        PriorProvider("bicubic", 0)
    with pytest.raises(UsageError):
        PriorProvider("oracle", 4)
    with pytest.raises(UsageError):
        PriorProvider("file", 4)
