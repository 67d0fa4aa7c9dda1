import logging

import pytest

from core import common


def test_parse_number():
    assert common.parse_number("1/3") == pytest.approx(1 / 3)
    assert common.parse_number(" 0.25 ") == 0.25
    assert common.parse_number(2) == 2.0


def test_parse_range():
    assert common.parse_range("0.06:0.09:0.01") == [0.06, 0.07, 0.08, 0.09]
    assert common.parse_range("0.05") == [0.05]
    assert common.parse_range("0.1:0.2:0.04") == [0.1, 0.14, 0.18]
    with pytest.raises(ValueError):
        common.parse_range("0.1:0.2:0")


def test_derived_streams():
    first = common.derive_rng(5, 0, 3).integers(1 << 30, size=4)
    again = common.derive_rng(5, 0, 3).integers(1 << 30, size=4)
    other = common.derive_rng(5, 1, 3).integers(1 << 30, size=4)
    assert first.tolist() == again.tolist()
    assert first.tolist() != other.tolist()
    assert common.derive_seed(5, 0, 3) == common.derive_seed(5, 0, 3)
    assert 0 <= common.derive_seed(5, 0, 3) < 1 << 63


def test_settings_file_is_created(tmp_path):
    path = tmp_path / "settings.ini"
    settings = common.load_settings(str(path))
    assert path.exists()
    assert common.settings is settings
    assert settings.sections() == ["construction", "decoder", "simulation", "system"]
    assert settings.getint("decoder", "max_iters") == 200

    # An existing file is read, not overwritten
    path.write_text(path.read_text().replace("max_iters = 200", "max_iters = 30"))
    assert common.load_settings(str(path)).getint("decoder", "max_iters") == 30


def test_setup_logging(monkeypatch):
    root = logging.getLogger()
    previous = root.level
    monkeypatch.setenv("QLDPC_LOG", "debug")
    try:
        assert common.setup_logging().name == "qldpc"
        assert root.level == logging.DEBUG
        common.setup_logging("30")
        assert root.level == logging.WARNING
    finally:
        root.setLevel(previous)
