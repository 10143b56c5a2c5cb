import json

import pytest

from neupde.config import load_config, shipped_config_path, shipped_configs, validate
from neupde.errors import ConfigError


def test_shipped_configs_validate():
    names = shipped_configs()
    for expected in ("lorenz.json", "spiral_a.json", "spiral_b.json", "spiral_c.json",
                     "burgers.json", "rom_synth.json"):
        assert expected in names
    for n in names:
        load_config(shipped_config_path(n))


def _doc():
    return json.load(open(shipped_config_path("lorenz")))


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d["train"].update(learning_rate=-1), "train/learning_rate"),
    (lambda d: d["model"].update(hiden=3), "model"),
    (lambda d: d.update(kind="sde"), "kind"),
    (lambda d: d["solver"].update(scheme="rk3"), "solver/scheme"),
    (lambda d: d.pop("model"), "<root>"),
])
def test_invalid_documents(mutate, where):
    d = _doc()
    mutate(d)
    with pytest.raises(ConfigError) as err:
        validate(d)
    assert where in str(err.value)


def test_kind_specific_blocks():
    d = json.load(open(shipped_config_path("burgers")))
    d["model"]["rank"] = 3
    with pytest.raises(ConfigError):
        validate(d)


def test_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(_doc()))
    d = load_config(p, seed=9, engine="adjoint")
    assert d["seed"] == 9 and d["train"]["engine"] == "adjoint"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
