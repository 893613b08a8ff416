import json
from pathlib import Path

import numpy as np
import pytest

from mixnash.errors import ConfigError, DisconnectedGraph
from mixnash.scenarios import build_scenario, load_config, vehicles5_config, vehicles5_scenario
from mixnash.sim import DISTURBANCE_FREE, FULL

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return p


def test_builtin_defaults():
    sc = vehicles5_scenario()
    assert sc.variant == FULL and sc.dt == 5e-4 and sc.t_final == 10.0
    assert sc.graph.edges() == [(1, 2), (1, 5), (2, 3), (3, 4), (4, 5)]
    assert np.array_equal(sc.x0.ravel(), [-5, 8, -4, -6, 1, 8, 0, -8, -1, 10])
    assert np.all(sc.v0 == 0)
    assert sc.rbf.q == 11 and sc.rbf.w_max == 500
    free = vehicles5_scenario(variant="disturbance_free")
    assert free.dt == 1e-3 and free.t_final == 50.0


def test_shipped_config_equals_builtin():
    from_file = build_scenario(CONFIG_DIR / "vehicles5.json")
    builtin = vehicles5_scenario()
    assert json.loads((CONFIG_DIR / "vehicles5.json").read_text()) == vehicles5_config()
    assert from_file.gains == builtin.gains
    assert np.array_equal(from_file.rbf.centers, builtin.rbf.centers)
    assert np.array_equal(from_file.x0, builtin.x0)


def test_precedence_flags_over_file_over_defaults(tmp_path):
    cfg = {"base": "vehicles5", "gains": {"k1": 50.0}, "integrator": {"dt": 2e-4}}
    p = write(tmp_path, cfg)
    sc = build_scenario(p)
    assert sc.gains.k1 == 50.0 and sc.gains.k2 == 0.8 and sc.dt == 2e-4
    sc = build_scenario(p, {"k1": 70.0, "dt": None})
    assert sc.gains.k1 == 70.0 and sc.dt == 2e-4


def test_custom_players_config(tmp_path):
    cfg = {
        "name": "duo",
        "variant": "disturbance_free",
        "game": {"action_dim": 1, "players": [
            {"order": "first", "quad": 1.0, "linear": 1.0, "couplings": [[2, 0.5]]},
            {"order": "second", "quad": 2.0, "linear": -1.0},
        ]},
        "graph": {"n": 2, "edges": [[1, 2]]},
        "rbf": {"centers": [-1.0, 0.0, 1.0], "width": 2.0},
        "gains": {"k1": 10, "k2": 1, "k3": 10, "k4": 10},
        "initial": {"x": [1.0, -1.0]},
        "integrator": {"t_final": 1.0},
    }
    sc = build_scenario(write(tmp_path, cfg))
    assert sc.name == "duo" and sc.variant == DISTURBANCE_FREE
    assert np.allclose(sc.game.B, [[3.0, -1.0], [0.0, 4.0]])
    assert sc.rbf.centers.shape == (3, 2)


@pytest.mark.parametrize("cfg,field", [
    ({"base": "vehicles5", "gains": {"k1": -1}}, "gains.k1"),
    ({"base": "vehicles5", "gains": {"k9": 1}}, "gains"),
    ({"base": "vehicles5", "integrator": {"dt": "fast"}}, "integrator.dt"),
    ({"base": "vehicles5", "initial": {"x": [1, 2, 3]}}, "initial.x"),
    ({"base": "vehicles5", "variant": "loud"}, "variant"),
    ({"base": "vehicles5", "colour": "red"}, "colour"),
    ({"base": "vehicles5", "schema_version": 99}, "schema_version"),
    ({"base": "vehicles5", "rbf": {"q": 5}}, "rbf"),
    ({"base": "vehicles5", "disturbance": "storm"}, "disturbance"),
    ({"base": "nowhere"}, "base"),
    ({"game": {"players": []}}, "game.players"),
])
def test_bad_fields_are_named(tmp_path, cfg, field):
    with pytest.raises(ConfigError) as info:
        build_scenario(write(tmp_path, cfg))
    assert field in str(info.value)


def test_json_syntax_error_reports_line(tmp_path):
    p = write(tmp_path, '{\n  "base": "vehicles5",\n  "gains": {,}\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(p)


def test_missing_file():
    with pytest.raises(ConfigError):
        build_scenario("/nonexistent/config.json")


def test_disconnected_graph_rejected(tmp_path):
    cfg = {"base": "vehicles5", "graph": {"n": 5, "edges": [[1, 2], [3, 4], [4, 5]]}}
    with pytest.raises((ConfigError, DisconnectedGraph)):
        build_scenario(write(tmp_path, cfg))


def test_unknown_override():
    with pytest.raises(ConfigError, match="overrides"):
        build_scenario("vehicles5", {"k7": 1.0})
