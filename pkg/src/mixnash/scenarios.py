"""Built-in scenarios and the JSON scenario-config schema.

Precedence when building a scenario: explicit overrides (CLI flags) > config
file fields > built-in defaults.
"""

import json
import math
from pathlib import Path

import numpy as np

from .controller import Gains
from .errors import ConfigError, MixNashError
from .game import ORDERS, DisturbanceModel, QuadraticGame, vehicles5
from .graph import CommGraph, is_connected
from .rbfnn import RbfParams, diagonal_centers, linspace_centers
from .sim import DISTURBANCE_FREE, FULL, VARIANTS, Scenario

CONFIG_SCHEMA_VERSION = 1

VEHICLES5_X0 = [-5.0, 8.0, -4.0, -6.0, 1.0, 8.0, 0.0, -8.0, -1.0, 10.0]
# Ring graph; the algorithm only needs the graph to be connected.
VEHICLES5_EDGES = [[1, 2], [2, 3], [3, 4], [4, 5], [5, 1]]

# Integration defaults per variant. The full variant's damping term has a
# linearized rate κδ²/ε ≈ 2785, which needs dt < 2.785/2885 for RK4 stability.
VARIANT_DEFAULTS = {
    FULL: {"dt": 5e-4, "t_final": 10.0},
    DISTURBANCE_FREE: {"dt": 1e-3, "t_final": 50.0},
}

BUILTINS = {
    "vehicles5": "five-vehicle connectivity game, players 1-3 first-order and 4-5 second-order, "
                 "ring graph, planar actions, sinusoidal disturbances",
}

OVERRIDE_KEYS = ("k1", "k2", "k3", "k4", "beta", "dt", "t_final", "stride", "variant", "y0")

TOP_KEYS = {"schema_version", "name", "base", "variant", "game", "graph", "disturbance",
            "gains", "rbf", "initial", "integrator"}


def vehicles5_config():
    """The built-in five-vehicle scenario as a plain config dict."""
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "name": "vehicles5",
        "variant": FULL,
        "game": {"builtin": "vehicles5"},
        "graph": {"n": 5, "edges": [list(e) for e in VEHICLES5_EDGES]},
        "disturbance": "vehicles5",
        "gains": {"k1": 100.0, "k2": 0.8, "k3": 115.0, "k4": 300.0},
        "rbf": {"q": 11, "centers": {"min": -2.5, "max": 2.5, "count": 11}, "width": 5 * math.sqrt(2.0),
                "w_max": 500.0, "beta": 100.0, "delta": 10.0, "epsilon": 0.01},
        "initial": {"x": list(VEHICLES5_X0), "v": [0.0, 0.0, 0.0, 0.0], "y": "seeded"},
        "integrator": {"stride": 10},
    }


def builtin_config(name, field="scenario"):
    if name == "vehicles5":
        return vehicles5_config()
    raise ConfigError(f"unknown built-in scenario {name!r}; available: {', '.join(sorted(BUILTINS))}",
                      field=field)


def load_config(path):
    """Read a JSON scenario config; parse errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field=str(path)) from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                          field=str(path)) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object", field=str(path))
    return cfg


def _merge(base, top):
    out = dict(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "game":
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_config(cfg):
    """Expand ``"base": "<builtin>"`` by layering the file over the built-in."""
    if "base" in cfg:
        base = builtin_config(cfg["base"], field="base")
        cfg = _merge(base, {k: v for k, v in cfg.items() if k != "base"})
    return cfg


def _num(value, field, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=field)
    if integer and int(value) != value:
        raise ConfigError(f"expected an integer, got {value!r}", field=field)
    if not math.isfinite(value):
        raise ConfigError("must be finite", field=field)
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value!r}", field=field)
    return int(value) if integer else float(value)


def _vector(value, length, field):
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"expected a list of {length} numbers", field=field)
    if len(value) != length:
        raise ConfigError(f"expected {length} entries, got {len(value)}", field=field)
    return np.array([_num(v, f"{field}[{k}]") for k, v in enumerate(value)])


def _section(cfg, key, default=None):
    sec = cfg.get(key, default if default is not None else {})
    if not isinstance(sec, dict):
        raise ConfigError("expected an object", field=key)
    return sec


def _check_keys(sec, allowed, field):
    extra = set(sec) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)}; allowed: {sorted(allowed)}", field=field)


def _build_game(sec):
    _check_keys(sec, {"builtin", "action_dim", "players"}, "game")
    if "builtin" in sec:
        if sec["builtin"] != "vehicles5":
            raise ConfigError(f"unknown built-in game {sec['builtin']!r}", field="game.builtin")
        return vehicles5().quadratic
    if "players" not in sec:
        raise ConfigError("needs either 'builtin' or 'players'", field="game")
    d = _num(sec.get("action_dim", 1), "game.action_dim", positive=True, integer=True)
    players = sec["players"]
    if not isinstance(players, list) or not players:
        raise ConfigError("expected a non-empty list", field="game.players")
    terms = []
    for i, p in enumerate(players):
        f = f"game.players[{i}]"
        if not isinstance(p, dict):
            raise ConfigError("expected an object", field=f)
        _check_keys(p, {"order", "quad", "linear", "offset", "couplings"}, f)
        order = p.get("order", "first")
        if order not in ORDERS:
            raise ConfigError(f"must be one of {ORDERS}, got {order!r}", field=f"{f}.order")
        quad = p.get("quad", 0.0)
        if isinstance(quad, list):
            quad = np.array([_vector(row, d, f"{f}.quad[{r}]") for r, row in enumerate(quad)])
            if quad.shape != (d, d):
                raise ConfigError(f"expected a {d}x{d} matrix", field=f"{f}.quad")
        else:
            quad = _num(quad, f"{f}.quad")
        lin = p.get("linear", 0.0)
        lin = _vector(lin, d, f"{f}.linear") if isinstance(lin, list) else _num(lin, f"{f}.linear")
        couplings = []
        for c, pair in enumerate(p.get("couplings", [])):
            cf = f"{f}.couplings[{c}]"
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError("expected [player, weight]", field=cf)
            j = _num(pair[0], cf + "[0]", integer=True)
            if not 1 <= j <= len(players) or j == i + 1:
                raise ConfigError(f"partner must be another player in 1..{len(players)}", field=cf + "[0]")
            couplings.append((j, _num(pair[1], cf + "[1]")))
        terms.append({"order": order, "quad": quad, "linear": lin,
                      "offset": _num(p.get("offset", 0.0), f"{f}.offset"), "couplings": couplings})
    return QuadraticGame.from_terms(terms, d, name="config")


def _build_graph(sec, n):
    _check_keys(sec, {"n", "edges"}, "graph")
    gn = _num(sec.get("n", n), "graph.n", positive=True, integer=True)
    if gn != n:
        raise ConfigError(f"graph has {gn} nodes but the game has {n} players", field="graph.n")
    edges = sec.get("edges")
    if not isinstance(edges, list):
        raise ConfigError("expected a list of [i, j] pairs (1-based)", field="graph.edges")
    try:
        g = CommGraph.from_edges(n, edges)
    except (MixNashError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="graph.edges") from exc
    if not is_connected(g):
        raise ConfigError("graph is not connected", field="graph.edges")
    return g


def _build_rbf(sec, input_dim):
    _check_keys(sec, {"q", "centers", "width", "w_max", "beta", "delta", "epsilon"}, "rbf")
    centers = sec.get("centers", {"min": -2.5, "max": 2.5, "count": 11})
    if isinstance(centers, dict):
        _check_keys(centers, {"min", "max", "count"}, "rbf.centers")
        values = linspace_centers(_num(centers.get("min", -2.5), "rbf.centers.min"),
                                  _num(centers.get("max", 2.5), "rbf.centers.max"),
                                  _num(centers.get("count", 11), "rbf.centers.count", positive=True, integer=True))
        c = diagonal_centers(values, input_dim)
    elif isinstance(centers, list) and centers and all(isinstance(r, list) for r in centers):
        c = np.array([_vector(r, input_dim, f"rbf.centers[{k}]") for k, r in enumerate(centers)])
    elif isinstance(centers, list) and centers:
        c = diagonal_centers(_vector(centers, len(centers), "rbf.centers"), input_dim)
    else:
        raise ConfigError("expected {min,max,count}, a list of scalars or a list of vectors", field="rbf.centers")
    if "q" in sec and _num(sec["q"], "rbf.q", positive=True, integer=True) != len(c):
        raise ConfigError(f"q={sec['q']} but {len(c)} centers given", field="rbf.q")
    width = sec.get("width", 5 * math.sqrt(2.0))
    width = _vector(width, len(c), "rbf.width") if isinstance(width, list) else _num(width, "rbf.width", positive=True)
    kw = {k: _num(sec[k], f"rbf.{k}", positive=True) for k in ("w_max", "beta", "delta", "epsilon") if k in sec}
    try:
        return RbfParams(c, width, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc), field="rbf") from exc


def _build_disturbance(value, game):
    if value in (None, "zero", "none"):
        return DisturbanceModel.zero(game.n_players, game.action_dim)
    if value == "vehicles5":
        if game.n_players != 5 or game.action_dim != 2:
            raise ConfigError("the vehicles5 disturbance needs 5 players with 2-D actions", field="disturbance")
        return vehicles5().disturbance
    raise ConfigError(f"unknown disturbance model {value!r}; use 'vehicles5' or 'zero'", field="disturbance")


def build_scenario(source, overrides=None):
    """Build a :class:`Scenario` from a built-in name, a config path or a config dict."""
    if isinstance(source, dict):
        cfg = source
    elif isinstance(source, (str, Path)) and str(source) in BUILTINS:
        cfg = builtin_config(str(source))
    else:
        cfg = load_config(source)
    cfg = resolve_config(cfg)
    _check_keys(cfg, TOP_KEYS, "<config>")
    if "schema_version" in cfg and cfg["schema_version"] != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg['schema_version']!r}", field="schema_version")
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    bad = set(ov) - set(OVERRIDE_KEYS)
    if bad:
        raise ConfigError(f"unknown override(s) {sorted(bad)}", field="overrides")

    variant = ov.get("variant", cfg.get("variant", FULL))
    if variant not in VARIANTS:
        raise ConfigError(f"must be one of {VARIANTS}, got {variant!r}", field="variant")
    game = _build_game(_section(cfg, "game"))
    n, d = game.n_players, game.action_dim
    graph = _build_graph(_section(cfg, "graph"), n)

    gsec = _section(cfg, "gains")
    _check_keys(gsec, {"k1", "k2", "k3", "k4"}, "gains")
    gains = {k: _num(gsec[k], f"gains.{k}", positive=True) for k in gsec}
    for k in ("k1", "k2", "k3", "k4"):
        if k in ov:
            gains[k] = _num(ov[k], k, positive=True)
    gains = Gains(**gains)

    rbf = _build_rbf(_section(cfg, "rbf"), n * d)
    if "beta" in ov:
        rbf = rbf.replace(beta=_num(ov["beta"], "beta", positive=True))

    init = _section(cfg, "initial")
    _check_keys(init, {"x", "v", "z", "y"}, "initial")
    if "x" not in init:
        raise ConfigError("initial actions are required", field="initial.x")
    x0 = _vector(init["x"], n * d, "initial.x")
    ns = len(game.second_order)
    v0 = _vector(init["v"], ns * d, "initial.v") if "v" in init else None
    z0 = _vector(init["z"], (n - ns) * d, "initial.z") if "z" in init else None
    y0 = ov.get("y0", init.get("y", "seeded"))
    if isinstance(y0, list):
        y0 = np.array([_vector(r, n * d, f"initial.y[{k}]") for k, r in enumerate(y0)])
        if y0.shape != (n, n * d):
            raise ConfigError(f"expected {n} rows", field="initial.y")
    elif y0 not in ("seeded", "zero"):
        raise ConfigError(f"must be 'seeded', 'zero' or an explicit matrix, got {y0!r}", field="initial.y")

    isec = _section(cfg, "integrator")
    _check_keys(isec, {"dt", "t_final", "stride"}, "integrator")
    defaults = VARIANT_DEFAULTS[variant]
    dt = _num(ov.get("dt", isec.get("dt", defaults["dt"])), "integrator.dt", positive=True)
    t_final = _num(ov.get("t_final", isec.get("t_final", defaults["t_final"])), "integrator.t_final", positive=True)
    stride = _num(ov.get("stride", isec.get("stride", 10)), "integrator.stride", positive=True, integer=True)
    if t_final < dt:
        raise ConfigError("t_final must be at least dt", field="integrator.t_final")

    disturbance = _build_disturbance(cfg.get("disturbance"), game)
    name = cfg.get("name", "scenario")
    try:
        return Scenario(game, graph, x0, gains=gains, rbf=rbf, disturbance=disturbance, v0=v0, z0=z0,
                        y0=y0, dt=dt, t_final=t_final, stride=stride, variant=variant, name=str(name))
    except MixNashError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def vehicles5_scenario(**overrides):
    return build_scenario("vehicles5", overrides)
