"""Experiment configuration files.

An INI-style text file with five sections. Every key is optional except
``[problem] kind``; the defaults reproduce the constraint-coupled experiment.

::

    [problem]
    kind = constraint_coupled      ; consensus | constraint_coupled | aggregative | game
    n_agents = 10
    local_dim = 2                  ; decision size per agent (consensus: shared dim)
    constraint_dim = 2             ; constraint_coupled, game
    agg_dim = 2                    ; aggregative, game
    instance = path/to/instance.txt ; load instead of generating (relative to the config)

    [graph]
    p = 0.3                        ; Erdos-Renyi edge probability
    file = path/to/graph.txt       ; load instead of sampling

    [block]
    gamma = 0.1
    rho = 0.9
    nu = 1.0

    [tracker]
    kind = perturbed               ; perturbed | pi | radmm | exact
    ; pi: gamma, k_p, k_i    radmm: rho, beta

    [run]
    seed = 0
    delta = 0.1                    ; run
    deltas = 1, 0.5, 0.1, 0.05     ; sweep
    horizon = 15000
    record_every = 1
    tol = 1e-6                     ; convergence: final opt_err <= tol * initial
    tail_fraction = 0.5
    out = results/fig3             ; relative to the working directory
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

PROBLEM_KINDS = ("consensus", "constraint_coupled", "aggregative", "game")
TRACKER_PARAM_KEYS = {"perturbed": (), "exact": (), "pi": ("gamma", "k_p", "k_i"), "radmm": ("rho", "beta")}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "constraint_coupled"
    n_agents: int = 10
    local_dim: int = 2
    constraint_dim: int = 2
    agg_dim: int = 2
    instance: Path = None
    p: float = 0.3
    graph_file: Path = None
    gamma: float = 0.1
    rho: float = 0.9
    nu: float = 1.0
    tracker: str = "perturbed"
    tracker_params: dict = field(default_factory=dict)
    seed: int = 0
    delta: float = 0.1
    deltas: tuple = ()
    horizon: int = 15000
    record_every: int = 1
    tol: float = 1e-6
    tail_fraction: float = 0.5
    out: Path = None
    source: Path = None


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from exc


def _path(base):
    def conv(raw):
        p = Path(raw)
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ValueError(f"file {p} does not exist")
        return p
    return conv


def _floats(raw):
    return tuple(float(v) for v in raw.split(",") if v.strip())


def load_config(path):
    """Parse ``path`` into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        Unreadable file, unknown section/kind, bad value or missing referenced file.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {"problem", "graph", "block", "tracker", "run"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    sec = {name: (parser[name] if parser.has_section(name) else None) for name in known}
    base = path.parent
    d = ExperimentConfig()
    cfg = ExperimentConfig(
        kind=_get(sec["problem"], "kind", str, d.kind),
        n_agents=_get(sec["problem"], "n_agents", int, d.n_agents),
        local_dim=_get(sec["problem"], "local_dim", int, d.local_dim),
        constraint_dim=_get(sec["problem"], "constraint_dim", int, d.constraint_dim),
        agg_dim=_get(sec["problem"], "agg_dim", int, d.agg_dim),
        instance=_get(sec["problem"], "instance", _path(base), None),
        p=_get(sec["graph"], "p", float, d.p),
        graph_file=_get(sec["graph"], "file", _path(base), None),
        gamma=_get(sec["block"], "gamma", float, d.gamma),
        rho=_get(sec["block"], "rho", float, d.rho),
        nu=_get(sec["block"], "nu", float, d.nu),
        tracker=_get(sec["tracker"], "kind", str, d.tracker),
        seed=_get(sec["run"], "seed", int, d.seed),
        delta=_get(sec["run"], "delta", float, d.delta),
        deltas=_get(sec["run"], "deltas", _floats, ()),
        horizon=_get(sec["run"], "horizon", int, d.horizon),
        record_every=_get(sec["run"], "record_every", int, d.record_every),
        tol=_get(sec["run"], "tol", float, d.tol),
        tail_fraction=_get(sec["run"], "tail_fraction", float, d.tail_fraction),
        out=_get(sec["run"], "out", Path, None),
        source=path,
    )
    if cfg.kind not in PROBLEM_KINDS:
        raise ConfigError(f"[problem] kind = {cfg.kind!r}: expected one of {PROBLEM_KINDS}")
    if cfg.tracker not in TRACKER_PARAM_KEYS:
        raise ConfigError(f"[tracker] kind = {cfg.tracker!r}: expected one of {tuple(TRACKER_PARAM_KEYS)}")
    if sec["tracker"] is not None:
        allowed = TRACKER_PARAM_KEYS[cfg.tracker]
        for key in sec["tracker"]:
            if key == "kind":
                continue
            if key not in allowed:
                raise ConfigError(f"[tracker] {key}: not a parameter of the {cfg.tracker!r} tracker")
            cfg.tracker_params[key] = _get(sec["tracker"], key, float, None)
    if cfg.horizon < 0 or cfg.record_every < 1 or cfg.n_agents < 1:
        raise ConfigError("horizon must be >= 0, record_every >= 1 and n_agents >= 1")
    if not 0.0 < cfg.delta <= 1.0 or any(not 0.0 < v <= 1.0 for v in cfg.deltas):
        raise ConfigError("delta values must lie in (0, 1]")
    return cfg
