"""Experiment configuration: INI parsing, presets, validation, defaults.

Configs are plain INI files with one section per concern; every default is
materialized into the resolved dictionary that runs embed in their reports,
so a report is self-describing.  The resolved config (minus execution
parameters: thread count and output paths) is what gets hashed into the
run manifest.
"""

import configparser
import hashlib
import json
from dataclasses import dataclass, field, fields


class ConfigError(ValueError):
    """Invalid experiment configuration."""


_COMMANDS = ("model-check", "renorm", "sweep", "zeroset", "report")


@dataclass
class ExperimentConfig:
    command: str = "model-check"
    name: str = "experiment"
    seed: int = 0

    backend_kind: str = "torus"        # torus | cp1
    n: int = 1

    family_kind: str = "theta"         # theta | theta-product | cp1-poly
    theta_j: object = "half"           # integer or "half" (= k//2 per rung)
    product_gamma: float = 8.0
    product_q: object = "sqrt"         # integer or "sqrt" (= round(sqrt(k)))
    cp1_coeffs: object = "random"      # list of complex or "random"
    cp1_degree: int = 4                # degree of random cp1 polynomials

    ladder: tuple = (4, 16, 64)
    center: object = "origin"          # "origin" | "zero" | coords | per-rung list

    points_per_axis: int = 65
    radius: float = 0.9
    structure_points: int = 0          # 0: same grid; else coarser structure grid

    m: int = 1
    subball_radius: float = 0.5
    epsilon_rel: float = 0.1
    phase_budget: float = 1e-7
    random_polys: int = 20             # model-check sample size

    thresholds: dict = field(default_factory=dict)

    out: str = "out"
    threads: object = None

    # ------------------------------------------------------------------
    def validate(self):
        if self.command not in _COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.backend_kind not in ("torus", "cp1"):
            raise ConfigError(f"unknown backend {self.backend_kind!r}")
        if self.backend_kind == "torus" and self.n not in (1, 2):
            raise ConfigError("torus backend needs n in {1, 2}")
        if self.backend_kind == "cp1" and self.n != 1:
            raise ConfigError("cp1 backend is one-dimensional")
        if self.family_kind not in ("theta", "theta-product", "cp1-poly"):
            raise ConfigError(f"unknown family {self.family_kind!r}")
        if self.family_kind == "theta-product" and self.n != 2:
            raise ConfigError("theta-product families need the n=2 torus")
        if self.family_kind == "theta" and (self.backend_kind, self.n) != ("torus", 1):
            raise ConfigError("theta families need the n=1 torus")
        if self.family_kind == "cp1-poly" and self.backend_kind != "cp1":
            raise ConfigError("cp1-poly families need the cp1 backend")
        if not self.ladder:
            raise ConfigError("empty k-ladder")
        ks = tuple(int(k) for k in self.ladder)
        if any(k < 1 for k in ks):
            raise ConfigError("ladder powers must be positive")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigError(f"ladder {ks} is not strictly increasing")
        if isinstance(self.theta_j, str) and self.theta_j != "half":
            raise ConfigError(f"theta index must be an integer or 'half', got {self.theta_j!r}")
        if isinstance(self.product_q, str) and self.product_q != "sqrt":
            raise ConfigError(f"product q must be an integer or 'sqrt', got {self.product_q!r}")
        if self.points_per_axis < 5:
            raise ConfigError("grid needs at least 5 points per axis")
        if not (0 < self.radius <= 1.0):
            raise ConfigError("grid radius must be in (0, 1]")
        if not (0 <= self.m <= 3):
            raise ConfigError("seminorm order m must be in 0..3")
        if not (0 < self.subball_radius < self.radius):
            raise ConfigError("subball radius must be inside the grid radius")
        if self.epsilon_rel <= 0 or self.phase_budget <= 0:
            raise ConfigError("tolerances must be positive")
        if isinstance(self.center, str):
            if self.center not in ("origin", "zero"):
                raise ConfigError(f"center must be 'origin', 'zero', or coordinates, got {self.center!r}")
        else:
            centers = self.center if isinstance(self.center, list) else [self.center]
            for c in centers:
                if len(c) != 2 * self.n:
                    raise ConfigError(f"center {c} has wrong dimension for n={self.n}")
            if isinstance(self.center, list) and len(self.center) != len(ks):
                raise ConfigError("per-rung center list must match the ladder length")
        for key, val in self.thresholds.items():
            if key not in _THRESHOLD_KEYS:
                raise ConfigError(f"unknown acceptance threshold {key!r}")
            if not isinstance(val, bool) and val is not None:
                float(val)
        return self

    # ------------------------------------------------------------------
    def resolved(self):
        """Plain dict with every default materialized (report embedding)."""
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = list(val)
            out[f.name] = val
        out["ladder"] = [int(k) for k in self.ladder]
        return out

    def config_hash(self):
        """sha256 of the resolved config minus execution parameters."""
        body = self.resolved()
        body.pop("threads", None)
        body.pop("out", None)
        blob = json.dumps(body, sort_keys=True, default=_json_fallback)
        return hashlib.sha256(blob.encode()).hexdigest()


def _json_fallback(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj)}")


_THRESHOLD_KEYS = {
    "require_cauchy",
    "max_defect_ratio",
    "min_seed_convergence",
    "min_symplectic_margin",
    "require_margin_positive",
    "max_curvature_ratio",
    "max_structure_dev",
    "slope_lo",
    "slope_hi",
    "max_radial_contraction",
    "max_metric_at_zero",
}

_DEFAULT_THRESHOLDS = {
    "model-check": {},
    "renorm": {"max_metric_at_zero": 1e-8},
    "sweep": {"require_cauchy": True},
    "zeroset": {
        "min_seed_convergence": 0.95,
        "min_symplectic_margin": 0.5,
        "require_margin_positive": True,
        "max_curvature_ratio": 3.0,
    },
    "report": {},
}


def default_thresholds(command):
    return dict(_DEFAULT_THRESHOLDS.get(command, {}))


# ---------------------------------------------------------------------------
# INI parsing


def _parse_center(text, n):
    text = text.strip()
    if text in ("origin", "zero"):
        return text
    rungs = [t for t in text.split(";") if t.strip()]
    centers = []
    for r in rungs:
        vals = [float(v) for v in r.replace(",", " ").split()]
        centers.append(tuple(vals))
    return centers if len(centers) > 1 else centers[0]


def _parse_complex_list(text):
    out = []
    for tok in text.replace(",", " ").split():
        out.append(complex(tok))
    return out


def load_ini(path, command=None):
    """Read an experiment config from an INI file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = ExperimentConfig()

    def get(section, key, cast=str, default=None):
        if parser.has_option(section, key):
            raw = parser.get(section, key).strip()
            return cast(raw)
        return default

    cfg.command = get("experiment", "command", str, command or cfg.command)
    cfg.name = get("experiment", "name", str, cfg.name)
    cfg.seed = get("experiment", "seed", int, cfg.seed)

    cfg.backend_kind = get("backend", "kind", str, cfg.backend_kind)
    cfg.n = get("backend", "n", int, cfg.n)

    cfg.family_kind = get("family", "kind", str, cfg.family_kind)
    raw_j = get("family", "j", str, None)
    if raw_j is not None:
        cfg.theta_j = raw_j if raw_j == "half" else int(raw_j)
    cfg.product_gamma = get("family", "gamma", float, cfg.product_gamma)
    raw_q = get("family", "q", str, None)
    if raw_q is not None:
        cfg.product_q = raw_q if raw_q == "sqrt" else int(raw_q)
    raw_coeffs = get("family", "coeffs", str, None)
    if raw_coeffs is not None:
        cfg.cp1_coeffs = "random" if raw_coeffs == "random" else _parse_complex_list(raw_coeffs)
    cfg.cp1_degree = get("family", "degree", int, cfg.cp1_degree)

    raw_ladder = get("ladder", "ks", str, None)
    if raw_ladder is not None:
        cfg.ladder = tuple(int(t) for t in raw_ladder.replace(",", " ").split())

    raw_center = get("chart", "center", str, None)
    if raw_center is not None:
        cfg.center = _parse_center(raw_center, cfg.n)

    cfg.points_per_axis = get("grid", "points_per_axis", int, cfg.points_per_axis)
    cfg.radius = get("grid", "radius", float, cfg.radius)
    cfg.structure_points = get("grid", "structure_points", int, cfg.structure_points)

    cfg.m = get("diagnostics", "m", int, cfg.m)
    cfg.subball_radius = get("diagnostics", "subball_radius", float, cfg.subball_radius)
    cfg.epsilon_rel = get("diagnostics", "epsilon_rel", float, cfg.epsilon_rel)
    cfg.phase_budget = get("diagnostics", "phase_budget", float, cfg.phase_budget)
    cfg.random_polys = get("diagnostics", "random_polys", int, cfg.random_polys)

    cfg.thresholds = default_thresholds(cfg.command)
    if parser.has_section("acceptance"):
        for key, raw in parser.items("acceptance"):
            raw = raw.strip()
            if raw.lower() in ("true", "false"):
                cfg.thresholds[key] = raw.lower() == "true"
            else:
                cfg.thresholds[key] = float(raw)

    cfg.out = get("output", "dir", str, cfg.out)
    return cfg


# ---------------------------------------------------------------------------
# presets


def preset(name, command=None):
    """Built-in experiment configurations."""
    cfg = ExperimentConfig()
    if name == "model-check":
        cfg.command = "model-check"
        cfg.name = name
        cfg.points_per_axis = 65
    elif name == "torus-n1-sweep":
        cfg.command = "sweep"
        cfg.name = name
        cfg.backend_kind, cfg.n = "torus", 1
        cfg.family_kind, cfg.theta_j = "theta", "half"
        cfg.ladder = (4, 16, 64)
        cfg.center = "zero"
        cfg.points_per_axis, cfg.radius = 129, 0.9
        cfg.m, cfg.subball_radius = 1, 0.5
        cfg.thresholds = {"require_cauchy": True, "max_defect_ratio": 0.5, "max_structure_dev": 1e-10}
    elif name == "cp1-sweep":
        cfg.command = "sweep"
        cfg.name = name
        cfg.backend_kind, cfg.n = "cp1", 1
        cfg.family_kind = "cp1-poly"
        cfg.cp1_coeffs, cfg.cp1_degree = "random", 4
        cfg.ladder = (8, 32, 128)
        cfg.center = (0.2, 0.1)
        cfg.points_per_axis, cfg.radius = 65, 0.9
        cfg.m, cfg.subball_radius = 1, 0.5
        cfg.thresholds = {"require_cauchy": True, "slope_lo": -1.3, "slope_hi": -0.7}
    elif name == "torus-n2-zeroset":
        cfg.command = "zeroset"
        cfg.name = name
        cfg.backend_kind, cfg.n = "torus", 2
        cfg.family_kind = "theta-product"
        cfg.ladder = (16,)
        cfg.center = "zero"
        cfg.points_per_axis, cfg.radius = 33, 0.9
        cfg.phase_budget = 1e-5
        cfg.thresholds = default_thresholds("zeroset")
        cfg.thresholds.pop("max_curvature_ratio")  # single rung
    elif name == "torus-n2-curvature":
        cfg.command = "zeroset"
        cfg.name = name
        cfg.backend_kind, cfg.n = "torus", 2
        cfg.family_kind = "theta-product"
        cfg.ladder = (4, 16, 64)
        cfg.center = "zero"
        cfg.points_per_axis, cfg.radius = 33, 0.9
        cfg.phase_budget = 1e-5
        cfg.thresholds = default_thresholds("zeroset")
    elif name == "renorm-torus":
        cfg.command = "renorm"
        cfg.name = name
        cfg.backend_kind, cfg.n = "torus", 1
        cfg.family_kind, cfg.theta_j = "theta", "half"
        cfg.ladder = (16,)
        cfg.center = "origin"
        cfg.points_per_axis = 65
        cfg.thresholds = default_thresholds("renorm")
    elif name == "renorm-cp1":
        cfg.command = "renorm"
        cfg.name = name
        cfg.backend_kind, cfg.n = "cp1", 1
        cfg.family_kind = "cp1-poly"
        cfg.ladder = (16,)
        cfg.center = (0.2, 0.1)
        cfg.points_per_axis = 129
        cfg.thresholds = default_thresholds("renorm")
    else:
        raise ConfigError(f"unknown preset {name!r}")
    if command is not None and command != cfg.command:
        raise ConfigError(f"preset {name!r} is a {cfg.command} experiment, not {command}")
    return cfg


PRESET_NAMES = (
    "model-check",
    "torus-n1-sweep",
    "cp1-sweep",
    "torus-n2-zeroset",
    "torus-n2-curvature",
    "renorm-torus",
    "renorm-cp1",
)
