"""INI experiment configuration with fail-fast validation.

Unknown sections or keys are errors, reported with their line number.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .fbm import METHODS, HurstParam
from .model import POINTWISE, PROFILES, DeclaredConstants, ExampleParams, build_example


class ConfigError(ValueError):
    pass


def _num(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        return float(Fraction(text))


def _nums(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    return [_num(t) for t in re.split(r"[,\s]+", text) if t]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"{t!r} not one of {sorted(options)}")
        return t
    return parse


def _opt_num(text):
    return None if text.strip().lower() in ("", "auto", "none") else _num(text)


# section -> key -> (parser, default)
SCHEMA = {
    "problem": {
        "n_modes": (int, 8),
        "horizon": (_num, 1.0),
        "hurst": (_num, 0.7),
        "beta": (_num, 0.75),
        "weight_rate": (_num, 4.0),
        "g_amp": (_num, 0.0),
        "g_rate": (_num, 4.0),
        "g_profile": (_choice(PROFILES), "sine"),
        "g_map": (_choice(POINTWISE), "identity"),
        "f_amp": (_num, 0.0),
        "f_rate": (_num, 4.0),
        "f_profile": (_choice(PROFILES), "sine"),
        "f_map": (_choice(POINTWISE), "identity"),
        "sigma": (_num, 0.0),
        "lambda_decay": (_num, 2.0),
        "impulse_times": (_nums, []),
        "impulse_gain": (_nums, [0.0]),
        "impulse_map": (_choice(POINTWISE), "identity"),
        "control_c": (_num, 1.0),
        "phi_amp": (_num, 0.0),
        "phi_rate": (_num, 0.0),
        "phi_vector": (_nums, []),
        "x1": (str, "free"),
        "declared_M_g": (_opt_num, None),
        "declared_M_f": (_opt_num, None),
        "declared_M_g_bar": (_opt_num, None),
        "declared_M_f_bar": (_opt_num, None),
        "declared_M_b": (_opt_num, None),
        "declared_M_w": (_opt_num, None),
        "impulse_radius": (_num, 10.0),
        "collocation": (int, 0),
        "probe_seed": (int, 12345),
    },
    "solver": {
        "dt": (_num, 1 / 512),
        "noise_dt": (_opt_num, None),
        "noise_method": (_choice(METHODS), "cholesky"),
        "inner_tol": (_num, 1e-13),
        "max_inner": (int, 200),
        "picard_tol": (_num, 1e-10),
        "max_iter": (int, 50),
        "backend": (_choice({"auto", "cython", "python"}), "auto"),
    },
    "control": {
        "steer_tol": (_num, 1e-6),
        "steer_tol_relative": (_bool, True),
        "max_outer": (int, 20),
        "ridge_epsilon": (_num, 1e-12),
    },
    "mc": {
        "n_paths": (int, 1),
        "master_seed": (int, 0),
        "jobs": (int, 1),
    },
    "output": {
        "directory": (str, "out"),
        "formats": (str, "csv,json"),
    },
}


@dataclass
class ExperimentConfig:
    problem: dict
    solver: dict
    control: dict
    mc: dict
    output: dict
    source: str = field(default="<string>", repr=False)

    def example_params(self) -> ExampleParams:
        p = self.problem
        declared = None
        if any(p[k] is not None for k in p if k.startswith("declared_")):
            spec0 = build_example(self._params(None))
            from .model import ExpMemoryMap
            n, beta = p["n_modes"], p["beta"]
            auto_g = spec0.neutral_g.lipschitz_bound(n, beta, spec0.weight) if isinstance(spec0.neutral_g, ExpMemoryMap) else 0.0
            auto_f = spec0.drift_f.lipschitz_bound(n, 0.0, spec0.weight) if isinstance(spec0.drift_f, ExpMemoryMap) else 0.0
            declared = DeclaredConstants(
                M_g=p["declared_M_g"] if p["declared_M_g"] is not None else auto_g,
                M_f=p["declared_M_f"] if p["declared_M_f"] is not None else auto_f,
                M_g_bar=p["declared_M_g_bar"], M_f_bar=p["declared_M_f_bar"],
                M_b=p["declared_M_b"], M_w=p["declared_M_w"], impulse_radius=p["impulse_radius"],
            )
        return self._params(declared)

    def _params(self, declared):
        p = self.problem
        n = p["n_modes"]
        vec = np.zeros(n)
        if p["phi_vector"]:
            v = np.asarray(p["phi_vector"], dtype=float)
            vec[: v.size] = v
        times = p["impulse_times"]
        gains = p["impulse_gain"]
        if len(gains) == 1:
            gains = gains * len(times)
        return ExampleParams(
            n_modes=n, horizon=p["horizon"], hurst=p["hurst"], beta=p["beta"], rate=p["weight_rate"],
            g_amp=p["g_amp"], g_rate=p["g_rate"], g_profile=p["g_profile"], g_map=p["g_map"],
            f_amp=p["f_amp"], f_rate=p["f_rate"], f_profile=p["f_profile"], f_map=p["f_map"],
            sigma=p["sigma"], lambda_decay=p["lambda_decay"], impulse_times=tuple(times),
            impulse_gain=tuple(gains), impulse_map=p["impulse_map"], control_c=p["control_c"],
            phi_amp=p["phi_amp"], phi_rate=p["phi_rate"], phi_vector=vec, declared=declared,
            collocation=p["collocation"] or None, probe_seed=p["probe_seed"],
        )

    def build_spec(self):
        return build_example(self.example_params())

    def target(self, spec) -> np.ndarray:
        """x1: explicit coefficients (zero padded) or 'free' = S(T) phi(0)."""
        from .spectral import semigroup_apply
        text = self.problem["x1"].strip()
        if text.lower() == "free":
            return semigroup_apply(spec.horizon, spec.phi(0.0))
        vals = _nums(text)
        if len(vals) > spec.n_modes:
            raise ConfigError("x1 has more entries than n_modes")
        out = np.zeros(spec.n_modes)
        out[: len(vals)] = vals
        return out

    def steer_tol(self, x1) -> float:
        tol = self.control["steer_tol"]
        return tol * float(x1 @ x1) if self.control["steer_tol_relative"] else tol


def _line_of(text: str, section: str, key: str | None) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None:
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            if k == key:
                return i
    return 0


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (declared_M_g)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}:{_line_of(text, sec, None)}: unknown section [{sec}]")
    for sec, keys in SCHEMA.items():
        values[sec] = {k: d for k, (_, d) in keys.items()}
        if not cp.has_section(sec):
            continue
        for key, raw in cp.items(sec):
            if key not in keys:
                raise ConfigError(f"{source}:{_line_of(text, sec, key)}: unknown key '{key}' in [{sec}]")
            parser = keys[key][0]
            try:
                values[sec][key] = parser(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{source}:{_line_of(text, sec, key)}: bad value for {sec}.{key}: {exc}") from None
    cfg = ExperimentConfig(values["problem"], values["solver"], values["control"],
                           values["mc"], values["output"], source)
    _validate(cfg, text)
    return cfg


def _validate(cfg: ExperimentConfig, text: str):
    def fail(sec, key, msg):
        raise ConfigError(f"{cfg.source}:{_line_of(text, sec, key)}: {sec}.{key}: {msg}")

    try:
        HurstParam(cfg.problem["hurst"])
    except ValueError as exc:
        fail("problem", "hurst", str(exc))
    for sec, key in (("solver", "dt"), ("solver", "inner_tol"), ("solver", "picard_tol"),
                     ("control", "steer_tol"), ("control", "ridge_epsilon"), ("problem", "horizon")):
        if not cfg.__dict__[sec][key] > 0:
            fail(sec, key, "must be positive")
    if cfg.solver["noise_dt"] is not None and not cfg.solver["noise_dt"] > 0:
        fail("solver", "noise_dt", "must be positive")
    if cfg.mc["n_paths"] < 1:
        fail("mc", "n_paths", "must be >= 1")
    if cfg.mc["jobs"] < 1:
        fail("mc", "jobs", "must be >= 1")
    if cfg.problem["n_modes"] < 1:
        fail("problem", "n_modes", "must be >= 1")
    if not 0.5 < cfg.problem["beta"] < 1:
        fail("problem", "beta", "must lie in (1/2, 1)")
    times = cfg.problem["impulse_times"]
    if len(cfg.problem["impulse_gain"]) not in (1, len(times)):
        fail("problem", "impulse_gain", "give one gain or one per impulse time")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, str(path))
