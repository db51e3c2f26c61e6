"""Flat ``key=value`` run configuration.

One parameter per line, ``#`` starts a comment, unknown keys are an error.
Vectors are comma separated; several UE positions are separated by ``;``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .channel import SceneConfig, db_to_linear, dbm_to_watt
from .geometry import euler_rotation


@dataclass
class RunConfig:
    p_b_mw: float = 500.0
    p_u_mw: float = 200.0
    m_b_x: int = 10
    m_b_z: int = 10
    m_r_x: int = 10
    m_r_z: int = 10
    # sensing RIS size; 0 means same as m_r_x / m_r_z
    m_rs_x: int = 64
    m_rs_z: int = 64
    f_c_ghz: float = 28.0
    eps_0: float = 50.0
    eps_k: float = 50.0
    b: float = 2.0
    n0_dbm_hz: float = -174.0
    nf_db: float = 8.0
    bandwidth_khz: float = 100.0
    tau_p_ms: float = 1.0
    tau_c_ms: float = 1.0
    tau_l_ms: float = 1000.0
    l_b: str = "5,5,9"
    l_r: str = "0,0,10"
    yaw_b_deg: float = 0.0
    pitch_b_deg: float = 0.0
    roll_b_deg: float = 0.0
    yaw_r_deg: float = 0.0
    pitch_r_deg: float = 0.0
    roll_r_deg: float = 0.0
    k: int = 4
    ue_positions: str = ""
    ue_x_min: float = -20.0
    ue_x_max: float = -3.0
    ue_y_min: float = 3.0
    ue_y_max: float = 20.0
    ue_height: float = 0.0
    eta: float = 0.5
    kappa: str = ""
    m_f: int = 256
    walk_std_m: float = 0.5
    n_intervals: int = 3
    sense_seed: int = 1
    mc_blocks: int = 10_000
    pure_los: bool = False
    physical_noise: bool = False

    def scene(self, rng: np.random.Generator | None = None, sensing: bool = False) -> SceneConfig:
        """Scene for the communication RIS, or the sensing RIS when ``sensing``."""
        ris = (self.m_r_x, self.m_r_z)
        if sensing and self.m_rs_x > 0:
            ris = (self.m_rs_x, self.m_rs_z or self.m_rs_x)
        return SceneConfig(
            l_b=_vec(self.l_b),
            l_r=_vec(self.l_r),
            ue_positions=self.ue_layout(rng),
            v_b=euler_rotation(*np.radians([self.yaw_b_deg, self.pitch_b_deg, self.roll_b_deg])),
            v_r=euler_rotation(*np.radians([self.yaw_r_deg, self.pitch_r_deg, self.roll_r_deg])),
            bs_shape=(self.m_b_x, self.m_b_z),
            ris_shape=ris,
            f_c=self.f_c_ghz * 1e9,
            eps_0=self.eps_0,
            eps_k=self.eps_k,
            path_loss_exp=self.b,
            p_b=self.p_b_mw * 1e-3,
            p_u=self.p_u_mw * 1e-3,
            n0=float(dbm_to_watt(self.n0_dbm_hz)),
            noise_figure=float(db_to_linear(self.nf_db)),
            bandwidth=self.bandwidth_khz * 1e3,
            tau_p=self.tau_p_ms * 1e-3,
            tau_c=self.tau_c_ms * 1e-3,
            tau_l=self.tau_l_ms * 1e-3,
            pure_los=self.pure_los,
        )

    def ue_layout(self, rng: np.random.Generator | None = None) -> np.ndarray:
        """Explicit positions if given, else ``k`` UEs uniform over the rectangle."""
        if self.ue_positions.strip():
            return np.array([_vec(p) for p in self.ue_positions.split(";") if p.strip()])
        rng = np.random.default_rng(0) if rng is None else rng
        x = rng.uniform(self.ue_x_min, self.ue_x_max, self.k)
        y = rng.uniform(self.ue_y_min, self.ue_y_max, self.k)
        return np.column_stack([x, y, np.full(self.k, self.ue_height)])

    def kappa_vector(self, n_ue: int) -> np.ndarray:
        if not self.kappa.strip():
            return np.ones(n_ue)
        kap = _vec(self.kappa)
        return np.full(n_ue, kap[0]) if kap.size == 1 else kap

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)


def _vec(text: str) -> np.ndarray:
    return np.array([float(v) for v in str(text).split(",") if v.strip()])


def _coerce(kind, raw: str):
    if kind is bool or kind == "bool":
        low = raw.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("1", "true", "yes")
    if kind is int or kind == "int":
        return int(raw)
    if kind is float or kind == "float":
        return float(raw)
    return raw.strip()


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = RunConfig() if base is None else base
    kinds = {f.name: f.type for f in fields(RunConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in kinds:
            raise KeyError(f"line {lineno}: unknown key {key!r}")
        try:
            setattr(cfg, key, _coerce(kinds[key], raw))
        except ValueError as err:
            raise ValueError(f"line {lineno}: bad value for {key}: {err}") from None
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text())


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in cfg.items())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
