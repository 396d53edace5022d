"""Run configuration: TOML with nested sections, schema-validated
fail-closed (unknown sections or keys are rejected, not ignored).

All physical defaults are the 57Fe / alpha-Fe values; a config file
only needs the keys it wants to change.  `--set section.key=value`
overrides are applied before validation.  The resolved configuration is
hashed (sha256 of its canonical JSON, first 12 hex digits) and the hash
is embedded in every output file.

Schema version: 1 (key `config_version`).
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Optional, Sequence

import tomli

from .couplings import (ChainGeometry, DecayParameters,
                        DEFAULT_CONVENTION_FACTOR, DEFAULT_REGULARIZATION_EPS,
                        FE57_GAMMA_NEV, FE57_IC_TO_RAD_RATIO,
                        FE57_LATTICE_SPACING_M, FE57_WAVELENGTH_M, HBAR_NEV_S)
from .errors import ConfigError

CONFIG_VERSION = 1

_NUMBER = (int, float)


def _positive(x):
    return isinstance(x, _NUMBER) and x > 0


def _non_negative(x):
    return isinstance(x, _NUMBER) and x >= 0


def _angle(x):
    return isinstance(x, _NUMBER) and 0.0 <= x <= math.pi


def _number_list(x):
    return isinstance(x, list) and len(x) > 0 and all(isinstance(v, _NUMBER) for v in x)


def _pair(x):
    return (isinstance(x, list) and len(x) == 2
            and all(isinstance(v, _NUMBER) for v in x) and x[0] < x[1])


def _choice(*options):
    return lambda x: x in options


def _int_ge(lo):
    return lambda x: isinstance(x, int) and x >= lo


# {section: {key: (default, validator, description)}}
SCHEMA = {
    "geometry": {
        "lattice_spacing_m": (FE57_LATTICE_SPACING_M, _positive, "lattice constant a0 in m"),
        "wavelength_m": (FE57_WAVELENGTH_M, _positive, "transition wavelength in m"),
        "dipole_angle_rad": (math.pi / 2, _angle, "dipole angle to the chain axis"),
        "incidence_angle_rad": (5e-3, _angle, "x-ray incidence angle to the chain axis"),
    },
    "decay": {
        "ic_to_rad_ratio": (FE57_IC_TO_RAD_RATIO, _non_negative,
                            "internal-conversion to radiative rate ratio"),
        "gamma0_factor": (0.5, _non_negative, "gamma0 as a multiple of gamma_rad"),
        "gamma_nev": (FE57_GAMMA_NEV, _positive, "physical linewidth, only for ns output"),
    },
    "coupling": {
        "convention_factor": (DEFAULT_CONVENTION_FACTOR, _positive,
                              "closed-form-to-lattice-sum alignment factor"),
        "regularization": ("damping", _choice("damping", "cutoff"),
                           "divergence regularizer for the closed form"),
        "regularization_eps": (DEFAULT_REGULARIZATION_EPS, _non_negative,
                               "sub-unit-circle damping"),
        "cutoff_terms": (10**6, _int_ge(1), "terms per side for the cutoff regularizer"),
    },
    "integrator": {
        "method": ("dop853", _choice("dop853", "rk45", "rk4"), "ODE scheme"),
        "rtol": (1e-10, lambda x: isinstance(x, _NUMBER) and 1e-12 <= x <= 1e-4,
                 "adaptive relative tolerance"),
        "t_end": (5.0, _positive, "time horizon in 1/Gamma"),
        "grid_points": (2000, _int_ge(2), "output grid size"),
        "rk4_substeps": (1, _int_ge(1), "fixed-step substeps per grid interval"),
    },
    "kscan": {
        "theta_min": (0.0, _angle, "scan start angle"),
        "theta_max": (math.pi, _angle, "scan end angle"),
        "points": (2000, _int_ge(2), "number of scan angles"),
        "mode": ("closed-form", _choice("closed-form", "finite"), "evaluation route"),
        "chain_length": (10**6, _int_ge(1), "chain length for finite mode"),
    },
    "evolve": {
        "model": ("reduced", _choice("reduced", "finite", "both"), "which model to run"),
        "chain_length": (3000, _int_ge(1), "finite-chain length"),
        "site": (0, _int_ge(0), "1-based site for finite output, 0 = central"),
        "pulse_areas_pi": ([1e-5, 0.25, 0.5, 0.75], _number_list,
                           "pulse areas in units of pi"),
        "extra_low_excitation_angles_rad": ([0.03, 0.06], lambda x: isinstance(x, list)
                                            and all(_angle(v) for v in x),
                                            "additional reduced-model angles at the lowest area"),
    },
    "oracle_compare": {
        "chain_length": (2, _int_ge(1), "sites for the exact benchmark"),
        "pulse_area_pi": (0.5, lambda x: _non_negative(x) and x <= 1.0, "pulse area / pi"),
        "coupling_scales": ([1.0, 0.1], _number_list, "gamma0 scale factors to compare"),
        "t_end": (3.0, _positive, "benchmark horizon in 1/Gamma"),
        "grid_points": (400, _int_ge(2), "benchmark grid size"),
        "low_excitation_area_pi": (1e-3, _positive, "area for the low-excitation check"),
    },
    "interfere": {
        "detuning": (-3.0, lambda x: isinstance(x, _NUMBER) and x != 0,
                     "reference detuning in units of Gamma"),
        "sample_angle_rad": (5e-3, _angle, "sample-chain incidence angle"),
        "reference_angle_rad": (0.22, _angle, "reference-chain incidence angle"),
        "pulse_areas_pi": ([1e-5, 0.25, 0.5, 0.75], _number_list, "pulse areas / pi"),
        "amplitude_model": ("from-trajectory", _choice("from-trajectory", "equal-exponential"),
                            "beat amplitude model"),
        "zoom_window": ([0.6, 1.6], _pair, "zoom window in 1/Gamma"),
    },
    "finite_size": {
        "n_min": (50, _int_ge(1), "smallest chain length"),
        "n_max": (600, _int_ge(1), "largest chain length"),
        "n_step": (1, _int_ge(1), "chain-length stride"),
        "pulse_area_pi": (0.5, lambda x: _non_negative(x) and x <= 1.0,
                          "area for the deviation study"),
        "window": ([0.0, 2.0], _pair, "deviation window in 1/Gamma"),
        "samples": (200, _int_ge(2), "deviation sample count M"),
        "study_pulse_areas_pi": ([1e-5, 0.25, 0.5], _number_list,
                                 "areas for the paired phase study"),
        "search_window": ([200, 450], _pair, "N window for the extremal-K search"),
        "phase_study_points": (1000, _int_ge(2), "grid size of the paired study"),
        "rtol": (1e-8, lambda x: isinstance(x, _NUMBER) and 1e-12 <= x <= 1e-4,
                 "sweep integration tolerance"),
    },
}


def default_config() -> dict:
    cfg = {"config_version": CONFIG_VERSION}
    for section, keys in SCHEMA.items():
        cfg[section] = {key: spec[0] for key, spec in keys.items()}
    return cfg


def _merge(base: dict, update: dict, path: str = "") -> None:
    for key, value in update.items():
        where = f"{path}{key}"
        if key == "config_version" and not path:
            if value != CONFIG_VERSION:
                raise ConfigError(f"unsupported config_version {value!r} "
                                  f"(this build reads version {CONFIG_VERSION})")
            continue
        if not path:
            if key not in SCHEMA:
                raise ConfigError(f"unknown config section [{key}]")
            if not isinstance(value, dict):
                raise ConfigError(f"top-level key {key!r} must be a section table")
            _merge(base[key], value, f"{key}.")
        else:
            section = path[:-1]
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {where!r}")
            base[key] = value


def _validate(cfg: dict) -> None:
    for section, keys in SCHEMA.items():
        for key, (_, validator, description) in keys.items():
            value = cfg[section][key]
            if isinstance(value, bool) or not validator(value):
                raise ConfigError(
                    f"invalid value for {section}.{key}: {value!r} ({description})")
    if cfg["kscan"]["theta_min"] >= cfg["kscan"]["theta_max"]:
        raise ConfigError("kscan.theta_min must be < kscan.theta_max")
    if cfg["finite_size"]["n_min"] > cfg["finite_size"]["n_max"]:
        raise ConfigError("finite_size.n_min must be <= finite_size.n_max")


def _parse_override(assignment: str) -> tuple:
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ConfigError(f"override {assignment!r} must look like section.key=value")
    dotted = key.strip()
    if dotted.count(".") != 1:
        raise ConfigError(f"override key {dotted!r} must be section.key")
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    section, name = dotted.split(".")
    return section, name, value


def load_config(path: Optional[str] = None,
                overrides: Sequence[str] = ()) -> "RunConfig":
    cfg = default_config()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config syntax error in {path}: {exc}")
        _merge(cfg, user)
    for assignment in overrides:
        section, name, value = _parse_override(assignment)
        _merge(cfg, {section: {name: value}})
    _validate(cfg)
    return RunConfig(cfg)


class RunConfig:
    """Resolved, validated configuration with object factories."""

    def __init__(self, cfg: dict):
        self.raw = cfg
        canonical = json.dumps(cfg, sort_keys=True)
        self.hash = hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def __getitem__(self, section: str) -> dict:
        return self.raw[section]

    def geometry(self, incidence_angle: Optional[float] = None) -> ChainGeometry:
        g = self.raw["geometry"]
        return ChainGeometry(
            lattice_spacing=g["lattice_spacing_m"], wavelength=g["wavelength_m"],
            dipole_angle=g["dipole_angle_rad"],
            incidence_angle=g["incidence_angle_rad"] if incidence_angle is None
            else incidence_angle)

    def decay(self) -> DecayParameters:
        d = self.raw["decay"]
        return DecayParameters.fe57(ic_to_rad=d["ic_to_rad_ratio"],
                                    gamma0_factor=d["gamma0_factor"])

    @property
    def lifetime_ns(self) -> float:
        return HBAR_NEV_S / self.raw["decay"]["gamma_nev"] * 1e9

    @property
    def convention_factor(self) -> float:
        return self.raw["coupling"]["convention_factor"]

    def coupling_kwargs(self) -> dict:
        c = self.raw["coupling"]
        return {"eps": c["regularization_eps"], "convention_factor": c["convention_factor"],
                "regularization": c["regularization"], "cutoff_terms": c["cutoff_terms"]}

    def integrator_kwargs(self) -> dict:
        i = self.raw["integrator"]
        return {"rtol": i["rtol"], "method": i["method"], "rk4_substeps": i["rk4_substeps"]}

    def output_metadata(self, command: str, **extra) -> dict:
        meta = {"config_hash": self.hash,
                "coupling_convention_factor": self.convention_factor,
                "schema_version": CONFIG_VERSION,
                "command": command}
        meta.update(extra)
        return meta
