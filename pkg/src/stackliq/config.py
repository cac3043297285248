"""Structured plain-text configuration.

Sections [model], [signal], [penalty], [grid], [numerics], [simulation]
with field names matching the corresponding parameter types.  Environment
variables with prefix ``STACKLIQ_SECTION_KEY`` override file values, e.g.
``STACKLIQ_MODEL_ALPHA=50`` overrides [model] alpha.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .errors import ConfigError
from .model import ModelParams, PenaltySpec, SignalParams, TimeGrid, build_grid
from .simulate import DEFAULT_OUTPUTS, SimulationConfig

ENV_PREFIX = "STACKLIQ"


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration."""

    params: ModelParams
    signal: SignalParams
    penalty: PenaltySpec
    grid: TimeGrid
    rank: int
    spectrum_terms: int
    simulation: SimulationConfig
    source: dict

    def with_overrides(
        self,
        seed: int | None = None,
        n_paths: int | None = None,
        rank: int | None = None,
        grid_points: int | None = None,
        threads: int | None = None,
    ) -> "RunConfig":
        """Apply CLI-level overrides, revalidating the affected pieces."""
        sim = self.simulation
        sim = SimulationConfig(
            n_paths=n_paths if n_paths is not None else sim.n_paths,
            seed=seed if seed is not None else sim.seed,
            bin_minutes=sim.bin_minutes,
            minutes_per_unit=sim.minutes_per_unit,
            outputs=sim.outputs,
            threads=threads if threads is not None else sim.threads,
        )
        grid = self.grid if grid_points is None else build_grid(self.params.T, grid_points)
        return RunConfig(
            params=self.params,
            signal=self.signal,
            penalty=self.penalty,
            grid=grid,
            rank=rank if rank is not None else self.rank,
            spectrum_terms=self.spectrum_terms,
            simulation=sim,
            source=self.source,
        )


class _SectionReader:
    def __init__(self, parser: configparser.ConfigParser, section: str):
        self.section = section
        if not parser.has_section(section):
            raise ConfigError("missing section", section=section)
        self.raw = dict(parser.items(section))
        self._apply_env()
        self.used: set[str] = set()

    def _apply_env(self) -> None:
        # Suffix case matches the config key exactly (m0 and M0 differ).
        prefix = f"{ENV_PREFIX}_{self.section.upper()}_"
        for name, value in os.environ.items():
            if name.startswith(prefix):
                self.raw[name[len(prefix):]] = value

    def _get(self, key: str, default=None) -> str | None:
        self.used.add(key)
        if key in self.raw:
            return self.raw[key]
        return default

    def get_float(self, key: str, default: float | None = None) -> float:
        raw = self._get(key)
        if raw is None:
            if default is None:
                raise ConfigError("missing required key", section=self.section, key=key)
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"not a number: {raw!r}", section=self.section, key=key) from exc

    def get_int(self, key: str, default: int | None = None) -> int:
        raw = self._get(key)
        if raw is None:
            if default is None:
                raise ConfigError("missing required key", section=self.section, key=key)
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"not an integer: {raw!r}", section=self.section, key=key) from exc

    def get_str(self, key: str, default: str | None = None) -> str:
        raw = self._get(key)
        if raw is None:
            if default is None:
                raise ConfigError("missing required key", section=self.section, key=key)
            return default
        return raw.strip()

    def reject_unknown(self) -> None:
        unknown = set(self.raw) - self.used
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError("unknown key", section=self.section, key=key)


def load_config(path: str) -> RunConfig:
    """Parse and validate a configuration file; raises ConfigError with the
    offending section and key on any problem."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case: m0 and M0 are distinct fields
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path!r}: {exc}") from exc

    model = _SectionReader(parser, "model")
    try:
        params = ModelParams(
            lambda0=model.get_float("lambda0"),
            lambda1=model.get_float("lambda1"),
            kappa0=model.get_float("kappa0"),
            kappa1=model.get_float("kappa1"),
            alpha=model.get_float("alpha"),
            q0=model.get_float("q0"),
            T=model.get_float("T"),
            x0=model.get_float("x0", 0.0),
            x1=model.get_float("x1", 0.0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), section="model") from exc
    model.reject_unknown()

    sig = _SectionReader(parser, "signal")
    try:
        signal = SignalParams(
            m0=sig.get_float("m0"),
            beta=sig.get_float("beta"),
            sigma=sig.get_float("sigma"),
            M0=sig.get_float("M0"),
            sigmaM=sig.get_float("sigmaM"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), section="signal") from exc
    sig.reject_unknown()

    pen = _SectionReader(parser, "penalty")
    variant = pen.get_str("variant")
    try:
        if variant == "zero":
            penalty = PenaltySpec.zero()
        elif variant == "constant":
            penalty = PenaltySpec.constant(pen.get_float("value"))
        elif variant == "periodic":
            penalty = PenaltySpec.periodic(
                c0=pen.get_float("c0"), c1=pen.get_float("c1"), tau=pen.get_float("tau")
            )
        else:
            raise ConfigError(
                f"unknown variant {variant!r} (expected zero, constant or periodic)",
                section="penalty",
                key="variant",
            )
        penalty.check_horizon(params.T)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), section="penalty") from exc
    pen.reject_unknown()

    gridsec = _SectionReader(parser, "grid")
    try:
        grid = build_grid(params.T, gridsec.get_int("n_points", 2001))
    except ValueError as exc:
        raise ConfigError(str(exc), section="grid", key="n_points") from exc
    gridsec.reject_unknown()

    num = _SectionReader(parser, "numerics")
    rank = num.get_int("rank", 300)
    spectrum_terms = num.get_int("spectrum_terms", 200)
    if rank < 1:
        raise ConfigError("rank must be >= 1", section="numerics", key="rank")
    if spectrum_terms < 1:
        raise ConfigError("spectrum_terms must be >= 1", section="numerics", key="spectrum_terms")
    num.reject_unknown()

    simsec = _SectionReader(parser, "simulation")
    outputs_raw = simsec.get_str("outputs", ",".join(sorted(DEFAULT_OUTPUTS)))
    outputs = frozenset(x.strip() for x in outputs_raw.split(",") if x.strip())
    try:
        simulation = SimulationConfig(
            n_paths=simsec.get_int("n_paths", 1000),
            seed=simsec.get_int("seed", 0),
            bin_minutes=simsec.get_int("bin_minutes", 1),
            minutes_per_unit=simsec.get_float("minutes_per_unit", 60.0),
            outputs=outputs,
            threads=simsec.get_int("threads", 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), section="simulation") from exc
    simsec.reject_unknown()

    source = {s: dict(parser.items(s)) for s in parser.sections()}
    return RunConfig(
        params=params,
        signal=signal,
        penalty=penalty,
        grid=grid,
        rank=rank,
        spectrum_terms=spectrum_terms,
        simulation=simulation,
        source=source,
    )
