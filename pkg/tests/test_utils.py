"""
SpiralDrive: Utilities, Config and Run Context Tests
====================================================
1. Phase canonicalization, ordered maps, provenance
2. Run config schema and file parsing
3. Run context precedence (CLI > env > config > default) and the run logger
"""
import json
import math

import pytest
from pydantic import ValidationError

from spiraldrive.engine.errors import DomainError, ParseError
from spiraldrive.engine.pulse_engine import DEFAULT_OFFSETS, DEFAULT_PHASES
from spiraldrive.engine.spin_core import exact_cancellation_amplitude
from spiraldrive.engine.utils import PHASE_LATTICE, canonical_phase, config_hash, map_ordered, provenance
from spiraldrive.schemas.base import RunConfig, load_run_config, read_config_file
from spiraldrive.services.context import RunContext, Settings
from spiraldrive.services.logger import RunLogger


# ============================================================
# MODULE 1: UTILITIES
# ============================================================

class TestCanonicalPhase:

    def test_wraps_into_one_period(self):
        assert canonical_phase(-0.5) == pytest.approx(2 * math.pi - 0.5, abs=PHASE_LATTICE)
        assert canonical_phase(7.0) == pytest.approx(7.0 - 2 * math.pi, abs=PHASE_LATTICE)

    def test_shift_by_full_turns_is_bit_identical(self):
        for phi in (0.3, 1.7, 5.9):
            assert canonical_phase(phi + 2 * math.pi) == canonical_phase(phi)
            assert canonical_phase(phi - 4 * math.pi) == canonical_phase(phi)

    def test_full_turn_maps_to_zero(self):
        assert canonical_phase(2 * math.pi) == 0.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            canonical_phase(float("inf"))


class TestOrderedMap:

    def test_parallel_keeps_input_order(self):
        items = list(range(50))
        assert map_ordered(lambda x: x * x, items, workers=4) == [x * x for x in items]

    def test_serial_without_workers(self):
        assert map_ordered(str, [3, 1, 2]) == ["3", "1", "2"]


class TestProvenance:

    def test_hash_ignores_key_order(self):
        assert config_hash({"a": 1, "b": {"c": 2}}) == config_hash({"b": {"c": 2}, "a": 1})

    def test_hash_changes_with_values(self):
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_block_fields(self):
        block = provenance({"a": 1}, seed=4, command="simulate")
        assert block["tool"] == "spiraldrive"
        assert block["seed"] == 4
        assert block["command"] == "simulate"
        assert len(block["config_hash"]) == 16


# ============================================================
# MODULE 2: RUN CONFIG
# ============================================================

class TestRunConfig:

    def test_defaults(self):
        cfg = RunConfig()
        system = cfg.system.build()
        assert system.omega_d == 1.0
        assert system.theta_d == pytest.approx(math.radians(35.3))
        assert cfg.pulse.duration_for(system) is None

    def test_exact_cancellation_keyword(self):
        cfg = RunConfig.model_validate({"system": {"omega_d": "exact-cancellation"}})
        system = cfg.system.build()
        assert system.omega_d == exact_cancellation_amplitude(1.0, math.radians(35.3))

    def test_amplitude_override_is_a_fraction(self):
        cfg = RunConfig.model_validate({"system": {"omega0": 2.0}})
        assert cfg.system.build(0.25).omega_d == 0.5

    def test_dc_pi_duration(self):
        cfg = RunConfig.model_validate({"system": {"omega_d": "exact-cancellation"},
                                        "pulse": {"duration": "dc-pi", "envelope": "rectangular", "offset": -1.0}})
        system = cfg.system.build()
        spec = cfg.pulse.build(system)
        assert spec.duration_tpi == pytest.approx(math.pi / (2 * system.omega_d))
        assert spec.rise_time_dt == 0.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"system": {"omega_zero": 1.0}})

    def test_out_of_range_tilt_fails_on_build(self):
        cfg = RunConfig.model_validate({"system": {"theta_d_deg": 95.0}})
        with pytest.raises(DomainError):
            cfg.system.build()

    def test_spiral_section_builds_geometry(self):
        cfg = RunConfig.model_validate({"spiral": {"turns": 3, "layers": 1}})
        geom = cfg.spiral.geometry()
        assert geom.turns == 3
        assert geom.layers == 1

    def test_grid_defaults(self):
        """The landscape command scans 64 x 41; the suite's offset-sine stage a coarser 24 x 21."""
        cfg = RunConfig()
        assert (cfg.landscape.phase_n, cfg.landscape.offset_n) == (DEFAULT_PHASES, DEFAULT_OFFSETS) == (64, 41)
        assert (cfg.oct.phase_n, cfg.oct.offset_n) == (24, 21)
        assert cfg.oct.energy_weight == 0.0 and not cfg.oct.autotune

    def test_oct_factors_default_to_one_cutoff(self):
        cfg = RunConfig.model_validate({"oct": {"amplitudes": [0.1, 0.5], "cutoff_factor": 8.0}})
        assert cfg.oct.factors() == [8.0, 8.0]


class TestConfigFiles:

    def test_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[system]\nomega_d = 0.5\n\n[run]\nthreads = 2\n', encoding="utf-8")
        cfg, raw = load_run_config(path)
        assert cfg.system.omega_d == 0.5
        assert cfg.run.threads == 2
        assert raw["system"]["omega_d"] == 0.5

    def test_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"pulse": {"offset": 0.25}}), encoding="utf-8")
        cfg, _ = load_run_config(path)
        assert cfg.pulse.offset == 0.25

    def test_broken_toml_is_a_parse_error(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[system]\nomega_d = 0.5\nomega0 = = 1\n', encoding="utf-8")
        with pytest.raises(ParseError) as excinfo:
            read_config_file(path)
        assert excinfo.value.exit_code == 2

    def test_missing_file_is_a_parse_error(self, tmp_path):
        with pytest.raises(ParseError):
            read_config_file(tmp_path / "absent.toml")

    def test_no_file_means_defaults(self):
        cfg, raw = load_run_config(None)
        assert raw == {}
        assert cfg == RunConfig()


# ============================================================
# MODULE 3: RUN CONTEXT AND LOGGER
# ============================================================

@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(f'[run]\nout_dir = "{(tmp_path / "from_config").as_posix()}"\nthreads = 3\nseed = 11\n',
                    encoding="utf-8")
    return path


class TestRunContext:

    def test_config_values_apply_without_overrides(self, config_file, tmp_path):
        ctx = RunContext("simulate", config_file, settings=Settings(out_dir=None, threads=None), echo=False)
        assert ctx.out_dir == tmp_path / "from_config"
        assert ctx.threads == 3
        assert ctx.seed == 11

    def test_environment_beats_config(self, config_file, tmp_path):
        settings = Settings(out_dir=str(tmp_path / "from_env"), threads=5)
        ctx = RunContext("simulate", config_file, settings=settings, echo=False)
        assert ctx.out_dir == tmp_path / "from_env"
        assert ctx.threads == 5

    def test_cli_beats_environment(self, config_file, tmp_path):
        settings = Settings(out_dir=str(tmp_path / "from_env"), threads=5)
        ctx = RunContext("simulate", config_file, out_dir=tmp_path / "from_cli", seed=2, threads=7,
                         settings=settings, echo=False)
        assert ctx.out_dir == tmp_path / "from_cli"
        assert ctx.threads == 7
        assert ctx.seed == 2

    def test_settings_read_prefixed_environment(self, monkeypatch):
        monkeypatch.setenv("SPIRALDRIVE_THREADS", "6")
        monkeypatch.setenv("SPIRALDRIVE_LOG_LEVEL", "DEBUG")
        settings = Settings()
        assert settings.threads == 6
        assert settings.log_level == "DEBUG"

    def test_inputs_resolve_next_to_the_config(self, config_file, tmp_path):
        ctx = RunContext("fit", config_file, settings=Settings(out_dir=None, threads=None), echo=False)
        assert ctx.resolve_input("data/odmr.csv") == tmp_path / "data" / "odmr.csv"

    def test_provenance_hashes_the_raw_config(self, config_file):
        ctx = RunContext("simulate", config_file, settings=Settings(out_dir=None, threads=None), echo=False)
        block = ctx.provenance()
        assert block["config_hash"] == config_hash(ctx.raw_config)
        assert block["command"] == "simulate"
        assert block["seed"] == 11


class TestRunLogger:

    def test_messages_become_json_lines(self, tmp_path):
        logger = RunLogger(task_id="spiral", log_path=tmp_path / "run_log.jsonl", echo=False)
        logger.info("start")
        logger.warn("careful")
        logger.success("done")
        lines = (tmp_path / "run_log.jsonl").read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in lines]
        assert [r["level"] for r in records] == ["INFO", "WARNING", "SUCCESS"]
        assert records[2]["icon"] == "✅"
        assert all(r["task_id"] == "spiral" for r in records)
        assert len(logger.log_messages) == 3
