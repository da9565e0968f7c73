import pytest

from config.simulation_config import SimulationConfig, get_setting, get_simulation_config, reset_simulation_config


def test_defaults_from_yaml():
    config = SimulationConfig(environ={})
    assert config.get('validity.cond_b1') == pytest.approx(0.1)
    assert config.get('validity.met_factor') == pytest.approx(10.0)
    assert config.workers == 1
    assert config.output_dir == "results"
    assert config.log_level == "INFO"
    assert config.artifact_version == "1.0.0"


def test_defaults_carry_only_the_sections_the_runner_reads():
    config = SimulationConfig(environ={})
    assert set(config.values) == {
        'artifact_version', 'logging', 'validity', 'schedule', 'analysis', 'propagation', 'semiclassical', 'runtime',
    }
    assert config.get('propagation') == {'reunitarize_every': 256}
    assert config.get('semiclassical') == {'chunk_size': 4096}


def test_dotted_get_falls_back_to_default():
    config = SimulationConfig(environ={})
    assert config.get('validity.missing', 42) == 42
    assert config.get('validity.cond_b1.deeper', 'x') == 'x'


def test_environment_overrides():
    config = SimulationConfig(environ={
        'POINTER_WORKERS': '4',
        'POINTER_LOG_LEVEL': 'debug',
        'POINTER_OUTPUT_DIR': '/tmp/pointer',
    })
    assert config.workers == 4
    assert config.log_level == "DEBUG"
    assert config.output_dir == "/tmp/pointer"


def test_bad_override_is_ignored(caplog):
    config = SimulationConfig(environ={'POINTER_WORKERS': 'many', 'POINTER_OUTPUT_DIR': ''})
    assert config.workers == 1
    assert config.output_dir == "results"
    assert "POINTER_WORKERS" in caplog.text


def test_missing_file_uses_builtins(tmp_path):
    config = SimulationConfig(config_path=tmp_path / "absent.yaml", environ={})
    assert config.values == {}
    assert config.workers == 1
    assert config.artifact_version == "1.0.0"


def test_singleton_reads_process_environment(monkeypatch):
    monkeypatch.setenv('POINTER_WORKERS', '3')
    reset_simulation_config()
    assert get_simulation_config() is get_simulation_config()
    assert get_simulation_config().workers == 3
    assert get_setting('runtime.workers') == 3
