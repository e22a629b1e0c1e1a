import os
import json
import pytest
from utils.config_manager import ConfigManager

CONFIG_FILE = 'test_config.json'

def setup_function():
    # Remove test config file before each test
    if os.path.exists(CONFIG_FILE):
        os.remove(CONFIG_FILE)

def teardown_function():
    # Clean up after each test
    if os.path.exists(CONFIG_FILE):
        os.remove(CONFIG_FILE)

def test_loads_default_config_if_no_file():
    cm = ConfigManager(CONFIG_FILE)
    config = cm.load_config()
    assert config['seed'] == 20240611
    assert config['trials'] == 10000
    assert config['workers'] == 4
    assert config['chunk_size'] == 4096
    assert config['output_dir'] == 'reports'
    assert config['formats'] == ['csv', 'json', 'svg']
    assert config['calibration'] == {}

def test_loads_config_with_missing_fields_uses_defaults():
    with open(CONFIG_FILE, 'w') as f:
        json.dump({'seed': 42, 'workers': 2}, f)
    cm = ConfigManager(CONFIG_FILE)
    config = cm.load_config()
    assert config['seed'] == 42
    assert config['workers'] == 2
    assert config['trials'] == 10000
    assert config['chunk_size'] == 4096

def test_saves_and_reloads_config():
    cm = ConfigManager(CONFIG_FILE)
    data = cm.load_config()
    data['trials'] = 50000
    data['calibration'] = {'lpn_gauss.C': 0.5}
    assert cm.save_config(data)
    with open(CONFIG_FILE) as f:
        assert json.load(f) == data
    assert cm.load_config()['trials'] == 50000

def test_handles_invalid_config_file_gracefully():
    with open(CONFIG_FILE, 'w') as f:
        f.write('{invalid json')
    cm = ConfigManager(CONFIG_FILE)
    config = cm.load_config()
    assert config['seed'] == 20240611  # default

def test_default_config_is_valid():
    cm = ConfigManager(CONFIG_FILE)
    assert cm.validate_config(cm.load_config())

@pytest.mark.parametrize('field,value', [
    ('seed', -1),
    ('seed', True),
    ('seed', 1.5),
    ('trials', 999),
    ('workers', 0),
    ('workers', 65),
    ('chunk_size', 0),
    ('formats', ['csv', 'pdf']),
    ('formats', 'csv'),
    ('calibration', {'hmso.C': -2.0}),
    ('calibration', {'hmso.C': 'big'}),
])
def test_validate_rejects_bad_values(field, value):
    cm = ConfigManager(CONFIG_FILE)
    config = cm.load_config()
    config[field] = value
    assert not cm.validate_config(config)

def test_calibration_from_config():
    cm = ConfigManager(CONFIG_FILE)
    config = cm.load_config()
    config['calibration'] = {'weibull.c_q': 0.25}
    calib = cm.calibration(config)
    assert calib.get('weibull.c_q') == 0.25
    assert calib.get('weibull.C_q') == 1.0

def test_defaults_are_not_shared_between_loads():
    cm = ConfigManager(CONFIG_FILE)
    first = cm.load_config()
    first['formats'].append('json')
    assert cm.load_config()['formats'] == ['csv', 'json', 'svg']
