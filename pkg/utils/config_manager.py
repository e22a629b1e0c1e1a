#!/usr/bin/env python3
"""
Configuration Manager for Concentration Lab

Handles loading and saving of the lab configuration (seed, trial counts,
worker pool, report output and calibration constants) to JSON files.
"""

import copy
import json
import os
from typing import Dict, Any

from lab.bounds import CalibrationSet
from lab.errors import DomainError

REPORT_FORMATS = ("csv", "json", "svg")


class ConfigManager:
    """Manages lab configuration loading and saving."""

    def __init__(self, config_file: str = "lab_config.json"):
        """
        Initialize the configuration manager.

        Args:
            config_file (str): Path to the configuration file
        """
        self.config_file = config_file
        self.default_config = {
            'seed': 20240611,
            'trials': 10000,
            'workers': 4,
            'chunk_size': 4096,
            'output_dir': 'reports',
            'formats': list(REPORT_FORMATS),
            'calibration': {}
        }

    def load_config(self) -> Dict[str, Any]:
        """
        Load configuration from JSON file.

        Returns:
            Dict[str, Any]: Configuration dictionary with loaded values or defaults
        """
        try:
            if os.path.exists(self.config_file):
                with open(self.config_file, 'r') as f:
                    config = json.load(f)

                merged_config = copy.deepcopy(self.default_config)
                merged_config.update(config)
                return merged_config

        except Exception as e:
            print(f"Error loading configuration: {e}")

        return copy.deepcopy(self.default_config)

    def save_config(self, config: Dict[str, Any]) -> bool:
        """
        Save configuration to JSON file.

        Args:
            config (Dict[str, Any]): Configuration dictionary to save

        Returns:
            bool: True if save was successful, False otherwise
        """
        try:
            with open(self.config_file, 'w') as f:
                json.dump(config, f, indent=2)
            return True

        except Exception as e:
            print(f"Error saving configuration: {e}")
            return False

    def validate_config(self, config: Dict[str, Any]) -> bool:
        """
        Validate configuration values.

        Args:
            config (Dict[str, Any]): Configuration to validate

        Returns:
            bool: True if configuration is valid, False otherwise
        """
        try:
            seed = config.get('seed', -1)
            trials = config.get('trials', 0)
            workers = config.get('workers', 0)
            chunk_size = config.get('chunk_size', 0)
            formats = config.get('formats', [])

            if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
                return False

            if not isinstance(trials, int) or trials < 1000:
                return False

            if not isinstance(workers, int) or workers < 1 or workers > 64:
                return False

            if not isinstance(chunk_size, int) or chunk_size < 1:
                return False

            if not isinstance(formats, list) or any(fmt not in REPORT_FORMATS for fmt in formats):
                return False

            CalibrationSet.from_dict(config.get('calibration') or {})
            return True

        except (DomainError, Exception):
            return False

    def calibration(self, config: Dict[str, Any]) -> CalibrationSet:
        """CalibrationSet built from the 'calibration' key."""
        return CalibrationSet.from_dict(config.get('calibration') or {})
