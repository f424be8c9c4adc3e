"""
Tests for optspace package.
"""
from typing import List

import yaml

from optspace.mc_utils import set_logger


class McSutUtils:
    """Test scale settings read from the experiment file."""

    def __init__(self, experiment: dict) -> None:
        self.experiment = experiment

    @classmethod
    def from_file(cls, experiment_file: str) -> "McSutUtils":
        with open(experiment_file) as stream:
            return cls(yaml.safe_load(stream) or {})

    def scale(self, name: str) -> dict:
        """Settings of one Monte-Carlo check, empty dict if the check is not configured."""
        return dict(self.experiment.get(name) or {})

    def seeds(self, name: str) -> List[int]:
        settings = self.scale(name)
        return [settings.get("seed", 0) + i for i in range(settings.get("replicates", 1))]


set_logger()
