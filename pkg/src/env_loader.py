import os
from pathlib import Path
from typing import Optional

from log_utils import log


class EnvironmentLoader:
    """Loads KEY=VALUE settings from a .env file into os.environ.

    Variables already present in the environment win over the file.
    """

    def __init__(self, env_file: Optional[str] = None, required: bool = False, log_events: bool = True):
        if env_file is None:
            project_root = Path(__file__).resolve().parent
            while project_root != project_root.parent:
                if (project_root / '.env').exists():
                    break
                project_root = project_root.parent
            env_file = project_root / '.env'

        self.env_file = Path(env_file)
        self.required = required
        self.log_events = log_events

    def _log(self, message: str, level: str = "INFO"):
        if self.log_events:
            log(message, level)

    def _handle_missing(self, message: str):
        if self.required:
            raise EnvironmentError(f"❌ Error: {message}.")
        self._log(f"{message}.", "DEBUG")

    def set_env_vars(self) -> int:
        """Load variables not already set. Returns how many were set."""
        if not self.env_file.exists():
            self._handle_missing(f"No .env file found at {self.env_file}")
            return 0

        loaded = 0
        with open(self.env_file, 'r', encoding='utf-8') as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith('#') and '=' in line:
                    key, value = line.split('=', 1)
                    key = key.strip()
                    value = value.strip().strip('"').strip("'")
                    if key and not os.getenv(key):
                        self._log(f"Setting environment variable: {key}", "DEBUG")
                        os.environ[key] = value
                        loaded += 1

        self._log(f"Loaded {loaded} settings from {self.env_file}", "DEBUG")
        return loaded


def get_env_int(name: str, default: Optional[int] = None) -> Optional[int]:
    """Integer environment variable, or default when unset or empty."""
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError:
        log(f"Ignoring non-integer {name}={value!r}", "WARNING")
        return default
