"""
Optional timestamped run log for verbose mode.
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

BLOCKLENGTH = "BLOCKLENGTH"
FALLBACK = "FALLBACK"
NONCONVERGED = "NONCONVERGED"
STAGE = "STAGE"


class RunLog:
    """Append-only event log, one ``<UTC timestamp> <EVENT> <message>`` line
    per event.

    A log without a path ignores every event.

    Args:
        path: Log file path, or None to disable logging.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path

    @property
    def enabled(self) -> bool:
        """Whether events are written anywhere."""
        return bool(self.path)

    def event(self, name: str, message: str) -> None:
        """Append one event line, if enabled."""
        if not self.path:
            return
        timestamp = datetime.now(timezone.utc).isoformat()
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as log_file:
            log_file.write(f"{timestamp} {name} {message}\n")
