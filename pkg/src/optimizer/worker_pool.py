from multiprocessing import Pool
from typing import Callable, Optional

from log_utils import log


class WorkerPool:
    """Order-preserving map over a process pool; workers=1 runs in-process."""

    def __init__(self, workers: int = 1, log_events: bool = False):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self.log_events = log_events
        self._pool: Optional[Pool] = None

    def _log(self, message: str, level: str = "INFO"):
        if self.log_events:
            log(message, level)

    def __enter__(self) -> 'WorkerPool':
        if self.workers > 1:
            self._pool = Pool(processes=self.workers)
            self._log(f"Started {self.workers} worker processes", "DEBUG")
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def map_chunks(self, fn: Callable, tasks: list) -> list:
        if self._pool is None:
            return [fn(task) for task in tasks]
        return self._pool.map(fn, tasks)
