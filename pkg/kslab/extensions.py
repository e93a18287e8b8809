# kslab/extensions.py
import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor

logger = logging.getLogger("kslab")


def worker_pool(threads: int) -> Executor:
    """Executor for independent sweep runs; one worker stays in-process."""
    if threads <= 1:
        return ThreadPoolExecutor(max_workers=1)
    return ProcessPoolExecutor(max_workers=threads)
