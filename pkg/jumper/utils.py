from __future__ import annotations

import hashlib
import logging
import os
import sys
from datetime import datetime

THREADS_ENV = "JUMPER_THREADS"


def generate_stable_id(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha1(data).hexdigest()


def config_logger(is_debug: bool, filename: str | None = None):
    # stdout carries JSON only
    handlers = [logging.StreamHandler(stream=sys.stderr)]

    if filename is not None:
        now = datetime.now().strftime("%y%m%d%H%M%S")
        logfile = f"{filename}_{now}.log"
        handlers.append(logging.FileHandler(logfile, mode="w"))

    if is_debug:
        logging.basicConfig(
            format="%(asctime)s [%(levelname)s] %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
            level=logging.DEBUG,
            handlers=handlers,
            force=True,
        )
    else:
        logging.basicConfig(
            format="%(message)s", level=logging.INFO, handlers=handlers, force=True
        )


def get_num_threads() -> int:
    """Worker count for evaluation, from `JUMPER_THREADS` (a `.env` file is honoured)."""
    from dotenv import load_dotenv

    load_dotenv()
    default = os.cpu_count() or 1
    value = os.getenv(THREADS_ENV)
    if value is None or not value.strip():
        return default
    try:
        num_threads = int(value)
    except ValueError:
        logging.getLogger(__name__).warning(
            f"Ignoring {THREADS_ENV}={value!r}; using {default} threads"
        )
        return default

    return max(1, num_threads)
