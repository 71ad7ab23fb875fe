"""Tests for the stderr logging setup."""

import logging
import re

from subheat.log import ElapsedFilter, configure


class Collect(logging.Handler):
    def __init__(self):
        super().__init__()
        self.records = []

    def emit(self, record):
        self.records.append(record)


def test_elapsed_prefix_stays_out_of_the_message():
    """Test 1: other handlers see the bare message; the stderr handler formats one prefix."""
    logger = configure(verbosity=1)
    collector = Collect()
    logger.addHandler(collector)
    try:
        logging.getLogger("subheat.example").info("estimate %d", 3)
    finally:
        logger.removeHandler(collector)
    (record,) = collector.records
    assert record.getMessage() == "estimate 3"
    stderr_handler = logger.handlers[0]
    first = stderr_handler.format(record)
    assert re.fullmatch(r"\[\d+ms\] estimate 3", first)
    assert stderr_handler.format(record) == first


def test_verbosity_levels():
    """Test 2: 0 warns, 1 informs, 2 and above debug; reconfiguring replaces the handler."""
    assert configure(0).level == logging.WARNING
    assert configure(1).level == logging.INFO
    logger = configure(5)
    assert logger.level == logging.DEBUG
    assert len(logger.handlers) == 1
    assert any(isinstance(f, ElapsedFilter) for f in logger.handlers[0].filters)
