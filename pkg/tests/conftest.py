"""Fixtures shared across the suite."""

from __future__ import annotations

import pytest
from helpers import alignment_task, realism_task

from gestureval.domain import ComparisonTask


@pytest.fixture
def pair_task() -> ComparisonTask:
    return realism_task()


@pytest.fixture
def matched_left_task() -> ComparisonTask:
    return alignment_task()
