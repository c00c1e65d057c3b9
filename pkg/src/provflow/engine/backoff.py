"""Exponential backoff around flaky external interactions.

Transient faults are retried with delays initial * multiplier^k; once
the failure budget is spent the caller gets MaxRetriesExceeded and is
expected to pause the owning process rather than except it. Permanent
faults bypass retry entirely.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

from provflow.exceptions import MaxRetriesExceeded, TransientError

PAUSE_REASON_MAX_RETRIES = "max-retries"


@dataclass(frozen=True)
class BackoffPolicy:
    initial: float = 1.0
    multiplier: float = 2.0
    max_attempts: int = 5

    def delay(self, consecutive_failures: int) -> float:
        """Delay before the retry that follows failure number k+1."""
        return self.initial * self.multiplier**consecutive_failures


def with_backoff(
    operation: Callable,
    policy: BackoffPolicy = BackoffPolicy(),
    sleep: Callable[[float], None] = time.sleep,
    on_retry: Optional[Callable[[int, float, Exception], None]] = None,
):
    """Run ``operation`` until it succeeds or the policy gives up.

    ``on_retry(failures, delay, exc)`` fires before each sleep, which is
    where callers record retry counts. Only TransientError is retried.
    """
    failures = 0
    while True:
        try:
            return operation()
        except TransientError as exc:
            failures += 1
            if failures >= policy.max_attempts:
                raise MaxRetriesExceeded(failures, exc) from exc
            delay = policy.delay(failures - 1)
            if on_retry:
                on_retry(failures, delay, exc)
            sleep(delay)
