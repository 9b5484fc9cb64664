'''
Request/response envelope between the control loop and the cell's services
(grasp prediction, segmentation, classification).

With the logical clock a handler reports how long it took by returning a
ServiceReply; the call times out when that exceeds the envelope's timeout.
With the wall clock the handler runs on a worker thread and the caller waits
at most the timeout for it.
'''
import itertools
import logging
import threading
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from dataclasses import dataclass
from typing import Any

from .exceptions import ConfigError, DuplicateCorrelationError, UnknownServiceError

logger = logging.getLogger(__name__)

LOGICAL = 'logical'
WALL = 'wall'


@dataclass(frozen=True)
class ServiceEnvelope:
    service_name: str
    payload: Any
    timeout_s: float
    correlation_id: str

    def __post_init__(self):
        if not self.timeout_s > 0:
            raise ConfigError(f'{self.service_name}: timeout must be positive')


@dataclass(frozen=True)
class ServiceReply:
    payload: Any
    elapsed_s: float = 0.0


@dataclass(frozen=True)
class ServiceResult:
    correlation_id: str
    payload: Any
    elapsed_s: float
    timed_out: bool = False


class ServiceBus:
    def __init__(self, clock=LOGICAL, max_workers=4):
        if clock not in (LOGICAL, WALL):
            raise ConfigError(f'unknown clock {clock!r}')
        self.clock = clock
        self._handlers = {}
        self._seen = set()
        self._counters = defaultdict(itertools.count)
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=max_workers) if clock == WALL else None

    def register(self, service_name, handler):
        self._handlers[service_name] = handler

    def envelope(self, service_name, payload, timeout_s):
        with self._lock:
            number = next(self._counters[service_name]) + 1
        return ServiceEnvelope(service_name, payload, timeout_s, f'{service_name}-{number:06d}')

    def call_service(self, envelope):
        try:
            handler = self._handlers[envelope.service_name]
        except KeyError:
            raise UnknownServiceError(f'no handler registered for {envelope.service_name!r}') from None
        with self._lock:
            if envelope.correlation_id in self._seen:
                raise DuplicateCorrelationError(f'{envelope.correlation_id} was already delivered')
            self._seen.add(envelope.correlation_id)

        if self.clock == LOGICAL:
            reply = handler(envelope.payload)
            if not isinstance(reply, ServiceReply):
                reply = ServiceReply(reply)
            timed_out = reply.elapsed_s > envelope.timeout_s
            payload, elapsed = reply.payload, reply.elapsed_s
        else:
            start = time.perf_counter()
            future = self._executor.submit(handler, envelope.payload)
            try:
                reply = future.result(timeout=envelope.timeout_s)
                payload = reply.payload if isinstance(reply, ServiceReply) else reply
                timed_out = False
            except FutureTimeout:
                future.cancel()
                payload, timed_out = None, True
            elapsed = time.perf_counter() - start

        if timed_out:
            logger.warning('%s timed out after %.3fs (limit %.3fs)', envelope.correlation_id, elapsed, envelope.timeout_s)
            payload = None
        return ServiceResult(envelope.correlation_id, payload, elapsed, timed_out)

    def call(self, service_name, payload, timeout_s):
        return self.call_service(self.envelope(service_name, payload, timeout_s))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=False, cancel_futures=True)
