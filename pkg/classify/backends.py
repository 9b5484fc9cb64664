'''
Classifier backends. All of them answer `classify(image, request)` with a
RawResponse:

- LiveChatBackend posts one non-streaming chat call to a local model server.
- MockProfileBackend draws the answer from a confusion profile row with a
  stream seeded per request id, so worker scheduling never changes results.
- ReplayBackend returns recorded answers and latencies from a response log.
'''
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import requests

from .exceptions import (
    BackendConfigError, ClassifierTimeout, ProfileError, TransportError,
    UnknownRequestError,
)
from .parsing import RawResponse
from .profiles import DEFAULT_LATENCY, INVALID, OUTCOMES, ConfusionProfile, load_profile

logger = logging.getLogger(__name__)

# What the mock answers when the profile draws an invalid outcome.
INVALID_ANSWER = 'The image shows a piece of fabric'


class BackendKind:
    LIVE = 'live'
    MOCK = 'mock'
    REPLAY = 'replay'
    CHOICES = (LIVE, MOCK, REPLAY)


def request_seed(seed, request_id):
    digest = hashlib.sha256(f'{seed}:{request_id}'.encode()).digest()
    return int.from_bytes(digest[:8], 'big')


class ClassifierBackend:
    kind = None
    # Only backends that send the picture need the image file on disk.
    reads_images = False

    def __init__(self, model_name):
        self.model_name = model_name

    def classify(self, image, request):
        raise NotImplementedError

    def missing_requests(self, request_ids):
        """Request ids this backend cannot answer at all."""
        return []


class LiveChatBackend(ClassifierBackend):
    kind = BackendKind.LIVE
    reads_images = True

    def __init__(self, endpoint, model_name, timeout_s=30.0):
        super().__init__(model_name)
        if timeout_s <= 0:
            raise BackendConfigError('timeout_s must be positive')
        self.url = f"{endpoint.rstrip('/')}/api/chat"
        self.timeout_s = timeout_s

    def classify(self, image, request):
        payload = request.with_images(image).to_payload()
        payload['model'] = self.model_name
        start = time.perf_counter()
        try:
            response = requests.post(self.url, json=payload, timeout=self.timeout_s)
            response.raise_for_status()
            text = response.json()['message']['content']
        except requests.Timeout as exc:
            raise ClassifierTimeout(f'{self.url} gave no answer within {self.timeout_s}s') from exc
        except requests.RequestException as exc:
            raise TransportError(f'{self.url}: {exc}') from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise TransportError(f'{self.url}: malformed chat response ({exc})') from exc
        latency = time.perf_counter() - start
        logger.debug('%s answered %r for %s in %.3fs', self.model_name, text, image.request_id, latency)
        return RawResponse(text=text, latency_s=latency, model_name=self.model_name, request_id=image.request_id)


class MockProfileBackend(ClassifierBackend):
    kind = BackendKind.MOCK

    def __init__(self, profile, seed=0, latency=DEFAULT_LATENCY, model_name='mock'):
        super().__init__(model_name)
        self.profile = profile
        self.seed = seed
        self.latency = latency

    def classify(self, image, request):
        if image.true_class is None:
            raise ProfileError(f'{image.request_id}: the mock needs the true class of the image')
        rng = np.random.default_rng(request_seed(self.seed, image.request_id))
        outcome = OUTCOMES[rng.choice(len(OUTCOMES), p=self.profile.row(image.true_class))]
        text = INVALID_ANSWER if outcome == INVALID else outcome
        return RawResponse(
            text=text,
            latency_s=self.latency.draw(rng),
            model_name=self.model_name,
            request_id=image.request_id,
        )


class ReplayBackend(ClassifierBackend):
    kind = BackendKind.REPLAY

    def __init__(self, responses, model_name):
        super().__init__(model_name)
        self.responses = dict(responses)

    @classmethod
    def from_jsonl(cls, path, model_name=None):
        path = Path(path)
        if not path.exists():
            raise BackendConfigError(f'replay log {path} does not exist')
        responses, models = {}, set()
        for number, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                record_model = record['model']
                key = record['id']
                entry = (record['raw'], float(record['latency_s']))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise BackendConfigError(f'{path}:{number}: {exc}') from None
            if model_name is not None and record_model != model_name:
                continue
            if key in responses:
                raise BackendConfigError(f'{path}:{number}: duplicate response for {key!r}')
            responses[key] = entry
            models.add(record_model)
        if model_name is None and len(models) > 1:
            raise BackendConfigError(f'{path} holds several models, pick one of {sorted(models)}')
        return cls(responses, model_name or (models.pop() if models else 'replay'))

    def missing_requests(self, request_ids):
        return [request_id for request_id in request_ids if request_id not in self.responses]

    def classify(self, image, request):
        try:
            text, latency = self.responses[image.request_id]
        except KeyError:
            raise UnknownRequestError(f'no recorded response for {image.request_id!r}') from None
        return RawResponse(text=text, latency_s=latency, model_name=self.model_name, request_id=image.request_id)


@dataclass(frozen=True)
class BackendDescriptor:
    kind: str
    model_name: str
    timeout_s: float = 30.0
    endpoint: Optional[str] = None
    profile_path: Optional[str] = None
    log_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BackendKind.CHOICES:
            raise BackendConfigError(f'unknown backend kind {self.kind!r}')
        sources = {
            BackendKind.LIVE: self.endpoint,
            BackendKind.MOCK: self.profile_path,
            BackendKind.REPLAY: self.log_path,
        }
        configured = [kind for kind, source in sources.items() if source]
        if self.kind == BackendKind.MOCK and not configured:
            return
        if configured != [self.kind]:
            raise BackendConfigError(f'a {self.kind} backend needs exactly its own source, got {configured}')
        if self.timeout_s <= 0:
            raise BackendConfigError('timeout_s must be positive')


def build_backend(descriptor):
    '''
    Instantiate the backend a descriptor names. A mock without a profile file
    uses the identity profile.
    '''
    if descriptor.kind == BackendKind.LIVE:
        return LiveChatBackend(descriptor.endpoint, descriptor.model_name, descriptor.timeout_s)
    if descriptor.kind == BackendKind.REPLAY:
        return ReplayBackend.from_jsonl(descriptor.log_path, descriptor.model_name)
    if descriptor.profile_path:
        profile, latency = load_profile(descriptor.profile_path)
    else:
        profile, latency = ConfusionProfile.identity(), DEFAULT_LATENCY
    return MockProfileBackend(profile, seed=descriptor.seed, latency=latency, model_name=descriptor.model_name)


def classify_image(backend, image, request):
    return backend.classify(image, request)
