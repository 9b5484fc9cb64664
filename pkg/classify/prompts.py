import base64
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from cell.cellsim import GarmentClass

SYSTEM_PROMPT = 'You are an intelligent robotic arm.'

# The order the classes are named in the prompt, not CLASS_ORDER.
PROMPT_CLASSES = (
    GarmentClass.SHIRT,
    GarmentClass.SOCK,
    GarmentClass.UNDERWEAR,
    GarmentClass.TROUSERS,
)


@dataclass(frozen=True)
class ImagePayload:
    request_id: str
    png_bytes: bytes
    true_class: Optional[str] = None

    @classmethod
    def from_path(cls, request_id, path, true_class=None):
        return cls(request_id, Path(path).read_bytes(), true_class)

    def as_base64(self):
        return base64.b64encode(self.png_bytes).decode('ascii')


@dataclass(frozen=True)
class ChatRequest:
    model_name: str
    system_prompt: str
    user_prompt: str
    images: tuple = field(default_factory=tuple)

    def with_images(self, *images):
        return replace(self, images=tuple(images))

    def to_payload(self):
        """JSON body of one non-streaming chat call."""
        return {
            'model': self.model_name,
            'messages': [
                {'role': 'system', 'content': self.system_prompt},
                {
                    'role': 'user',
                    'content': self.user_prompt,
                    'images': [image.as_base64() for image in self.images],
                },
            ],
            'stream': False,
        }


def user_prompt(classes=PROMPT_CLASSES):
    names = [str(c) for c in classes]
    listed = f"{', '.join(names[:-1])} or {names[-1]}" if len(names) > 1 else names[0]
    answers = ', '.join(names + [GarmentClass.OTHER.value])
    return (
        'Do you spot a clothing item on the table? '
        f'If yes: Classify them in the classes: {listed}. '
        'Do you see something else instead? respond with other. '
        'Is the table empty? respond with empty. '
        f'Your response is a single word - either {answers} or empty'
    )


def build_prompt(classes=PROMPT_CLASSES, model_name='gemma3:12b'):
    return ChatRequest(model_name=model_name, system_prompt=SYSTEM_PROMPT, user_prompt=user_prompt(classes))
