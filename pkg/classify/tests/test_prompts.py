import base64
from pathlib import Path

from django.test import SimpleTestCase

from classify.prompts import SYSTEM_PROMPT, ImagePayload, build_prompt, user_prompt

FIXTURES = Path(__file__).resolve().parent / 'fixtures'


class PromptTests(SimpleTestCase):
    def test_user_prompt_matches_the_golden_file(self):
        self.assertEqual(user_prompt(), (FIXTURES / 'user_prompt.txt').read_text().rstrip('\n'))

    def test_prompt_is_byte_stable(self):
        self.assertEqual(build_prompt().to_payload(), build_prompt().to_payload())

    def test_class_order_and_instructions(self):
        prompt = build_prompt().user_prompt
        self.assertIn('shirt, sock, underwear or trousers', prompt)
        self.assertIn('respond with other', prompt)
        self.assertIn('Your response is a single word', prompt)
        self.assertEqual(build_prompt().system_prompt, SYSTEM_PROMPT)

    def test_payload_shape(self):
        image = ImagePayload('img-001', b'\x89PNG fake')
        payload = build_prompt(model_name='llava:34b').with_images(image).to_payload()
        self.assertEqual(payload['model'], 'llava:34b')
        self.assertIs(payload['stream'], False)
        system, user = payload['messages']
        self.assertEqual(system, {'role': 'system', 'content': SYSTEM_PROMPT})
        self.assertEqual(user['role'], 'user')
        self.assertEqual([base64.b64decode(i) for i in user['images']], [b'\x89PNG fake'])
