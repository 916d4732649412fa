"""Example trusted applications shipped with the framework."""

from pathlib import Path

EXAMPLES_DIR = Path(__file__).resolve().parent

CONN_TEST_UUID = "11111111-2222-3333-4444-555555555555"
DIGEST_UUID = "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee"
