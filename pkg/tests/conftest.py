import os
import sys

import pytest

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(REPO, "tests", "data")
NEGATIVE = os.path.join(DATA, "negative")
CORPUS = os.path.join(REPO, "corpus")


@pytest.fixture
def run_cli(tmp_path, capsys):
    """Run the CLI in-process; returns (exit_code, stdout, stderr)."""
    from stt.cli import main

    def _run(*argv: str, cache_dir=None):
        args = list(argv)
        if cache_dir is None:
            args += ["--no-cache"]
        else:
            args += ["--cache-dir", str(cache_dir)]
        code = main(args)
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return _run
