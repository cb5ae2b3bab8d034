"""Rewrite tests/fixtures/golden from the current code. Review the diff before committing."""

import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from pipeline import GOLDEN, GOLDEN_FILES, run_pipeline  # noqa: E402

with tempfile.TemporaryDirectory() as tmp:
    codes = run_pipeline(Path(tmp))
    if any(codes):
        sys.exit(f"pipeline failed: exit codes {codes}")
    shutil.rmtree(GOLDEN, ignore_errors=True)
    for rel in GOLDEN_FILES:
        dst = GOLDEN / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(Path(tmp) / rel, dst)
print(f"wrote {len(GOLDEN_FILES)} files to {GOLDEN}")
