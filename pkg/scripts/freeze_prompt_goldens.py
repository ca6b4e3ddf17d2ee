#!/usr/bin/env python3
"""Regenerate the frozen golden prompt files under tests/golden/prompts/.

Run only when a deliberate wording change is being made; the acceptance suite
compares renders byte-for-byte against these files.
"""

from __future__ import annotations

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "tests"))

from golden_inputs import golden_render_cases  # noqa: E402

from kginject.prompt import format_rendered, render  # noqa: E402

OUT_DIR = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden" / "prompts"


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, spec, record in golden_render_cases():
        path = OUT_DIR / f"{name}.txt"
        path.write_text(format_rendered(render(spec, record)), encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
