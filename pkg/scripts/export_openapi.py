#!/usr/bin/env python3
"""Regenerate docs/openapi.json from the live FastAPI application.

Run after changing any endpoint: python scripts/export_openapi.py
"""

import json
import sys
import tempfile
from pathlib import Path

from psm_workbench.service import create_app


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(Path(tmp))
        doc = app.openapi()
        app.state.engine.shutdown()
    out = root / "docs" / "openapi.json"
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(doc.get('paths', {}))} paths)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
