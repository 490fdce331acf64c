"""Run one of the acceptance scenarios through the CLI entry point and print
the headline of each analysis."""
import json
import sys
import tempfile
from pathlib import Path

from coarsegeo.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "tests" / "scenarios"

if __name__ == "__main__":
    name = sys.argv[1] if len(sys.argv) > 1 else "flagship"
    with tempfile.TemporaryDirectory() as out:
        code = main(["run", str(SCENARIOS / f"{name}.json"), "--output-dir", out])
        report = json.loads((Path(out) / "report.json").read_text())
        print(f"exit code {code}; files: {sorted(p.name for p in Path(out).iterdir())}")
    for analysis, res in report["results"].items():
        head = {k: v for k, v in res.items() if isinstance(v, (int, float, str, bool)) or v is None}
        print(analysis, json.dumps(head, sort_keys=True))
