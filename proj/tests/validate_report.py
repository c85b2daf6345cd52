"""Runs `qmpe-lab montecarlo` on a small config and validates mc_report.json against the schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main() -> int:
    lab, schema_path = sys.argv[1], Path(sys.argv[2])
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "cfg.json"
        cfg.write_text(json.dumps({
            "schema_version": 1,
            "seed": 11,
            "model": {"d": 4, "gap": 1.0, "beta": 1.0, "gamma": 1.0, "epsilon": 0.05},
            "montecarlo": {"n_samples": 8},
        }))
        out = Path(tmp) / "out"
        subprocess.run([lab, "montecarlo", "--config", str(cfg), "--out", str(out)], check=True,
                       stdout=subprocess.DEVNULL)
        report = json.loads((out / "mc_report.json").read_text())
    jsonschema.validate(report, json.loads(schema_path.read_text()))
    print("mc_report.json matches", schema_path.name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
