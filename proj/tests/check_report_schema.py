"""Runs every subcommand once and validates its report against report.schema.json."""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

cli, schema_path = sys.argv[1], sys.argv[2]
schema = json.loads(Path(schema_path).read_text())

with tempfile.TemporaryDirectory() as tmp:
    t = Path(tmp)
    tiny = ["--code-bits", "8", "--hidden", "16", "--batch", "8", "--epochs", "1"]
    runs = [
        ["synth", "--clusters", "3", "--dim", "8", "--per-cluster", "20", "--out", str(t / "d"), "--split-every", "5"],
        ["train", "--features", str(t / "d.db.cibf"), "--out", str(t / "m.cibm"), *tiny],
        ["train", "--features", str(t / "d.db.cibf"), "--out", str(t / "n.cibm"), "--mode", "naive-cl", *tiny],
        ["encode", "--checkpoint", str(t / "m.cibm"), "--features", str(t / "d.query.cibf"), "--out", str(t / "q.cibc")],
        ["encode", "--checkpoint", str(t / "m.cibm"), "--features", str(t / "d.db.cibf"), "--out", str(t / "db.cibc")],
        ["eval", "--queries", str(t / "q.cibc"), "--db", str(t / "db.cibc"), "--query-labels", str(t / "d.query.cibl"),
         "--db-labels", str(t / "d.db.cibl"), "--metric", "map", "--metric", "precision", "--metric", "pr", "--n", "5"],
        ["sweep", "--features", str(t / "d.cibf"), "--labels", str(t / "d.cibl"), "--param", "tau", "--values", "0.3",
         "1.0", "--seeds", "1", "--n", "5", *tiny],
        ["gradcheck", "--coordinates", "10", "--record-time"],
        ["baseline", "--method", "lsh", "--fit", str(t / "d.db.cibf"), "--bits", "16", "--out", str(t / "l.cibc")],
    ]
    for args in runs:
        proc = subprocess.run([cli, *args], capture_output=True, text=True)
        if proc.returncode != 0:
            sys.exit(f"{args[0]} exited {proc.returncode}: {proc.stderr}")
        jsonschema.validate(json.loads(proc.stdout), schema)
        print(f"{args[0]}: report valid")
