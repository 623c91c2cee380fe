"""The same pipeline through the lbbnet command-line tool.

Each step writes a manifest next to its output; `lbbnet replay` re-runs it.
The calls below go through lbbnet.cli.main, which is what the installed
`lbbnet` entry point runs, so the argument lists can be pasted into a shell.
"""

import json
import tempfile
from pathlib import Path

from lbbnet.cli import main

tmp = Path(tempfile.mkdtemp())
net = ["--rff", "256", "--sigma-inv", "100", "--width", "128", "--epochs", "20"]


def run(*args):
    print("$ lbbnet", " ".join(args))
    rc = main(list(args))
    print(f"  exit {rc}")
    return rc


run("generate", "--side", "4", "--n", "3000", "--seed", "1", "--out", str(tmp / "desk.lbbd"))
run("train", "--data", str(tmp / "desk.lbbd"), "--test-fraction", "0.3", *net,
    "--out", str(tmp / "rff.lbbm"))
run("eval", "--model", str(tmp / "rff.lbbm"), "--data", str(tmp / "desk.lbbd"),
    "--test-fraction", "0.3", "--cdf", str(tmp / "cdf.csv"), "--summary", str(tmp / "rff.json"))
run("eval", "--baseline", "direction", "--data", str(tmp / "desk.lbbd"), "--test-fraction", "0.3",
    "--summary", str(tmp / "dir.json"))
run("eval", "--model", str(tmp / "rff.lbbm"), "--grid-pitch", "4", "--heatmap", str(tmp / "map.svg"))

before = (tmp / "rff.lbbm").read_bytes()
run("replay", str(tmp / "rff.lbbm.manifest.json"))
print("replayed model identical:", (tmp / "rff.lbbm").read_bytes() == before)

manifest = json.loads((tmp / "rff.lbbm.manifest.json").read_text())
print("recorded seeds:", manifest["seeds"])

# Exit codes: 2 for bad arguments, 3 for unreadable files, 4 for unusable data.
run("generate", "--n", "0", "--out", str(tmp / "x"))
run("train", "--data", str(tmp / "missing.lbbd"), "--out", str(tmp / "x"))
print("outputs in", tmp)
