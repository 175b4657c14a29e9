"""A small sweep end to end through the command-line tool.

synth -> train -> eval -> report, all in a scratch directory.  Equivalent
shell commands are printed as they run.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="lsci_exp_"))


def lscipad(*args):
    cmd = [sys.executable, "-m", "lscipad", "--output-root", str(work / "runs"), *map(str, args)]
    print("$ lscipad", " ".join(cmd[5:]))
    out = subprocess.run(cmd, capture_output=True, text=True)
    print(out.stdout.rstrip())
    if out.returncode:
        print(out.stderr, file=sys.stderr)
        sys.exit(out.returncode)
    return out.stdout


work.mkdir(parents=True, exist_ok=True)
synth = {"out": str(work / "data"), "subjects": 8, "geometry": [32, 32, 20],
         "counts": {"BonaFide": 24, "DragonSkin": 6, "Transparency": 6, "SiliconeII": 6}}
(work / "synth.json").write_text(json.dumps(synth))
lscipad("synth", "--config", work / "synth.json")

config = {
    "manifest": str(work / "data" / "manifest.json"),
    "archs": ["BaseN", "Lstm"],
    "spatial": [8],
    "temporal": [5, 10],
    "epochs": 4,
    "batch": 16,
    "lr": 1e-3,
    "workers": 2,
}
(work / "sweep.json").write_text(json.dumps(config, indent=2))
run_dir = lscipad("train", "--config", work / "sweep.json").splitlines()[0].strip()

lscipad("eval", run_dir)
lscipad("report", run_dir)
print("\nrun directory:", run_dir)
for p in sorted(Path(run_dir).iterdir()):
    print("  ", p.name)
