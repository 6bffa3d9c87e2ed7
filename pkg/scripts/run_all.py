"""Run every suite with the acceptance-suite seed ranges and print one line per report."""

import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    codes = []
    for script in sorted(HERE.glob("run_*.py")):
        if script.name == "run_all.py":
            continue
        print(f"== {script.stem}", flush=True)
        codes.append(subprocess.call([sys.executable, str(script), *sys.argv[1:]]))
    sys.exit(max(codes))
