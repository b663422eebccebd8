"""
Regenerate every artefact from the bundled default scenario: run each CLI
command into ./out, then the acceptance suite.
"""
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
SCENARIO = ROOT / "scenarios" / "default.yaml"
OUT = ROOT / "out"

STEPS = [
    ["calibrate"],
    ["calibrate", "--policy", "random-0-pi", "--runs", "20"],
    ["estimate-curves"],
    ["attack-grid"],
    ["sweep", "--mode", "both"],
    ["simulate", "--attack", "fsa", "--pulses", "10000000"],
    ["validate"],
]

if __name__ == "__main__":
    failed = 0
    for i, step in enumerate(STEPS):
        target = OUT / f"{i}_{step[0]}"
        cmd = [sys.executable, "-m", "calhack", *step, "--scenario", str(SCENARIO),
               "--output-dir", str(target)]
        print("$", " ".join(cmd[2:]))
        failed |= subprocess.call(cmd) != 0
    failed |= subprocess.call([sys.executable, "-m", "pytest", "-q",
                               str(ROOT / "tests" / "test_acceptance.py")], cwd=ROOT) != 0
    sys.exit(1 if failed else 0)
