"""Certify the shell in a config, then evolve it and write the run outputs.

    python3 scripts/certified_shell.py [configs/shell.cfg] [out/shell]
"""
import sys

from misblowup.cli import main

cfg = sys.argv[1] if len(sys.argv) > 1 else "configs/shell.cfg"
out = sys.argv[2] if len(sys.argv) > 2 else "out/shell"
code = main(["certify", "--config", cfg, "--out", out])
if code == 0:
    code = main(["simulate", "--config", cfg, "--out", out])
sys.exit(code)
