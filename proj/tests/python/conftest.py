import os
import shutil
import subprocess
from pathlib import Path

import pytest


def _cli():
    path = os.environ.get("LPFNO_CLI") or shutil.which("lpfno")
    if not path:
        candidate = Path(__file__).resolve().parents[2] / "build" / "lpfno"
        path = str(candidate) if candidate.exists() else None
    return path


@pytest.fixture(scope="session")
def cli():
    path = _cli()
    if not path:
        pytest.skip("lpfno executable not found (set LPFNO_CLI)")

    def run(*args, check=True):
        proc = subprocess.run([path, *map(str, args)], capture_output=True, text=True, timeout=600)
        if check and proc.returncode != 0:
            raise AssertionError(f"lpfno {' '.join(map(str, args))} failed:\n{proc.stderr}")
        return proc

    run.path = path
    return run


@pytest.fixture(scope="session")
def tiny_model(cli, tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    cli("plan", "--p", "60:160:3", "--h", "3:7:3", "--v", "0.05:5", "-o", root / "plan.json")
    cli("gen", "--plan", root / "plan.json", "-o", root / "data", "--grid", 24, 12, 9, "--dx", "3.75e-5")
    cli("train", "--data", root / "data", "-o", root / "model", "--steps", 5, "--modes", 4, 4, 3,
        "--width", 6, "--padding", 3, "--validation-interval", 0)
    return root
