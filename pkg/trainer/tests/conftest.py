import subprocess
import sys
from pathlib import Path

import pytest

TRAINER_ROOT = Path(__file__).resolve().parent.parent
REPO_ROOT = TRAINER_ROOT.parent
sys.path.insert(0, str(TRAINER_ROOT / "scripts"))


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory):
    """A small synthesized dataset (16 normals) shared by the fast tests."""
    root = tmp_path_factory.mktemp("toydata")
    normals = root / "normals"
    textures = root / "textures"
    synth = root / "synth"
    subprocess.run(
        [
            sys.executable,
            str(REPO_ROOT / "scripts" / "make_toy_dataset.py"),
            "--out", str(normals),
            "--count", "16",
            "--size", "64",
            "--seed", "4",
            "--textures-out", str(textures),
        ],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    subprocess.run(
        [
            sys.executable,
            "-m",
            "das3d.cli",
            "synthesize",
            "--input", str(normals),
            "--output", str(synth),
            "--textures", str(textures),
            "--seed", "9",
            "--samples-per-pair", "2",
            "--p-d", "0.25",
        ],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    return {"normals": normals, "textures": textures, "synth": synth}
