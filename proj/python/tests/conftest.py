import json
import os
import pathlib
import shutil
import subprocess

import pytest

ROOT = pathlib.Path(os.environ.get("LOWLAT_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture
def root():
    return ROOT


@pytest.fixture
def config():
    return lambda name: str(ROOT / "configs" / f"{name}.json")


@pytest.fixture
def schema():
    def load(name):
        with open(ROOT / "schemas" / f"{name}.schema.json") as f:
            return json.load(f)

    return load


@pytest.fixture
def cli():
    exe = os.environ.get("LOWLAT_CLI") or shutil.which("lowlat")
    if not exe:
        pytest.skip("lowlat executable not available")

    def run(*args):
        return subprocess.run([exe, *map(str, args)], capture_output=True, text=True)

    return run


@pytest.fixture
def validate_def(schema):
    import jsonschema

    def check(doc, file, name):
        s = schema(file)
        sub = {"$schema": s["$schema"], "$defs": s["$defs"], **s["$defs"][name]}
        jsonschema.Draft202012Validator(sub).validate(doc)

    return check
