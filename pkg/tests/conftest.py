import importlib.util
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent


def load_generator():
    """Import the acceptance-artifact generator script as a module."""
    spec = importlib.util.spec_from_file_location(
        "acceptance_runs", ROOT / "scripts" / "acceptance_runs.py"
    )
    mod = importlib.util.module_from_spec(spec)
    sys.modules["acceptance_runs"] = mod
    spec.loader.exec_module(mod)
    return mod


@pytest.fixture(scope="session")
def artifact():
    """Load a named acceptance run, generating it first when missing.

    The chain runs at the production truncation and the stochastic exact
    reference take hours when regenerated from scratch; the shipped CSVs
    under data/acceptance make the suite fast.
    """
    gen = load_generator()
    from csmbath.series import read_csv

    def get(name):
        path = gen.DATA_DIR / f"{name}.csv"
        if not path.exists():
            print(f"\n[acceptance] {name}.csv missing; generating now "
                  "(this can take minutes to hours)", flush=True)
            gen.generate(name)
        return read_csv(path)

    return get
