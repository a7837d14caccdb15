import subprocess
import sys

import pytest

ENGINE_ARGS = {
    "frozen": ["frozen", "--gamma", "0.05555", "--n-bath", "18",
               "--dt", "0.01", "--t-max", "8.0", "--stride", "10"],
    "ieom": ["ieom", "--gamma", "0.05555", "--n-bath", "18", "--n-max", "3,2",
             "--dt", "0.01", "--t-max", "2.0", "--stride", "10"],
    "classical": ["classical", "--gamma", "0.05555", "--n-bath", "6",
                  "--samples", "50", "--seed", "1", "--dt", "0.02",
                  "--t-max", "2.0", "--stride", "10"],
    "exact": ["exact", "--gamma", "0.25", "--n-bath", "4", "--trace-mode", "full",
              "--dt", "0.02", "--t-max", "2.0", "--stride", "10"],
}


@pytest.fixture(scope="session")
def engine_csvs(tmp_path_factory):
    """One tiny CSV per engine, produced through the batch CLI."""
    root = tmp_path_factory.mktemp("runs")
    paths = {}
    for name, args in ENGINE_ARGS.items():
        out = root / f"{name}.csv"
        subprocess.run(
            [sys.executable, "-m", "csmbath.cli", *args, "--out", str(out)],
            check=True,
            capture_output=True,
        )
        paths[name] = out
    return paths
