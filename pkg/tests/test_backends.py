import importlib.util
import os
import subprocess
import sys
from pathlib import Path

import pytest

import idp

ROOT = Path(__file__).resolve().parents[1]


def _backend_name(env_value):
    env = dict(os.environ, IDP_BACKEND=env_value)
    out = subprocess.run([sys.executable, "-c", "import idp; print(idp.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    return out.stdout.strip()


def test_environment_forces_fallback():
    assert _backend_name("python") == "python"


def test_default_prefers_compiled_core():
    expected = "cython" if importlib.util.find_spec("idp._core") else "python"
    assert _backend_name("") == expected


@pytest.mark.skipif(idp.BACKEND != "cython", reason="compiled core not built")
def test_benchmark_runs(capsys):
    spec = importlib.util.spec_from_file_location("bench", ROOT / "benchmarks" /
                                                  "bench_backends.py")
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    bench.main(["--repeat", "1", "--pairs", "20"])
    out = capsys.readouterr().out
    assert "identical paths: True" in out
    assert "pgf_coefficients" in out and "simulate_chunk" in out
