import pytest

from dyadic import Dyadic
from machines import MachineTape
from streams import default_beta, scripted_stream


@pytest.fixture
def d():
    """Shorthand for exact values in assertions: d("3*2^-2")."""
    return Dyadic.parse


@pytest.fixture
def beta_short():
    return default_beta(64)


@pytest.fixture
def u_tape():
    tape = MachineTape("U")
    tape.add(0, "10", "")
    tape.add(1, "0", "1")
    tape.add(2, "110", "1")
    tape.add(3, "11100", "0")
    return tape


@pytest.fixture
def q_tape():
    tape = MachineTape("Q")
    tape.add(0, "0", "")
    tape.add(2, "10", "1")
    return tape


@pytest.fixture
def write_lines(tmp_path):
    """Write JSON-lines text under tmp_path and return the path as a string."""
    def _write(name, lines):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def stepping_alpha():
    return scripted_stream([(0, 0), (3, "1*2^-1"), (7, "3*2^-2")], "nondecreasing", horizon=10)
