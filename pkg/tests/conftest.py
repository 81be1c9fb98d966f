import pytest
from hypothesis import strategies as st

from filmcrit.model import FilmParams
from filmcrit.synth import ApparatusParams

# 300 nm Al test film; H_T(0) from the bulk aluminium value
AL300 = FilmParams(t_c=1.2932, h_t0=105.0, lambda0=104.3, xi0=60.0, thickness=300.0)
# 5 nm Zn film inside the Zn/Au cavity; xi0 long so the nucleation term is negligible
ZN5 = FilmParams(t_c=0.85, h_t0=53.0, lambda0=75.0, xi0=1000.0, thickness=5.0)


@pytest.fixture
def al300():
    return AL300


@pytest.fixture
def zn5():
    return ZN5


@pytest.fixture
def apparatus():
    return ApparatusParams()


@st.composite
def thin_films(draw):
    """Random FilmParams satisfying D < sqrt(5) * lambda0 (valid at every t)."""
    lambda0 = draw(st.floats(20.0, 300.0))
    thickness = draw(st.floats(1.0, 2.2 * lambda0))
    return FilmParams(
        t_c=draw(st.floats(0.3, 10.0)),
        h_t0=draw(st.floats(5.0, 2000.0)),
        lambda0=lambda0,
        xi0=draw(st.floats(10.0, 2000.0)),
        thickness=thickness,
    )


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
