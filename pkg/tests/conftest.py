import numpy as np
import pytest

from bilift.closure import AUGMENT, ClosureConfig, closure_run
from bilift.expr import VectorField
from bilift.parser import parse_expr
from bilift.realization import extract_realization
from bilift.systems import NonlinearSystem


def make_system(n, drift, controls, name=""):
    f = VectorField(tuple(parse_expr(s, n) for s in drift))
    g = tuple(VectorField(tuple(parse_expr(s, n) for s in gi)) for gi in controls)
    return NonlinearSystem(n, f, g, name)


def exprs(n, *texts):
    return [parse_expr(t, n) for t in texts]


@pytest.fixture(scope="session")
def unicycle():
    return make_system(
        3, ["0", "0", "0"], [["cos(x3)", "sin(x3)", "0"], ["0", "0", "1"]], "unicycle"
    )


@pytest.fixture(scope="session")
def unicycle_real(unicycle):
    outcome = closure_run(unicycle, ClosureConfig(constant_mode=AUGMENT))
    return extract_realization(unicycle, outcome)


@pytest.fixture(scope="session")
def example5():
    return make_system(2, ["x1", "x2 - x1^2"], [["1", "0"], ["0", "1"]], "example5")


@pytest.fixture(scope="session")
def example5_real(example5):
    outcome = closure_run(
        example5, ClosureConfig(gamma0=exprs(2, "x1", "x2", "x1^2"))
    )
    return extract_realization(example5, outcome)


def sim1_system(lam1, lam2, lam3):
    c = f"(2*({lam1}) - ({lam2}))*({lam3})"
    return make_system(
        2, [f"({lam1})*x1", f"({lam2})*x2 + {c}*x1^2"], [], "sim1"
    )


@pytest.fixture(scope="session")
def table_a():
    return make_system(
        2,
        ["3/10*x1", "1/5*x2 - 1/5*x1^2"],
        [["1", "x1^2"], ["0", "1"]],
        "tableI_a",
    )


@pytest.fixture(scope="session")
def table_a_real(table_a):
    outcome = closure_run(table_a, ClosureConfig(gamma0=exprs(2, "x1", "x2", "x1^2")))
    return extract_realization(table_a, outcome)


@pytest.fixture(scope="session")
def table_b():
    return make_system(
        3,
        ["x2^3", "x3", "0"],
        [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        "tableI_b",
    )


@pytest.fixture(scope="session")
def table_b_real(table_b):
    return extract_realization(table_b, closure_run(table_b))


@pytest.fixture(scope="session")
def table_c():
    return make_system(
        4,
        [
            "-1/10*x1",
            "-2/5*x2 + 1/5*cos(x4)",
            "-1/5*x3 - 1/2*exp(x4)",
            "0",
        ],
        [
            ["x1", "0", "0", "0"],
            ["0", "x3", "0", "0"],
            ["0", "0", "x2", "0"],
            ["0", "0", "0", "1"],
        ],
        "tableI_c",
    )


@pytest.fixture(scope="session")
def table_c_real(table_c):
    return extract_realization(table_c, closure_run(table_c))


@pytest.fixture(scope="session")
def scalar_xsq():
    return make_system(1, ["0"], [["-x1^2"]], "scalar_xsq")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
