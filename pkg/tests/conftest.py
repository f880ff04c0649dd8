import numpy as np
import pytest

from j6opt import (
    Family,
    GeneratorSpec,
    Perturbations,
    ProblemInstance,
    WMode,
    generate,
    init_perturbations,
    set_validation,
)


@pytest.fixture(autouse=True, scope="session")
def _validation_mode():
    """Every forward pass in the test suite runs with the internal
    zero-sum / bounds checks enabled."""
    set_validation(True)
    yield
    set_validation(False)


@pytest.fixture
def make_instance():
    """Factory for seeded random instances."""

    def _make(
        seed: int = 0,
        V: int = 6,
        d: int = 4,
        T: int = 2,
        w_mode: WMode = WMode.FULL_MATRIX,
        family: Family = Family.GAUSSIAN,
    ) -> ProblemInstance:
        return generate(
            GeneratorSpec(V=V, d=d, T=T, seed=seed, family=family, w_mode=w_mode)
        )

    return _make


@pytest.fixture
def make_point(make_instance):
    """Factory for (instance, nonzero perturbations) evaluation points."""

    def _make(seed: int = 0, w_mode: WMode = WMode.FULL_MATRIX, scale: float = 0.3, **kw):
        instance = make_instance(seed=seed, w_mode=w_mode, **kw)
        pert = init_perturbations(instance, init_scale=scale, seed=seed + 1)
        return instance, pert

    return _make


@pytest.fixture
def derived_instance():
    """The hand-checked single-row example used across modules:
    H=[[1,0]], W=[[1,0],[0,1],[1,1]], y=[0], h=[0.1,0.2], w=[0.3,0]."""
    instance = ProblemInstance(
        V=3,
        d=2,
        T=1,
        H=[[1.0, 0.0]],
        W=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        y=[0],
        w_mode=WMode.SINGLE_ROW,
        v_star=0,
    )
    pert = Perturbations([0.1, 0.2], [0.3, 0.0])
    return instance, pert
