import pytest

from slgflow.config import ExperimentConfig
from slgflow import solver


@pytest.fixture(scope="session")
def disk_grid_16():
    from slgflow.geometry import classify_grid, make_ellipse
    return classify_grid(make_ellipse((1.0, 1.0)), 1.0 / 16.0)


def _domain_spec(spec):
    if isinstance(spec, dict):
        return spec
    return {"kind": "ellipse", "semi_axes": list(spec)}


def quick_config(profile="tau0", spacing=1.0 / 16.0, source=(1.0, 1.0),
                 target=(2.0, 2.0), **kw):
    return ExperimentConfig(
        source=_domain_spec(source), target=_domain_spec(target),
        profile=profile, spacing=spacing, **kw)


@pytest.fixture(scope="session")
def quick_run():
    cache = {}

    def runner(**kw):
        key = tuple(sorted((k, repr(v)) for k, v in kw.items()))
        if key not in cache:
            cache[key] = solver.run_flow(quick_config(**kw))
        return cache[key]

    return runner
