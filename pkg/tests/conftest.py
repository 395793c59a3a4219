import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1e-6, np.abs(a) + np.abs(b))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_synthetic_law(path, n=3000, seed=0, index_column=False, drop_every=0):
    """A CSV in the Law School release layout with a known additive-noise structure."""
    rng = np.random.default_rng(seed)
    race = rng.uniform(size=n) < 0.3
    ugpa = 3.2 - 0.4 * race + 0.3 * rng.normal(size=n)
    lsat = 37.0 - 6.0 * race + 4.0 * rng.normal(size=n)
    score = 1.5 * (ugpa - 3.0) + 0.2 * (lsat - 35.0) + rng.logistic(size=n)
    lines = [("," if index_column else "") + "race,sex,LSAT,UGPA,region_first,ZFYA,sander_index,first_pf"]
    for i in range(n):
        r = "Black" if race[i] else "White"
        gpa = "" if drop_every and i % drop_every == 0 else f"{ugpa[i]:.4f}"
        row = f"{r},{1 + i % 2},{lsat[i]:.2f},{gpa},GL,{rng.normal():.3f},{rng.uniform():.3f},{int(score[i] > 0)}"
        lines.append((f"{i}," if index_column else "") + row)
    path.write_text("\n".join(lines) + "\n")
    return path
