"""Built-in reference configurations used by ``dnpe verify``."""
from __future__ import annotations

from ..errors import ConfigError

__all__ = ["reference_config", "quick_overrides", "REFERENCE"]

_HEADER = 'scenario = "{scenario}"\nseed = 0\noutput_dir = "verify/{scenario}"\n'

REFERENCE = {
    "evolve": """
[grid]
n = 64
[model]
p = 3.0
q = 2.0
s = 0.5
mu = 1.0
[beta]
m = 1.5
[flux]
kind = "power"
gamma = 1.0
coefficient = 0.5
[source]
kind = "power"
r = 1.0
[scheme]
T = 0.5
N = 200
[initial]
kind = "bump"
amplitude = 1.0
""",
    "extinction": """
[grid]
n = 64
[model]
p = 2.5
q = 1.5
s = 0.5
mu = 1.0
[beta]
m = 1.25
[source]
kind = "power"
r = 0.6
[scheme]
T = 5.0
N = 2000
[initial]
kind = "bump"
amplitude = 0.1
[checks]
k = 1.0
""",
    "blowup": """
[grid]
n = 64
[model]
p = 2.5
q = 2.0
s = 0.5
mu = 0.0
[beta]
m = 2.0
[source]
kind = "power"
r = 2.0
[scheme]
T = 1.0
N = 100
adaptive = true
R = "none"
[initial]
kind = "bump"
amplitude = 2000.0
[checks]
amplitudes = [1.0, 2.0, 4.0]
""",
    "stabilization": """
[grid]
n = 64
[model]
p = 3.0
q = 2.0
s = 0.5
mu = 1.0
[beta]
m = 1.0
[flux]
kind = "power"
gamma = 1.0
coefficient = 1.0
radius = 2.0
[source]
kind = "constant"
profile = "bump"
amplitude = 2.0
[scheme]
T = 400.0
N = 400
[initial]
kind = "constant"
value = 0.0
""",
    "contraction": """
[grid]
n = 64
[model]
p = 3.0
q = 2.0
s = 0.5
mu = 1.0
[beta]
m = 2.0
[source]
kind = "constant"
profile = "bump"
amplitude = 1.0
[scheme]
T = 0.2
N = 100
[initial]
kind = "bump"
amplitude = 1.0
[checks]
pairs = 3
""",
    "comparison": """
[grid]
n = 64
[model]
p = 3.0
q = 2.0
s = 0.5
mu = 1.0
[beta]
m = 1.5
[source]
kind = "constant"
profile = "bump"
amplitude = 1.0
[scheme]
T = 0.2
N = 100
[initial]
kind = "bump"
amplitude = 1.0
""",
    "convergence": """
[grid]
n = 64
[model]
p = 3.0
q = 2.0
s = 0.5
mu = 1.0
[beta]
m = 2.0
[source]
kind = "linear"
coefficient = 1.0
[scheme]
T = 0.5
[initial]
kind = "bump"
amplitude = 1.0
[checks]
levels = [250, 500, 1000]
""",
    "accretivity": """
[grid]
n = 32
[model]
p = 3.0
q = 1.5
s = 0.5
mu = 1.0
[beta]
m = 2.0
[scheme]
T = 1.0
[checks]
trials = 1000
""",
}

# key overrides applied with --quick
QUICK = {
    "evolve": ["grid.n=32", "scheme.N=50"],
    "extinction": ["grid.n=32", "scheme.N=500"],
    "blowup": ["grid.n=32", "checks.amplitudes=[1.0, 2.0]"],
    "stabilization": ["grid.n=32", "scheme.N=100"],
    "contraction": ["grid.n=32", "scheme.N=40", "checks.pairs=1"],
    "comparison": ["grid.n=32", "scheme.N=40"],
    "convergence": ["grid.n=32", "checks.levels=[50, 100, 200]"],
    "accretivity": ["checks.trials=200"],
}


def reference_config(scenario: str) -> str:
    """TOML text of the reference run for ``scenario``."""
    if scenario not in REFERENCE:
        raise ConfigError([f"no reference configuration for scenario {scenario!r}"])
    return _HEADER.format(scenario=scenario) + REFERENCE[scenario]


def quick_overrides(scenario: str) -> list:
    return list(QUICK.get(scenario, []))
