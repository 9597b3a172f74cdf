"""Certify input-to-state stability of switched systems and simulate
their sliding-mode trajectories.

The heavy lifting happens in the compiled extension; this package keeps
the import path stable for both installed wheels and in-tree builds.
"""

try:
    from . import _nsiss as _impl
except ImportError:  # in-tree build: extension sits next to the package
    import _nsiss as _impl

builtin_scenario_names = _impl.builtin_scenario_names
builtin_scenario = _impl.builtin_scenario
run_scenario = _impl.run_scenario
run_scenario_json = _impl.run_scenario_json
lie_interval = _impl.lie_interval
clarke_interval = _impl.clarke_interval

__all__ = [
    "builtin_scenario_names",
    "builtin_scenario",
    "run_scenario",
    "run_scenario_json",
    "lie_interval",
    "clarke_interval",
]

__version__ = "1.0.0"
