"""Deterministic discrete-event simulator for attacks on entanglement-swapping
repeater networks.

Subpackages are thin and flat:

- `states`   : Werner / density-matrix pair algebra, measurement, channels
- `topology` : graph model, routing, partition and load analysis
- `scenario` : JSON scenario schema, validation, normalization, fingerprints
- `engine`   : event loop, link generation, swapping, purification, QKD
- `attacks`  : attack scripts, capability model, runtime hooks
- `monitor`  : certification statistics, detection verdicts, reputation, CIA ledger
- `report`   : run reports, event logs, aggregation and diffing
- `cli`      : `qnetsec` command line front end
"""
from . import attacks, engine, errors, monitor, report, scenario, states, topology

__all__ = ["attacks", "engine", "errors", "monitor", "report", "scenario",
           "states", "topology"]
__version__ = "0.1.0"
