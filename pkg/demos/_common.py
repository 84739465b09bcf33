"""Shared loader for the demo scripts: run a shipped scenario by name."""

import json
import os

from qnetsec import engine as eng
from qnetsec import scenario as scn

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")


def load_doc(name: str) -> dict:
    with open(os.path.join(SCENARIO_DIR, name + ".json")) as fh:
        return json.load(fh)


def run_doc(doc: dict) -> eng.Engine:
    return eng.Engine(scn.load_scenario(doc)).run()


def run(name: str) -> eng.Engine:
    return run_doc(load_doc(name))
