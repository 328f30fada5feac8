import json
import os
import subprocess
import sys

import polquant

SNIPPET = """
import json
import polquant
from polquant.fedosov_flat import star_product
from polquant.coeff_rings import TrigPoly
f = TrigPoly.mode((1,), (1,), 0.5) + TrigPoly.mode((0,), (-2,))
g = TrigPoly.mode((-1,), (2,)) + TrigPoly.mode((2,), (0,), 1j)
prod = star_product(f, g, order=3)
print(json.dumps({"backend": polquant.BACKEND, "prod": {h: c.to_records() for h, c in prod.items()}}))
"""


def _run(pure):
    env = dict(os.environ)
    env.pop("POLQUANT_PURE", None)
    if pure:
        env["POLQUANT_PURE"] = "1"
    res = subprocess.run([sys.executable, "-c", SNIPPET], capture_output=True, text=True, env=env, check=True)
    return json.loads(res.stdout)


def test_forced_fallback_selected_and_agrees():
    pure = _run(True)
    assert pure["backend"] == "python"
    default = _run(False)
    assert default["backend"] == polquant.BACKEND
    assert pure["prod"].keys() == default["prod"].keys()
    for h in pure["prod"]:
        a = {(tuple(r["qx"]), tuple(r["py"])): complex(r["re"], r["im"]) for r in pure["prod"][h]}
        b = {(tuple(r["qx"]), tuple(r["py"])): complex(r["re"], r["im"]) for r in default["prod"][h]}
        assert a.keys() == b.keys()
        for key in a:
            assert abs(a[key] - b[key]) <= 1e-12 * max(1.0, abs(b[key]))
