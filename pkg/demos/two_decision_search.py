"""When two decisions share one reward, fit jointly, then search.

Each impression needs an action and a second decision (say, a layout),
and only the pair's combination earns the click.  Three ways to use one
logged exploration day:

  joint_argmax          fit one model over (action, decision) pairs and
                        pick the best pair per context; an upper
                        reference that needs no factored serving stack
  independent_factored  fit two single-head models, each blind to the
                        other head's choice, and argmax separately; this
                        is the modularized status quo
  reinforce_factored    keep the factored serving form (two softmax
                        heads) but tune both against the joint model's
                        predicted reward with a score-function gradient

The search cannot beat the joint argmax (it optimizes the same model
under a factorization constraint) but recovers most of what the
independent fits leave behind.

Run:  python3 demos/two_decision_search.py
"""

import csv
import tempfile
from pathlib import Path

from confoundsim import CategoricalSpec, ScenarioConfig, scenario_two_decision
from confoundsim.scenarios import default_two_decision_search

spec = CategoricalSpec(k1=5, k2=5, n_actions=10, n_decisions=2)
cfg = ScenarioConfig(spec=spec, seed=0)

with tempfile.TemporaryDirectory() as tmp:
    trace_path = Path(tmp) / "trace.csv"
    search = default_two_decision_search(cfg.seed, trace_path=str(trace_path))
    result = scenario_two_decision(cfg, search=search)
    with trace_path.open() as fh:
        rows = list(csv.DictReader(fh))

print("variant               model objective   exact CTR under the truth")
for e in result.entries:
    print(f"{e.variant:<22} {e.model_value:>12.4f}     {e.value:>12.4f}")

print("\nsearch trajectory (exact objective under the joint model):")
sampled = rows[:: max(1, (len(rows) - 1) // 8)]
if sampled[-1] is not rows[-1]:
    sampled.append(rows[-1])
for row in sampled:
    print(f"  iteration {int(row['iteration']):>5}: {float(row['exact_objective']):.4f}")

gain = result.model_value("reinforce_factored") - result.model_value("independent_factored")
ceiling = result.model_value("joint_argmax") - result.model_value("reinforce_factored")
print(f"\nsearch recovered {gain:.4f} over the independent fits,"
      f" stopping {ceiling:.4f} short of the joint argmax.")
