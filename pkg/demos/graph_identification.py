"""Reading off, from the graph alone, when naive estimates can be trusted.

The logging process is a five-node DAG: x1 drives x2, both drive
clicks, and the policy picks actions from some subset of the
covariates.  Whether P(click | covariates, action) from the log equals
the interventional quantity is a purely graphical question, so the
answer changes the moment the policy starts reading x2: the arrow
x2 -> a opens a backdoor path that conditioning on x1 alone no longer
blocks.  The same verdicts are available from the command line via
``confoundsim dag-check``.

Run:  python3 demos/graph_identification.py
"""

from confoundsim import (
    backdoor_admissible, backdoor_paths, base_click_dag, d_separated, format_path,
)

for x2_aware in (False, True):
    g = base_click_dag(x2_to_action=x2_aware)
    policy = "x2-aware" if x2_aware else "x1-only"
    print(f"logging policy {policy}: edges {sorted(g.edges)}")
    print(f"  x2 independent of action given x1?  "
          f"{d_separated(g, {'x2'}, {'a'}, {'x1'})}")
    for zs in ({"x1"}, {"x1", "x2"}):
        ok = backdoor_admissible(g, "a", "c", zs)
        label = "{" + ", ".join(sorted(zs)) + "}"
        print(f"  adjusting on {label} licensed?{'':<{10 - len(label)}}{ok}")
    print("  backdoor paths from action to click:")
    for path in backdoor_paths(g, "a", "c"):
        print(f"    {format_path(g, path)}")
    print()

print("once x2 influenced the logged actions, x1 alone stops being an")
print("admissible adjustment set; {x1, x2} closes every backdoor path.")
