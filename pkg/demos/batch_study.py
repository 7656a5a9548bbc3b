"""Random-network study: MB vs MF across connectivity levels.

Runs a small batch (the full study uses 1000 trials via ``fjrec batch``) and
prints median cost improvement and opinion shift per connectivity level.
"""

from fjrec.harness import run_batch

res = run_batch(40, master_seed=1)
print(f"{'links':>6} {'feasible':>9} {'median gain %':>14} {'median shift MB %':>18}")
for pct, s in res.summary.items():
    print(f"{pct + '%':>6} {s['feasible']:>5}/{s['trials']:<3} "
          f"{s['improvement_pct']['median']:>14.3f} {s['shift_mb_pct']['median']:>18.3f}")
