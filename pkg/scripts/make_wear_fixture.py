"""Regenerate src/cbm_mdp/data/mill_wear_synthetic.csv.

Sixteen piecewise-linear flank-wear curves, four per operating condition. Each
curve wears at a "new tool" rate until 0.24 mm (24 % of a 1 mm life) and at a
faster "old tool" rate afterwards. Per-condition mean rates are chosen so that
a 10 s epoch with 7 %/10 % level widths yields 0.1..0.4 (new) and 0.2..0.5 (old).
"""

from pathlib import Path

EPOCH_S = 10.0
FULL_WEAR_MM = 1.0
KNEE_MM = 0.24
END_MM = 0.50
CASE_SPREAD = (0.85, 0.95, 1.05, 1.15)

out = Path(__file__).resolve().parents[1] / "src" / "cbm_mdp" / "data" / "mill_wear_synthetic.csv"


def rate_for(prob, width_fraction):
    return prob * width_fraction * FULL_WEAR_MM * 60.0 / EPOCH_S


rows = ["case,time_min,wear_mm,op_condition"]
case = 0
for cond in range(1, 5):
    new_mean = rate_for(cond / 10, 0.07)
    old_mean = rate_for((cond + 1) / 10, 0.10)
    for spread in CASE_SPREAD:
        case += 1
        r_new, r_old = new_mean * spread, old_mean * spread
        t_knee = KNEE_MM / r_new
        t_end = t_knee + (END_MM - KNEE_MM) / r_old
        step = t_knee / 8
        t = 0.0
        while t <= t_end + 1e-12:
            wear = r_new * t if t <= t_knee else KNEE_MM + r_old * (t - t_knee)
            rows.append(f"{case},{t:.6f},{wear:.6f},{cond}")
            t += step
out.write_text("\n".join(rows) + "\n")
print(f"wrote {len(rows) - 1} records to {out}")
