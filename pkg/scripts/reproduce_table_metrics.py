"""Recompute derived protocol quantities from printed reward tables.

Only formula-level reproduction is possible here: the underlying policies
and simulator are not part of this package. The script prints each derived
value next to the printed one.

    python3 scripts/reproduce_table_metrics.py
"""

from __future__ import annotations

from latentdiag.protocol import SweepCurve, crossover, degradation, sensitivity, severe_mean, worst_case

# push-magnitude sweep (randomized task), levels 0..5
PUSH = {
    "DynaMITE": [-4.37, -4.44, -4.50, -4.56, -4.63, -4.78],
    "LSTM": [-3.58, -4.05, -4.23, -4.45, -4.70, -5.09],
}
PRINTED_SENS = {"DynaMITE": 0.41, "LSTM": 1.52}

# combined-shift table: ID reward and severe-level reward, printed degradation in %
COMBINED = {
    "DynaMITE": (-4.48, -4.58, 2.3),
    "LSTM": (-4.18, -4.88, 16.7),
}
# combined-shift levels as printed; L3 has no column in the table
COMBINED_LEVELS = [0, 1, 2, 4]
COMBINED_CURVES = {
    "DynaMITE": [-4.38, -4.47, -4.50, -4.63],
    "LSTM": [-3.56, -4.23, -4.40, -5.12],
}


def main() -> None:
    print("push sweep")
    curves = {m: SweepCurve.from_rewards(m, r) for m, r in PUSH.items()}
    for m, c in curves.items():
        print(f"  {m:9s} S={sensitivity(c):.4f} (printed {PRINTED_SENS[m]:.2f})  "
              f"severe={severe_mean(c):.3f}  worst={worst_case(c):.2f}")
    print(f"  crossover level (DynaMITE >= LSTM): {crossover(curves['DynaMITE'], curves['LSTM'])}")

    print("combined shift")
    for m, (id_r, sev, printed) in COMBINED.items():
        d = degradation(id_r, sev)
        print(f"  {m:9s} abs={d.abs:.3f} pct={d.pct:.3f}% (printed {printed}%)")
    cc = {m: SweepCurve.from_rewards(m, r, indices=COMBINED_LEVELS)
          for m, r in COMBINED_CURVES.items()}
    print(f"  crossover level on printed columns: {crossover(cc['DynaMITE'], cc['LSTM'])}")


if __name__ == "__main__":
    main()
