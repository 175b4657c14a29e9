"""Error rates for a handful of scores, computed two ways."""

from lscipad.evaluation import ScoreSet, auc, bpcer_at_apcer, evaluate, point_metrics, roc

labels = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
scores = [0.9, 0.8, 0.7, 0.1, 0.6, 0.4, 0.3, 0.2, 0.15, 0.05]
ss = ScoreSet.from_arrays(labels, scores)

pm = point_metrics(ss)
print(f"threshold 0.5: FN={pm.FN}/{pm.P} FP={pm.FP}/{pm.N}")
print(f"APCER {pm.apcer:.3f}  BPCER {pm.bpcer:.3f}  ACER {pm.acer:.3f}")

pts = roc(ss)
print("ROC (threshold, APCER, BPCER):")
for thr, a, b in pts:
    print(f"   {thr:>6}  {a:.2f}  {b:.2f}")
print("BPCER at APCER <= 5%:", round(bpcer_at_apcer(pts), 4))
print("AUC:", auc(ss))

# by hand: count attack/bona fide pairs ordered correctly, ties count half
att = [s for l, s in zip(labels, scores) if l]
bon = [s for l, s in zip(labels, scores) if not l]
wins = sum((a > b) + 0.5 * (a == b) for a in att for b in bon)
print("AUC by pair counting:", wins / (len(att) * len(bon)))

print(evaluate(ss).to_json()["acer"])
