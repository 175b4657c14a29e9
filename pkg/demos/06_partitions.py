"""Subject-disjoint 3-fold splits and leave-one-attack-out folds on a planned manifest.

No captures are rendered; plan_synth_manifest only assigns subjects and fingers.
"""

import warnings
from collections import Counter

from lscipad.data import Manifest, default_counts, plan_synth_manifest
from lscipad.evaluation import kfold_plan, loao_plan, plan_violations, split_class_counts

m = Manifest.from_metas(plan_synth_manifest(default_counts(400), subjects=60, seed=0))
print("classes:", dict(m.class_counts()))

plan = kfold_plan(m, seed=0)
for i, fold in enumerate(plan.folds):
    subj = {part: len({m.meta(s).subject_id for s in ids})
            for part, ids in (("train", fold.train), ("val", fold.val), ("test", fold.test))}
    print(f"fold {i}: subjects {subj}  test classes {dict(Counter(m.meta(s).class_name for s in fold.test))}")
print("violations:", plan_violations(plan, m))

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    loao = loao_plan(m, seed=0)
for fold in loao.folds:
    c = split_class_counts(fold, m)
    print(f"held out {fold.held_out_species.value:20s} test {dict(c['test'])}")
print("violations:", plan_violations(loao, m))
