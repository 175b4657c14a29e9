from .metrics import (
    MetricsReport,
    PointMetrics,
    ScoreSet,
    aggregate_folds,
    auc,
    bpcer_at_apcer,
    evaluate,
    point_metrics,
    read_roc_csv,
    roc,
    roc_step,
    tpr_at_bpcer,
    write_roc_csv,
)
from .partition import (
    FoldPlan,
    Split,
    Strategy,
    greedy_bins,
    kfold_plan,
    loao_plan,
    plan_violations,
    split_class_counts,
)
from .training import SampleData, TrainConfig, score_samples, select_best_epoch, train
