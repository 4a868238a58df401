from .metrics import (
    MetricReport,
    align_time,
    energy_deviation,
    evaluate,
    mse_curve,
    rollout_mse,
    zero_crossing_frequency,
)
from .tables import (
    collect_reports,
    format_table,
    resolution_label,
    results_table,
    size_table,
)
