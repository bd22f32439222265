from .analysis import CurvePoint, accuracy_vs_distance, band_width, crossing, effective_delivery_curve
from .features import (
    DEFAULT_K,
    Dataset,
    FeatureWindow,
    Sample,
    extract_window,
    generate_dataset,
    read_dataset_csv,
    stratified_split,
    write_dataset_csv,
)
from .models import (
    KINDS,
    DegenerateDatasetError,
    EvalReport,
    Model,
    Prediction,
    TrainParams,
    evaluate,
    predict,
    report_from_predictions,
    train,
)
