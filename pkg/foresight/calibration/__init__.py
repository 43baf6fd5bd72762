from foresight.calibration.model import (
    SplitSpec,
    SvrModel,
    fit,
    predict,
    predict_many,
    split,
)

__all__ = ["SplitSpec", "SvrModel", "fit", "predict", "predict_many", "split"]
