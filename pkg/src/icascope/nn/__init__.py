from .network import (
    CATEGORIES,
    NEGATIVE,
    POSITIVE,
    NetworkSpec,
    TrainedModel,
    backward,
    build_architecture,
    feature_shapes,
    forward,
    grad_cam,
    init_model,
    predict,
    predict_proba,
)
