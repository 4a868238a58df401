from .experiment import (
    EvalConfig,
    ExperimentConfig,
    GenerationConfig,
    ModelConfig,
    SystemConfig,
    TrainConfig,
    config_from_dict,
    load_config,
)
