"""Run and pretraining configuration."""

from dataclasses import dataclass, field

from ..errors import ParameterError
from ..mining import SelectionPolicy


@dataclass(frozen=True)
class RunConfig:
    """Knobs of one online mission run."""

    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    retrain_period: int = 10
    steps_per_retrain: int = 30
    learning_rate: float = 1e-3   # 0 is allowed: the null-update control
    seed: int = 0
    operator: str = "oracle"      # "oracle" | "interactive"
    eval_iou: float = 0.5
    score_threshold: float = 0.5
    nms_iou: float = 0.5
    stride: int = 32
    epsilon: float = 0.1
    pos_cap: int = 6
    neg_per_frame: int = 6
    rolling_window: int = 20
    refresh_selected_losses: bool = True

    def __post_init__(self):
        if self.retrain_period < 1:
            raise ParameterError("retrain_period must be >= 1")
        if self.steps_per_retrain < 0:
            raise ParameterError("steps_per_retrain must be >= 0")
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be >= 0")
        if self.operator not in ("oracle", "interactive"):
            raise ParameterError(f"unknown operator {self.operator!r}")
        if not 0 < self.eval_iou < 1:
            raise ParameterError("eval_iou must lie in (0, 1)")
        if self.stride < 1:
            raise ParameterError("stride must be >= 1")
        if self.epsilon < 0:
            raise ParameterError("epsilon must be >= 0")

    def to_json(self) -> dict:
        return {
            "policy": {
                "pretrain_method": self.policy.pretrain_method,
                "mission_method": self.policy.mission_method,
                "pretrain_count": self.policy.pretrain_count,
                "mission_count": self.policy.mission_count,
                "two_stage": self.policy.two_stage,
                "pool_factor": self.policy.pool_factor,
            },
            "retrain_period": self.retrain_period,
            "steps_per_retrain": self.steps_per_retrain,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "operator": self.operator,
            "eval_iou": self.eval_iou,
            "score_threshold": self.score_threshold,
            "nms_iou": self.nms_iou,
            "stride": self.stride,
            "epsilon": self.epsilon,
            "pos_cap": self.pos_cap,
            "neg_per_frame": self.neg_per_frame,
            "rolling_window": self.rolling_window,
            "refresh_selected_losses": self.refresh_selected_losses,
        }

    @classmethod
    def from_json(cls, obj) -> "RunConfig":
        policy = SelectionPolicy(**obj.get("policy", {}))
        fields = {k: v for k, v in obj.items() if k != "policy"}
        return cls(policy=policy, **fields)


@dataclass(frozen=True)
class PretrainConfig:
    """Offline pretraining budget; defaults target a desk-scale CPU run."""

    ae_snippets_per_frame: int = 6
    ae_corpus_cap: int = 6000
    ae_epochs: int = 12
    ae_learning_rate: float = 1e-3
    ae_batch_size: int = 32
    fit_sample_cap: int = 4000
    det_epochs: int = 60
    det_batch_size: int = 128
    det_learning_rate: float = 5e-2
    det_pos_cap: int = 8
    det_neg_per_frame: int = 4
    stride: int = 32
    feature_seed: int = 0

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}
